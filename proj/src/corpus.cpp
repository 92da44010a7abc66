#include "pmcqa/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "pmcqa/errors.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

namespace {

// Line iteration tolerating a missing trailing newline; blank lines are
// skipped by loaders that allow them.
std::vector<std::string> read_lines(const std::string& path) {
  std::string content = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t pos = content.find('\n', start);
    if (pos == std::string::npos) {
      lines.emplace_back(content.substr(start));
      break;
    }
    lines.emplace_back(content.substr(start, pos - start));
    start = pos + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string line_ref(const std::string& path, std::size_t lineno) {
  return path + ":" + std::to_string(lineno);
}

}  // namespace

const Vec* WordEmbeddingTable::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

void WordEmbeddingTable::put(const std::string& token, Vec v) {
  if (dim_ == 0) dim_ = v.size();
  if (v.size() != dim_)
    throw ArgumentError("word vector for '" + token + "' has dimension " +
                        std::to_string(v.size()) + ", table holds " + std::to_string(dim_));
  auto it = index_.find(token);
  if (it != index_.end()) {
    vectors_[it->second] = std::move(v);
    return;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  vectors_.push_back(std::move(v));
}

std::span<const double> FeatureStore::get(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LinkError("no feature vector for image id '" + id + "'");
  return vectors_[it->second];
}

void FeatureStore::put(const std::string& id, Vec v) {
  if (v.size() != dim_)
    throw ArgumentError("feature vector for '" + id + "' has dimension " +
                        std::to_string(v.size()) + ", store holds " + std::to_string(dim_));
  if (index_.count(id)) throw ArgumentError("duplicate image id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  vectors_.push_back(std::move(v));
}

std::optional<std::size_t> AnswerVocabulary::find(const std::string& a) const {
  auto it = index.find(a);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::string SimilarityTable::key(const std::string& a, const std::string& b) {
  // Tab never appears inside a normalized answer, so this key is unambiguous.
  return a <= b ? a + "\t" + b : b + "\t" + a;
}

double SimilarityTable::value(const std::string& a, const std::string& b) const {
  if (a == b) return 1.0;
  auto it = scores_.find(key(a, b));
  return it == scores_.end() ? 0.0 : it->second;
}

void SimilarityTable::put(const std::string& a, const std::string& b, double score) {
  if (a == b) return;  // self-similarity is pinned at 1
  scores_[key(a, b)] = score;
}

WordEmbeddingTable load_word_embeddings(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  WordEmbeddingTable table;
  std::size_t lineno = 0;
  for (const std::string& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_whitespace(line);
    if (fields.size() < 2)
      throw FormatError("word vector line needs a token and at least one value at " +
                        line_ref(path, lineno));
    Vec v;
    v.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      v.push_back(parse_double(fields[i], line_ref(path, lineno)));
    if (table.dim() != 0 && v.size() != table.dim())
      throw FormatError("word vector dimension " + std::to_string(v.size()) +
                        " does not match table dimension " + std::to_string(table.dim()) +
                        " at " + line_ref(path, lineno));
    table.put(to_lower(fields[0]), std::move(v));
  }
  if (table.size() == 0) throw FormatError("word vector file '" + path + "' holds no entries");
  return table;
}

FeatureStore load_features(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw FormatError("feature file '" + path + "' is empty");
  std::vector<std::string> header = split_whitespace(lines[0]);
  if (header.size() != 2 || header[0] != "dim")
    throw FormatError("feature file must start with 'dim D' at " + line_ref(path, 1));
  long long dim = parse_int(header[1], line_ref(path, 1));
  if (dim <= 0) throw FormatError("feature dimension must be positive at " + line_ref(path, 1));
  FeatureStore store(static_cast<std::size_t>(dim));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::size_t lineno = i + 1;
    if (lines[i].empty()) continue;
    std::vector<std::string> fields = split_whitespace(lines[i]);
    if (fields.size() != static_cast<std::size_t>(dim) + 1)
      throw FormatError("feature line has " + std::to_string(fields.size() - 1) +
                        " values, expected " + std::to_string(dim) + " at " +
                        line_ref(path, lineno));
    Vec v;
    v.reserve(static_cast<std::size_t>(dim));
    for (std::size_t j = 1; j < fields.size(); ++j)
      v.push_back(parse_double(fields[j], line_ref(path, lineno)));
    if (store.contains(fields[0]))
      throw FormatError("duplicate image id '" + fields[0] + "' at " + line_ref(path, lineno));
    store.put(fields[0], std::move(v));
  }
  return store;
}

namespace {

std::vector<std::string> parse_answer_field(const std::string& field, bool allow_empty,
                                            bool multiset, const std::string& where) {
  std::vector<std::string> out;
  if (field.empty()) {
    if (allow_empty) return out;
    throw FormatError("empty answer field at " + where);
  }
  std::set<std::string> seen;
  for (const std::string& part : split_char(field, '|')) {
    std::string norm = normalize_answer(part);
    if (norm.empty()) throw FormatError("empty answer inside '" + field + "' at " + where);
    if (multiset) {
      out.push_back(std::move(norm));
    } else if (seen.insert(norm).second) {
      out.push_back(std::move(norm));
    }
  }
  return out;
}

}  // namespace

Dataset load_triplets(const std::string& path, const std::string& name, Split split) {
  std::vector<std::string> lines = read_lines(path);
  Dataset ds;
  ds.name = name.empty() ? std::filesystem::path(path).stem().string() : name;
  ds.split = split;
  std::size_t lineno = 0;
  for (const std::string& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_char(line, '\t');
    if (fields.size() != 4)
      throw FormatError("triplet line has " + std::to_string(fields.size()) +
                        " fields, expected 4 at " + line_ref(path, lineno));
    Triplet t;
    t.image_id = fields[0];
    if (t.image_id.empty()) throw FormatError("empty image id at " + line_ref(path, lineno));
    t.question_tokens = normalize_tokens(fields[1]);
    if (t.question_tokens.empty())
      throw FormatError("empty question at " + line_ref(path, lineno));
    t.correct = parse_answer_field(fields[2], false, true, line_ref(path, lineno));
    t.incorrect = parse_answer_field(fields[3], true, false, line_ref(path, lineno));
    for (const std::string& d : t.incorrect)
      if (std::find(t.correct.begin(), t.correct.end(), d) != t.correct.end())
        throw FormatError("answer '" + d + "' listed as both correct and incorrect at " +
                          line_ref(path, lineno));
    ds.triplets.push_back(std::move(t));
  }
  return ds;
}

std::pair<Dataset, FeatureStore> load_dataset(const std::string& triplet_path,
                                              const std::string& feature_path,
                                              const std::string& name, Split split) {
  FeatureStore features = load_features(feature_path);
  Dataset ds = load_triplets(triplet_path, name, split);
  std::vector<std::string> missing;
  std::set<std::string> reported;
  for (const Triplet& t : ds.triplets)
    if (!features.contains(t.image_id) && reported.insert(t.image_id).second)
      missing.push_back(t.image_id);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i)
      list += (i ? ", " : "") + missing[i];
    if (missing.size() > 8) list += ", ...";
    throw LinkError("triplet file '" + triplet_path + "' references " +
                    std::to_string(missing.size()) +
                    " image ids with no feature vector: " + list);
  }
  return {std::move(ds), std::move(features)};
}

SimilarityTable load_similarity_table(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  SimilarityTable table;
  std::size_t lineno = 0;
  for (const std::string& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_char(line, '\t');
    if (fields.size() != 3)
      throw FormatError("similarity line has " + std::to_string(fields.size()) +
                        " fields, expected 3 at " + line_ref(path, lineno));
    double score = parse_double(fields[2], line_ref(path, lineno));
    if (score < 0.0 || score > 1.0)
      throw FormatError("similarity score " + format_double(score) +
                        " outside [0, 1] at " + line_ref(path, lineno));
    table.put(normalize_answer(fields[0]), normalize_answer(fields[1]), score);
  }
  return table;
}

void write_triplets(const Dataset& dataset, const std::string& path) {
  std::ostringstream out;
  for (const Triplet& t : dataset.triplets) {
    out << t.image_id << '\t';
    for (std::size_t i = 0; i < t.question_tokens.size(); ++i)
      out << (i ? " " : "") << t.question_tokens[i];
    out << '\t';
    for (std::size_t i = 0; i < t.correct.size(); ++i) out << (i ? "|" : "") << t.correct[i];
    out << '\t';
    for (std::size_t i = 0; i < t.incorrect.size(); ++i) out << (i ? "|" : "") << t.incorrect[i];
    out << '\n';
  }
  write_file(path, out.str());
}

void write_features(const FeatureStore& features, const std::string& path) {
  std::ostringstream out;
  out << "dim " << features.dim() << '\n';
  for (const std::string& id : features.ids()) {
    out << id;
    for (double v : features.get(id)) out << ' ' << format_double(v);
    out << '\n';
  }
  write_file(path, out.str());
}

void write_word_embeddings(const WordEmbeddingTable& table, const std::string& path) {
  std::ostringstream out;
  for (const std::string& token : table.tokens()) {
    out << token;
    for (double v : *table.find(token)) out << ' ' << format_double(v);
    out << '\n';
  }
  write_file(path, out.str());
}

std::string dominant_answer(const std::vector<std::string>& correct) {
  if (correct.empty()) throw ArgumentError("dominant_answer on an empty answer set");
  std::unordered_map<std::string, std::size_t> counts;
  for (const std::string& a : correct) ++counts[a];
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const std::string& a : correct) {
    std::size_t c = counts[a];
    if (c > best_count || (c == best_count && best && a < *best)) {
      best = &a;
      best_count = c;
    }
  }
  return *best;
}

AnswerVocabulary build_answer_vocabulary(const Dataset& dataset, std::size_t top_k) {
  if (top_k == 0) throw ArgumentError("build_answer_vocabulary requires top_k > 0");
  std::unordered_map<std::string, std::int64_t> correct_counts;
  for (const Triplet& t : dataset.triplets)
    for (const std::string& a : t.correct) ++correct_counts[a];

  std::vector<std::pair<std::string, std::int64_t>> ranked(correct_counts.begin(),
                                                           correct_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);

  AnswerVocabulary vocab;
  for (auto& [answer, count] : ranked) {
    vocab.index.emplace(answer, vocab.answers.size());
    vocab.answers.push_back(answer);
    vocab.frequency.push_back(count);
  }

  // Incorrect-only answers keep the model's universe closed over everything
  // the datasets mention; they rank strictly after the correct block.
  std::unordered_map<std::string, std::int64_t> incorrect_counts;
  for (const Triplet& t : dataset.triplets)
    for (const std::string& a : t.incorrect)
      if (!vocab.contains(a)) ++incorrect_counts[a];
  std::vector<std::pair<std::string, std::int64_t>> extra(incorrect_counts.begin(),
                                                          incorrect_counts.end());
  std::sort(extra.begin(), extra.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [answer, count] : extra) {
    vocab.index.emplace(answer, vocab.answers.size());
    vocab.answers.push_back(answer);
    vocab.frequency.push_back(count);
  }
  return vocab;
}

OverlapStats answer_overlap_stats(const AnswerVocabulary& a, const AnswerVocabulary& b,
                                  std::span<const std::size_t> ks) {
  OverlapStats stats;
  auto count_common = [&](std::size_t k) {
    std::size_t ka = std::min(k, a.size());
    std::size_t kb = std::min(k, b.size());
    std::set<std::string> prefix(a.answers.begin(), a.answers.begin() + ka);
    std::size_t common = 0;
    for (std::size_t i = 0; i < kb; ++i)
      if (prefix.count(b.answers[i])) ++common;
    return common;
  };
  for (std::size_t k : ks) stats.at_k.emplace_back(k, count_common(k));
  stats.full_overlap = count_common(std::max(a.size(), b.size()));
  return stats;
}

}  // namespace pmcqa
