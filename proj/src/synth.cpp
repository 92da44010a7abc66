#include "pmcqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "pmcqa/errors.hpp"
#include "pmcqa/rng.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

namespace {

void validate_spec(const SynthSpec& s) {
  if (s.num_attributes == 0 || s.values_per_attribute == 0 || s.words_per_value == 0)
    throw ArgumentError("synthetic spec: attribute shape must be positive");
  if (s.train_vocab == 0 || s.target_vocab == 0)
    throw ArgumentError("synthetic spec: vocabulary sizes must be positive");
  if (s.overlap_fraction < 0.0 || s.overlap_fraction > 1.0)
    throw ArgumentError("synthetic spec: overlap_fraction must lie in [0, 1]");
  if (s.word_dim == 0 || s.feature_dim == 0)
    throw ArgumentError("synthetic spec: dimensions must be positive");
  if (s.train_vocab <= s.num_incorrect || s.target_vocab <= s.num_incorrect)
    throw ArgumentError("synthetic spec: vocabularies must exceed num_incorrect");
}

std::size_t shared_count(const SynthSpec& s) {
  auto shared = static_cast<std::size_t>(
      std::llround(s.overlap_fraction * static_cast<double>(s.target_vocab)));
  if (shared > s.train_vocab)
    throw ArgumentError("synthetic spec: overlap asks for more shared answers than train holds");
  return shared;
}

// Capacity of the tuple space with saturation at a safe bound.
std::size_t tuple_capacity(const SynthSpec& s) {
  std::size_t cap = 1;
  for (std::size_t k = 0; k < s.num_attributes; ++k) {
    if (cap > (SIZE_MAX / 4) / s.values_per_attribute) return SIZE_MAX / 4;
    cap *= s.values_per_attribute;
  }
  return cap;
}

using Tuple = std::vector<std::size_t>;

std::vector<Tuple> draw_tuples(const SynthSpec& s, std::size_t total, Rng& rng) {
  const std::size_t cap = tuple_capacity(s);
  if (cap < total)
    throw ArgumentError("synthetic spec: attribute space holds " + std::to_string(cap) +
                        " distinct answers, need " + std::to_string(total));
  std::vector<Tuple> tuples;
  if (cap <= 4096 || total * 2 > cap) {
    // dense space: enumerate and shuffle instead of rejection sampling
    std::vector<std::size_t> codes(cap);
    for (std::size_t i = 0; i < cap; ++i) codes[i] = i;
    rng.shuffle(codes);
    for (std::size_t i = 0; i < total; ++i) {
      Tuple t(s.num_attributes);
      std::size_t code = codes[i];
      for (std::size_t k = 0; k < s.num_attributes; ++k) {
        t[k] = code % s.values_per_attribute;
        code /= s.values_per_attribute;
      }
      tuples.push_back(std::move(t));
    }
    return tuples;
  }
  std::set<Tuple> seen;
  while (tuples.size() < total) {
    Tuple t(s.num_attributes);
    for (std::size_t k = 0; k < s.num_attributes; ++k)
      t[k] = static_cast<std::size_t>(rng.below(s.values_per_attribute));
    if (seen.insert(t).second) tuples.push_back(std::move(t));
  }
  return tuples;
}

std::string value_word(std::size_t attribute, std::size_t value, std::size_t r) {
  return "a" + std::to_string(attribute) + "v" + std::to_string(value) + "w" +
         std::to_string(r);
}

std::string phrase_of(const SynthSpec& s, const Tuple& t) {
  std::string out;
  for (std::size_t k = 0; k < s.num_attributes; ++k)
    for (std::size_t r = 0; r < s.words_per_value; ++r) {
      if (!out.empty()) out += ' ';
      out += value_word(k, t[k], r);
    }
  return out;
}

std::string padded_id(const std::string& prefix, std::size_t n) {
  std::string digits = std::to_string(n);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return prefix + digits;
}

// Correct answers cycle through shuffled copies of the pool, so every pool
// member is used once before any repeats: coverage is guaranteed whenever
// count >= pool size and class frequencies stay balanced.
std::vector<std::size_t> coverage_sequence(const std::vector<std::size_t>& pool,
                                           std::size_t count, Rng& rng) {
  std::vector<std::size_t> seq;
  seq.reserve(count);
  while (seq.size() < count) {
    std::vector<std::size_t> copy = pool;
    rng.shuffle(copy);
    for (std::size_t a : copy) {
      if (seq.size() == count) break;
      seq.push_back(a);
    }
  }
  return seq;
}

std::vector<std::size_t> draw_distinct(const std::vector<std::size_t>& from,
                                       std::size_t exclude, std::size_t m, Rng& rng) {
  std::vector<std::size_t> pool;
  pool.reserve(from.size());
  for (std::size_t a : from)
    if (a != exclude) pool.push_back(a);
  std::vector<std::size_t> out;
  const std::size_t take = std::min(m, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  const std::size_t shared = shared_count(spec);
  const std::size_t unseen = spec.target_vocab - shared;
  const std::size_t total = spec.train_vocab + unseen;

  Rng rng(Rng::fold(seed, "synth"));
  std::vector<Tuple> tuples = draw_tuples(spec, total, rng);
  std::vector<std::string> phrases;
  phrases.reserve(total);
  for (const Tuple& t : tuples) phrases.push_back(phrase_of(spec, t));

  SynthData data;

  // word table: attribute-value words first, then fixed question words
  for (std::size_t k = 0; k < spec.num_attributes; ++k)
    for (std::size_t v = 0; v < spec.values_per_attribute; ++v)
      for (std::size_t r = 0; r < spec.words_per_value; ++r) {
        Vec vec(spec.word_dim);
        for (double& x : vec) x = rng.uniform(-1.0, 1.0);
        data.words.put(value_word(k, v, r), std::move(vec));
      }
  for (const char* q : {"what", "is", "the", "object"}) {
    Vec vec(spec.word_dim);
    for (double& x : vec) x = rng.uniform(-1.0, 1.0);
    data.words.put(q, std::move(vec));
  }

  // one feature-space direction per (attribute, value)
  std::vector<std::vector<Vec>> direction(spec.num_attributes);
  for (std::size_t k = 0; k < spec.num_attributes; ++k) {
    direction[k].resize(spec.values_per_attribute);
    for (std::size_t v = 0; v < spec.values_per_attribute; ++v) {
      Vec d(spec.feature_dim);
      for (double& x : d) x = rng.uniform(-1.0, 1.0);
      direction[k][v] = std::move(d);
    }
  }

  std::vector<std::size_t> train_pool(spec.train_vocab);
  for (std::size_t i = 0; i < spec.train_vocab; ++i) train_pool[i] = i;
  std::vector<std::size_t> seen_sub = draw_distinct(train_pool, SIZE_MAX, shared, rng);
  std::sort(seen_sub.begin(), seen_sub.end());
  std::vector<std::size_t> unseen_sub(unseen);
  for (std::size_t i = 0; i < unseen; ++i) unseen_sub[i] = spec.train_vocab + i;
  std::vector<std::size_t> target_pool = seen_sub;
  target_pool.insert(target_pool.end(), unseen_sub.begin(), unseen_sub.end());

  const std::vector<std::string> question = {"what", "is", "the", "object"};
  const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(spec.num_attributes));

  auto make_split = [&](const std::vector<std::size_t>& pool,
                        const std::vector<std::size_t>& seen_part,
                        const std::vector<std::size_t>& unseen_part, std::size_t count,
                        const std::string& prefix, Dataset& ds, FeatureStore& features) {
    features = FeatureStore(spec.feature_dim);
    std::vector<std::size_t> correct_seq = coverage_sequence(pool, count, rng);
    auto in = [](const std::vector<std::size_t>& v, std::size_t x) {
      return std::find(v.begin(), v.end(), x) != v.end();
    };
    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t c = correct_seq[n];
      // incorrect answers come from the same seen/unseen side as the correct
      // one when that side is big enough, so a record's candidates share a pool
      const std::vector<std::size_t>* d_pool = &pool;
      if (!unseen_part.empty() && in(unseen_part, c) && unseen_part.size() > spec.num_incorrect)
        d_pool = &unseen_part;
      else if (!seen_part.empty() && in(seen_part, c) && seen_part.size() > spec.num_incorrect)
        d_pool = &seen_part;
      std::vector<std::size_t> d = draw_distinct(*d_pool, c, spec.num_incorrect, rng);

      Triplet t;
      t.image_id = padded_id(prefix, n);
      t.question_tokens = question;
      t.correct.push_back(phrases[c]);
      for (std::size_t a : d) t.incorrect.push_back(phrases[a]);

      Vec x(spec.feature_dim, 0.0);
      for (std::size_t k = 0; k < spec.num_attributes; ++k)
        axpy(inv_sqrt_l, direction[k][tuples[c][k]], x);
      for (double& xi : x) xi += spec.feature_noise * rng.gaussian();
      features.put(t.image_id, std::move(x));
      ds.triplets.push_back(std::move(t));
    }
  };

  data.train.name = "synth-train";
  data.train.split = Split::train;
  make_split(train_pool, train_pool, {}, spec.train_triplets, "tr", data.train,
             data.train_features);

  data.target.name = "synth-target";
  data.target.split = Split::test;
  make_split(target_pool, seen_sub, unseen_sub, spec.target_triplets, "tg", data.target,
             data.target_features);

  return data;
}

void write_synthetic(const SynthData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "train", ec);
  fs::create_directories(fs::path(dir) / "target", ec);
  if (ec) throw IoError("cannot create synthetic output directories under '" + dir + "'");
  write_word_embeddings(data.words, (fs::path(dir) / "word_vectors.txt").string());
  write_triplets(data.train, (fs::path(dir) / "train" / "triplets.tsv").string());
  write_features(data.train_features, (fs::path(dir) / "train" / "features.txt").string());
  write_triplets(data.target, (fs::path(dir) / "target" / "triplets.tsv").string());
  write_features(data.target_features, (fs::path(dir) / "target" / "features.txt").string());
}

}  // namespace pmcqa
