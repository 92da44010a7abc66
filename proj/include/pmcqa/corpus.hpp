#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmcqa/linalg.hpp"

namespace pmcqa {

// One question record. `correct` is a multiset kept in file order (datasets
// with ten annotations repeat answers); `incorrect` is a set kept in
// first-occurrence order and disjoint from `correct`. All strings are
// normalized (lowercased, single-spaced) at load time.
struct Triplet {
  std::string image_id;
  std::vector<std::string> question_tokens;
  std::vector<std::string> correct;
  std::vector<std::string> incorrect;
};

enum class Split { train, val, test };

struct Dataset {
  std::string name;
  Split split = Split::train;
  std::vector<Triplet> triplets;
};

// Token -> vector table with deterministic (insertion) order.
class WordEmbeddingTable {
 public:
  explicit WordEmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  // Null when the token is absent; lookups never invent vectors.
  const Vec* find(const std::string& token) const;

  // Last write wins, matching the duplicate rule of the file format.
  void put(const std::string& token, Vec v);

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<Vec> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// image id -> feature vector, fixed dimension, insertion-ordered.
class FeatureStore {
 public:
  explicit FeatureStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::span<const double> get(const std::string& id) const;

  // Duplicate ids are a format violation; callers insert each id once.
  void put(const std::string& id, Vec v);

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<Vec> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Frequency-ranked answer vocabulary. `frequency` counts correct-multiset
// occurrences; answers appended from incorrect sets carry their incorrect
// counts and sort after every correct-derived entry.
struct AnswerVocabulary {
  std::vector<std::string> answers;
  std::vector<std::int64_t> frequency;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return answers.size(); }
  bool contains(const std::string& a) const { return index.count(a) != 0; }
  std::optional<std::size_t> find(const std::string& a) const;
};

// Symmetric similarity lookup with forced self-similarity of 1.
class SimilarityTable {
 public:
  double value(const std::string& a, const std::string& b) const;
  void put(const std::string& a, const std::string& b, double score);
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;
  static std::string key(const std::string& a, const std::string& b);
};

// --- file loaders -----------------------------------------------------------
// Formats are documented in docs/formats.md. Loaders throw FormatError with a
// line number for malformed content, LinkError for dangling references, and
// IoError for unreadable paths.

WordEmbeddingTable load_word_embeddings(const std::string& path);

FeatureStore load_features(const std::string& path);

// Parses the triplet file only; pair with load_dataset for link checking.
Dataset load_triplets(const std::string& path, const std::string& name, Split split);

// Loads both files and verifies every triplet's image id resolves.
std::pair<Dataset, FeatureStore> load_dataset(const std::string& triplet_path,
                                              const std::string& feature_path,
                                              const std::string& name = "",
                                              Split split = Split::train);

SimilarityTable load_similarity_table(const std::string& path);

void write_triplets(const Dataset& dataset, const std::string& path);
void write_features(const FeatureStore& features, const std::string& path);
void write_word_embeddings(const WordEmbeddingTable& table, const std::string& path);

// --- vocabulary and statistics ----------------------------------------------

// Most frequent answer of the multiset; ties go to the lexicographically
// smallest, so the result never depends on annotation order.
std::string dominant_answer(const std::vector<std::string>& correct);

// Ranks correct answers by descending frequency (ascending lexicographic on
// ties), truncates to top_k, then appends every answer the incorrect sets
// mention that the kept block does not cover. top_k == 0 is an error.
AnswerVocabulary build_answer_vocabulary(const Dataset& dataset, std::size_t top_k = SIZE_MAX);

struct OverlapStats {
  // (requested k, size of the intersection of the two top-k prefixes)
  std::vector<std::pair<std::size_t, std::size_t>> at_k;
  std::size_t full_overlap = 0;
};

OverlapStats answer_overlap_stats(const AnswerVocabulary& a, const AnswerVocabulary& b,
                                  std::span<const std::size_t> ks);

}  // namespace pmcqa
