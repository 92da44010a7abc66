#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmcqa/model.hpp"

namespace pmcqa {

// Precomputed answer embeddings for fast factorized inference: prediction is
// one f pass plus inner products against these rows.
struct AnswerIndex {
  std::vector<std::string> answers;
  Matrix embeddings;  // answers.size() x embed_dim

  std::size_t size() const { return answers.size(); }
};

// fpmc checkpoints only (FamilyError otherwise): embeds every answer once.
AnswerIndex precompute_answer_index(const ModelParams& params,
                                    std::span<const std::string> answers,
                                    const WordEmbeddingTable& table);

struct Prediction {
  std::string answer;
  double score = 0.0;
  std::size_t ordinal = 0;  // position in the candidate list that won
};

// Open-ended prediction against a precomputed index; ties take the lowest
// ordinal. fpmc only.
Prediction predict_open_ended(const ModelParams& params, const AnswerIndex& index,
                              std::span<const double> image,
                              std::span<const std::string> question,
                              const WordEmbeddingTable& table);

// Scores the given candidates in their given order (any family). CLS scores
// only candidates inside its class list and falls back to the first candidate
// when none is.
Prediction predict_mc(const ModelParams& params, std::span<const double> image,
                      std::span<const std::string> question,
                      std::span<const std::string> candidates,
                      const WordEmbeddingTable& table);

// min(1, matches / 3) over the annotation multiset.
double vqa_accuracy(const std::string& predicted,
                    const std::vector<std::string>& annotations);

enum class EvalMode { open_ended, multiple_choice };

std::string eval_mode_name(EvalMode m);
EvalMode eval_mode_from_name(const std::string& name);

struct GroupStat {
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct PredictionRecord {
  std::size_t record_id = 0;
  std::string prediction;
  bool correct = false;
  bool seen = true;
};

struct EvalReport {
  EvalMode mode = EvalMode::open_ended;
  double overall = 0.0;
  std::size_t count = 0;
  std::vector<std::pair<std::string, GroupStat>> per_type;  // keyed by first question token
  std::optional<GroupStat> seen_records;   // transfer evaluations only
  std::optional<GroupStat> unseen_records;
  std::vector<PredictionRecord> records;

  std::string to_text() const;
  std::string to_csv() const;
};

// Multiple choice scores each record's lexicographically ordered candidates
// and counts predictions landing in C. Open-ended predicts over `universe`
// (required non-empty) and scores records with exactly ten annotations by
// vqa_accuracy, all others by exact match against the dominant answer.
EvalReport evaluate(const ModelParams& params, const Dataset& dataset,
                    const FeatureStore& features, const WordEmbeddingTable& table,
                    EvalMode mode, std::span<const std::string> universe = {});

enum class CandidateSource { source_only, union_with_target };

// Evaluation on a target split with seen/unseen bookkeeping against the
// source vocabulary: a multiple-choice record is seen when any candidate is a
// source answer, an open-ended record when its dominant answer is. With
// union_with_target the open-ended universe extends to the target's answers.
EvalReport transfer_evaluate(const ModelParams& params, const AnswerVocabulary& source_vocab,
                             const Dataset& target, const FeatureStore& features,
                             const WordEmbeddingTable& table, EvalMode mode,
                             CandidateSource candidates = CandidateSource::union_with_target);

struct BenchmarkReport {
  std::size_t vocab_size = 0;
  std::size_t batch_size = 0;
  std::size_t repetitions = 0;
  double fpmc_ms_per_batch = 0.0;
  double upmc_ms_per_batch = 0.0;
  double speedup = 0.0;  // upmc / fpmc
};

// Wall-clock comparison of factorized vs unfactorized inference over a
// synthetic vocabulary of the given size. Index construction happens outside
// the timed region; one warmup repetition precedes timing.
BenchmarkReport benchmark_inference(const ModelParams& fpmc, const ModelParams& upmc,
                                    std::size_t vocab_size, std::size_t batch_size,
                                    std::size_t repetitions, std::uint64_t seed);

// answer<TAB>v1 v2 ... vE per line; reloading reproduces the index exactly.
void export_embeddings(const ModelParams& params, std::span<const std::string> answers,
                       const WordEmbeddingTable& table, const std::string& path);
AnswerIndex load_embedding_export(const std::string& path);

}  // namespace pmcqa
