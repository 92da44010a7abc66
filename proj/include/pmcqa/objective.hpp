#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmcqa/corpus.hpp"
#include "pmcqa/linalg.hpp"
#include "pmcqa/rng.hpp"

namespace pmcqa {

enum class Origin { batch_positive, batch_negative, sampled };

// Ordered answer set a batch trains against: the union of the batch's correct
// and incorrect answers (first-occurrence order) optionally extended with
// sampled negatives. An answer that is correct for any batch member is tagged
// batch_positive even if it first appeared in an incorrect set.
struct MiniUniverse {
  std::vector<std::string> answers;
  std::vector<Origin> origin;
  std::size_t in_batch_count = 0;
  std::unordered_map<std::string, std::size_t> position;

  std::size_t size() const { return answers.size(); }
  bool contains(const std::string& a) const { return position.count(a) != 0; }
};

MiniUniverse build_mini_universe(std::span<const Triplet> batch);

// Up to m answers drawn without replacement from vocab minus the in-batch
// set, in selection order. m is clipped to the complement size. Uniform
// draws use a partial Fisher-Yates walk, so the sample for a smaller m is a
// prefix of the sample for a larger one under the same rng state. With
// by_frequency, draws are proportional to vocabulary frequency instead.
std::vector<std::string> sample_negatives(const AnswerVocabulary& vocab,
                                          const MiniUniverse& in_batch, std::size_t m,
                                          Rng& rng, bool by_frequency = false);

// Appends sampled negatives; they must be disjoint from the current universe.
void append_negatives(MiniUniverse& universe, std::span<const std::string> negatives);

enum class WeightKind { one_hot, multi_hot, soft, wups };

std::string weight_kind_name(WeightKind k);
WeightKind weight_kind_from_name(const std::string& name);

struct WeightingRule {
  WeightKind kind = WeightKind::one_hot;
  double wups_threshold = 0.9;
  double exact_match_weight = 8.0;
  const SimilarityTable* similarity = nullptr;  // required for wups
};

// Per-universe-position target weights for one triplet:
//   one_hot   weight 1 on the dominant correct answer
//   multi_hot multiplicity of each correct answer present in the universe
//   soft      multiplicity / |C| (the multiset size)
//   wups      against the dominant answer t: exact_match_weight where
//             similarity(t, d) = 1, weight 1 where it exceeds the threshold,
//             0 elsewhere
// nullopt means the triplet carries no positive mass in this universe and
// must be skipped (counted, never trained on).
std::optional<Vec> compute_weights(const WeightingRule& rule, const Triplet& triplet,
                                   const MiniUniverse& universe);

// Softmax over inner products between one query embedding and each answer
// embedding. Probabilities are computed max-stabilized and sum to 1.
Vec pmc_posterior(std::span<const double> f_embedding,
                  const std::vector<Vec>& answer_embeddings);
Vec pmc_posterior_from_logits(std::span<const double> logits);

// Weighted negative log-likelihood over one triplet. The arithmetic order is
// pinned (and relied on by equivalence tests): logits in universe order, max
// subtraction, exponentials, a single left-to-right sum, then the weighted
// loss accumulated left-to-right over nonzero weights.
struct SoftmaxNllResult {
  double loss = 0.0;
  Vec grad_logits;
};

SoftmaxNllResult softmax_nll(std::span<const double> logits, std::span<const double> weights);

struct WeightedNllResult {
  double loss = 0.0;
  Vec grad_f;
  std::vector<Vec> grad_answers;
};

WeightedNllResult weighted_nll(std::span<const double> f_embedding,
                               const std::vector<Vec>& answer_embeddings,
                               std::span<const double> weights);

}  // namespace pmcqa
