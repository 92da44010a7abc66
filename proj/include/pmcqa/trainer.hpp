#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pmcqa/model.hpp"
#include "pmcqa/objective.hpp"
#include "pmcqa/schedule.hpp"

namespace pmcqa {

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 128;
  // negative samples per batch; -1 selects the family default
  // (3000 for fpmc, 300 for upmc, none for cls)
  long long negatives = -1;
  int epochs = 50;
  LrSchedule schedule;
  WeightingRule weighting;
  std::uint64_t seed = 1;
  bool negatives_by_frequency = false;

  std::size_t effective_negatives() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  // CSV matching docs/formats.md; the seconds column can be dropped when a
  // caller needs run-invariant bytes.
  std::string to_csv(bool include_seconds = true) const;
};

// Per-batch diagnostics for tests and tooling. `universe` is null for cls.
struct BatchDiag {
  int epoch = 0;
  std::size_t batch_index = 0;
  const MiniUniverse* universe = nullptr;
  double loss_sum = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};
using BatchObserver = std::function<void(const BatchDiag&)>;

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// Pre-drawn binary dropout masks for one batch, in the draw order the trainer
// uses: f hidden masks per triplet, then g hidden masks per universe answer,
// then u hidden masks per (triplet, universe answer) row-major. With a zero
// dropout rate every mask is all-ones and no randomness is consumed.
struct DropoutPlan {
  std::vector<Vec> f_hidden;
  std::vector<Vec> g_hidden;
  std::vector<Vec> u_hidden;
};

DropoutPlan draw_dropout_plan(const ModelConfig& config, std::size_t batch_size,
                              std::size_t universe_size, Rng& rng);

struct BatchEval {
  double loss_sum = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Single-batch training computations, exposed so the gradient checker and the
// equivalence tests can drive them directly. Gradients accumulate raw sums
// into `grads` (a zero_like clone); pass null to evaluate the loss only.
BatchEval fpmc_batch(const ModelParams& params, std::span<const Triplet> batch,
                     const FeatureStore& features, const WordEmbeddingTable& table,
                     const WeightingRule& rule, const MiniUniverse& universe,
                     const DropoutPlan& plan, ModelParams* grads);

BatchEval upmc_batch(const ModelParams& params, std::span<const Triplet> batch,
                     const FeatureStore& features, const WordEmbeddingTable& table,
                     const WeightingRule& rule, const MiniUniverse& universe,
                     const DropoutPlan& plan, ModelParams* grads);

BatchEval cls_batch(const ModelParams& params, std::span<const Triplet> batch,
                    const FeatureStore& features, const WordEmbeddingTable& table,
                    const DropoutPlan& plan, ModelParams* grads);

// Full weighted-likelihood training loop: builds the vocabulary, initializes
// parameters, and runs shuffled mini-batches under Adam with the halving
// schedule. Deterministic in (data, config): a rerun yields byte-identical
// parameters and per-epoch losses.
TrainResult train(const Dataset& dataset, const FeatureStore& features,
                  const WordEmbeddingTable& table, const TrainConfig& config,
                  const BatchObserver& observer = {});

}  // namespace pmcqa
