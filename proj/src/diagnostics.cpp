#include "pmcqa/diagnostics.hpp"

#include <algorithm>

#include "pmcqa/errors.hpp"
#include "pmcqa/gradcheck.hpp"
#include "pmcqa/trainer.hpp"

namespace pmcqa {

namespace {

struct TinyTask {
  WordEmbeddingTable table;
  FeatureStore features{4};
  std::vector<Triplet> batch;
  AnswerVocabulary vocab;
  SimilarityTable similarity;
};

TinyTask build_tiny_task(std::uint64_t seed) {
  TinyTask task;
  Rng rng(Rng::fold(seed, "tiny-task"));
  const std::size_t word_dim = 3;
  for (const char* tok : {"red", "blue", "big", "small", "dog", "cat", "what", "color"}) {
    Vec v(word_dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    task.table.put(tok, std::move(v));
  }
  for (const char* id : {"i1", "i2"}) {
    Vec v(4);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    task.features.put(id, std::move(v));
  }

  Triplet t1;
  t1.image_id = "i1";
  t1.question_tokens = {"what", "color"};
  t1.correct = {"red dog", "blue cat", "red dog"};  // multiset with a repeat
  t1.incorrect = {"big dog"};
  Triplet t2;
  t2.image_id = "i2";
  t2.question_tokens = {"what", "color"};
  t2.correct = {"blue cat"};
  t2.incorrect = {"small cat"};
  task.batch = {t1, t2};

  const char* all[] = {"red dog", "blue cat", "big dog", "small cat", "red cat", "blue dog"};
  for (const char* a : all) {
    task.vocab.index.emplace(a, task.vocab.answers.size());
    task.vocab.answers.emplace_back(a);
    task.vocab.frequency.push_back(1);
  }

  task.similarity.put("red dog", "red cat", 0.95);   // above threshold, weight 1
  task.similarity.put("red dog", "blue dog", 0.5);   // below threshold, weight 0
  task.similarity.put("blue cat", "small cat", 0.92);
  return task;
}

}  // namespace

double gradcheck_model(ModelFamily family, WeightKind kind, std::uint64_t seed, double step) {
  TinyTask task = build_tiny_task(seed);

  ModelConfig config;
  config.family = family;
  config.word_dim = 3;
  config.feature_dim = 4;
  config.hidden_dim = 5;
  config.embed_dim = 4;
  config.dropout_rate = 0.0;  // the loss must be deterministic in the params
  config.output_scale = 10.0;
  config.finetune_question = true;
  config.top_k = task.vocab.size();

  WeightingRule rule;
  rule.kind = kind;
  rule.similarity = &task.similarity;

  ModelParams params = init_params(config, task.vocab, task.table, seed);

  MiniUniverse universe = build_mini_universe(task.batch);
  Rng neg_rng(Rng::fold(seed, "tiny-negatives"));
  append_negatives(universe, sample_negatives(task.vocab, universe, 2, neg_rng));

  Rng mask_rng(Rng::fold(seed, "tiny-masks"));
  DropoutPlan plan =
      draw_dropout_plan(config, task.batch.size(), universe.size(), mask_rng);

  auto run_batch = [&](ModelParams& p, ModelParams* grads) {
    switch (family) {
      case ModelFamily::fpmc:
        return fpmc_batch(p, task.batch, task.features, task.table, rule, universe, plan,
                          grads);
      case ModelFamily::upmc:
        return upmc_batch(p, task.batch, task.features, task.table, rule, universe, plan,
                          grads);
      case ModelFamily::cls:
        return cls_batch(p, task.batch, task.features, task.table, plan, grads);
    }
    throw ContractError("gradcheck_model: bad family");
  };

  ModelParams grads = zero_like(params);
  BatchEval ev = run_batch(params, &grads);
  if (ev.used == 0) throw ContractError("gradcheck_model: no usable triplet in the tiny task");
  const double inv_used = 1.0 / static_cast<double>(ev.used);

  std::vector<ParamBlock> param_blocks = collect_param_blocks(params);
  std::vector<ParamBlock> grad_blocks = collect_param_blocks(grads);

  std::vector<double> flat;
  std::vector<double> analytic;
  for (std::size_t b = 0; b < param_blocks.size(); ++b) {
    flat.insert(flat.end(), param_blocks[b].data, param_blocks[b].data + param_blocks[b].size);
    for (std::size_t i = 0; i < grad_blocks[b].size; ++i)
      analytic.push_back(grad_blocks[b].data[i] * inv_used);
  }

  auto loss = [&](std::span<const double> theta) {
    std::size_t off = 0;
    for (const ParamBlock& b : param_blocks) {
      std::copy(theta.begin() + off, theta.begin() + off + b.size, b.data);
      off += b.size;
    }
    BatchEval e = run_batch(params, nullptr);
    return e.loss_sum / static_cast<double>(e.used);
  };

  return grad_check(loss, flat, analytic, step);
}

}  // namespace pmcqa
