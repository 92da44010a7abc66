#include "pmcqa/trainer.hpp"

#include <chrono>
#include <numeric>
#include <sstream>

#include "pmcqa/errors.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

std::size_t TrainConfig::effective_negatives() const {
  if (negatives >= 0) return static_cast<std::size_t>(negatives);
  switch (model.family) {
    case ModelFamily::fpmc: return 3000;
    case ModelFamily::upmc: return 300;
    case ModelFamily::cls: return 0;
  }
  throw ContractError("effective_negatives: bad family");
}

std::string TrainLog::to_csv(bool include_seconds) const {
  std::ostringstream out;
  out << (include_seconds ? "epoch,lr,loss,skipped,seconds" : "epoch,lr,loss,skipped") << "\n";
  for (const EpochRecord& e : epochs) {
    out << e.epoch << "," << format_double(e.lr) << "," << format_double(e.mean_loss) << ","
        << e.skipped;
    if (include_seconds) out << "," << format_double(e.seconds);
    out << "\n";
  }
  return out.str();
}

DropoutPlan draw_dropout_plan(const ModelConfig& config, std::size_t batch_size,
                              std::size_t universe_size, Rng& rng) {
  DropoutPlan plan;
  const double rate = config.dropout_rate;
  auto draw_mask = [&](std::size_t n) {
    Vec mask(n, 1.0);
    if (rate > 0.0)
      for (double& x : mask) x = rng.uniform() >= rate ? 1.0 : 0.0;
    return mask;
  };
  switch (config.family) {
    case ModelFamily::fpmc:
      for (std::size_t i = 0; i < batch_size; ++i)
        plan.f_hidden.push_back(draw_mask(config.hidden_dim));
      if (config.g_mode == GMode::learned_mlp)
        for (std::size_t j = 0; j < universe_size; ++j)
          plan.g_hidden.push_back(draw_mask(config.hidden_dim));
      break;
    case ModelFamily::cls:
      for (std::size_t i = 0; i < batch_size; ++i)
        plan.f_hidden.push_back(draw_mask(config.hidden_dim));
      break;
    case ModelFamily::upmc:
      for (std::size_t i = 0; i < batch_size * universe_size; ++i)
        plan.u_hidden.push_back(draw_mask(config.hidden_dim));
      break;
  }
  return plan;
}

BatchEval fpmc_batch(const ModelParams& params, std::span<const Triplet> batch,
                     const FeatureStore& features, const WordEmbeddingTable& table,
                     const WeightingRule& rule, const MiniUniverse& universe,
                     const DropoutPlan& plan, ModelParams* grads) {
  if (!params.f || !params.g) throw ContractError("fpmc_batch: params are not fpmc");
  if (plan.f_hidden.size() < batch.size())
    throw ContractError("fpmc_batch: dropout plan is short on f masks");
  const bool learned_g = params.g->mode == GMode::learned_mlp;
  if (learned_g && plan.g_hidden.size() < universe.size())
    throw ContractError("fpmc_batch: dropout plan is short on g masks");

  // one g forward per universe answer, reused across the whole batch
  std::vector<GCache> g_caches(grads ? universe.size() : 0);
  std::vector<Vec> g_embs(universe.size());
  for (std::size_t j = 0; j < universe.size(); ++j)
    g_embs[j] = g_forward(*params.g, table, universe.answers[j],
                          learned_g ? &plan.g_hidden[j] : nullptr, learned_g,
                          grads ? &g_caches[j] : nullptr);

  std::vector<Vec> g_grad_acc;
  if (grads) g_grad_acc.assign(universe.size(), Vec(g_embs.empty() ? 0 : g_embs[0].size(), 0.0));

  BatchEval ev;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triplet& t = batch[i];
    std::optional<Vec> w = compute_weights(rule, t, universe);
    if (!w) {
      ++ev.skipped;
      continue;
    }
    FCache f_cache;
    Vec f_emb = f_forward(*params.f, table, features.get(t.image_id), t.question_tokens,
                          &plan.f_hidden[i], true, grads ? &f_cache : nullptr);
    WeightedNllResult r = weighted_nll(f_emb, g_embs, *w);
    ev.loss_sum += r.loss;
    ++ev.used;
    if (grads) {
      f_backward(*params.f, f_cache, r.grad_f, *grads->f);
      for (std::size_t j = 0; j < universe.size(); ++j)
        axpy(1.0, r.grad_answers[j], g_grad_acc[j]);
    }
  }
  if (grads && learned_g)
    for (std::size_t j = 0; j < universe.size(); ++j)
      g_backward(*params.g, g_caches[j], g_grad_acc[j], *grads->g);
  return ev;
}

BatchEval upmc_batch(const ModelParams& params, std::span<const Triplet> batch,
                     const FeatureStore& features, const WordEmbeddingTable& table,
                     const WeightingRule& rule, const MiniUniverse& universe,
                     const DropoutPlan& plan, ModelParams* grads) {
  if (!params.u) throw ContractError("upmc_batch: params are not upmc");
  if (plan.u_hidden.size() < batch.size() * universe.size())
    throw ContractError("upmc_batch: dropout plan is short on u masks");
  const std::size_t feat_dim = params.config.feature_dim;
  const std::size_t word_dim = params.config.word_dim;

  // answer means read the fixed table and never train
  std::vector<Vec> a_means(universe.size());
  for (std::size_t j = 0; j < universe.size(); ++j)
    a_means[j] = embed_text(split_whitespace(universe.answers[j]), table);

  BatchEval ev;
  std::vector<MlpCache> caches(universe.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triplet& t = batch[i];
    std::optional<Vec> w = compute_weights(rule, t, universe);
    if (!w) {
      ++ev.skipped;
      continue;
    }
    QuestionCache q_cache;
    Vec q = question_mean(params.u->question, table, t.question_tokens,
                          grads ? &q_cache : nullptr);
    std::span<const double> image = features.get(t.image_id);

    Vec logits(universe.size());
    for (std::size_t j = 0; j < universe.size(); ++j)
      logits[j] = u_score(*params.u, image, q, a_means[j],
                          &plan.u_hidden[i * universe.size() + j], true,
                          grads ? &caches[j] : nullptr);

    SoftmaxNllResult s = softmax_nll(logits, *w);
    ev.loss_sum += s.loss;
    ++ev.used;
    if (grads) {
      Vec q_grad(word_dim, 0.0);
      for (std::size_t j = 0; j < universe.size(); ++j) {
        Vec d_input = u_score_backward(*params.u, caches[j], s.grad_logits[j], *grads->u);
        for (std::size_t k = 0; k < word_dim; ++k) q_grad[k] += d_input[feat_dim + k];
      }
      question_backward(params.u->question, q_cache, q_grad, grads->u->question);
    }
  }
  return ev;
}

BatchEval cls_batch(const ModelParams& params, std::span<const Triplet> batch,
                    const FeatureStore& features, const WordEmbeddingTable& table,
                    const DropoutPlan& plan, ModelParams* grads) {
  if (!params.f || !params.cls_head) throw ContractError("cls_batch: params are not cls");
  if (plan.f_hidden.size() < batch.size())
    throw ContractError("cls_batch: dropout plan is short on f masks");

  BatchEval ev;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triplet& t = batch[i];
    std::string target = dominant_answer(t.correct);
    auto pos = params.vocab.find(target);
    // answers outside the class list cannot be trained on and are dropped
    if (!pos || *pos >= params.class_count()) {
      ++ev.skipped;
      continue;
    }
    FCache f_cache;
    Vec f_emb = f_forward(*params.f, table, features.get(t.image_id), t.question_tokens,
                          &plan.f_hidden[i], true, grads ? &f_cache : nullptr);
    Vec logits = matvec(params.cls_head->weight, f_emb);
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += params.cls_head->bias[c];

    Vec w(logits.size(), 0.0);
    w[*pos] = 1.0;
    SoftmaxNllResult s = softmax_nll(logits, w);
    ev.loss_sum += s.loss;
    ++ev.used;
    if (grads) {
      outer_acc(grads->cls_head->weight, s.grad_logits, f_emb);
      axpy(1.0, s.grad_logits, grads->cls_head->bias);
      Vec d_emb(f_emb.size(), 0.0);
      matvec_transpose_acc(params.cls_head->weight, s.grad_logits, d_emb);
      f_backward(*params.f, f_cache, d_emb, *grads->f);
    }
  }
  return ev;
}

TrainResult train(const Dataset& dataset, const FeatureStore& features,
                  const WordEmbeddingTable& table, const TrainConfig& config,
                  const BatchObserver& observer) {
  if (dataset.triplets.empty()) throw ArgumentError("train: dataset holds no triplets");
  if (config.batch_size == 0) throw ArgumentError("train: batch_size must be positive");
  if (config.epochs < 0) throw ArgumentError("train: epochs must be non-negative");
  if (config.weighting.kind == WeightKind::wups && config.weighting.similarity == nullptr)
    throw ArgumentError("train: wups weighting requires a similarity table");

  AnswerVocabulary vocab = build_answer_vocabulary(dataset);
  TrainResult result;
  result.params = init_params(config.model, vocab, table, config.seed);
  ModelParams grads = zero_like(result.params);
  std::vector<ParamBlock> blocks = collect_param_blocks(result.params);
  std::vector<ParamBlock> grad_blocks = collect_param_blocks(grads);
  AdamState adam;
  adam.init(blocks);

  const std::size_t m = config.effective_negatives();
  const ModelFamily family = config.model.family;
  const std::uint64_t shuffle_seed = Rng::fold(config.seed, "shuffle");
  const std::uint64_t negatives_seed = Rng::fold(config.seed, "negatives");
  const std::uint64_t dropout_seed = Rng::fold(config.seed, "dropout");
  std::vector<std::size_t> order(dataset.triplets.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.schedule, epoch);
    auto t_start = std::chrono::steady_clock::now();

    Rng shuffle_rng(Rng::fold(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_total = 0.0;
    std::size_t used_total = 0;
    std::size_t skipped_total = 0;

    const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, order.size());
      std::vector<Triplet> batch;
      batch.reserve(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) batch.push_back(dataset.triplets[order[k]]);

      MiniUniverse universe;
      if (family != ModelFamily::cls) {
        universe = build_mini_universe(batch);
        if (m > 0) {
          Rng neg_rng(Rng::fold(Rng::fold(negatives_seed, static_cast<std::uint64_t>(epoch)),
                                b));
          append_negatives(universe,
                           sample_negatives(result.params.vocab, universe, m, neg_rng,
                                            config.negatives_by_frequency));
        }
      }

      Rng mask_rng(Rng::fold(Rng::fold(dropout_seed, static_cast<std::uint64_t>(epoch)), b));
      DropoutPlan plan =
          draw_dropout_plan(result.params.config, batch.size(), universe.size(), mask_rng);

      zero_blocks(grad_blocks);
      BatchEval ev;
      try {
        switch (family) {
          case ModelFamily::fpmc:
            ev = fpmc_batch(result.params, batch, features, table, config.weighting, universe,
                            plan, &grads);
            break;
          case ModelFamily::upmc:
            ev = upmc_batch(result.params, batch, features, table, config.weighting, universe,
                            plan, &grads);
            break;
          case ModelFamily::cls:
            ev = cls_batch(result.params, batch, features, table, plan, &grads);
            break;
        }
        if (ev.used > 0) {
          scale_blocks(grad_blocks, 1.0 / static_cast<double>(ev.used));
          adam_step(adam, blocks, grad_blocks, lr);
        }
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": " + e.what());
      }

      loss_total += ev.loss_sum;
      used_total += ev.used;
      skipped_total += ev.skipped;
      if (observer) {
        BatchDiag diag;
        diag.epoch = epoch;
        diag.batch_index = b;
        diag.universe = family == ModelFamily::cls ? nullptr : &universe;
        diag.loss_sum = ev.loss_sum;
        diag.used = ev.used;
        diag.skipped = ev.skipped;
        observer(diag);
      }
    }

    auto t_end = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.mean_loss = used_total > 0 ? loss_total / static_cast<double>(used_total) : 0.0;
    rec.skipped = skipped_total;
    rec.seconds = std::chrono::duration<double>(t_end - t_start).count();
    result.log.epochs.push_back(rec);
  }
  return result;
}

}  // namespace pmcqa
