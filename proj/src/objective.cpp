#include "pmcqa/objective.hpp"

#include <algorithm>
#include <cmath>

#include "pmcqa/errors.hpp"

namespace pmcqa {

MiniUniverse build_mini_universe(std::span<const Triplet> batch) {
  if (batch.empty()) throw ArgumentError("build_mini_universe on an empty batch");
  MiniUniverse u;
  auto add = [&](const std::string& a, Origin o) {
    if (u.position.count(a)) return;
    u.position.emplace(a, u.answers.size());
    u.answers.push_back(a);
    u.origin.push_back(o);
  };
  for (const Triplet& t : batch) {
    for (const std::string& a : t.correct) add(a, Origin::batch_positive);
    for (const std::string& d : t.incorrect) add(d, Origin::batch_negative);
  }
  // an answer someone got right is a positive no matter where it showed first
  for (const Triplet& t : batch)
    for (const std::string& a : t.correct) u.origin[u.position.at(a)] = Origin::batch_positive;
  u.in_batch_count = u.answers.size();
  return u;
}

std::vector<std::string> sample_negatives(const AnswerVocabulary& vocab,
                                          const MiniUniverse& in_batch, std::size_t m,
                                          Rng& rng, bool by_frequency) {
  std::vector<std::size_t> pool;
  pool.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (!in_batch.contains(vocab.answers[i])) pool.push_back(i);
  const std::size_t take = std::min(m, pool.size());
  std::vector<std::string> out;
  out.reserve(take);

  if (!by_frequency) {
    // partial Fisher-Yates; positions [0, take) hold the sample in draw order
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(vocab.answers[pool[i]]);
    }
    return out;
  }

  std::vector<double> weight(pool.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    weight[i] = static_cast<double>(std::max<std::int64_t>(vocab.frequency[pool[i]], 0));
    total += weight[i];
  }
  if (total <= 0.0) throw ArgumentError("sample_negatives: no frequency mass to sample from");
  std::size_t remaining = pool.size();
  for (std::size_t n = 0; n < take; ++n) {
    double r = rng.uniform() * total;
    double cum = 0.0;
    std::size_t chosen = remaining - 1;
    for (std::size_t i = 0; i < remaining; ++i) {
      cum += weight[i];
      if (r < cum) {
        chosen = i;
        break;
      }
    }
    out.push_back(vocab.answers[pool[chosen]]);
    total -= weight[chosen];
    --remaining;
    std::swap(pool[chosen], pool[remaining]);
    std::swap(weight[chosen], weight[remaining]);
  }
  return out;
}

void append_negatives(MiniUniverse& universe, std::span<const std::string> negatives) {
  for (const std::string& a : negatives) {
    if (universe.contains(a))
      throw ContractError("append_negatives: '" + a + "' is already in the universe");
    universe.position.emplace(a, universe.answers.size());
    universe.answers.push_back(a);
    universe.origin.push_back(Origin::sampled);
  }
}

std::string weight_kind_name(WeightKind k) {
  switch (k) {
    case WeightKind::one_hot: return "one_hot";
    case WeightKind::multi_hot: return "multi_hot";
    case WeightKind::soft: return "soft";
    case WeightKind::wups: return "wups";
  }
  throw ContractError("weight_kind_name: bad enum value");
}

WeightKind weight_kind_from_name(const std::string& name) {
  if (name == "one_hot") return WeightKind::one_hot;
  if (name == "multi_hot") return WeightKind::multi_hot;
  if (name == "soft") return WeightKind::soft;
  if (name == "wups") return WeightKind::wups;
  throw ArgumentError("unknown weighting rule '" + name +
                      "' (expected one_hot, multi_hot, soft or wups)");
}

std::optional<Vec> compute_weights(const WeightingRule& rule, const Triplet& triplet,
                                   const MiniUniverse& universe) {
  if (triplet.correct.empty()) throw ArgumentError("compute_weights: empty correct set");
  Vec w(universe.size(), 0.0);
  double total = 0.0;

  switch (rule.kind) {
    case WeightKind::one_hot: {
      std::string t = dominant_answer(triplet.correct);
      auto it = universe.position.find(t);
      if (it == universe.position.end()) return std::nullopt;
      w[it->second] = 1.0;
      total = 1.0;
      break;
    }
    case WeightKind::multi_hot:
    case WeightKind::soft: {
      const double denom =
          rule.kind == WeightKind::soft ? static_cast<double>(triplet.correct.size()) : 1.0;
      for (const std::string& a : triplet.correct) {
        auto it = universe.position.find(a);
        if (it == universe.position.end()) continue;
        w[it->second] += 1.0 / denom;
        total += 1.0 / denom;
      }
      if (total <= 0.0) return std::nullopt;
      break;
    }
    case WeightKind::wups: {
      if (!rule.similarity)
        throw ArgumentError("wups weighting requires a similarity table");
      std::string t = dominant_answer(triplet.correct);
      for (std::size_t j = 0; j < universe.size(); ++j) {
        double s = rule.similarity->value(t, universe.answers[j]);
        if (s == 1.0)
          w[j] = rule.exact_match_weight;
        else if (s > rule.wups_threshold)
          w[j] = 1.0;
        total += w[j];
      }
      if (total <= 0.0) return std::nullopt;
      break;
    }
  }
  return w;
}

Vec pmc_posterior_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("pmc_posterior on an empty candidate set");
  for (double l : logits)
    if (!std::isfinite(l)) throw NumericError("pmc_posterior: non-finite logit");
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - m);
    sum += p[j];
  }
  for (double& x : p) x /= sum;
  return p;
}

Vec pmc_posterior(std::span<const double> f_embedding,
                  const std::vector<Vec>& answer_embeddings) {
  if (answer_embeddings.empty()) throw ArgumentError("pmc_posterior on an empty candidate set");
  Vec logits(answer_embeddings.size());
  for (std::size_t j = 0; j < answer_embeddings.size(); ++j)
    logits[j] = dot(f_embedding, answer_embeddings[j]);
  return pmc_posterior_from_logits(logits);
}

SoftmaxNllResult softmax_nll(std::span<const double> logits, std::span<const double> weights) {
  if (logits.empty()) throw ArgumentError("softmax_nll on an empty candidate set");
  if (logits.size() != weights.size())
    throw ArgumentError("softmax_nll: " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(logits.size()) + " logits");
  for (double l : logits)
    if (!std::isfinite(l)) throw NumericError("softmax_nll: non-finite logit");

  double total_w = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ArgumentError("softmax_nll: negative weight");
    total_w += w;
  }
  if (total_w <= 0.0) throw ArgumentError("softmax_nll: weights carry no mass");

  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  Vec e(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    e[j] = std::exp(logits[j] - m);
    sum += e[j];
  }
  const double log_sum = std::log(sum);

  SoftmaxNllResult r;
  r.grad_logits.assign(logits.size(), 0.0);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    // skipping zero weights avoids 0 * inf when a logit sits far below max
    if (weights[j] != 0.0) r.loss += weights[j] * (log_sum - (logits[j] - m));
    r.grad_logits[j] = total_w * (e[j] / sum) - weights[j];
  }
  if (!std::isfinite(r.loss)) throw NumericError("softmax_nll: non-finite loss");
  return r;
}

WeightedNllResult weighted_nll(std::span<const double> f_embedding,
                               const std::vector<Vec>& answer_embeddings,
                               std::span<const double> weights) {
  if (answer_embeddings.empty()) throw ArgumentError("weighted_nll on an empty universe");
  Vec logits(answer_embeddings.size());
  for (std::size_t j = 0; j < answer_embeddings.size(); ++j) {
    if (answer_embeddings[j].size() != f_embedding.size())
      throw ArgumentError("weighted_nll: embedding dimension mismatch at position " +
                          std::to_string(j));
    logits[j] = dot(f_embedding, answer_embeddings[j]);
  }
  SoftmaxNllResult s = softmax_nll(logits, weights);

  WeightedNllResult r;
  r.loss = s.loss;
  r.grad_f.assign(f_embedding.size(), 0.0);
  r.grad_answers.resize(answer_embeddings.size());
  for (std::size_t j = 0; j < answer_embeddings.size(); ++j) {
    axpy(s.grad_logits[j], answer_embeddings[j], r.grad_f);
    r.grad_answers[j].assign(f_embedding.size(), 0.0);
    axpy(s.grad_logits[j], f_embedding, r.grad_answers[j]);
  }
  return r;
}

}  // namespace pmcqa
