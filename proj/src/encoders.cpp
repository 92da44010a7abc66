#include "pmcqa/encoders.hpp"

#include "pmcqa/errors.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

TrainableWordTable TrainableWordTable::copy_of(const WordEmbeddingTable& table) {
  TrainableWordTable out;
  out.tokens = table.tokens();
  out.vectors = Matrix(out.tokens.size(), table.dim());
  for (std::size_t i = 0; i < out.tokens.size(); ++i) {
    const Vec& v = *table.find(out.tokens[i]);
    std::copy(v.begin(), v.end(), out.vectors.row(i).begin());
    out.index.emplace(out.tokens[i], i);
  }
  return out;
}

Vec embed_text(std::span<const std::string> tokens, const WordEmbeddingTable& table) {
  Vec mean(table.dim(), 0.0);
  std::size_t present = 0;
  for (const std::string& tok : tokens) {
    const Vec* v = table.find(tok);
    if (!v) continue;
    axpy(1.0, *v, mean);
    ++present;
  }
  if (present > 0)
    for (double& x : mean) x /= static_cast<double>(present);
  return mean;
}

Vec question_mean(const QuestionEncoder& enc, const WordEmbeddingTable& fixed,
                  std::span<const std::string> tokens, QuestionCache* cache) {
  Vec mean;
  std::size_t present = 0;
  std::vector<std::size_t> rows;
  if (enc.table) {
    mean.assign(enc.table->dim(), 0.0);
    for (const std::string& tok : tokens) {
      auto it = enc.table->index.find(tok);
      if (it == enc.table->index.end()) continue;
      axpy(1.0, enc.table->vectors.row(it->second), mean);
      rows.push_back(it->second);
      ++present;
    }
  } else {
    mean.assign(fixed.dim(), 0.0);
    for (const std::string& tok : tokens) {
      const Vec* v = fixed.find(tok);
      if (!v) continue;
      axpy(1.0, *v, mean);
      ++present;
    }
  }
  if (present > 0)
    for (double& x : mean) x /= static_cast<double>(present);
  if (cache) {
    cache->rows = std::move(rows);
    cache->present = present;
    cache->mean = mean;
  }
  return mean;
}

void question_backward(const QuestionEncoder& enc, const QuestionCache& cache,
                       std::span<const double> grad_mean, QuestionEncoder& grads) {
  if (!enc.table) return;  // frozen question side, nothing learns
  if (!grads.table) throw ContractError("question_backward: grads table missing");
  if (cache.present == 0) return;
  const double inv = 1.0 / static_cast<double>(cache.present);
  for (std::size_t row : cache.rows) {
    std::span<double> g = grads.table->vectors.row(row);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += grad_mean[j] * inv;
  }
}

namespace {

Vec concat2(std::span<const double> a, std::span<const double> b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Vec concat3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  Vec out;
  out.reserve(a.size() + b.size() + c.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

}  // namespace

Vec f_forward(const FTower& tower, const WordEmbeddingTable& fixed,
              std::span<const double> image, std::span<const std::string> tokens,
              const Vec* hidden_mask, bool training, FCache* cache) {
  Vec q = question_mean(tower.question, fixed, tokens, cache ? &cache->q : nullptr);
  Vec input = concat2(image, q);
  return mlp_forward(tower.fuse, input, hidden_mask, training, cache ? &cache->fuse : nullptr);
}

void f_backward(const FTower& tower, const FCache& cache,
                std::span<const double> grad_embedding, FTower& grads) {
  Vec d_input = mlp_backward(tower.fuse, cache.fuse, grad_embedding, grads.fuse);
  const std::size_t image_dim = d_input.size() - cache.q.mean.size();
  std::span<const double> d_q(d_input.data() + image_dim, cache.q.mean.size());
  question_backward(tower.question, cache.q, d_q, grads.question);
}

Vec g_forward(const GTower& tower, const WordEmbeddingTable& fixed, const std::string& answer,
              const Vec* hidden_mask, bool training, GCache* cache) {
  Vec mean = embed_text(split_whitespace(answer), fixed);
  if (tower.mode == GMode::fixed_average) {
    if (cache) cache->mean = mean;
    return mean;
  }
  if (!tower.mlp) throw ContractError("g_forward: learned mode without an MLP");
  Vec out = mlp_forward(*tower.mlp, mean, hidden_mask, training, cache ? &cache->mlp : nullptr);
  if (cache) cache->mean = std::move(mean);
  return out;
}

void g_backward(const GTower& tower, const GCache& cache,
                std::span<const double> grad_embedding, GTower& grads) {
  if (tower.mode == GMode::fixed_average) return;  // no learnable weights
  if (!tower.mlp || !grads.mlp) throw ContractError("g_backward: learned mode without an MLP");
  mlp_backward(*tower.mlp, cache.mlp, grad_embedding, *grads.mlp);
}

double u_score(const UTower& tower, std::span<const double> image,
               std::span<const double> q_mean, std::span<const double> a_mean,
               const Vec* hidden_mask, bool training, MlpCache* cache) {
  Vec input = concat3(image, q_mean, a_mean);
  Vec out = mlp_forward(tower.scorer, input, hidden_mask, training, cache);
  return out[0];
}

Vec u_score_backward(const UTower& tower, const MlpCache& cache, double grad_score,
                     UTower& grads) {
  Vec grad_out(1, grad_score);
  return mlp_backward(tower.scorer, cache, grad_out, grads.scorer);
}

Vec encode_iq(const FTower& tower, const WordEmbeddingTable& fixed,
              std::span<const double> image, std::span<const std::string> tokens) {
  return f_forward(tower, fixed, image, tokens, nullptr, false, nullptr);
}

Vec encode_answer(const GTower& tower, const WordEmbeddingTable& fixed,
                  const std::string& answer) {
  return g_forward(tower, fixed, answer, nullptr, false, nullptr);
}

}  // namespace pmcqa
