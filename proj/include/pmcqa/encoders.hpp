#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmcqa/corpus.hpp"
#include "pmcqa/mlp.hpp"

namespace pmcqa {

// Word vectors promoted to trainable parameters: a dense copy of a
// WordEmbeddingTable whose rows receive gradients. Only the question side
// ever owns one; answer-side lookups always read the original fixed table.
struct TrainableWordTable {
  std::vector<std::string> tokens;
  Matrix vectors;  // tokens.size() x dim
  std::unordered_map<std::string, std::size_t> index;

  std::size_t dim() const { return vectors.cols; }
  static TrainableWordTable copy_of(const WordEmbeddingTable& table);
};

// Question representation: mean of the vectors of in-table tokens. With a
// trainable table attached, lookups read (and gradients flow into) the copy;
// otherwise the fixed table is read and the question side stays frozen.
struct QuestionEncoder {
  std::optional<TrainableWordTable> table;
};

struct QuestionCache {
  std::vector<std::size_t> rows;  // trainable-table rows hit (empty when frozen)
  std::size_t present = 0;        // tokens that resolved to a vector
  Vec mean;
};

// Mean of in-table token vectors; unknown tokens are skipped and an input
// with no known tokens yields the zero vector.
Vec embed_text(std::span<const std::string> tokens, const WordEmbeddingTable& table);

Vec question_mean(const QuestionEncoder& enc, const WordEmbeddingTable& fixed,
                  std::span<const std::string> tokens, QuestionCache* cache = nullptr);

void question_backward(const QuestionEncoder& enc, const QuestionCache& cache,
                       std::span<const double> grad_mean, QuestionEncoder& grads);

// f tower: concat(image feature, question mean) -> MLP -> scaled embedding.
struct FTower {
  QuestionEncoder question;
  MlpParams fuse;
};

struct FCache {
  QuestionCache q;
  MlpCache fuse;
};

Vec f_forward(const FTower& tower, const WordEmbeddingTable& fixed,
              std::span<const double> image, std::span<const std::string> tokens,
              const Vec* hidden_mask, bool training, FCache* cache = nullptr);

void f_backward(const FTower& tower, const FCache& cache,
                std::span<const double> grad_embedding, FTower& grads);

enum class GMode { learned_mlp, fixed_average };

// g tower: answer word mean -> MLP -> scaled embedding. In fixed_average
// mode there are no learnable weights and the embedding is the raw mean, so
// the embedding dimension equals the word dimension.
struct GTower {
  GMode mode = GMode::learned_mlp;
  std::optional<MlpParams> mlp;
};

struct GCache {
  Vec mean;
  MlpCache mlp;
};

Vec g_forward(const GTower& tower, const WordEmbeddingTable& fixed, const std::string& answer,
              const Vec* hidden_mask, bool training, GCache* cache = nullptr);

void g_backward(const GTower& tower, const GCache& cache,
                std::span<const double> grad_embedding, GTower& grads);

// u tower (unfactorized baseline): concat(image, question mean, answer mean)
// -> MLP -> scalar compatibility score.
struct UTower {
  QuestionEncoder question;
  MlpParams scorer;
};

double u_score(const UTower& tower, std::span<const double> image,
               std::span<const double> q_mean, std::span<const double> a_mean,
               const Vec* hidden_mask, bool training, MlpCache* cache = nullptr);

// Returns d loss / d input over the full [image | q_mean | a_mean] concat;
// callers slice out the question block, the other two inputs are constants.
Vec u_score_backward(const UTower& tower, const MlpCache& cache, double grad_score,
                     UTower& grads);

// Inference-mode conveniences matching the deployment path.
Vec encode_iq(const FTower& tower, const WordEmbeddingTable& fixed,
              std::span<const double> image, std::span<const std::string> tokens);
Vec encode_answer(const GTower& tower, const WordEmbeddingTable& fixed,
                  const std::string& answer);

}  // namespace pmcqa
