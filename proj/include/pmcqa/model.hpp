#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmcqa/adam.hpp"
#include "pmcqa/corpus.hpp"
#include "pmcqa/encoders.hpp"

namespace pmcqa {

enum class ModelFamily { fpmc, upmc, cls };

std::string family_name(ModelFamily f);
ModelFamily family_from_name(const std::string& name);

std::string g_mode_name(GMode m);
GMode g_mode_from_name(const std::string& name);

struct ModelConfig {
  ModelFamily family = ModelFamily::fpmc;
  std::size_t word_dim = 300;
  std::size_t feature_dim = 2048;
  std::size_t hidden_dim = 4096;
  std::size_t embed_dim = 1024;
  double dropout_rate = 0.5;
  double output_scale = 10.0;
  GMode g_mode = GMode::learned_mlp;
  bool finetune_question = true;
  std::size_t top_k = 3000;  // CLS class count; also the default candidate cut

  std::size_t f_input_dim() const { return feature_dim + word_dim; }
  std::size_t u_input_dim() const { return feature_dim + 2 * word_dim; }
  // fixed-average g has no projection, so embeddings live in word space
  std::size_t effective_embed_dim() const {
    return g_mode == GMode::fixed_average ? word_dim : embed_dim;
  }
};

// Complete trainable state of one model plus the metadata needed to use it:
// the configuration and a snapshot of the training answer vocabulary. The
// same struct doubles as gradient storage (see zero_like).
struct ModelParams {
  ModelConfig config;
  AnswerVocabulary vocab;
  std::optional<FTower> f;         // fpmc, cls
  std::optional<GTower> g;         // fpmc
  std::optional<DenseLayer> cls_head;
  std::optional<UTower> u;         // upmc

  std::size_t class_count() const { return cls_head ? cls_head->out_dim() : 0; }
};

// Fresh parameters for the configured family. Weights draw from
// uniform(-sqrt(6/(fan_in+fan_out)), +sqrt) in canonical block order, biases
// start at zero, and trainable word tables copy the fixed table verbatim.
ModelParams init_params(const ModelConfig& config, const AnswerVocabulary& vocab,
                        const WordEmbeddingTable& table, std::uint64_t seed);

// Same structure, all parameter values zero. Gradient buffers are made this way.
ModelParams zero_like(const ModelParams& params);

// Canonical ordered view over every trainable block. Adam, checkpointing and
// gradient checking all walk this order; params and a zero_like clone yield
// aligned lists.
std::vector<ParamBlock> collect_param_blocks(ModelParams& params);

void zero_blocks(const std::vector<ParamBlock>& blocks);
void scale_blocks(const std::vector<ParamBlock>& blocks, double factor);

// Text checkpoint, byte-identical for identical parameters. Format documented
// in docs/formats.md.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace pmcqa
