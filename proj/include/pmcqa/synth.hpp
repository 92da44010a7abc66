#pragma once

#include <cstdint>
#include <string>

#include "pmcqa/corpus.hpp"

namespace pmcqa {

// Synthetic compositional QA task. Every answer is a distinct tuple of latent
// attribute values; its phrase names those values with shared words, and the
// image feature is a noisy sum of per-value directions. Because unseen
// answers reuse seen value words, embeddings learned on the train split can
// transfer to them.
struct SynthSpec {
  std::size_t num_attributes = 4;
  std::size_t values_per_attribute = 5;
  std::size_t words_per_value = 1;
  std::size_t train_vocab = 30;
  std::size_t target_vocab = 20;
  double overlap_fraction = 0.5;  // fraction of the target pool drawn from train answers
  std::size_t train_triplets = 200;
  std::size_t target_triplets = 200;
  std::size_t num_incorrect = 3;
  double feature_noise = 0.1;
  std::size_t word_dim = 16;
  std::size_t feature_dim = 32;
};

struct SynthData {
  WordEmbeddingTable words;
  Dataset train;
  FeatureStore train_features;
  Dataset target;
  FeatureStore target_features;
};

// Pure function of (spec, seed): equal inputs give structurally equal output,
// and the writers below then produce byte-identical files.
SynthData generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

// Writes word_vectors.txt, train/{triplets.tsv,features.txt} and
// target/{triplets.tsv,features.txt} under dir.
void write_synthetic(const SynthData& data, const std::string& dir);

}  // namespace pmcqa
