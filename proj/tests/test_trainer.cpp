#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "pmcqa/errors.hpp"
#include "pmcqa/synth.hpp"
#include "pmcqa/trainer.hpp"
#include "pmcqa/util.hpp"
#include "test_support.hpp"

using namespace pmcqa;
using test::TempDir;
using test::make_triplet;

namespace {

struct Task {
  SynthData data;
  TrainConfig config;
};

Task tiny_task(ModelFamily family) {
  SynthSpec spec;
  spec.num_attributes = 2;
  spec.values_per_attribute = 4;
  spec.train_vocab = 6;
  spec.target_vocab = 4;
  spec.train_triplets = 24;
  spec.target_triplets = 12;
  spec.num_incorrect = 2;
  spec.word_dim = 4;
  spec.feature_dim = 5;

  Task t{generate_synthetic(spec, 11), {}};
  t.config.model.family = family;
  t.config.model.word_dim = 4;
  t.config.model.feature_dim = 5;
  t.config.model.hidden_dim = 8;
  t.config.model.embed_dim = 6;
  t.config.model.dropout_rate = 0.5;
  t.config.model.top_k = 16;
  t.config.batch_size = 8;
  t.config.negatives = 3;
  t.config.epochs = 3;
  t.config.seed = 5;
  return t;
}

std::string checkpoint_bytes(const ModelParams& params, const TempDir& tmp,
                             const std::string& name) {
  save_checkpoint(params, tmp.file(name));
  return read_file(tmp.file(name));
}

}  // namespace

TEST_CASE("effective_negatives family defaults") {
  TrainConfig c;
  c.model.family = ModelFamily::fpmc;
  CHECK(c.effective_negatives() == 3000);
  c.model.family = ModelFamily::upmc;
  CHECK(c.effective_negatives() == 300);
  c.model.family = ModelFamily::cls;
  CHECK(c.effective_negatives() == 0);
  c.negatives = 17;
  CHECK(c.effective_negatives() == 17);
  c.negatives = 0;
  CHECK(c.effective_negatives() == 0);
}

TEST_CASE("init_params") {
  Task t = tiny_task(ModelFamily::fpmc);
  auto vocab = build_answer_vocabulary(t.data.train);

  SUBCASE("is deterministic in the seed") {
    TempDir tmp;
    auto a = init_params(t.config.model, vocab, t.data.words, 5);
    auto b = init_params(t.config.model, vocab, t.data.words, 5);
    auto c = init_params(t.config.model, vocab, t.data.words, 6);
    CHECK(checkpoint_bytes(a, tmp, "a") == checkpoint_bytes(b, tmp, "b"));
    CHECK(checkpoint_bytes(a, tmp, "a2") != checkpoint_bytes(c, tmp, "c"));
  }

  SUBCASE("weights respect the uniform fan bound, biases start at zero") {
    auto p = init_params(t.config.model, vocab, t.data.words, 5);
    REQUIRE(p.f.has_value());
    const Matrix& w = p.f->fuse.hidden.weight;
    double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double v : w.data) {
      CHECK(std::abs(v) <= bound);
    }
    for (double b : p.f->fuse.hidden.bias) CHECK(b == 0.0);
    CHECK(p.vocab.answers == vocab.answers);
  }

  SUBCASE("the trainable question table starts as a verbatim copy") {
    auto p = init_params(t.config.model, vocab, t.data.words, 5);
    REQUIRE(p.f->question.table.has_value());
    const auto& copy = *p.f->question.table;
    for (std::size_t i = 0; i < copy.tokens.size(); ++i) {
      const Vec* orig = t.data.words.find(copy.tokens[i]);
      REQUIRE(orig != nullptr);
      for (std::size_t j = 0; j < copy.dim(); ++j)
        CHECK(copy.vectors(i, j) == (*orig)[j]);
    }
  }

  SUBCASE("finetune_question=false freezes the question side") {
    ModelConfig frozen = t.config.model;
    frozen.finetune_question = false;
    auto p = init_params(frozen, vocab, t.data.words, 5);
    CHECK(!p.f->question.table.has_value());
    auto blocks = collect_param_blocks(p);
    for (const auto& b : blocks) CHECK(b.name.find("question") == std::string::npos);
  }

  SUBCASE("family decides which towers exist") {
    auto f = init_params(t.config.model, vocab, t.data.words, 1);
    CHECK((f.f && f.g && !f.u && !f.cls_head));

    ModelConfig uc = t.config.model;
    uc.family = ModelFamily::upmc;
    auto u = init_params(uc, vocab, t.data.words, 1);
    CHECK((!u.f && !u.g && u.u && !u.cls_head));

    ModelConfig cc = t.config.model;
    cc.family = ModelFamily::cls;
    cc.top_k = 4;
    auto c = init_params(cc, vocab, t.data.words, 1);
    CHECK((c.f && !c.g && !c.u && c.cls_head));
    CHECK(c.class_count() == 4);

    cc.top_k = 100;  // clamps to the vocabulary
    CHECK(init_params(cc, vocab, t.data.words, 1).class_count() == vocab.size());
  }

  SUBCASE("the answer side owns no trainable word table in any family") {
    for (auto fam : {ModelFamily::fpmc, ModelFamily::upmc, ModelFamily::cls}) {
      ModelConfig mc = t.config.model;
      mc.family = fam;
      auto p = init_params(mc, vocab, t.data.words, 1);
      auto blocks = collect_param_blocks(p);
      std::size_t question_tables = 0;
      for (const auto& b : blocks)
        if (b.name.find("question") != std::string::npos) ++question_tables;
      CHECK(question_tables <= 1);  // only ever the question side
    }
  }
}

TEST_CASE("checkpoints round-trip byte for byte") {
  for (auto fam : {ModelFamily::fpmc, ModelFamily::upmc, ModelFamily::cls}) {
    CAPTURE(family_name(fam));
    Task t = tiny_task(fam);
    t.config.epochs = 1;
    auto result = train(t.data.train, t.data.train_features, t.data.words, t.config);

    TempDir tmp;
    save_checkpoint(result.params, tmp.file("ck.txt"));
    auto loaded = load_checkpoint(tmp.file("ck.txt"));
    save_checkpoint(loaded, tmp.file("ck2.txt"));
    CHECK(read_file(tmp.file("ck.txt")) == read_file(tmp.file("ck2.txt")));
    CHECK(loaded.vocab.answers == result.params.vocab.answers);
    CHECK(family_name(loaded.config.family) == family_name(fam));
  }
}

TEST_CASE("checkpoint loader rejects damage") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 0;
  auto result = train(t.data.train, t.data.train_features, t.data.words, t.config);
  TempDir tmp;
  save_checkpoint(result.params, tmp.file("ck.txt"));
  std::string body = read_file(tmp.file("ck.txt"));

  auto corrupt = [&](const std::string& from, const std::string& to) {
    std::string damaged = body;
    auto pos = damaged.find(from);
    REQUIRE(pos != std::string::npos);
    damaged.replace(pos, from.size(), to);
    pmcqa::write_file(tmp.file("bad.txt"), damaged);
    return tmp.file("bad.txt");
  };

  CHECK_THROWS_AS(load_checkpoint(corrupt("pmcqa-checkpoint v1", "pmcqa-checkpoint v9")),
                  FormatError);
  CHECK_THROWS_AS(load_checkpoint(corrupt("family = fpmc", "family = xyz")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.txt")), IoError);
}

TEST_CASE("training is deterministic") {
  for (auto fam : {ModelFamily::fpmc, ModelFamily::upmc, ModelFamily::cls}) {
    CAPTURE(family_name(fam));
    Task t = tiny_task(fam);
    t.config.epochs = 2;
    auto a = train(t.data.train, t.data.train_features, t.data.words, t.config);
    auto b = train(t.data.train, t.data.train_features, t.data.words, t.config);
    TempDir tmp;
    CHECK(checkpoint_bytes(a.params, tmp, "a") == checkpoint_bytes(b.params, tmp, "b"));
    CHECK(a.log.to_csv(false) == b.log.to_csv(false));

    auto c = t;
    c.config.seed = 99;
    auto moved = train(c.data.train, c.data.train_features, c.data.words, c.config);
    CHECK(checkpoint_bytes(a.params, tmp, "a2") != checkpoint_bytes(moved.params, tmp, "c"));
  }
}

TEST_CASE("zero epochs returns the untouched initialization") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 0;
  auto result = train(t.data.train, t.data.train_features, t.data.words, t.config);
  CHECK(result.log.epochs.empty());

  auto vocab = build_answer_vocabulary(t.data.train);
  auto fresh = init_params(t.config.model, vocab, t.data.words, t.config.seed);
  TempDir tmp;
  CHECK(checkpoint_bytes(result.params, tmp, "trained") ==
        checkpoint_bytes(fresh, tmp, "fresh"));
}

TEST_CASE("training reduces the loss on the tiny task") {
  for (auto fam : {ModelFamily::fpmc, ModelFamily::upmc}) {
    CAPTURE(family_name(fam));
    Task t = tiny_task(fam);
    t.config.epochs = 12;
    t.config.schedule.base_lr = 0.01;
    auto r = train(t.data.train, t.data.train_features, t.data.words, t.config);
    REQUIRE(r.log.epochs.size() == 12);
    CHECK(r.log.epochs.back().mean_loss < r.log.epochs.front().mean_loss);
  }
}

TEST_CASE("the train log tracks the schedule and counts epochs") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 4;
  t.config.schedule = {0.02, 2};
  auto r = train(t.data.train, t.data.train_features, t.data.words, t.config);
  REQUIRE(r.log.epochs.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(r.log.epochs[e].epoch == e);
    CHECK(r.log.epochs[e].lr == lr_at_epoch(t.config.schedule, e));
    CHECK(r.log.epochs[e].skipped == 0);
    CHECK(r.log.epochs[e].seconds >= 0.0);
  }

  std::string csv = r.log.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "epoch,lr,loss,skipped,seconds");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  std::string bare = r.log.to_csv(false);
  CHECK(bare.substr(0, bare.find('\n')) == "epoch,lr,loss,skipped");
}

TEST_CASE("cls drops triplets whose dominant answer is outside the class list") {
  // six answers, each correct exactly once: frequency ties rank them
  // lexicographically, so top_k=3 keeps {pa, pb, pc}
  Dataset ds;
  WordEmbeddingTable words(3);
  int n = 0;
  for (const char* a : {"pc", "pa", "pe", "pb", "pd", "pf"}) {
    words.put(a, Vec{0.1 * ++n, -0.2, 0.3});
    ds.triplets.push_back(make_triplet("i" + std::to_string(n), {"what"}, {a}, {}));
  }
  words.put("what", Vec{0.5, 0.5, 0.5});
  FeatureStore feats(2);
  for (int i = 1; i <= 6; ++i) feats.put("i" + std::to_string(i), Vec{0.4, -0.1});

  TrainConfig cfg;
  cfg.model.family = ModelFamily::cls;
  cfg.model.word_dim = 3;
  cfg.model.feature_dim = 2;
  cfg.model.hidden_dim = 4;
  cfg.model.embed_dim = 4;
  cfg.model.dropout_rate = 0.0;
  cfg.model.top_k = 3;
  cfg.batch_size = 6;
  cfg.epochs = 2;

  auto r = train(ds, feats, words, cfg);
  for (const auto& e : r.log.epochs) CHECK(e.skipped == 3);

  cfg.model.top_k = 6;
  auto all = train(ds, feats, words, cfg);
  for (const auto& e : all.log.epochs) CHECK(e.skipped == 0);
}

TEST_CASE("sampled universes with enough draws cover the vocabulary exactly") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.model.dropout_rate = 0.0;
  auto vocab = build_answer_vocabulary(t.data.train);
  auto params = init_params(t.config.model, vocab, t.data.words, 3);

  std::vector<Triplet> batch(t.data.train.triplets.begin(),
                             t.data.train.triplets.begin() + 4);
  MiniUniverse u = build_mini_universe(batch);
  Rng rng(77);
  auto negatives = sample_negatives(vocab, u, vocab.size() * 10, rng);
  CHECK(u.in_batch_count + negatives.size() == vocab.size());
  append_negatives(u, negatives);

  std::set<std::string> in_universe(u.answers.begin(), u.answers.end());
  std::set<std::string> in_vocab(vocab.answers.begin(), vocab.answers.end());
  CHECK(in_universe == in_vocab);

  // the batch loss equals a hand computation over the same ordered universe
  WeightingRule rule{WeightKind::multi_hot};
  DropoutPlan plan;
  Rng mask_rng(1);
  plan = draw_dropout_plan(params.config, batch.size(), u.size(), mask_rng);
  BatchEval ev = fpmc_batch(params, batch, t.data.train_features, t.data.words, rule, u,
                            plan, nullptr);

  std::vector<Vec> answer_emb(u.size());
  for (std::size_t j = 0; j < u.size(); ++j)
    answer_emb[j] = encode_answer(*params.g, t.data.words, u.answers[j]);

  double expect = 0.0;
  std::size_t used = 0;
  for (const Triplet& tr : batch) {
    auto w = compute_weights(rule, tr, u);
    if (!w) continue;
    Vec f = encode_iq(*params.f, t.data.words, t.data.train_features.get(tr.image_id),
                      tr.question_tokens);
    Vec logits(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) logits[j] = dot(f, answer_emb[j]);
    double m = logits[0];
    for (double l : logits) m = std::max(m, l);
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - m);
    const double log_sum = std::log(sum);
    for (std::size_t j = 0; j < u.size(); ++j)
      if ((*w)[j] != 0.0) expect += (*w)[j] * (log_sum - (logits[j] - m));
    ++used;
  }
  CHECK(ev.used == used);
  CHECK(ev.loss_sum == expect);  // identical floats, not an approximation
}

TEST_CASE("per-batch negative streams are prefix-stable across different m") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 2;

  auto capture = [&](long long m) {
    std::vector<std::vector<std::string>> universes;
    TrainConfig cfg = t.config;
    cfg.negatives = m;
    train(t.data.train, t.data.train_features, t.data.words, cfg,
          [&](const BatchDiag& d) { universes.push_back(d.universe->answers); });
    return universes;
  };

  auto small = capture(2);
  auto large = capture(5);
  REQUIRE(small.size() == large.size());
  for (std::size_t b = 0; b < small.size(); ++b) {
    REQUIRE(small[b].size() <= large[b].size());
    for (std::size_t i = 0; i < small[b].size(); ++i) CHECK(small[b][i] == large[b][i]);
  }
}

TEST_CASE("observer sees every batch with consistent counters") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 2;
  t.config.batch_size = 7;  // 24 triplets -> batches of 7,7,7,3

  std::vector<BatchDiag> seen;
  std::vector<std::size_t> universe_sizes;
  const std::size_t vocab_size = build_answer_vocabulary(t.data.train).size();
  train(t.data.train, t.data.train_features, t.data.words, t.config,
        [&](const BatchDiag& d) {
          seen.push_back(d);
          REQUIRE(d.universe != nullptr);
          universe_sizes.push_back(d.universe->size());
        });
  REQUIRE(seen.size() == 8);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    CHECK(seen[i].epoch == static_cast<int>(i / 4));
    CHECK(seen[i].batch_index == i % 4);
    std::size_t batch_len = (i % 4 == 3) ? 3 : 7;
    CHECK(seen[i].used + seen[i].skipped == batch_len);
    // answers never leave the vocabulary, so the universe is capped by it
    CHECK(universe_sizes[i] >= 1);
    CHECK(universe_sizes[i] <= vocab_size);
  }

  // cls passes no universe
  Task c = tiny_task(ModelFamily::cls);
  c.config.epochs = 1;
  bool saw_null = false;
  train(c.data.train, c.data.train_features, c.data.words, c.config,
        [&](const BatchDiag& d) { saw_null = d.universe == nullptr; });
  CHECK(saw_null);
}

TEST_CASE("train rejects broken configurations") {
  Task t = tiny_task(ModelFamily::fpmc);

  Dataset empty;
  CHECK_THROWS_AS(train(empty, t.data.train_features, t.data.words, t.config),
                  ArgumentError);

  TrainConfig bad = t.config;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(t.data.train, t.data.train_features, t.data.words, bad),
                  ArgumentError);

  bad = t.config;
  bad.epochs = -1;
  CHECK_THROWS_AS(train(t.data.train, t.data.train_features, t.data.words, bad),
                  ArgumentError);

  bad = t.config;
  bad.weighting.kind = WeightKind::wups;  // no similarity table attached
  CHECK_THROWS_AS(train(t.data.train, t.data.train_features, t.data.words, bad),
                  ArgumentError);
}

TEST_CASE("every weighting rule trains end to end") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.epochs = 1;

  SimilarityTable sim;  // sparse similarity; self matches still give mass
  for (auto kind : {WeightKind::one_hot, WeightKind::multi_hot, WeightKind::soft,
                    WeightKind::wups}) {
    CAPTURE(weight_kind_name(kind));
    TrainConfig cfg = t.config;
    cfg.weighting.kind = kind;
    cfg.weighting.similarity = kind == WeightKind::wups ? &sim : nullptr;
    auto r = train(t.data.train, t.data.train_features, t.data.words, cfg);
    CHECK(r.log.epochs.size() == 1);
    CHECK(std::isfinite(r.log.epochs[0].mean_loss));
    CHECK(r.log.epochs[0].mean_loss > 0.0);
  }
}

TEST_CASE("g tower in fixed_average mode trains without g parameters") {
  Task t = tiny_task(ModelFamily::fpmc);
  t.config.model.g_mode = GMode::fixed_average;
  t.config.epochs = 2;
  auto r = train(t.data.train, t.data.train_features, t.data.words, t.config);
  REQUIRE(r.params.g.has_value());
  CHECK(!r.params.g->mlp.has_value());

  auto blocks = collect_param_blocks(r.params);
  for (const auto& b : blocks) CHECK(b.name.find("g.") == std::string::npos);

  // embeddings are raw word means of the fixed table
  const std::string& a = r.params.vocab.answers[0];
  CHECK(encode_answer(*r.params.g, t.data.words, a) ==
        embed_text(split_whitespace(a), t.data.words));
}
