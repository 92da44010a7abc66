#include <cmath>
#include <set>

#include "doctest.h"
#include "pmcqa/errors.hpp"
#include "pmcqa/objective.hpp"
#include "test_support.hpp"

using namespace pmcqa;
using test::make_triplet;

namespace {

AnswerVocabulary numbered_vocab(std::size_t n, std::int64_t hi_freq = 1) {
  AnswerVocabulary v;
  for (std::size_t i = 0; i < n; ++i) {
    std::string a = "ans" + std::to_string(i);
    v.index.emplace(a, v.answers.size());
    v.answers.push_back(a);
    v.frequency.push_back(i == 0 ? hi_freq : 1);
  }
  return v;
}

}  // namespace

TEST_CASE("build_mini_universe keeps first-occurrence order and upgrades positives") {
  std::vector<Triplet> batch{
      make_triplet("i1", {"q"}, {"a", "x"}, {"y"}),
      make_triplet("i2", {"q"}, {"y", "b"}, {"a", "z"}),
  };
  MiniUniverse u = build_mini_universe(batch);

  CHECK(u.answers == std::vector<std::string>{"a", "x", "y", "b", "z"});
  CHECK(u.in_batch_count == 5);
  // y entered through an incorrect set but is correct for i2
  CHECK(u.origin[2] == Origin::batch_positive);
  CHECK(u.origin[0] == Origin::batch_positive);
  CHECK(u.origin[4] == Origin::batch_negative);
  CHECK(u.position.at("b") == 3);
  CHECK(u.contains("z"));
  CHECK(!u.contains("w"));

  CHECK_THROWS_AS(build_mini_universe(std::vector<Triplet>{}), ArgumentError);
}

TEST_CASE("duplicate answers across triplets collapse to one universe slot") {
  std::vector<Triplet> batch{
      make_triplet("i1", {"q"}, {"red", "red", "blue"}, {"green"}),
      make_triplet("i2", {"q"}, {"red"}, {"blue"}),
  };
  MiniUniverse u = build_mini_universe(batch);
  CHECK(u.answers == std::vector<std::string>{"red", "blue", "green"});
  CHECK(u.in_batch_count == 3);
}

TEST_CASE("sample_negatives") {
  auto vocab = numbered_vocab(100);
  std::vector<Triplet> batch{make_triplet("i", {"q"},
                                          {"ans0", "ans1"}, {"ans2", "ans3", "ans4"})};
  MiniUniverse u = build_mini_universe(batch);
  REQUIRE(u.size() == 5);

  SUBCASE("m clips to the complement and draws are disjoint from the batch") {
    Rng rng(1);
    auto neg = sample_negatives(vocab, u, 3000, rng);
    CHECK(neg.size() == 95);
    std::set<std::string> seen(neg.begin(), neg.end());
    CHECK(seen.size() == 95);  // without replacement
    for (const auto& a : neg) CHECK(!u.contains(a));
  }

  SUBCASE("a smaller draw is a prefix of a larger one under the same stream") {
    Rng r1(42), r2(42);
    auto small = sample_negatives(vocab, u, 5, r1);
    auto large = sample_negatives(vocab, u, 20, r2);
    REQUIRE(small.size() == 5);
    REQUIRE(large.size() == 20);
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i] == large[i]);
  }

  SUBCASE("same seed, same draw; different seed moves it") {
    Rng r1(7), r2(7), r3(8);
    CHECK(sample_negatives(vocab, u, 10, r1) == sample_negatives(vocab, u, 10, r2));
    CHECK(sample_negatives(vocab, u, 10, r1) != sample_negatives(vocab, u, 10, r3));
  }

  SUBCASE("m zero draws nothing") {
    Rng rng(1);
    CHECK(sample_negatives(vocab, u, 0, rng).empty());
  }

  SUBCASE("frequency-weighted draws favor heavy answers and stay distinct") {
    // ans5 carries nearly all the mass among the out-of-batch answers
    auto heavy = numbered_vocab(100);
    heavy.frequency[5] = 1000000;
    Rng rng(3);
    auto neg = sample_negatives(heavy, u, 4, rng, true);
    CHECK(neg.size() == 4);
    std::set<std::string> seen(neg.begin(), neg.end());
    CHECK(seen.size() == 4);
    CHECK(seen.count("ans5") == 1);
    for (const auto& a : neg) CHECK(!u.contains(a));
  }
}

TEST_CASE("append_negatives extends the universe and rejects duplicates") {
  std::vector<Triplet> batch{make_triplet("i", {"q"}, {"a"}, {"b"})};
  MiniUniverse u = build_mini_universe(batch);
  append_negatives(u, std::vector<std::string>{"c", "d"});
  CHECK(u.answers == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(u.in_batch_count == 2);  // sampled entries do not count as in-batch
  CHECK(u.origin[2] == Origin::sampled);
  CHECK_THROWS_AS(append_negatives(u, std::vector<std::string>{"a"}), ContractError);
  CHECK_THROWS_AS(append_negatives(u, std::vector<std::string>{"e", "e"}), ContractError);
}

TEST_CASE("weight kind names round-trip") {
  for (auto k : {WeightKind::one_hot, WeightKind::multi_hot, WeightKind::soft,
                 WeightKind::wups})
    CHECK(weight_kind_from_name(weight_kind_name(k)) == k);
  CHECK_THROWS_AS(weight_kind_from_name("bogus"), ArgumentError);
}

TEST_CASE("compute_weights") {
  // universe: [red dog, blue cat, big dog]
  std::vector<Triplet> batch{
      make_triplet("i", {"q"}, {"red dog", "red dog", "blue cat"}, {"big dog"})};
  MiniUniverse u = build_mini_universe(batch);
  const Triplet& t = batch[0];

  SUBCASE("one_hot puts unit mass on the dominant answer") {
    WeightingRule rule{WeightKind::one_hot};
    auto w = compute_weights(rule, t, u);
    REQUIRE(w.has_value());
    CHECK(*w == Vec{1.0, 0.0, 0.0});
  }

  SUBCASE("multi_hot counts multiplicity") {
    WeightingRule rule{WeightKind::multi_hot};
    CHECK(*compute_weights(rule, t, u) == Vec{2.0, 1.0, 0.0});
  }

  SUBCASE("soft divides multiplicity by the annotation count") {
    WeightingRule rule{WeightKind::soft};
    auto w = compute_weights(rule, t, u);
    CHECK((*w)[0] == 2.0 / 3.0);
    CHECK((*w)[1] == 1.0 / 3.0);
    CHECK((*w)[2] == 0.0);
  }

  SUBCASE("wups tiers by similarity to the dominant answer") {
    SimilarityTable sim;
    sim.put("red dog", "blue cat", 0.95);
    sim.put("red dog", "big dog", 0.5);
    WeightingRule rule{WeightKind::wups, 0.9, 8.0, &sim};
    auto w = compute_weights(rule, t, u);
    CHECK(*w == Vec{8.0, 1.0, 0.0});  // self, above threshold, below

    WeightingRule strict{WeightKind::wups, 0.96, 8.0, &sim};
    CHECK(*compute_weights(strict, t, u) == Vec{8.0, 0.0, 0.0});

    WeightingRule scaled{WeightKind::wups, 0.9, 3.0, &sim};
    CHECK(*compute_weights(scaled, t, u) == Vec{3.0, 1.0, 0.0});

    WeightingRule missing{WeightKind::wups};
    CHECK_THROWS_AS(compute_weights(missing, t, u), ArgumentError);
  }

  SUBCASE("a triplet with no mass in the universe is skipped as nullopt") {
    std::vector<Triplet> other{make_triplet("j", {"q"}, {"zebra"}, {"yak"})};
    MiniUniverse v = build_mini_universe(other);
    WeightingRule one{WeightKind::one_hot};
    WeightingRule multi{WeightKind::multi_hot};
    CHECK(!compute_weights(one, t, v).has_value());
    CHECK(!compute_weights(multi, t, v).has_value());
    SimilarityTable sim;  // dominant is dissimilar to everything present
    WeightingRule wups{WeightKind::wups, 0.9, 8.0, &sim};
    CHECK(!compute_weights(wups, t, v).has_value());
  }

  SUBCASE("multi_hot keeps partial mass when only some correct answers are present") {
    // zebra is nowhere in u, blue cat is; the present answer carries the mass
    Triplet partial = make_triplet("j", {"q"}, {"blue cat", "zebra"}, {"red dog"});
    WeightingRule multi{WeightKind::multi_hot};
    auto w = compute_weights(multi, partial, u);
    REQUIRE(w.has_value());
    CHECK(*w == Vec{0.0, 1.0, 0.0});
  }

  SUBCASE("empty correct set is a caller error") {
    Triplet bad = make_triplet("i", {"q"}, {}, {});
    WeightingRule rule{WeightKind::one_hot};
    CHECK_THROWS_AS(compute_weights(rule, bad, u), ArgumentError);
  }
}

TEST_CASE("pmc_posterior") {
  SUBCASE("two logits ln2 apart give 2/3 and 1/3") {
    Vec p = pmc_posterior_from_logits(Vec{std::log(2.0), 0.0});
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("probabilities sum to one") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      Vec logits(1 + trial % 7);
      for (double& l : logits) l = rng.uniform(-30.0, 30.0);
      Vec p = pmc_posterior_from_logits(logits);
      double sum = 0.0;
      for (double x : p) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("an exactly representable shift leaves the posterior bitwise unchanged") {
    Vec base{0.0, 1.0, 2.0, -3.0};
    Vec shifted{16.0, 17.0, 18.0, 13.0};
    CHECK(pmc_posterior_from_logits(base) == pmc_posterior_from_logits(shifted));
  }

  SUBCASE("inner-product form matches the logit form") {
    Vec f{1.0, -0.5};
    std::vector<Vec> answers{{2.0, 0.0}, {0.0, 4.0}, {1.0, 1.0}};
    Vec logits{2.0, -2.0, 0.5};
    CHECK(pmc_posterior(f, answers) == pmc_posterior_from_logits(logits));
  }

  SUBCASE("a single candidate gets probability one") {
    CHECK(pmc_posterior_from_logits(Vec{123.0}) == Vec{1.0});
  }

  SUBCASE("rejects empty and non-finite input") {
    CHECK_THROWS_AS(pmc_posterior_from_logits(Vec{}), ArgumentError);
    CHECK_THROWS_AS(pmc_posterior_from_logits(Vec{std::nan("")}), NumericError);
  }
}

TEST_CASE("softmax_nll") {
  SUBCASE("equal logits with unit total mass cost ln(n)") {
    Vec logits{0.7, 0.7, 0.7};
    Vec w{2.0 / 3.0, 1.0 / 3.0, 0.0};
    auto r = softmax_nll(logits, w);
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }

  SUBCASE("gradient matches total_w * p - w") {
    Vec logits{1.0, -0.5, 2.0};
    Vec w{3.0, 0.0, 1.0};
    auto r = softmax_nll(logits, w);
    Vec p = pmc_posterior_from_logits(logits);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(r.grad_logits[j] == doctest::Approx(4.0 * p[j] - w[j]).epsilon(1e-12));

    // central differences over the loss itself
    for (std::size_t j = 0; j < 3; ++j) {
      const double h = 1e-6;
      Vec hi = logits, lo = logits;
      hi[j] += h;
      lo[j] -= h;
      double numeric = (softmax_nll(hi, w).loss - softmax_nll(lo, w).loss) / (2 * h);
      CHECK(r.grad_logits[j] == doctest::Approx(numeric).epsilon(1e-5));
    }
  }

  SUBCASE("a single-candidate universe has zero loss and zero gradient") {
    auto r = softmax_nll(Vec{5.0}, Vec{1.0});
    CHECK(r.loss == 0.0);
    CHECK(r.grad_logits == Vec{0.0});
  }

  SUBCASE("loss scales linearly in the weights") {
    Vec logits{0.3, -0.2};
    auto base = softmax_nll(logits, Vec{1.0, 0.0});
    auto scaled = softmax_nll(logits, Vec{8.0, 0.0});
    CHECK(scaled.loss == doctest::Approx(8.0 * base.loss).epsilon(1e-12));
  }

  SUBCASE("extreme logit gaps stay finite thanks to max stabilization") {
    auto r = softmax_nll(Vec{1000.0, 0.0}, Vec{0.0, 1.0});
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == doctest::Approx(1000.0));
  }

  SUBCASE("contract violations") {
    CHECK_THROWS_AS(softmax_nll(Vec{1.0}, Vec{1.0, 2.0}), ArgumentError);
    CHECK_THROWS_AS(softmax_nll(Vec{1.0, 2.0}, Vec{0.0, 0.0}), ArgumentError);
    CHECK_THROWS_AS(softmax_nll(Vec{1.0, 2.0}, Vec{1.0, -0.5}), ArgumentError);
    CHECK_THROWS_AS(softmax_nll(Vec{}, Vec{}), ArgumentError);
    CHECK_THROWS_AS(softmax_nll(Vec{std::nan("")}, Vec{1.0}), NumericError);
  }
}

TEST_CASE("weighted_nll wires inner products into the softmax") {
  Vec f{0.4, -1.2, 0.7};
  std::vector<Vec> answers{{1.0, 0.0, 0.5}, {-0.3, 0.2, 0.0}, {0.0, 1.0, 1.0}};
  Vec w{2.0, 0.0, 1.0};

  Vec logits(3);
  for (std::size_t j = 0; j < 3; ++j) logits[j] = dot(f, answers[j]);
  auto flat = softmax_nll(logits, w);
  auto r = weighted_nll(f, answers, w);
  CHECK(r.loss == flat.loss);

  SUBCASE("embedding gradients agree with finite differences") {
    const double h = 1e-6;
    for (std::size_t k = 0; k < f.size(); ++k) {
      Vec hi = f, lo = f;
      hi[k] += h;
      lo[k] -= h;
      double numeric = (weighted_nll(hi, answers, w).loss -
                        weighted_nll(lo, answers, w).loss) / (2 * h);
      CHECK(r.grad_f[k] == doctest::Approx(numeric).epsilon(1e-5));
    }
    for (std::size_t j = 0; j < answers.size(); ++j)
      for (std::size_t k = 0; k < f.size(); ++k) {
        auto hi = answers, lo = answers;
        hi[j][k] += h;
        lo[j][k] -= h;
        double numeric = (weighted_nll(f, hi, w).loss -
                          weighted_nll(f, lo, w).loss) / (2 * h);
        CHECK(r.grad_answers[j][k] == doctest::Approx(numeric).epsilon(1e-5));
      }
  }

  SUBCASE("dimension mismatches are rejected") {
    std::vector<Vec> bad{{1.0, 0.0}};
    CHECK_THROWS_AS(weighted_nll(f, bad, Vec{1.0}), ArgumentError);
  }
}
