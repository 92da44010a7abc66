#include <cmath>
#include <set>

#include "doctest.h"
#include "pmcqa/adam.hpp"
#include "pmcqa/errors.hpp"
#include "pmcqa/gradcheck.hpp"
#include "pmcqa/linalg.hpp"
#include "pmcqa/mlp.hpp"
#include "pmcqa/rng.hpp"
#include "pmcqa/schedule.hpp"
#include "pmcqa/util.hpp"

using namespace pmcqa;

TEST_CASE("linalg primitives") {
  CHECK(dot(Vec{1, 2, 3}, Vec{4, 5, 6}) == 32.0);
  CHECK(dot(Vec{}, Vec{}) == 0.0);

  Matrix m(2, 3);
  m(0, 0) = 1; m(0, 1) = 2; m(0, 2) = 3;
  m(1, 0) = 4; m(1, 1) = 5; m(1, 2) = 6;

  CHECK(matvec(m, Vec{1, 0, -1}) == Vec{-2, -2});

  Vec acc(3, 1.0);
  matvec_transpose_acc(m, Vec{1, 2}, acc);  // acc += M^T y
  CHECK(acc == Vec{10, 13, 16});

  Matrix o(2, 2);
  outer_acc(o, Vec{1, 2}, Vec{3, 4});  // o += y x^T
  CHECK(o.data == std::vector<double>{3, 4, 6, 8});
  outer_acc(o, Vec{1, 1}, Vec{1, 1});
  CHECK(o.data == std::vector<double>{4, 5, 7, 9});

  Vec y{1, 1};
  axpy(2.0, Vec{3, 4}, y);
  CHECK(y == Vec{7, 9});

  CHECK(all_finite(Vec{1, -2, 0}));
  CHECK(!all_finite(Vec{1, std::nan("")}));
  CHECK(!all_finite(Vec{std::numeric_limits<double>::infinity()}));
}

TEST_CASE("float serialization is shortest round-trip") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(0.0) == "0");
  for (double v : {0.1, 1.0 / 3.0, 1e-17, -123456.789, 5e300}) {
    CHECK(parse_double(format_double(v), "t") == v);
  }
  CHECK_THROWS_AS(parse_double("1.5x", "t"), FormatError);
  CHECK_THROWS_AS(parse_double("", "t"), FormatError);
  CHECK(parse_int("12", "t") == 12);
  CHECK(parse_int("-3", "t") == -3);
  CHECK_THROWS_AS(parse_int("4.5", "t"), FormatError);
  CHECK_THROWS_AS(parse_int("", "t"), FormatError);
}

namespace {

// identity-ish 1x1x1 net: both weights 1, biases 0
MlpParams unit_mlp(double dropout, double scale) {
  MlpParams p(1, 1, 1, dropout, scale);
  p.hidden.weight(0, 0) = 1.0;
  p.output.weight(0, 0) = 1.0;
  return p;
}

}  // namespace

TEST_CASE("mlp forward oracle on a unit network") {
  MlpParams p = unit_mlp(0.0, 10.0);
  Vec ones{1.0};

  // relu passes 0.5 through, the output affine is identity, then x10
  CHECK(mlp_forward(p, Vec{0.5}, &ones, true) == Vec{5.0});
  CHECK(mlp_forward(p, Vec{0.5}, nullptr, false) == Vec{5.0});
  // negative preactivation dies at the relu, only the scaled bias survives
  p.output.bias[0] = 0.25;
  CHECK(mlp_forward(p, Vec{-0.5}, nullptr, false) == Vec{2.5});
}

TEST_CASE("mlp backward oracle on a unit network") {
  MlpParams p = unit_mlp(0.0, 10.0);
  MlpParams g(1, 1, 1, 0.0, 10.0);
  MlpCache cache;
  Vec ones{1.0};
  mlp_forward(p, Vec{0.5}, &ones, true, &cache);

  Vec d_input = mlp_backward(p, cache, Vec{1.0}, g);
  CHECK(d_input == Vec{10.0});
  CHECK(g.output.weight(0, 0) == 5.0);   // d_out * hidden_post = 10 * 0.5
  CHECK(g.output.bias[0] == 10.0);
  CHECK(g.hidden.weight(0, 0) == 5.0);   // d_pre * input = 10 * 0.5
  CHECK(g.hidden.bias[0] == 10.0);

  // gradients accumulate across calls
  mlp_backward(p, cache, Vec{1.0}, g);
  CHECK(g.output.bias[0] == 20.0);
}

TEST_CASE("dropout regimes") {
  Vec input{0.5};

  SUBCASE("inference multiplies the activation by the keep rate") {
    MlpParams p = unit_mlp(0.5, 1.0);
    CHECK(mlp_forward(p, input, nullptr, false) == Vec{0.25});
  }

  SUBCASE("a zero mask entry kills the unit and its gradients") {
    MlpParams p = unit_mlp(0.5, 1.0);
    MlpParams g(1, 1, 1, 0.5, 1.0);
    MlpCache cache;
    Vec zero{0.0};
    CHECK(mlp_forward(p, input, &zero, true, &cache) == Vec{0.0});
    Vec d_input = mlp_backward(p, cache, Vec{1.0}, g);
    CHECK(d_input == Vec{0.0});
    CHECK(g.hidden.weight(0, 0) == 0.0);
    CHECK(g.output.bias[0] == 1.0);  // the output bias still sees the loss
  }

  SUBCASE("rate zero makes training with an all-ones mask equal inference") {
    MlpParams p = unit_mlp(0.0, 3.0);
    Vec ones{1.0};
    CHECK(mlp_forward(p, input, &ones, true) == mlp_forward(p, input, nullptr, false));
  }

  SUBCASE("mask contract is enforced") {
    MlpParams p = unit_mlp(0.5, 1.0);
    Vec ones{1.0};
    Vec wrong_len{1.0, 1.0};
    CHECK_THROWS_AS(mlp_forward(p, input, nullptr, true), ArgumentError);
    CHECK_THROWS_AS(mlp_forward(p, input, &ones, false), ArgumentError);
    CHECK_THROWS_AS(mlp_forward(p, input, &wrong_len, true), ArgumentError);
    CHECK_THROWS_AS(mlp_forward(p, Vec{1, 2}, &ones, true), ArgumentError);
  }
}

TEST_CASE("adam first step matches the closed form") {
  Vec x{1.0, -2.0};
  Vec g{0.5, -0.25};
  std::vector<ParamBlock> params{{"x", x.data(), x.size()}};
  std::vector<ParamBlock> grads{{"x", g.data(), g.size()}};
  AdamState state;
  state.init(params);
  const double lr = 0.1;
  adam_step(state, params, grads, lr);

  // after one step the bias corrections cancel: delta = -lr * g / (|g| + eps)
  for (std::size_t i = 0; i < x.size(); ++i) {
    double m_hat = (1 - state.beta1) * g[i] / (1 - state.beta1);
    double v_hat = (1 - state.beta2) * g[i] * g[i] / (1 - state.beta2);
    double expect = (i == 0 ? 1.0 : -2.0) - lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    CHECK(x[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(x[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("adam is deterministic and rejects non-finite gradients") {
  auto run = [](int steps) {
    Vec x{0.3};
    Vec g{0.0};
    std::vector<ParamBlock> params{{"x", x.data(), 1}};
    std::vector<ParamBlock> grads{{"x", g.data(), 1}};
    AdamState s;
    s.init(params);
    for (int i = 0; i < steps; ++i) {
      g[0] = x[0];  // gradient of x^2 / 2
      adam_step(s, params, grads, 0.05);
    }
    return x[0];
  };
  CHECK(run(25) == run(25));
  CHECK(std::abs(run(200)) < std::abs(run(5)));  // descends toward the minimum

  Vec x{0.0};
  Vec g{std::nan("")};
  std::vector<ParamBlock> params{{"bad_block", x.data(), 1}};
  std::vector<ParamBlock> grads{{"bad_block", g.data(), 1}};
  AdamState s;
  s.init(params);
  CHECK_THROWS_WITH_AS(adam_step(s, params, grads, 0.1), doctest::Contains("bad_block"),
                       NumericError);
}

TEST_CASE("learning rate halves every decay_epochs") {
  LrSchedule s;  // base 0.001, decay 15
  CHECK(lr_at_epoch(s, 0) == 0.001);
  CHECK(lr_at_epoch(s, 15) == 0.0005);
  CHECK(lr_at_epoch(s, 30) == 0.00025);
  CHECK(lr_at_epoch(s, 7) == doctest::Approx(0.001 * std::pow(0.5, 7.0 / 15.0)));
  LrSchedule fast{0.2, 1};
  CHECK(lr_at_epoch(fast, 3) == doctest::Approx(0.025));
}

TEST_CASE("rng streams") {
  SUBCASE("same seed, same stream") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  SUBCASE("fold separates purposes") {
    CHECK(Rng::fold(1, "shuffle") != Rng::fold(1, "negatives"));
    CHECK(Rng::fold(1, "shuffle") != Rng::fold(2, "shuffle"));
    CHECK(Rng::fold(1, std::uint64_t{0}) != Rng::fold(1, std::uint64_t{1}));
    CHECK(Rng::fold(1, "x") == Rng::fold(1, "x"));
  }

  SUBCASE("uniform stays in [0, 1)") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
      double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  SUBCASE("below is bounded and deterministic") {
    Rng r(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 300; ++i) {
      auto v = r.below(7);
      CHECK(v < 7);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);  // all residues hit over 300 draws
    CHECK(Rng(3).below(1000) == Rng(3).below(1000));
  }

  SUBCASE("shuffle permutes") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto sorted = v;
    Rng r(11);
    r.shuffle(v);
    CHECK(v != sorted);  // seed 11 moves this vector
    auto copy = v;
    std::sort(copy.begin(), copy.end());
    CHECK(copy == sorted);
  }

  SUBCASE("gaussian consumes exactly two uniforms") {
    Rng a(21), b(21);
    a.gaussian();
    b.uniform();
    b.uniform();
    CHECK(a.uniform() == b.uniform());
    // and produces a sane spread
    Rng r(22);
    double mean = 0.0;
    for (int i = 0; i < 2000; ++i) mean += r.gaussian();
    mean /= 2000;
    CHECK(std::abs(mean) < 0.1);
  }
}

TEST_CASE("grad_check accepts a true gradient and flags a wrong one") {
  auto loss = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  std::vector<double> x{0.7, -1.3, 2.0};
  std::vector<double> before = x;

  std::vector<double> good{2 * 0.7, 2 * -1.3, 2 * 2.0};
  CHECK(grad_check(loss, x, good) < 1e-6);
  CHECK(x == before);  // params restored

  std::vector<double> bad = good;
  bad[1] += 0.05;
  CHECK(grad_check(loss, x, bad) > 1e-3);
}
