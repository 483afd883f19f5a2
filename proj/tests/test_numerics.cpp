#include "mvae/error.hpp"
#include "mvae/numerics/adam.hpp"
#include "mvae/numerics/gradcheck.hpp"
#include "mvae/numerics/ops.hpp"
#include "mvae/numerics/rng.hpp"
#include "mvae/numerics/tape.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

using namespace mvae;

namespace {

Tensor random_tensor(RngStream& s, Shape shape, double lo = -2.0, double hi = 2.0) {
  Eigen::VectorXd v(element_count(shape));
  for (auto& x : v) x = lo + (hi - lo) * s.uniform01();
  return Tensor(std::move(shape), std::move(v));
}

Tensor weighted(const Tensor& y, std::uint64_t salt) {
  RngStream s(salt, 5);
  return sum(y * random_tensor(s, y.shape(), -1.0, 1.0));
}

}  // namespace

TEST_CASE("matmul") {
  const Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  SUBCASE("identity") {
    const Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    CHECK(matmul(eye, a).values() == a.values());
  }
  SUBCASE("projector") {
    const Tensor p = Tensor::from_values({2, 2}, {1, 0, 0, 0});
    const Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
    CHECK(matmul(p, b).values() == Tensor::from_values({2, 2}, {5, 6, 0, 0}).values());
  }
  SUBCASE("triple-loop oracle") {
    RngStream s(1);
    const Tensor x = random_tensor(s, {3, 4});
    const Tensor y = random_tensor(s, {4, 2});
    const Tensor z = matmul(x, y);
    REQUIRE(z.shape() == Shape{3, 2});
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (Index k = 0; k < 4; ++k) acc += x.at(i, k) * y.at(k, j);
        CHECK(std::abs(z.at(i, j) - acc) < 1e-12);
      }
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string what = e.what();
      CHECK(what.find("2x3") != std::string::npos);
    }
  }
}

TEST_CASE("binary ops and broadcasting") {
  CHECK(add(Tensor::from_values({2}, {1, 2}), Tensor::from_values({2}, {0, 0})).values() ==
        Tensor::from_values({2}, {1, 2}).values());
  CHECK((Tensor::from_values({2}, {2, 3}) * 2.0).values() == Tensor::from_values({2}, {4, 6}).values());

  RngStream s(2);
  const Tensor a = random_tensor(s, {2, 3});
  const Tensor b = random_tensor(s, {1, 3}, 0.5, 2.0);
  const Tensor tiled = Tensor::from_values({2, 3}, {b[0], b[1], b[2], b[0], b[1], b[2]});
  for (BinaryOp op : {BinaryOp::add, BinaryOp::sub, BinaryOp::mul, BinaryOp::div}) {
    const Tensor broadcast = apply_binary(op, a, b);
    const Tensor explicit_tile = apply_binary(op, a, tiled);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 3; ++c) {
        double expect = 0.0;
        switch (op) {
          case BinaryOp::add: expect = a.at(r, c) + b[c]; break;
          case BinaryOp::sub: expect = a.at(r, c) - b[c]; break;
          case BinaryOp::mul: expect = a.at(r, c) * b[c]; break;
          case BinaryOp::div: expect = a.at(r, c) / b[c]; break;
        }
        CHECK(std::abs(broadcast.at(r, c) - expect) <= 1e-15);
        CHECK(std::abs(broadcast.at(r, c) - explicit_tile.at(r, c)) <= 1e-15);
      }
  }

  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2, 2})), DimensionError);
  CHECK_THROWS_AS(div(Tensor::from_values({1}, {1.0}), Tensor::from_values({1}, {0.0})), NumericError);
}

TEST_CASE("unary ops") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(exp(Tensor::scalar(0.0)).item() == 1.0);

  SUBCASE("log of a non-positive entry names the index") {
    try {
      log(Tensor::from_values({3}, {1.0, 2.0, -1.0}));
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
  SUBCASE("tanh derivative at 0.7") {
    const GradCheckReport r = grad_check_report([](const Tensor& x) { return tanh(x); }, Tensor::scalar(0.7), 1e-6);
    const double exact = 1.0 - std::tanh(0.7) * std::tanh(0.7);
    CHECK(std::abs(r.analytic[0] - exact) < 1e-15);
    CHECK(std::abs(r.numeric[0] - r.analytic[0]) / std::abs(exact) < 1e-7);
  }
  SUBCASE("exp overflow is an error") { CHECK_THROWS_AS(exp(Tensor::scalar(1000.0)), NumericError); }
}

TEST_CASE("reductions") {
  CHECK(sum(Tensor::from_values({3}, {1, 2, 3})).item() == 6.0);
  CHECK(mean(Tensor::constant({4, 5}, 2.5)).item() == 2.5);

  RngStream s(3);
  const Tensor a = random_tensor(s, {2, 3});
  const Tensor col = sum(a, 0);
  REQUIRE(col.shape() == Shape{3});
  for (Index c = 0; c < 3; ++c) CHECK(col[c] == a.at(0, c) + a.at(1, c));
  CHECK(sum(a, -1).shape() == Shape{2});
  CHECK(mean(a, 1, true).shape() == Shape{2, 1});
  CHECK_THROWS_AS(sum(a, 2), DimensionError);
}

TEST_CASE("log_sum_exp") {
  CHECK(std::abs(log_sum_exp(Tensor::from_values({2}, {0, 0}), 0).item() - std::log(2.0)) < 1e-15);
  CHECK(std::abs(log_sum_exp(Tensor::from_values({2}, {-1e6, 0}), 0).item()) < 1e-12);

  RngStream s(4);
  const Tensor x = random_tensor(s, {100}, -5.0, 5.0);
  long double acc = 0.0L;
  for (Index i = 0; i < x.size(); ++i) acc += std::exp(static_cast<long double>(x[i]));
  CHECK(std::abs(log_sum_exp(x, 0).item() - static_cast<double>(std::log(acc))) < 1e-12);

  const Tensor rows = random_tensor(s, {4, 6}, -30.0, 30.0);
  const Tensor lse = log_sum_exp(rows, 1);
  for (Index r = 0; r < 4; ++r) {
    double naive = 0.0;
    for (Index c = 0; c < 6; ++c) naive += std::exp(rows.at(r, c));
    CHECK(std::abs(lse[r] - std::log(naive)) < 1e-12);
  }
  CHECK_THROWS(log_sum_exp(Tensor::zeros({2, 0}), 1));
}

TEST_CASE("backward") {
  SUBCASE("x squared at 3") {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor x = tape.watch(Tensor::scalar(3.0));
    const GradientMap g = tape.backward(square(x));
    CHECK(g[x].item() == 6.0);
  }
  SUBCASE("constant loss gives zero gradient") {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor x = tape.watch(Tensor::from_values({2}, {1.0, 2.0}));
    const Tensor c = Tensor::scalar(4.0);
    const GradientMap g = tape.backward(c + 0.0 * sum(x));
    CHECK(g[x].values().isZero());
    CHECK(g[x].shape() == x.shape());
  }
  SUBCASE("every leaf gets a gradient of its own shape") {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor used = tape.watch(Tensor::zeros({2, 3}));
    const Tensor unused = tape.watch(Tensor::zeros({4}));
    const GradientMap g = tape.backward(sum(used));
    CHECK(g[used].shape() == Shape{2, 3});
    CHECK(g[unused].shape() == Shape{4});
    CHECK(g[unused].values().isZero());
  }
  SUBCASE("non-scalar loss and consumed tape") {
    GradTape tape;
    TapeScope scope(tape);
    const Tensor x = tape.watch(Tensor::from_values({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(x * 2.0), TapeError);
    tape.backward(sum(x));
    CHECK_THROWS_AS(tape.backward(sum(x)), TapeError);
  }
  SUBCASE("two-layer MLP loss") {
    RngStream s(5);
    const Tensor input = random_tensor(s, {5, 3});
    const Tensor w2 = random_tensor(s, {4, 2});
    const Tensor b1 = random_tensor(s, {4});
    auto loss = [&](const Tensor& w1) { return mean(square(matmul(tanh(matmul(input, w1) + b1), w2))); };
    CHECK(grad_check(loss, random_tensor(s, {3, 4}), 1e-5) < 1e-5);
  }
}

TEST_CASE("grad_check") {
  const GradCheckReport r = grad_check_report([](const Tensor& x) { return sigmoid(x); }, Tensor::scalar(0.0), 1e-5);
  CHECK(r.analytic[0] == 0.25);
  CHECK(r.max_relative_error < 1e-7);

  CHECK(grad_check([](const Tensor& x) { return sum(x * 3.0); }, Tensor::from_values({3}, {1, -2, 5}), 1e-5) < 1e-10);

  int calls = 0;
  CHECK_THROWS_AS(grad_check([&](const Tensor& x) { return sum(x) + static_cast<double>(++calls); }, Tensor::scalar(1.0),
                             1e-5),
                  DomainError);
  CHECK_THROWS_AS(grad_check([](const Tensor& x) { return sum(x); }, Tensor::scalar(1.0), 0.0), DomainError);
}

TEST_CASE("every differentiable op passes finite differences on random inputs") {
  using F = ScalarFunction;
  std::map<std::string, std::function<F(RngStream&)>> ops;
  ops["matmul"] = [](RngStream& s) { Tensor w = random_tensor(s, {4, 3}); return F([w](const Tensor& x) { return weighted(matmul(x, w), 1); }); };
  ops["add"] = [](RngStream& s) { Tensor b = random_tensor(s, {4}); return F([b](const Tensor& x) { return weighted(x + b, 2); }); };
  ops["sub"] = [](RngStream& s) { Tensor b = random_tensor(s, {4}); return F([b](const Tensor& x) { return weighted(b - x, 3); }); };
  ops["mul"] = [](RngStream& s) { Tensor b = random_tensor(s, {4}); return F([b](const Tensor& x) { return weighted(x * b, 4); }); };
  ops["div"] = [](RngStream& s) { Tensor b = random_tensor(s, {4}, 0.5, 2.0); return F([b](const Tensor& x) { return weighted(x / b, 5); }); };
  ops["div.denominator"] = [](RngStream& s) { Tensor b = random_tensor(s, {4}); return F([b](const Tensor& x) { return weighted(b / (square(x) + 0.5), 6); }); };
  ops["neg"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(-x, 7); }); };
  ops["exp"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(exp(x), 8); }); };
  ops["log"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(log(square(x) + 0.3), 9); }); };
  ops["sigmoid"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(sigmoid(x), 10); }); };
  ops["relu"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(relu(x), 11); }); };
  ops["tanh"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(tanh(x), 12); }); };
  ops["square"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(square(x), 13); }); };
  ops["softplus"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(softplus(x), 14); }); };
  ops["sum.axis"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(sum(x, 0), 15); }); };
  ops["mean.axis"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(mean(x, 1), 16); }); };
  ops["log_sum_exp"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(log_sum_exp(x, 1), 17); }); };
  ops["log_softmax"] = [](RngStream&) { return F([](const Tensor& x) { return weighted(log_softmax(x, 1), 18); }); };

  for (const auto& [name, make] : ops) {
    CAPTURE(name);
    RngStream s(100, std::hash<std::string>{}(name));
    for (int trial = 0; trial < 10; ++trial) {
      const F f = make(s);
      Tensor x = random_tensor(s, {3, 4});
      if (name == "relu") {
        // Keep clear of the kink.
        Eigen::VectorXd v = x.values();
        for (auto& e : v) e = (e < 0 ? -1.0 : 1.0) * (0.05 + std::abs(e));
        x = Tensor(x.shape(), v);
      }
      CHECK(grad_check(f, x, 1e-5) < 1e-5);
    }
  }
}

TEST_CASE("non-finite values never survive an op") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(add(Tensor::from_values({2}, {1.0, nan}), Tensor::scalar(1.0)), NumericError);
  CHECK_THROWS_AS(matmul(Tensor::from_values({1, 1}, {1e200}), Tensor::from_values({1, 1}, {1e200})), NumericError);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves the parameter bitwise unchanged") {
    RngStream s(6);
    const Tensor p0 = random_tensor(s, {3, 2});
    AdamState state;
    Tensor p = p0;
    for (int t = 0; t < 25; ++t) p = adam_step(p, Tensor::zeros({3, 2}), state, {0.1});
    CHECK(p.values() == p0.values());
    CHECK(state.step == 25);
  }
  SUBCASE("moments decay toward zero") {
    AdamState state;
    Tensor p = Tensor::scalar(0.0);
    p = adam_step(p, Tensor::scalar(1.0), state, {0.1});
    const double m1 = state.first_moment[0], v1 = state.second_moment[0];
    adam_step(p, Tensor::scalar(0.0), state, {0.1});
    CHECK(std::abs(state.first_moment[0]) < std::abs(m1));
    CHECK(std::abs(state.second_moment[0]) < std::abs(v1));
  }
  SUBCASE("first step") {
    AdamState state;
    const Tensor p = adam_step(Tensor::scalar(0.0), Tensor::scalar(1.0), state, {0.1});
    CHECK(p.item() < 0.0);
    CHECK(std::abs(p.item()) >= 0.0999);
    CHECK(std::abs(p.item()) <= 0.1);
  }
  SUBCASE("two steps against a hand-rolled trace") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g[2] = {0.3, -1.7};
    double x = 0.5, m = 0.0, v = 0.0;
    AdamState state;
    Tensor p = Tensor::scalar(0.5);
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1) * g[t - 1];
      v = b2 * v + (1 - b2) * g[t - 1] * g[t - 1];
      const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      x -= lr * mh / (std::sqrt(vh) + eps);
      p = adam_step(p, Tensor::scalar(g[t - 1]), state, {lr, b1, b2, eps});
    }
    CHECK(std::abs(p.item() - x) < 1e-12);
    CHECK(state.step == 2);
  }
  SUBCASE("errors") {
    AdamState state;
    CHECK_THROWS_AS(adam_step(Tensor::zeros({2}), Tensor::zeros({3}), state), DimensionError);
    CHECK_THROWS_AS(adam_step(Tensor::zeros({1}), Tensor::from_values({1}, {std::numeric_limits<double>::infinity()}),
                              state),
                    NumericError);
  }
}

TEST_CASE("rng") {
  SUBCASE("golden sequence") {
    RngStream s(42, 7);
    CHECK(s.next_u64() == 0xfca4635ea3f0964bULL);
    CHECK(s.next_u64() == 0x658b441465a34f67ULL);
    CHECK(s.next_u64() == 0x077515948ff7cc5fULL);
    CHECK(s.next_u64() == 0x1624af8c01abebb3ULL);
    CHECK(RngStream(42, 7).uniform01() == std::ldexp(static_cast<double>(0xfca4635ea3f0964bULL >> 11), -53));
  }
  SUBCASE("replay and independence") {
    RngStream a(9, 1), b(9, 1), c(9, 2);
    int same_as_other_stream = 0;
    for (int i = 0; i < 100; ++i) {
      const std::uint64_t x = a.next_u64();
      CHECK(x == b.next_u64());
      same_as_other_stream += x == c.next_u64();
    }
    CHECK(same_as_other_stream == 0);
    CHECK(RngStream(9, 1).split(3).next_u64() == RngStream(9, 1).split(3).next_u64());
    CHECK(RngStream(9, 1).split(3).next_u64() != RngStream(9, 1).split(4).next_u64());
  }
  SUBCASE("uniform01 range") {
    RngStream s(10);
    for (int i = 0; i < 100000; ++i) {
      const double u = s.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
    }
  }
  SUBCASE("subset frequencies") {
    RngStream s(11);
    const std::vector<Index> ground{0, 1, 2};
    std::map<std::vector<Index>, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[draw_subset(s, ground, 2)];
    REQUIRE(counts.size() == 3);
    for (const auto& [subset, count] : counts) {
      CHECK(subset.size() == 2);
      CHECK(std::abs(static_cast<double>(count) / n - 1.0 / 3.0) < 0.02);
    }
    CHECK_THROWS_AS(draw_subset(s, ground, 4), DomainError);
  }
  SUBCASE("normal moments") {
    RngStream s(12);
    const Tensor z = standard_normal(s, {1000000});
    const double m = z.values().mean();
    const double var = (z.values().array() - m).square().sum() / (z.size() - 1);
    CHECK(std::abs(m) < 0.005);
    CHECK(std::abs(var - 1.0) < 0.01);
  }
  SUBCASE("permutation") {
    RngStream s(13);
    std::vector<Index> p = permutation(s, 50);
    std::sort(p.begin(), p.end());
    for (Index i = 0; i < 50; ++i) CHECK(p[static_cast<std::size_t>(i)] == i);
  }
}
