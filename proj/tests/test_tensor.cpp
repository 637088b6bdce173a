#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "contingent/tensor.hpp"
#include "oracles.hpp"

using namespace contingent;

TEST_CASE("linear kernel matches naive matmul") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(17), n = 1 + rng.below(9);
    std::vector<double> x(m * k), w(n * k), b(n), y(m * n), yref;
    for (auto& v : x) v = rng.uniform(-2, 2);
    for (auto& v : w) v = rng.uniform(-2, 2);
    for (auto& v : b) v = rng.uniform(-2, 2);
    kern::linear_nt(x.data(), w.data(), b.data(), y.data(), m, k, n);
    oracle::matmul_nt_ref(x, w, b, yref, m, k, n);
    for (std::size_t i = 0; i < y.size(); ++i)
      REQUIRE(y[i] == Catch::Approx(yref[i]).margin(1e-12));
  }
}

TEST_CASE("log1m_tanh2 agrees with naive formula and stays finite when naive overflows") {
  for (double u : {-3.0, -1.5, -0.2, 0.0, 0.4, 2.7}) {
    const double naive = std::log(1.0 - std::tanh(u) * std::tanh(u));
    REQUIRE(kern::log1m_tanh2(u) == Catch::Approx(naive).epsilon(1e-12));
  }
  // naive form underflows to log(0) past ~19; stable form keeps going
  REQUIRE(std::isfinite(kern::log1m_tanh2(25.0)));
  REQUIRE(std::isfinite(kern::log1m_tanh2(-300.0)));
  REQUIRE(kern::log1m_tanh2(25.0) == Catch::Approx(2 * (std::log(2.0) - 25.0)).epsilon(1e-12));
}

TEST_CASE("softplus matches log1p(exp(x)) and is overflow safe") {
  for (double x : {-40.0, -3.0, 0.0, 2.0, 30.0}) {
    const double ref = x > 20 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    REQUIRE(kern::softplus(x) == Catch::Approx(ref).epsilon(1e-12));
  }
  REQUIRE(std::isfinite(kern::softplus(800.0)));
  REQUIRE(kern::softplus(800.0) == Catch::Approx(800.0));
}

TEST_CASE("gradient of w.x is x") {
  Tensor w(1, 3);
  w.data = {0.5, -1.0, 2.0};
  Tensor b(1);
  Tensor x(1, 3);
  x.data = {3.0, 5.0, -7.0};
  Tape tape;
  auto y = tape.linear(tape.constant(x), tape.param(w), tape.param(b));
  tape.backward(tape.sum_all(y));
  REQUIRE(w.grad == x.data);
  REQUIRE(b.grad[0] == 1.0);
}

TEST_CASE("tanh gradient at zero is one") {
  Tensor u(1, 1);
  Tape tape;
  auto y = tape.tanh_(tape.param(u));
  tape.backward(tape.sum_all(y));
  REQUIRE(u.grad[0] == 1.0);
}

TEST_CASE("unreachable parameters receive no gradient") {
  Tensor used(1, 1), unused(1, 1);
  used.data[0] = 2.0;
  unused.data[0] = 3.0;
  Tape tape;
  auto a = tape.param(used);
  tape.param(unused);  // on tape but not connected to the loss
  tape.backward(tape.sum_all(tape.square_(a)));
  REQUIRE(used.grad[0] == 4.0);
  REQUIRE(unused.grad.empty());
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor w(2, 2);
  Tape tape;
  auto y = tape.tanh_(tape.param(w));
  REQUIRE_THROWS_AS(tape.backward(y), StructuralError);
}

TEST_CASE("shape mismatches are structural errors") {
  Tensor a(2, 3), b(3, 2), bias(2);
  Tape tape;
  auto va = tape.param(a);
  auto vb = tape.param(b);
  REQUIRE_THROWS_AS(tape.add(va, vb), StructuralError);
  REQUIRE_THROWS_AS(tape.linear(va, vb, tape.param(bias)), StructuralError);
  REQUIRE_THROWS_AS(tape.slice_cols(va, 2, 2), StructuralError);
}

TEST_CASE("min ties route gradient to the first argument") {
  Tensor a(1, 1), b(1, 1);
  a.data[0] = b.data[0] = 1.5;
  Tape tape;
  auto y = tape.min_(tape.param(a), tape.param(b));
  tape.backward(tape.sum_all(y));
  REQUIRE(a.grad[0] == 1.0);
  REQUIRE((b.grad.empty() || b.grad[0] == 0.0));
}

TEST_CASE("clamp blocks gradient outside the interval") {
  Tensor u(1, 3);
  u.data = {-2.0, 0.3, 5.0};
  Tape tape;
  auto y = tape.clamp_(tape.param(u), -1.0, 1.0);
  tape.backward(tape.sum_all(y));
  REQUIRE(u.grad[0] == 0.0);
  REQUIRE(u.grad[1] == 1.0);
  REQUIRE(u.grad[2] == 0.0);
}

TEST_CASE("atanh_clamped inverts tanh inside the bound and blocks gradient outside") {
  Tensor u(1, 2);
  u.data = {0.4, 0.9999};  // second entry sits past the 0.999 bound
  Tape tape;
  auto y = tape.atanh_clamped(tape.param(u), 0.999);
  auto sp = tape.data(y);
  REQUIRE(sp[0] == Catch::Approx(std::atanh(0.4)));
  REQUIRE(sp[1] == Catch::Approx(std::atanh(0.999)));
  tape.backward(tape.sum_all(y));
  REQUIRE(u.grad[0] == Catch::Approx(1.0 / (1.0 - 0.16)));
  REQUIRE(u.grad[1] == 0.0);
}

TEST_CASE("tape reuse after clear gives fresh results") {
  Tensor w(1, 1);
  w.data[0] = 3.0;
  Tape tape;
  auto v1 = tape.sum_all(tape.square_(tape.param(w)));
  REQUIRE(tape.scalar(v1) == 9.0);
  tape.clear();
  w.data[0] = 4.0;
  auto v2 = tape.sum_all(tape.square_(tape.param(w)));
  REQUIRE(tape.scalar(v2) == 16.0);
  tape.backward(v2);
  REQUIRE(w.grad[0] == 8.0);
}

TEST_CASE("random graph gradients match central finite differences") {
  auto rep = oracle::fd_check_random_graphs(/*seed=*/42, /*count=*/30);
  INFO("checked " << rep.n_entries << " partials over " << rep.n_graphs << " graphs");
  REQUIRE(rep.n_graphs == 30);
  REQUIRE(rep.n_entries > 200);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("gradient accumulates across two backward passes") {
  Tensor w(1, 1);
  w.data[0] = 1.0;
  Tape tape;
  auto loss = tape.sum_all(tape.square_(tape.param(w)));
  tape.backward(loss);
  REQUIRE(w.grad[0] == 2.0);
  tape.clear();
  auto loss2 = tape.sum_all(tape.square_(tape.param(w)));
  tape.backward(loss2);
  REQUIRE(w.grad[0] == 4.0);  // += semantics, caller zeroes between steps
}
