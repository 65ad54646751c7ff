/* Copyright 2026 The aacl-lab Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "aacl/autodiff.hpp"
#include "aacl/error.hpp"
#include "aacl/gradcheck.hpp"
#include "aacl/optim.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aacl;
using testutil::random_tensor;

namespace {

// Element-wise triple loop, no shared code with the library kernels.
Tensor triple_loop(const Tensor& a, const Tensor& b) {
  Tensor c(Shape{a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

using OpBuilder = std::function<Var(Tape&, std::vector<Var>&)>;

// Checks d/dθ Σ(op(θ) ⊙ R) against central differences for every input.
double op_gradcheck(const OpBuilder& op, const std::vector<Shape>& shapes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < shapes.size(); ++i) params.push_back(testutil::random_param("x" + std::to_string(i), shapes[i], rng));
  std::vector<Parameter*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);

  Tensor weights;
  auto record = [&](Tape& tape) {
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    Var out = op(tape, vars);
    if (weights.empty()) weights = random_tensor(out.shape(), rng);
    return sum(mul(out, tape.constant(weights)));
  };
  auto loss = [&] {
    Tape tape;
    return record(tape).value().item();
  };
  auto analytic = [&] {
    Tape tape;
    Var l = record(tape);
    backward(tape, l, ptrs);
  };
  loss();  // fixes the weights
  return check_gradients(loss, analytic, ptrs, 1e-5).max_relative_error;
}

}  // namespace

TEST_CASE("matmul: identity and hand-computed products") {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(matmul_plain(Tensor::matrix({{1, 0}, {0, 1}}), m) == m);
  CHECK(matmul_plain(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item() == 11.0);
}

TEST_CASE("matmul: agrees with a triple-loop oracle") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor a = random_tensor({5, 7}, rng), b = random_tensor({7, 3}, rng);
    CHECK(max_abs_diff(matmul_plain(a, b), triple_loop(a, b)) < 1e-12);
    Tape tape;
    CHECK(max_abs_diff(matmul(tape.constant(a), tape.constant(b)).value(), triple_loop(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul: shape mismatch is a dimension error") {
  Tape tape;
  CHECK_THROWS_AS(matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))), DimensionError);
  CHECK_THROWS_AS(matmul_plain(Tensor({1, 2}), Tensor({3, 1})), DimensionError);
}

TEST_CASE("matmul: associative on well-conditioned triples") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = random_tensor({4, 6}, rng), b = random_tensor({6, 5}, rng), c = random_tensor({5, 3}, rng);
    CHECK(max_abs_diff(matmul_plain(matmul_plain(a, b), c), matmul_plain(a, matmul_plain(b, c))) < 1e-9);
  }
}

TEST_CASE("masked_softmax: fixed cases") {
  Mask all3(3, true);
  Tensor u = masked_softmax_values(std::vector<double>{1, 1, 1}, all3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tensor q = masked_softmax_values(std::vector<double>{0.0, std::log(3.0)}, Mask(2, true));
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-14));

  Tensor s = masked_softmax_values(std::vector<double>{5, 2}, Mask{true, false});
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 0.0);
}

TEST_CASE("masked_softmax: all positions masked is a domain error") {
  CHECK_THROWS_AS(masked_softmax_values(std::vector<double>{1, 2}, Mask(2, false)), DomainError);
  Tape tape;
  CHECK_THROWS_AS(masked_softmax(tape.constant(Tensor::vector({1, 2})), Mask(2, false)), DomainError);
}

TEST_CASE("masked_softmax: probability vector with exact zeros at masked positions") {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution keep(0.6);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rep % 17;
    Tensor x = random_tensor({n}, rng, -30, 30);
    Mask m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = keep(rng);
    m[rep % n] = true;
    Tape tape;
    Tensor p = masked_softmax(tape.constant(x), m).value();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      if (!m[i]) CHECK(p[i] == 0.0);
      total += p[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("layer_norm: fixed cases and moments") {
  Tape tape;
  Var g = tape.constant(Tensor::vector({1, 1, 1})), b = tape.constant(Tensor::vector({0, 0, 0}));
  Tensor c = layer_norm(tape.constant(Tensor::matrix({{2.5, 2.5, 2.5}})), g, b, kLayerNormEps).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(c[i] == 0.0);

  // eps → 0 limit of [1, −1] is [1, −1]; eps = 1e-5 shifts it by ~5e-6.
  Var g2 = tape.constant(Tensor::vector({1, 1})), b2 = tape.constant(Tensor::vector({0, 0}));
  Tensor pm = layer_norm(tape.constant(Tensor::matrix({{1, -1}})), g2, b2, 1e-15).value();
  CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-12));

  // Output variance is σ²/(σ²+eps): exact check, then the ≈1 check on rows
  // whose spread makes eps/σ² negligible.
  std::mt19937_64 rng(29);
  for (double spread : {3.0, 20.0}) {
    Tensor x = random_tensor({4, 8}, rng, -spread, spread);
    Var g8 = tape.constant(Tensor::vector(std::vector<double>(8, 1.0)));
    Var b8 = tape.constant(Tensor::vector(std::vector<double>(8, 0.0)));
    Tensor y = layer_norm(tape.constant(x), g8, b8, kLayerNormEps).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double xm = 0.0, xv = 0.0, mean = 0.0, var = 0.0;
      for (std::size_t c2 = 0; c2 < 8; ++c2) xm += x(r, c2) / 8.0;
      for (std::size_t c2 = 0; c2 < 8; ++c2) xv += (x(r, c2) - xm) * (x(r, c2) - xm) / 8.0;
      for (std::size_t c2 = 0; c2 < 8; ++c2) mean += y(r, c2) / 8.0;
      for (std::size_t c2 = 0; c2 < 8; ++c2) var += (y(r, c2) - mean) * (y(r, c2) - mean) / 8.0;
      CHECK(std::abs(mean) < 1e-9);
      CHECK(var == doctest::Approx(xv / (xv + kLayerNormEps)).epsilon(1e-12));
      if (spread > 10.0) CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("backward: sum and product rule") {
  Parameter x("x", Tensor::vector({0.5, -2, 7}));
  Tape tape;
  Parameter* px = &x;
  backward(tape, sum(tape.param(x)), std::span<Parameter* const>(&px, 1));
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad[i] == 1.0);

  Parameter a("a", Tensor::scalar(2)), b("b", Tensor::scalar(3));
  Tape t2;
  std::vector<Parameter*> ps{&a, &b};
  backward(t2, mul(t2.param(a), t2.param(b)), ps);
  CHECK(a.grad.item() == 3.0);
  CHECK(b.grad.item() == 2.0);
}

TEST_CASE("backward: non-scalar seed is rejected") {
  Parameter x("x", Tensor::vector({1, 2}));
  Tape tape;
  Parameter* px = &x;
  CHECK_THROWS_AS(backward(tape, tape.param(x), std::span<Parameter* const>(&px, 1)), InvalidArgument);
}

TEST_CASE("non-finite forward values raise a numeric error") {
  Tape tape;
  Var big = tape.constant(Tensor::vector({1e308, 1e308}));
  CHECK_THROWS_AS(scale(big, 10.0), NumericError);
}

TEST_CASE("finite differences: fixed functions") {
  Tensor g = finite_difference_grad([](const Tensor& t) { return t[0] * t[0]; }, Tensor::vector({3.0}), 1e-5);
  CHECK(std::abs(g[0] - 6.0) < 1e-8);
  Tensor ones = finite_difference_grad(
      [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.values()) s += v;
        return s;
      },
      Tensor::vector({0.3, -1, 4, 2}), 1e-5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(ones[i] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("primitive ops: autodiff matches central differences over 20 seeds") {
  struct Case {
    const char* name;
    OpBuilder op;
    std::vector<Shape> shapes;
  };
  const Mask mask5{true, false, true, true, false};
  const std::vector<std::size_t> ids{2, 0, 2, 3};
  std::vector<Case> cases = {
      {"matmul", [](Tape&, std::vector<Var>& v) { return matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
      {"transpose", [](Tape&, std::vector<Var>& v) { return transpose(v[0]); }, {{3, 4}}},
      {"reshape", [](Tape&, std::vector<Var>& v) { return reshape(v[0], {2, 6}); }, {{3, 4}}},
      {"add", [](Tape&, std::vector<Var>& v) { return add(v[0], v[1]); }, {{3, 4}, {3, 4}}},
      {"sub", [](Tape&, std::vector<Var>& v) { return sub(v[0], v[1]); }, {{3, 4}, {3, 4}}},
      {"mul", [](Tape&, std::vector<Var>& v) { return mul(v[0], v[1]); }, {{3, 4}, {3, 4}}},
      {"scale", [](Tape&, std::vector<Var>& v) { return scale(v[0], -1.7); }, {{3, 4}}},
      {"add_row", [](Tape&, std::vector<Var>& v) { return add_row(v[0], v[1]); }, {{3, 4}, {4}}},
      {"mul_row", [](Tape&, std::vector<Var>& v) { return mul_row(v[0], v[1]); }, {{3, 4}, {4}}},
      {"gelu", [](Tape&, std::vector<Var>& v) { return gelu(v[0]); }, {{3, 4}}},
      {"tanh", [](Tape&, std::vector<Var>& v) { return aacl::tanh(v[0]); }, {{3, 4}}},
      {"masked_softmax", [&](Tape&, std::vector<Var>& v) { return masked_softmax(v[0], mask5); }, {{5}}},
      {"masked_softmax_rows", [&](Tape&, std::vector<Var>& v) { return masked_softmax(v[0], mask5); }, {{3, 5}}},
      {"layer_norm", [](Tape&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2], kLayerNormEps); },
       {{3, 4}, {4}, {4}}},
      {"slice_cols", [](Tape&, std::vector<Var>& v) { return slice_cols(v[0], 1, 2); }, {{3, 4}}},
      {"concat_cols", [](Tape&, std::vector<Var>& v) { return concat_cols({v[0], v[1]}); }, {{3, 2}, {3, 3}}},
      {"concat_rows", [](Tape&, std::vector<Var>& v) { return concat_rows({v[0], v[1]}); }, {{2, 3}, {1, 3}}},
      {"stack_rows", [](Tape&, std::vector<Var>& v) { return stack_rows({v[0], v[1], v[0]}); }, {{4}, {4}}},
      {"mask_rows", [&](Tape&, std::vector<Var>& v) { return mask_rows(v[0], mask5); }, {{5, 3}}},
      {"gather_rows", [&](Tape&, std::vector<Var>& v) { return gather_rows(v[0], ids); }, {{4, 3}}},
      {"sum", [](Tape&, std::vector<Var>& v) { return sum(v[0]); }, {{3, 4}}},
      {"masked_mean_rows", [&](Tape&, std::vector<Var>& v) { return masked_mean_rows(v[0], mask5); }, {{5, 3}}},
      {"l2_normalize", [](Tape&, std::vector<Var>& v) { return l2_normalize(v[0]); }, {{6}}},
      {"dot", [](Tape&, std::vector<Var>& v) { return dot(v[0], v[1]); }, {{6}, {6}}},
      {"dropout",
       [](Tape&, std::vector<Var>& v) {
         std::mt19937_64 r(99);  // same mask on every evaluation
         return dropout(v[0], 0.3, r);
       },
       {{3, 4}}},
      {"diagonal_cross_entropy", [](Tape&, std::vector<Var>& v) { return diagonal_cross_entropy(v[0]); }, {{4, 4}}},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) worst = std::max(worst, op_gradcheck(c.op, c.shapes, seed));
    INFO(c.name);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("sgd: update rule and schedule") {
  Parameter p("p", Tensor::scalar(1.0));
  Parameter* pp = &p;
  SgdConfig cfg{0.1, 0.1, 10};
  sgd_step(std::span<Parameter* const>(&pp, 1), cfg, 0);
  CHECK(p.value.item() == 1.0);  // zero gradient
  p.grad[0] = 2.0;
  sgd_step(std::span<Parameter* const>(&pp, 1), cfg, 0);
  CHECK(p.value.item() == doctest::Approx(0.8).epsilon(1e-15));

  SgdConfig desk;  // 0.035, ×0.1 every 10 epochs
  CHECK(desk.rate_at(9) == doctest::Approx(0.035).epsilon(1e-15));
  CHECK(desk.rate_at(10) == doctest::Approx(0.0035).epsilon(1e-12));
}

TEST_CASE("sgd: zero gradients leave every parameter untouched") {
  std::mt19937_64 rng(41);
  std::vector<Parameter> ps;
  for (int i = 0; i < 5; ++i) ps.push_back(testutil::random_param("p", {3, 2}, rng));
  std::vector<Parameter*> ptrs;
  for (auto& p : ps) ptrs.push_back(&p);
  std::vector<Tensor> before;
  for (auto& p : ps) before.push_back(p.value);
  for (int epoch = 0; epoch < 30; ++epoch) sgd_step(ptrs, SgdConfig{}, epoch);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i].value == before[i]);
}
