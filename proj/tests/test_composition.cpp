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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aacl/composition.hpp"
#include "aacl/error.hpp"
#include "aacl/gradcheck.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aacl;
using testutil::random_tensor;

namespace {

CompositionConfig small_config(Variant v = Variant::AdditiveHadamard, std::size_t blocks = 2) {
  CompositionConfig c;
  c.d = 8;
  c.num_heads = 2;
  c.num_blocks = blocks;
  c.variant = v;
  return c;
}

void zero(Parameter& p) { p.value.fill(0.0); }

// Explicit-loop additive layer: h = mask·(xW_h + b_h), α = softmax(h·w/√d_h),
// c = Σα_i h_i, o_i = h_i + (h_i ⊙ c | h_i + c)W_o + b_o on valid rows.
Tensor reference_additive(const Tensor& x, const AdditiveHeadParams& p, const Mask& mask, bool hadamard) {
  const std::size_t n = x.rows(), din = x.cols(), dh = p.hidden_w.value.cols();
  std::vector<std::vector<double>> h(n, std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < dh; ++j) {
      double s = p.hidden_b.value[j];
      for (std::size_t q = 0; q < din; ++q) s += x(i, q) * p.hidden_w.value(q, j);
      h[i][j] = s;
    }
  }
  std::vector<double> score(n, 0.0);
  double mx = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < dh; ++j) score[i] += h[i][j] * p.context_w.value[j];
    score[i] /= std::sqrt(static_cast<double>(dh));
    mx = std::max(mx, score[i]);
  }
  double z = 0.0;
  std::vector<double> alpha(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) z += alpha[i] = std::exp(score[i] - mx);
  std::vector<double> c(dh, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] /= z;
    for (std::size_t j = 0; j < dh; ++j) c[j] += alpha[i] * h[i][j];
  }
  Tensor out(Shape{n, dh});
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    std::vector<double> m(dh);
    for (std::size_t j = 0; j < dh; ++j) m[j] = hadamard ? h[i][j] * c[j] : h[i][j] + c[j];
    for (std::size_t j = 0; j < dh; ++j) {
      double s = p.out_b.value[j];
      for (std::size_t q = 0; q < dh; ++q) s += m[q] * p.out_w.value(q, j);
      out(i, j) = h[i][j] + s;
    }
  }
  return out;
}

AdditiveHeadParams random_head(std::size_t dh, std::mt19937_64& rng) {
  AdditiveHeadParams p;
  p.hidden_w = testutil::random_param("hw", {dh, dh}, rng);
  p.hidden_b = testutil::random_param("hb", {dh}, rng);
  p.context_w = testutil::random_param("cw", {dh}, rng);
  p.out_w = testutil::random_param("ow", {dh, dh}, rng);
  p.out_b = testutil::random_param("ob", {dh}, rng);
  return p;
}

TokenSequence random_sequence(Tape& tape, std::size_t n, std::size_t d, std::size_t n_valid, std::mt19937_64& rng) {
  Tensor x = random_tensor({n, d}, rng);
  Mask m(n, false);
  for (std::size_t i = 0; i < n_valid; ++i) m[i] = true;
  for (std::size_t i = n_valid; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = 0.0;
  return {tape.constant(x), m};
}

}  // namespace

TEST_CASE("additive attention: hand-computed two-token case") {
  Tape tape;
  Var h = tape.constant(Tensor::matrix({{1.0}, {3.0}}));
  Var w = tape.constant(Tensor::vector({1.0}));
  AttentionResult r = additive_attention(h, w, Mask{true, true});
  const double a0 = 1.0 / (1.0 + std::exp(2.0));  // scores 1 and 3
  CHECK(r.alpha.value()[0] == doctest::Approx(a0).epsilon(1e-14));
  CHECK(r.alpha.value()[1] == doctest::Approx(1.0 - a0).epsilon(1e-14));
  CHECK(r.alpha.value()[0] == doctest::Approx(0.1192).epsilon(1e-3));
  CHECK(r.context.value()[0] == doctest::Approx(a0 * 1.0 + (1.0 - a0) * 3.0).epsilon(1e-14));
  CHECK(r.context.value()[0] == doctest::Approx(2.7616).epsilon(1e-4));
}

TEST_CASE("additive attention: zero scoring vector gives the masked mean") {
  std::mt19937_64 rng(3);
  Tape tape;
  Tensor hv = random_tensor({5, 4}, rng);
  Mask m{true, true, false, true, false};
  for (std::size_t j = 0; j < 4; ++j) hv(2, j) = hv(4, j) = 0.0;
  AttentionResult r = additive_attention(tape.constant(hv), tape.constant(Tensor({4})), m);
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.alpha.value()[i] == (m[i] ? doctest::Approx(1.0 / 3.0) : 0.0));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(r.context.value()[j] == doctest::Approx((hv(0, j) + hv(1, j) + hv(3, j)) / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("additive attention: single token and all-masked input") {
  Tape tape;
  Var h = tape.constant(Tensor::matrix({{0.3, -2.0}}));
  AttentionResult r = additive_attention(h, tape.constant(Tensor::vector({5, 5})), Mask{true});
  CHECK(r.alpha.value()[0] == 1.0);
  CHECK(r.context.value() == Tensor::vector({0.3, -2.0}));
  CHECK_THROWS_AS(additive_attention(h, tape.constant(Tensor::vector({5, 5})), Mask{false}), DomainError);
}

TEST_CASE("additive layer: zero output transform is the identity on h") {
  std::mt19937_64 rng(7);
  for (Variant v : {Variant::AdditiveHadamard, Variant::AdditiveSum}) {
    AdditiveHeadParams p = random_head(4, rng);
    zero(p.out_w);
    zero(p.out_b);
    Tape tape;
    Mask m{true, true, true, false};
    HeadOutput out = additive_attention_layer(tape, tape.constant(random_tensor({4, 4}, rng)), p, m, v);
    CHECK(out.tokens.value() == out.hidden);
  }
}

TEST_CASE("additive layer: zero context reduces to h + F_o(h)") {
  // c = 0 with the sum interaction: o_i = h_i + F_o(h_i). Forced by taking
  // a single valid token whose hidden value is zero except through F_o.
  std::mt19937_64 rng(8);
  AdditiveHeadParams p = random_head(3, rng);
  zero(p.hidden_w);
  zero(p.hidden_b);
  Tape tape;
  HeadOutput out =
      additive_attention_layer(tape, tape.constant(random_tensor({2, 3}, rng)), p, Mask{true, true}, Variant::AdditiveSum);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(out.tokens.value()(i, j) == doctest::Approx(p.out_b.value[j]));
}

TEST_CASE("additive layer: matches the straight-line oracle") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    for (bool hadamard : {true, false}) {
      AdditiveHeadParams p = random_head(8, rng);
      Tensor x = random_tensor({4, 8}, rng);
      Mask m{true, true, true, true};
      if (rep % 2) m[2] = false;
      Tape tape;
      HeadOutput out = additive_attention_layer(tape, tape.constant(x), p, m,
                                                hadamard ? Variant::AdditiveHadamard : Variant::AdditiveSum);
      Tensor ref = reference_additive(x, p, m, hadamard);
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out.tokens.value()[i] - ref[i]) < 1e-10);
    }
  }
}

TEST_CASE("compose_block: shape preservation and identical tokens") {
  std::mt19937_64 rng(13);
  for (Variant v : {Variant::AdditiveHadamard, Variant::AdditiveSum, Variant::DotProduct}) {
    CompositionConfig cfg = small_config(v);
    BlockParams bp = BlockParams::init(cfg, 0, rng);
    for (std::size_t n : {1u, 3u, 9u}) {
      Tape tape;
      TokenSequence s = random_sequence(tape, n, 8, n, rng);
      BlockResult r = compose_block(tape, s, bp, v);
      CHECK(r.sequence.tokens.value().shape() == Shape{n, 8});
    }
    Tape tape;
    Tensor row = random_tensor({1, 8}, rng);
    Tensor same(Shape{5, 8});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 8; ++j) same(i, j) = row(0, j);
    BlockResult r = compose_block(tape, {tape.constant(same), Mask(5, true)}, bp, v);
    const Tensor& y = r.sequence.tokens.value();
    for (std::size_t i = 1; i < 5; ++i)
      for (std::size_t j = 0; j < 8; ++j) CHECK(y(i, j) == doctest::Approx(y(0, j)).epsilon(1e-13));
  }
}

TEST_CASE("compose_block: permutation equivariant over valid tokens") {
  std::mt19937_64 rng(17);
  for (Variant v : {Variant::AdditiveHadamard, Variant::AdditiveSum, Variant::DotProduct}) {
    BlockParams bp = BlockParams::init(small_config(v), 0, rng);
    Tape tape;
    TokenSequence s = random_sequence(tape, 6, 8, 5, rng);
    Tensor swapped = s.tokens.value();
    for (std::size_t j = 0; j < 8; ++j) std::swap(swapped(1, j), swapped(3, j));
    Tensor a = compose_block(tape, s, bp, v).sequence.tokens.value();
    Tensor b = compose_block(tape, {tape.constant(swapped), s.valid}, bp, v).sequence.tokens.value();
    for (std::size_t i = 0; i < 6; ++i) {
      const std::size_t k = i == 1 ? 3 : i == 3 ? 1 : i;
      for (std::size_t j = 0; j < 8; ++j) CHECK(b(i, j) == doctest::Approx(a(k, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("compose_block: gradients match finite differences") {
  for (Variant v : {Variant::AdditiveHadamard, Variant::AdditiveSum, Variant::DotProduct}) {
    std::mt19937_64 rng(19);
    BlockParams bp = BlockParams::init(small_config(v), 0, rng);
    Tensor x = random_tensor({5, 8}, rng);
    Mask m{true, true, true, true, false};
    for (std::size_t j = 0; j < 8; ++j) x(4, j) = 0.0;
    Tensor weights = random_tensor({5, 8}, rng);
    std::vector<Parameter*> params;
    bp.collect(params);
    auto record = [&](Tape& tape) {
      Var y = compose_block(tape, {tape.constant(x), m}, bp, v).sequence.tokens;
      return sum(mul(y, tape.constant(weights)));
    };
    GradCheckReport rep = check_gradients(
        [&] {
          Tape t;
          return record(t).value().item();
        },
        [&] {
          Tape t;
          backward(t, record(t), params);
        },
        params);
    INFO(to_string(v));
    CHECK(rep.max_relative_error <= 1e-4);
  }
}

TEST_CASE("dot-product layer: single valid token and uniform weights") {
  std::mt19937_64 rng(23);
  BlockParams bp = BlockParams::init(small_config(Variant::DotProduct), 0, rng);
  DotHeadParams& p = bp.dot_heads[0];
  Tape tape;
  Tensor x = random_tensor({3, 4}, rng);
  for (std::size_t j = 0; j < 4; ++j) x(1, j) = x(2, j) = 0.0;
  HeadOutput out = dot_product_attention_layer(tape, tape.constant(x), p, Mask{true, false, false});
  for (std::size_t j = 0; j < 4; ++j) {
    double v = p.value_b.value[j];
    for (std::size_t q = 0; q < 4; ++q) v += x(0, q) * p.value_w.value(q, j);
    CHECK(out.tokens.value()(0, j) == doctest::Approx(v).epsilon(1e-13));
  }
  Tensor same(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) same(i, j) = x(0, j);
  HeadOutput u = dot_product_attention_layer(tape, tape.constant(same), p, Mask(4, true));
  for (std::size_t i = 0; i < 4; ++i) CHECK(u.alpha[i] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("compose: sequence bookkeeping") {
  std::mt19937_64 rng(29);
  CompositionStack stack = CompositionStack::init(small_config(Variant::AdditiveHadamard, 3), rng);
  Tape tape;
  TokenSequence img = random_sequence(tape, 4, 8, 4, rng), txt = random_sequence(tape, 5, 8, 3, rng);
  ComposeResult r = compose(tape, img, txt, stack);
  CHECK(r.sequence.length() == 9);
  CHECK(r.trace.alpha.size() == 3);
  for (const auto& block : r.trace.alpha) CHECK(block.size() == 2);

  CompositionStack empty = CompositionStack::init(small_config(Variant::AdditiveHadamard, 0), rng);
  ComposeResult e = compose(tape, img, txt, empty);
  Tensor joined = concat_rows({img.tokens, txt.tokens}).value();
  CHECK(e.sequence.tokens.value() == joined);
  CHECK(e.trace.alpha.empty());
}

TEST_CASE("compose: recorded alphas are distributions over valid positions") {
  std::mt19937_64 rng(31);
  for (Variant v : {Variant::AdditiveHadamard, Variant::AdditiveSum, Variant::DotProduct}) {
    CompositionStack stack = CompositionStack::init(small_config(v), rng);
    for (int rep = 0; rep < 50; ++rep) {
      Tape tape;
      const std::size_t nt = 1 + rep % 7;
      TokenSequence img = random_sequence(tape, 4, 8, 4, rng), txt = random_sequence(tape, nt + 2, 8, nt, rng);
      ComposeResult r = compose(tape, img, txt, stack);
      for (const auto& block : r.trace.alpha) {
        for (const Tensor& a : block) {
          double total = 0.0;
          for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] >= 0.0);
            if (!r.trace.valid[i]) CHECK(a[i] == 0.0);
            total += a[i];
          }
          CHECK(std::abs(total - 1.0) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("compose: zero scoring vectors give mean contexts in every block and head") {
  std::mt19937_64 rng(37);
  CompositionStack stack = CompositionStack::init(small_config(Variant::AdditiveHadamard, 2), rng);
  for (auto& b : stack.blocks)
    for (auto& h : b.additive_heads) zero(h.context_w);
  Tape tape;
  TokenSequence img = random_sequence(tape, 4, 8, 4, rng), txt = random_sequence(tape, 6, 8, 4, rng);
  ComposeOptions opts;
  opts.keep_internals = true;
  ComposeResult r = compose(tape, img, txt, stack, opts);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t h = 0; h < 2; ++h) {
      const Tensor& hid = r.trace.hidden[b][h];
      std::size_t valid = 0;
      for (bool f : r.trace.valid) valid += f;
      for (std::size_t j = 0; j < hid.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < hid.rows(); ++i)
          if (r.trace.valid[i]) mean += hid(i, j);
        mean /= static_cast<double>(valid);
        CHECK(std::abs(r.trace.context[b][h][j] - mean) <= 1e-12);
      }
    }
  }
}

TEST_CASE("compose: configuration errors") {
  CompositionConfig bad = small_config();
  bad.num_heads = 3;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_variant("bilinear"), InvalidArgument);
  CHECK(parse_variant(to_string(Variant::AdditiveSum)) == Variant::AdditiveSum);
}
