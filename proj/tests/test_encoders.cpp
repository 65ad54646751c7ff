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
#include <random>
#include <set>
#include <sstream>

#include "aacl/dataworld.hpp"
#include "aacl/encoders.hpp"
#include "aacl/error.hpp"
#include "aacl/gradcheck.hpp"
#include "aacl/model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aacl;

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

ModelConfig small_model(std::vector<int> stages = {3, 4}) {
  ModelConfig c;
  c.encoder.d = c.composition.d = 16;
  c.encoder.embed_dim = 8;
  c.encoder.stages = std::move(stages);
  c.composition.num_heads = 2;
  return c;
}

double cosine(const Tensor& a, const Tensor& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("tokenize: modification text becomes content ids plus padding") {
  Vocabulary v = Vocabulary::from_schema(AttributeSchema::desk_default());
  TokenizedText t = tokenize("replace Navy with Black", v, 24);
  REQUIRE(t.ids.size() == 24);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t.mask[i]);
    CHECK(t.ids[i] != Vocabulary::kUnknown);
    CHECK(t.ids[i] != Vocabulary::kPad);
  }
  for (std::size_t i = 4; i < 24; ++i) {
    CHECK_FALSE(t.mask[i]);
    CHECK(t.ids[i] == Vocabulary::kPad);
  }
  CHECK(t.ids[0] == v.id("replace"));
  CHECK(t.ids[1] == v.id("navy"));
}

TEST_CASE("tokenize: empty text yields one valid unknown token") {
  Vocabulary v = Vocabulary::from_schema(AttributeSchema::desk_default());
  for (const char* s : {"", "   ", ",.;"}) {
    TokenizedText t = tokenize(s, v, 6);
    CHECK(t.mask[0]);
    CHECK(t.ids[0] == Vocabulary::kUnknown);
    for (std::size_t i = 1; i < 6; ++i) CHECK_FALSE(t.mask[i]);
  }
  CHECK_THROWS_AS(tokenize("x", v, 0), InvalidArgument);
}

TEST_CASE("tokenize: round trip over generated modification texts") {
  const AttributeSchema schema = AttributeSchema::desk_default();
  Vocabulary v = Vocabulary::from_schema(schema);
  Catalog cat = generate_catalog(schema, 2000, 5);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    ItemPair p = sample_pair(cat, DiffMode::one_or_two(), rng);
    const std::string text = modification_text(*p.reference, *p.target, schema);
    CHECK(detokenize(tokenize(text, v, 24), v) == join(normalize_words(text)));
  }
  // Captions use the same vocabulary.
  CHECK(detokenize(tokenize(caption(cat[0], schema), v, 24), v) == join(normalize_words(caption(cat[0], schema))));
}

TEST_CASE("vocabulary: write/read round trip and bad input") {
  Vocabulary v = Vocabulary::from_schema(AttributeSchema::desk_default());
  std::stringstream ss;
  v.write(ss);
  CHECK(Vocabulary::read(ss) == v);
  std::stringstream bad("<pad>,0\nfoo\n");
  CHECK_THROWS_AS(Vocabulary::read(bad), ParseError);
  CHECK_THROWS_AS(v.word(v.size()), DomainError);
}

TEST_CASE("text encoder: lookup determinism and gradients only on used rows") {
  std::mt19937_64 rng(9);
  EncoderConfig cfg;
  cfg.d = 6;
  cfg.embed_dim = 4;
  TextEncoderParams p = TextEncoderParams::init(cfg, 10, rng);
  TokenizedText t{{3, 5, 3, 0}, {true, true, true, false}};
  Tape tape;
  Tensor y = encode_text(tape, t, p).tokens.value();
  for (std::size_t j = 0; j < 6; ++j) CHECK(y(0, j) == y(2, j));

  Tensor weights = testutil::random_tensor({4, 6}, rng);
  std::vector<Parameter*> params{&p.embedding, &p.proj_w, &p.proj_b};
  auto record = [&](Tape& tp) { return sum(mul(encode_text(tp, t, p).tokens, tp.constant(weights))); };
  Tape t1;
  backward(t1, record(t1), params);
  for (std::size_t r = 0; r < 10; ++r) {
    bool used = r == 3 || r == 5;
    double norm = 0.0;
    for (std::size_t j = 0; j < 4; ++j) norm += std::abs(p.embedding.grad(r, j));
    CHECK((norm > 0.0) == used);
  }
  Tensor analytic = p.embedding.grad;
  Tensor numeric = finite_difference_grad(
      [&] {
        Tape tp;
        return record(tp).value().item();
      },
      p.embedding, 1e-5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(relative_error(analytic(3, j), numeric(3, j)) < 1e-6);
}

TEST_CASE("image encoder: token counts per stage selection") {
  const AttributeSchema schema = AttributeSchema::desk_default();
  Catalog cat = generate_catalog(schema, 4, 1);
  for (auto stages : std::vector<std::vector<int>>{{4}, {3, 4}, {2, 3, 4}}) {
    ModelConfig cfg = small_model(stages);
    cfg.encoder.stage3_tokens = 3;
    Model m = Model::init(cfg, schema, 2);
    Tape tape;
    TokenSequence s = encode_image(tape, cat[0], m.image, stages);
    CHECK(s.length() == cfg.encoder.image_tokens());
    auto info = image_token_info(cfg.encoder);
    REQUIRE(info.size() == s.length());
    CHECK(info.front().label == "s" + std::to_string(stages.front()) + ":0");
  }
  ModelConfig cfg = small_model({3, 4});
  cfg.encoder.stage3_tokens = 3;
  cfg.encoder.stage4_tokens = 5;
  CHECK(cfg.encoder.image_tokens() == 8);
  auto info = image_token_info(cfg.encoder);
  CHECK(info[2].label == "s3:2");
  CHECK(info[3].label == "s4:0");

  ModelConfig bad = small_model({4, 3});
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("image encoder: distinct items get distinct embeddings at initialization") {
  const AttributeSchema schema = AttributeSchema::desk_default();
  Model m = Model::init(small_model(), schema, 3);
  Catalog cat = generate_catalog(schema, 300, 4);
  std::vector<Tensor> emb;
  for (const auto& item : cat) emb.push_back(m.image_vector(item));
  for (std::size_t i = 0; i < cat.size(); ++i) {
    CHECK(std::abs(cosine(emb[i], emb[i]) - 1.0) < 1e-12);
    for (std::size_t j = i + 1; j < cat.size(); ++j) {
      if (cat[i].same_attributes(cat[j])) continue;
      CHECK(cosine(emb[i], emb[j]) < 1.0 - 1e-6);
    }
  }
  // One changed slot changes the encoding.
  AttributeItem a = cat[0], b = cat[0];
  b.values[2] = (b.values[2] + 1) % schema.slots[2].values.size();
  CHECK_FALSE(m.image_vector(a) == m.image_vector(b));
  CHECK(m.image_vector(a) == m.image_vector(a));
}

TEST_CASE("pool: normalization cases") {
  Tape tape;
  Tensor v = pool({tape.constant(Tensor::matrix({{3, 4}})), Mask{true}}).value();
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  Tensor same = pool({tape.constant(Tensor::matrix({{3, 4}, {3, 4}, {0, 0}})), Mask{true, true, false}}).value();
  CHECK(same == v);
  CHECK_THROWS_AS(pool({tape.constant(Tensor::matrix({{0, 0}})), Mask{true}}), DomainError);
}

TEST_CASE("pooled embeddings are unit norm; query and target sides share the image encoder") {
  const AttributeSchema schema = AttributeSchema::desk_default();
  Model m = Model::init(small_model(), schema, 5);
  Catalog cat = generate_catalog(schema, 50, 6);
  for (const auto& item : cat) {
    Tensor q = m.query_vector(item, "Shirt, replace Navy color with Red color.");
    Tensor t = m.image_vector(item);
    double nq = 0, nt = 0;
    for (double x : q.values()) nq += x * x;
    for (double x : t.values()) nt += x * x;
    CHECK(std::abs(nq - 1.0) < 1e-12);
    CHECK(std::abs(nt - 1.0) < 1e-12);
  }
  // The composed query reads the very tensors the target side encodes.
  Tape tape;
  TokenSequence img = encode_image(tape, cat[0], m.image, m.config.encoder.stages);
  CHECK(pool(img).value() == m.image_vector(cat[0]));
}

TEST_CASE("pool modes and parsing") {
  CHECK(parse_pool_mode("all") == PoolMode::AllTokens);
  CHECK(parse_pool_mode(to_string(PoolMode::ImageTokens)) == PoolMode::ImageTokens);
  CHECK_THROWS_AS(parse_pool_mode("max"), InvalidArgument);
  Tape tape;
  Var x = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Tensor first = pool({x, Mask{true, true}}, PoolMode::FirstToken).value();
  CHECK(first == Tensor::vector({1, 0}));
  Tensor img = pool({x, Mask{true, true}}, PoolMode::ImageTokens, 1).value();
  CHECK(img == Tensor::vector({1, 0}));
}
