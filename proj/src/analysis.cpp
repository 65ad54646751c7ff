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

#include "aacl/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "aacl/error.hpp"
#include "aacl/pipeline.hpp"

namespace aacl {

std::vector<double> attention_flow(const AttentionTrace& trace) {
  const std::size_t n = trace.tokens.empty() ? trace.valid.size() : trace.tokens.size();
  std::vector<double> flow(n, 1.0);
  for (std::size_t b = 0; b < trace.alpha.size(); ++b) {
    const auto& heads = trace.alpha[b];
    if (heads.empty()) throw InvalidArgument("attention trace block without heads");
    for (std::size_t j = 0; j < n; ++j) {
      double mean = 0.0;
      for (const Tensor& a : heads) mean += a[j];
      flow[j] *= mean / static_cast<double>(heads.size());
    }
  }
  return flow;
}

double attention_flow(const AttentionTrace& trace, std::size_t token_index) {
  const std::size_t n = trace.tokens.empty() ? trace.valid.size() : trace.tokens.size();
  if (token_index >= n) {
    throw DomainError("token index " + std::to_string(token_index) + " out of range for " + std::to_string(n) +
                      " tokens");
  }
  return attention_flow(trace)[token_index];
}

std::vector<double> normalize_flow(const std::vector<double>& flows) {
  std::vector<double> out(flows.size(), 0.0);
  if (flows.empty()) return out;
  const auto [lo, hi] = std::minmax_element(flows.begin(), flows.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < flows.size(); ++i) out[i] = std::clamp((flows[i] - *lo) / range, 0.0, 1.0);
  return out;
}

std::vector<WordScore> word_scores(const AttentionTrace& trace) {
  const std::vector<double> flow = attention_flow(trace);
  std::vector<std::size_t> positions;
  std::vector<double> raw;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
    if (trace.tokens[i].kind == TokenKind::Text && i < trace.valid.size() && trace.valid[i]) {
      positions.push_back(i);
      raw.push_back(flow[i]);
    }
  }
  const std::vector<double> norm = normalize_flow(raw);
  std::vector<WordScore> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const std::string& word = trace.tokens[positions[k]].label;
    auto [it, fresh] = seen.emplace(word, out.size());
    if (fresh) {
      out.push_back({word, raw[k], norm[k]});
    } else {
      WordScore& w = out[it->second];
      if (raw[k] > w.raw) w = {word, raw[k], norm[k]};
    }
  }
  return out;
}

std::vector<WordCount> top_words(Model& model, const Catalog& items, const std::vector<QueryTriplet>& queries,
                                 double threshold, std::size_t top_n) {
  std::unordered_map<std::uint64_t, const AttributeItem*> by_id;
  for (const AttributeItem& it : items) by_id.emplace(it.id, &it);
  std::map<std::string, std::size_t> counts;
  for (const QueryTriplet& t : queries) {
    auto ref = by_id.find(t.ref_id);
    if (ref == by_id.end()) throw MismatchError("query references unknown item " + std::to_string(t.ref_id));
    Tape tape;
    auto q = model.embed_query(tape, *ref->second, t.text);
    for (const WordScore& w : word_scores(q.trace)) {
      if (w.normalized >= threshold) ++counts[w.word];
    }
  }
  std::vector<WordCount> table;
  for (const auto& [word, n] : counts) table.push_back({word, n});
  std::stable_sort(table.begin(), table.end(), [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  if (table.size() > top_n) table.resize(top_n);
  return table;
}

std::vector<HeatCell> token_heatmap(Model& model, const AttributeItem& reference, const std::string& text) {
  Tape tape;
  auto q = model.embed_query(tape, reference, text);
  const std::vector<double> flow = attention_flow(q.trace);
  std::vector<HeatCell> cells;
  const EncoderConfig& ec = model.config.encoder;
  std::size_t index = 0;
  for (int stage : ec.stages) {
    for (std::size_t p = 0; p < ec.tokens_for_stage(stage); ++p, ++index) {
      cells.push_back({q.trace.tokens.at(index).label, stage, p, flow.at(index), 0.0});
    }
  }
  std::vector<double> raw;
  for (const HeatCell& c : cells) raw.push_back(c.raw);
  const std::vector<double> norm = normalize_flow(raw);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].normalized = norm[i];
  return cells;
}

std::vector<TimingRow> complexity_probe(const std::vector<std::size_t>& ns, Variant variant,
                                        const ProbeOptions& options) {
  if (options.repetitions < 1) throw InvalidArgument("complexity_probe needs at least one repetition");
  if (!std::is_sorted(ns.begin(), ns.end())) throw InvalidArgument("complexity_probe sizes must be ascending");
  const std::size_t dh = options.head_width;
  std::mt19937_64 rng(options.seed);
  AdditiveHeadParams add;
  DotHeadParams dot;
  if (variant == Variant::DotProduct) {
    dot.query_w = uniform_parameter("q_w", {dh, dh}, dh, rng);
    dot.query_b = constant_parameter("q_b", {dh}, 0.0);
    dot.key_w = uniform_parameter("k_w", {dh, dh}, dh, rng);
    dot.key_b = constant_parameter("k_b", {dh}, 0.0);
    dot.value_w = uniform_parameter("v_w", {dh, dh}, dh, rng);
    dot.value_b = constant_parameter("v_b", {dh}, 0.0);
  } else {
    add.hidden_w = uniform_parameter("h_w", {dh, dh}, dh, rng);
    add.hidden_b = constant_parameter("h_b", {dh}, 0.0);
    add.context_w = uniform_parameter("c_w", {dh}, dh, rng);
    add.out_w = uniform_parameter("o_w", {dh, dh}, dh, rng);
    add.out_b = constant_parameter("o_b", {dh}, 0.0);
  }

  std::vector<TimingRow> rows;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : ns) {
    Tensor input(Shape{n, dh});
    for (double& x : input.values()) x = u(rng);
    const Mask mask(n, true);
    auto run = [&] {
      Tape tape;
      Var x = tape.constant(input);
      HeadOutput out = variant == Variant::DotProduct ? dot_product_attention_layer(tape, x, dot, mask)
                                                      : additive_attention_layer(tape, x, add, mask, variant);
      if (out.tokens.value().rows() != n) throw Error(ErrorKind::Internal, "probe output has the wrong shape");
    };
    run();  // warm-up, discarded
    TimingRow row;
    row.n = n;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      row.runs_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::vector<double> sorted = row.runs_ms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    row.median_ms = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationVariant> ablation_suite(const std::string& name) {
  if (name == "table5") {
    return {{"stage4", {{"stages", "4"}}},
            {"stage3+4", {{"stages", "3,4"}}},
            {"stage2+3+4", {{"stages", "2,3,4"}}}};
  }
  if (name == "table6") {
    return {{"additive_hadamard", {{"variant", "additive_hadamard"}}},
            {"dot_product", {{"variant", "dot_product"}}},
            {"additive_sum", {{"variant", "additive_sum"}}}};
  }
  if (name == "table7") {
    return {{"k=1", {{"k", "1"}}}, {"k=1or2", {{"k", "1or2"}}}, {"k=2", {{"k", "2"}}}};
  }
  throw InvalidArgument("unknown ablation suite '" + name + "' (expected table5, table6 or table7)");
}

AblationReport run_ablation(const RunConfig& base, const std::string& suite_name,
                            const std::vector<AblationVariant>& variants, std::size_t seeds,
                            const std::vector<std::size_t>& ks) {
  if (seeds < 1) throw InvalidArgument("ablation needs at least one seed");
  AblationReport report;
  report.suite = suite_name;
  report.ks = ks;
  report.seeds = seeds;
  for (const AblationVariant& v : variants) {
    AblationRow row;
    row.variant = v.name;
    try {
      RunConfig cfg = base;
      for (const auto& [key, value] : v.overrides) cfg.set(key, value);
      cfg.validate();
      row.config = cfg.to_json();
      const World world = build_world(cfg);
      for (std::size_t s = 0; s < seeds; ++s) {
        RunConfig cs = cfg;
        cs.init_seed = cfg.init_seed + s;
        cs.train_seed = cfg.train_seed + s;
        TrainState state;
        state.model = Model::init(cs.model_config(), world.schema, cs.init_seed);
        train_until(state, world.split.train, cs.train_config(), cs.epochs);
        GalleryIndex index = build_index(world.split.validation, state.model);
        EvalReport r = evaluate(state.model, index, world.split.validation, world.queries, ks, QueryMode::Composed);
        r.model_label = v.name;
        row.per_seed.push_back(std::move(r));
      }
      for (const CategoryRecall& c : row.per_seed.front().rows) {
        row.categories.push_back(c.category);
        row.n_queries[c.category] = c.n_queries;
        for (std::size_t k : ks) {
          double mean = 0.0;
          for (const EvalReport& r : row.per_seed) mean += r.rows.at(row.categories.size() - 1).recall.at(k);
          mean /= static_cast<double>(seeds);
          double var = 0.0;
          for (const EvalReport& r : row.per_seed) {
            const double dev = r.rows.at(row.categories.size() - 1).recall.at(k) - mean;
            var += dev * dev;
          }
          row.mean[c.category][k] = mean;
          row.sd[c.category][k] = seeds > 1 ? std::sqrt(var / static_cast<double>(seeds - 1)) : 0.0;
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void AblationReport::write_jsonl(std::ostream& out) const {
  for (const AblationRow& row : rows) {
    if (!row.error.empty()) {
      nlohmann::ordered_json j;
      j["suite"] = suite;
      j["model"] = row.variant;
      j["error"] = row.error;
      out << j.dump() << '\n';
      continue;
    }
    for (const std::string& category : row.categories) {
      nlohmann::ordered_json j;
      j["suite"] = suite;
      j["model"] = row.variant;
      j["category"] = category;
      for (std::size_t k : ks) {
        j["R@" + std::to_string(k)] = row.mean.at(category).at(k);
        j["R@" + std::to_string(k) + "_sd"] = row.sd.at(category).at(k);
      }
      j["n_queries"] = row.n_queries.at(category);
      j["seeds"] = seeds;
      out << j.dump() << '\n';
    }
  }
}

void AblationReport::write_csv(std::ostream& out) const {
  out << "variant,status";
  for (std::size_t k : ks) out << ",R@" << k << ",R@" << k << "_sd";
  out << '\n';
  for (const AblationRow& row : rows) {
    out << row.variant << ',' << (row.error.empty() ? "ok" : "error");
    for (std::size_t k : ks) {
      if (row.error.empty()) {
        out << ',' << nlohmann::json(row.mean.at("Average").at(k)).dump() << ','
            << nlohmann::json(row.sd.at("Average").at(k)).dump();
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
}

}  // namespace aacl
