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

#include "aacl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aacl/error.hpp"

namespace aacl {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::leaf(Tensor value) {
  Var v = record(std::move(value), {}, nullptr, "leaf");
  nodes_[v.id()].requires_grad = true;
  return v;
}

Var Tape::param(Parameter& parameter) {
  if (auto it = bound_.find(&parameter); it != bound_.end()) return Var(this, it->second);
  // Not checked here: a non-finite parameter is caught by its first consumer.
  Node node;
  node.value = parameter.value;
  node.op = "param";
  node.requires_grad = true;
  node.parameter = &parameter;
  nodes_.push_back(std::move(node));
  bound_.emplace(&parameter, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor(node.value.shape());
  return node.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op + " " + shape_string(value.shape()));
  }
  Node node;
  node.value = std::move(value);
  node.op = op;
  for (auto in : inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw InvalidArgument("backward: loss belongs to a different tape");
  if (value(loss).size() != 1) {
    throw InvalidArgument("backward: seed must be scalar, got " + shape_string(value(loss).shape()));
  }
  for (auto& node : nodes_) node.grad = Tensor();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, id);
    if (node.parameter) {
      auto dst = node.parameter->grad.values();
      auto src = node.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

void backward(Tape& tape, Var loss, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) p->grad = Tensor(p->value.shape());
    p->zero_grad();
  }
  tape.backward(loss);
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw InvalidArgument("operation on an unbound variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw InvalidArgument("operands recorded on different tapes");
  return tape_of(a);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Adds `src` into the gradient of input `id` when that input is tracked.
void accumulate(Tape& tape, std::size_t id, std::span<const double> src) {
  if (!tape.requires_grad(id)) return;
  auto dst = tape.grad_buffer(id).values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Mean computed as first + sum(x_i - first)/n, exact for constant input.
template <typename Get>
double shifted_mean(std::size_t n, Get get) {
  const double first = get(0);
  double acc = 0.0;
  for (std::size_t i = 1; i < n; ++i) acc += get(i) - first;
  return first + acc / static_cast<double>(n);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " * " +
                         shape_string(bv.shape()));
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(matmul_plain(av, bv), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (tp.requires_grad(ia)) {
      // dA += g·Bᵀ, in axpy form so the inner loop vectorizes.
      const Tensor bt = transpose_plain(B);
      gemm_accumulate(g.values(), bt.values(), tp.grad_buffer(ia).values(), m, n, k);
    }
    if (tp.requires_grad(ib)) {
      auto dB = tp.grad_buffer(ib).values();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.values().data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A(i, p);
          if (aip == 0.0) continue;
          double* drow = dB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  }, "matmul");
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  require_rank(a.value(), 2, "transpose");
  const std::size_t ia = a.id();
  return t.record(transpose_plain(a.value()), {ia}, [ia](Tape& tp, std::size_t self) {
    accumulate(tp, ia, transpose_plain(tp.grad_buffer(self)).values());
  }, "transpose");
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.record(a.value().reshaped(std::move(shape)), {ia}, [ia](Tape& tp, std::size_t self) {
    accumulate(tp, ia, tp.grad_buffer(self).values());
  }, "reshape");
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    accumulate(tp, ia, tp.grad_buffer(self).values());
    accumulate(tp, ib, tp.grad_buffer(self).values());
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    accumulate(tp, ia, tp.grad_buffer(self).values());
    if (tp.requires_grad(ib)) {
      auto g = tp.grad_buffer(self).values();
      auto d = tp.grad_buffer(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad_buffer(self).values();
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_buffer(ia).values();
      auto other = tp.value(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_buffer(ib).values();
      auto other = tp.value(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, factor](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    auto g = tp.grad_buffer(self).values();
    auto d = tp.grad_buffer(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * factor;
  }, "scale");
}

Var add_row(Var x, Var row) {
  Tape& t = tape_of(x, row);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "add_row");
  require_rank(row.value(), 1, "add_row");
  if (row.value().size() != xv.cols()) throw DimensionError("add_row: width mismatch");
  Tensor out = xv;
  auto r = row.value().values();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
  }
  const std::size_t ix = x.id(), ir = row.id();
  return t.record(std::move(out), {ix, ir}, [ix, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, g.values());
    if (tp.requires_grad(ir)) {
      auto d = tp.grad_buffer(ir).values();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += gr[j];
      }
    }
  }, "add_row");
}

Var mul_row(Var x, Var row) {
  Tape& t = tape_of(x, row);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "mul_row");
  require_rank(row.value(), 1, "mul_row");
  if (row.value().size() != xv.cols()) throw DimensionError("mul_row: width mismatch");
  Tensor out = xv;
  auto r = row.value().values();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] *= r[j];
  }
  const std::size_t ix = x.id(), ir = row.id();
  return t.record(std::move(out), {ix, ir}, [ix, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& X = tp.value(ix);
    auto r = tp.value(ir).values();
    if (tp.requires_grad(ix)) {
      Tensor& d = tp.grad_buffer(ix);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto dr = d.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) dr[j] += gr[j] * r[j];
      }
    }
    if (tp.requires_grad(ir)) {
      auto d = tp.grad_buffer(ir).values();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto xr = X.row(i);
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += gr[j] * xr[j];
      }
    }
  }, "mul_row");
}

Var gelu(Var x) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.values()) v = gelu_value(v);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    auto g = tp.grad_buffer(self).values();
    auto in = tp.value(ix).values();
    auto d = tp.grad_buffer(ix).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * gelu_slope(in[i]);
  }, "gelu");
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    auto g = tp.grad_buffer(self).values();
    auto y = tp.value(self).values();
    auto d = tp.grad_buffer(ix).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  }, "tanh");
}

Tensor masked_softmax_values(std::span<const double> scores, const Mask& mask) {
  if (mask.size() != scores.size()) throw DimensionError("masked_softmax: mask length mismatch");
  double peak = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask[i]) continue;
    peak = std::max(peak, scores[i]);
    any = true;
  }
  if (!any) throw DomainError("masked_softmax: every position is masked");
  Tensor out(Shape{scores.size()});
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(scores[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] /= total;
  return out;
}

Var masked_softmax(Var scores, const Mask& mask) {
  Tape& t = tape_of(scores);
  const Tensor& sv = scores.value();
  Tensor out(sv.shape());
  if (sv.rank() == 1) {
    out = masked_softmax_values(sv.values(), mask);
  } else if (sv.rank() == 2) {
    for (std::size_t r = 0; r < sv.rows(); ++r) {
      Tensor row = masked_softmax_values(sv.row(r), mask);
      std::copy(row.values().begin(), row.values().end(), out.row(r).begin());
    }
  } else {
    throw DimensionError("masked_softmax: expected rank 1 or 2");
  }
  const std::size_t is = scores.id();
  const std::size_t width = mask.size();
  return t.record(std::move(out), {is}, [is, width](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(is)) return;
    auto g = tp.grad_buffer(self).values();
    auto y = tp.value(self).values();
    auto d = tp.grad_buffer(is).values();
    for (std::size_t base = 0; base < y.size(); base += width) {
      double inner = 0.0;
      for (std::size_t j = 0; j < width; ++j) inner += y[base + j] * g[base + j];
      for (std::size_t j = 0; j < width; ++j) d[base + j] += y[base + j] * (g[base + j] - inner);
    }
  }, "masked_softmax");
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x, gamma);
  tape_of(x, beta);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "layer_norm");
  const std::size_t n = xv.rows(), d = xv.cols();
  if (d < 2) throw DimensionError("layer_norm: width must be at least 2");
  if (gamma.value().shape() != Shape{d} || beta.value().shape() != Shape{d}) {
    throw DimensionError("layer_norm: affine parameters must have width " + std::to_string(d));
  }
  Tensor xhat(xv.shape());
  std::vector<double> inv(n);
  Tensor out(xv.shape());
  auto gv = gamma.value().values();
  auto bv = beta.value().values();
  for (std::size_t i = 0; i < n; ++i) {
    auto r = xv.row(i);
    const double mu = shifted_mean(d, [&](std::size_t j) { return r[j]; });
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    inv[i] = 1.0 / std::sqrt(var + eps);
    auto h = xhat.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      h[j] = (r[j] - mu) * inv[i];
      o[j] = gv[j] * h[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.record(std::move(out), {ix, ig, ib},
                  [ix, ig, ib, xhat = std::move(xhat), inv = std::move(inv)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_buffer(self);
    const std::size_t n = g.rows(), d = g.cols();
    auto gam = tp.value(ig).values();
    if (tp.requires_grad(ig)) {
      auto dg = tp.grad_buffer(ig).values();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) dg[j] += g(i, j) * xhat(i, j);
    }
    if (tp.requires_grad(ib)) {
      auto db = tp.grad_buffer(ib).values();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) db[j] += g(i, j);
    }
    if (tp.requires_grad(ix)) {
      Tensor& dx = tp.grad_buffer(ix);
      std::vector<double> dh(d);
      for (std::size_t i = 0; i < n; ++i) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dh[j] = g(i, j) * gam[j];
          sum_dh += dh[j];
          sum_dh_h += dh[j] * xhat(i, j);
        }
        const double k = inv[i] / static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          dx(i, j) += k * (static_cast<double>(d) * dh[j] - sum_dh - xhat(i, j) * sum_dh_h);
        }
      }
    }
  }, "layer_norm");
}

Var slice_cols(Var x, std::size_t begin, std::size_t width) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "slice_cols");
  if (width == 0 || begin + width > xv.cols()) throw DimensionError("slice_cols: range out of bounds");
  Tensor out(Shape{xv.rows(), width});
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = xv(i, begin + j);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix, begin, width](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    const Tensor& g = tp.grad_buffer(self);
    Tensor& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < width; ++j) d(i, begin + j) += g(i, j);
  }, "slice_cols");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    require_rank(p.value(), 2, "concat_cols");
    if (p.value().rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.value().cols();
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + static_cast<long>(offsets[k]));
  }
  return t.record(std::move(out), ids, [ids, offsets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_buffer(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& d = tp.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) += g(i, offsets[k] + j);
    }
  }, "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, offsets;
  std::vector<double> data;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    require_rank(p.value(), 2, "concat_rows");
    if (p.value().cols() != cols) throw DimensionError("concat_rows: width mismatch");
    ids.push_back(p.id());
    offsets.push_back(rows * cols);
    rows += p.value().rows();
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  }
  return t.record(Tensor(Shape{rows, cols}, std::move(data)), ids, [ids, offsets](Tape& tp, std::size_t self) {
    auto g = tp.grad_buffer(self).values();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      auto d = tp.grad_buffer(ids[k]).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offsets[k] + i];
    }
  }, "concat_rows");
}

Var stack_rows(const std::vector<Var>& vectors) {
  if (vectors.empty()) throw InvalidArgument("stack_rows: no inputs");
  std::vector<Var> rows;
  rows.reserve(vectors.size());
  for (Var v : vectors) {
    require_rank(v.value(), 1, "stack_rows");
    rows.push_back(reshape(v, Shape{1, v.value().size()}));
  }
  return concat_rows(rows);
}

Var mask_rows(Var x, const Mask& mask) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "mask_rows");
  if (mask.size() != xv.rows()) throw DimensionError("mask_rows: mask length mismatch");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    if (!mask[i]) std::fill(out.row(i).begin(), out.row(i).end(), 0.0);
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix, mask](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    const Tensor& g = tp.grad_buffer(self);
    Tensor& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      if (!mask[i]) continue;
      auto gr = g.row(i);
      auto dr = d.row(i);
      for (std::size_t j = 0; j < gr.size(); ++j) dr[j] += gr[j];
    }
  }, "mask_rows");
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Tape& t = tape_of(table);
  const Tensor& tv = table.value();
  require_rank(tv, 2, "gather_rows");
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  Tensor out(Shape{ids.size(), tv.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw DomainError("gather_rows: id " + std::to_string(ids[i]) + " out of range " + std::to_string(tv.rows()));
    }
    std::copy(tv.row(ids[i]).begin(), tv.row(ids[i]).end(), out.row(i).begin());
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return t.record(std::move(out), {it}, [it, rows = std::move(rows)](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(it)) return;
    const Tensor& g = tp.grad_buffer(self);
    Tensor& d = tp.grad_buffer(it);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto gr = g.row(i);
      auto dr = d.row(rows[i]);
      for (std::size_t j = 0; j < gr.size(); ++j) dr[j] += gr[j];
    }
  }, "gather_rows");
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t ix = x.id();
  return t.record(Tensor::scalar(total), {ix}, [ix](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    const double g = tp.grad_buffer(self)[0];
    for (double& d : tp.grad_buffer(ix).values()) d += g;
  }, "sum");
}

Var masked_mean_rows(Var x, const Mask& mask) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  require_rank(xv, 2, "masked_mean_rows");
  if (mask.size() != xv.rows()) throw DimensionError("masked_mean_rows: mask length mismatch");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) valid.push_back(i);
  if (valid.empty()) throw DomainError("masked_mean_rows: no valid rows");
  Tensor out(Shape{xv.cols()});
  for (std::size_t j = 0; j < xv.cols(); ++j) {
    out[j] = shifted_mean(valid.size(), [&](std::size_t k) { return xv(valid[k], j); });
  }
  const std::size_t ix = x.id();
  return t.record(std::move(out), {ix}, [ix, valid](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ix)) return;
    auto g = tp.grad_buffer(self).values();
    Tensor& d = tp.grad_buffer(ix);
    const double w = 1.0 / static_cast<double>(valid.size());
    for (std::size_t r : valid) {
      auto dr = d.row(r);
      for (std::size_t j = 0; j < g.size(); ++j) dr[j] += g[j] * w;
    }
  }, "masked_mean_rows");
}

Var l2_normalize(Var v) {
  Tape& t = tape_of(v);
  require_rank(v.value(), 1, "l2_normalize");
  double sq = 0.0;
  for (double x : v.value().values()) sq += x * x;
  if (sq == 0.0) throw DomainError("l2_normalize: zero vector");
  const double norm = std::sqrt(sq);
  Tensor out = v.value();
  for (double& x : out.values()) x /= norm;
  const std::size_t iv = v.id();
  return t.record(std::move(out), {iv}, [iv, norm](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(iv)) return;
    auto g = tp.grad_buffer(self).values();
    auto y = tp.value(self).values();
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * g[i];
    auto d = tp.grad_buffer(iv).values();
    for (std::size_t i = 0; i < y.size(); ++i) d[i] += (g[i] - y[i] * inner) / norm;
  }, "l2_normalize");
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_rank(a.value(), 1, "dot");
  require_same(a.value(), b.value(), "dot");
  double acc = 0.0;
  auto av = a.value().values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(Tensor::scalar(acc), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_buffer(ia).values();
      auto o = tp.value(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * o[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_buffer(ib).values();
      auto o = tp.value(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * o[i];
    }
  }, "dot");
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  Tape& t = tape_of(x);
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor factors(x.value().shape());
  for (double& f : factors.values()) f = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(x, t.constant(std::move(factors)));
}

Var diagonal_cross_entropy(Var logits) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.value();
  require_rank(lv, 2, "diagonal_cross_entropy");
  const std::size_t b = lv.rows();
  if (lv.cols() != b) throw DimensionError("diagonal_cross_entropy: logits must be square");
  Tensor probs(lv.shape());
  std::vector<double> row_loss(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double anchor = lv(i, i);
    double peak = 0.0;
    for (std::size_t j = 0; j < b; ++j) peak = std::max(peak, lv(i, j) - anchor);
    double total = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      probs(i, j) = std::exp(lv(i, j) - anchor - peak);
      total += probs(i, j);
    }
    for (std::size_t j = 0; j < b; ++j) probs(i, j) /= total;
    row_loss[i] = peak + std::log(total);
  }
  const double mean = shifted_mean(b, [&](std::size_t i) { return row_loss[i]; });
  const std::size_t il = logits.id();
  return t.record(Tensor::scalar(mean), {il}, [il, probs = std::move(probs)](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(il)) return;
    const double g = tp.grad_buffer(self)[0];
    Tensor& d = tp.grad_buffer(il);
    const std::size_t b = probs.rows();
    const double w = g / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) d(i, j) += w * (probs(i, j) - (i == j ? 1.0 : 0.0));
  }, "diagonal_cross_entropy");
}

}  // namespace aacl
