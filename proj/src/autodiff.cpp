#include "idn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace idn {

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::constant(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Graph::param(const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var{this, it->second};
  if (params_ == nullptr) throw ContractError("graph has no bound parameters, requested '" + name + "'");
  const Tensor& value = params_->at(name);
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' is not finite");
  Node node;
  node.borrowed = &value;
  node.param = name;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  const Var v{this, nodes_.size() - 1};
  param_ids_.emplace(name, v.id);
  return v;
}

Real Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw ContractError("expected a scalar, got shape " + shape_string(t.shape()));
  return t[0];
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(fmt::format("non-finite value produced at tape node {}", nodes_.size()));
  }
  bool needs = false;
  for (auto in : inputs) needs = needs || nodes_[in].needs_grad;
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.needs_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.get().shape());
  return n.grad;
}

std::vector<std::string> Graph::touched_parameters() const {
  std::vector<std::string> out;
  for (const auto& [name, id] : param_ids_) out.push_back(name);
  return out;
}

std::vector<std::string> Graph::parameters_reaching(Var v) const {
  if (v.graph != this) throw ContractError("variable belongs to a different graph");
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> stack{v.id};
  std::vector<std::string> out;
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = true;
    if (!nodes_[id].param.empty()) out.push_back(nodes_[id].param);
    for (auto in : nodes_[id].inputs) stack.push_back(in);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Graph::note_kink(Real distance) {
  kink_margin_ = std::min(kink_margin_, std::abs(distance));
  note_branch(distance > 0 ? 1 : 0);
}

void Graph::note_branch(std::size_t choice) { signature_ = (signature_ ^ (choice + 1)) * 1099511628211ull; }

void Graph::note_singular(Real distance) { singular_margin_ = std::min(singular_margin_, std::abs(distance)); }

Gradients Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("loss belongs to a different graph");
  if (value(loss).size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor{};
  grad_buffer(loss.id).fill(1);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  Gradients out;
  if (params_ != nullptr) {
    for (const auto& [name, value] : params_->values()) {
      auto it = param_ids_.find(name);
      if (it != param_ids_.end() && !nodes_[it->second].grad.empty()) {
        out.emplace(name, nodes_[it->second].grad);
      } else {
        out.emplace(name, Tensor::zeros(value.shape()));
      }
    }
  }
  return out;
}

namespace {

void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) throw ContractError("vars recorded on different graphs");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("{}: shape {} vs {}", op, shape_string(a.shape()), shape_string(b.shape())));
  }
}

template <class F>
Var unary(Var x, Tensor out, F&& local_grad) {
  Graph& g = *x.graph;
  return g.record(std::move(out), {x.id}, [local_grad](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    if (!g.needs_grad(in)) return;
    const Tensor& up = g.node_grad(self);
    const Tensor& xv = g.node_value(in);
    const Tensor& yv = g.node_value(self);
    Tensor& dx = g.grad_buffer(in);
    for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i] * local_grad(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul_t(Var x, Var w) {
  require_same_graph(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.cols() != wv.cols()) {
    throw DimensionError(fmt::format("matmul: input {} against weight {}", shape_string(xv.shape()),
                                     shape_string(wv.shape())));
  }
  const std::size_t rows = xv.rows(), in = xv.cols(), outw = wv.rows();
  Tensor out({rows, outw});
  for (std::size_t b = 0; b < rows; ++b) {
    const Real* xr = xv.data().data() + b * in;
    for (std::size_t o = 0; o < outw; ++o) {
      const Real* wr = wv.data().data() + o * in;
      Real acc = 0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out.at(b, o) = acc;
    }
  }
  return x.graph->record(std::move(out), {x.id, w.id}, [rows, in, outw](Graph& g, std::size_t self) {
    const std::size_t xi = g.node_input(self, 0), wi = g.node_input(self, 1);
    const Tensor& up = g.node_grad(self);
    const Tensor& xv = g.node_value(xi);
    const Tensor& wv = g.node_value(wi);
    if (g.needs_grad(xi)) {
      Tensor& dx = g.grad_buffer(xi);
      for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t o = 0; o < outw; ++o) {
          const Real u = up[b * outw + o];
          if (u == 0) continue;
          const Real* wr = wv.data().data() + o * in;
          Real* dr = dx.data().data() + b * in;
          for (std::size_t i = 0; i < in; ++i) dr[i] += u * wr[i];
        }
      }
    }
    if (g.needs_grad(wi)) {
      Tensor& dw = g.grad_buffer(wi);
      for (std::size_t b = 0; b < rows; ++b) {
        const Real* xr = xv.data().data() + b * in;
        for (std::size_t o = 0; o < outw; ++o) {
          const Real u = up[b * outw + o];
          if (u == 0) continue;
          Real* dr = dw.data().data() + o * in;
          for (std::size_t i = 0; i < in; ++i) dr[i] += u * xr[i];
        }
      }
    }
  });
}

Var add_row_bias(Var x, Var bias) {
  require_same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.size() != xv.cols() || bv.rows() != 1) {
    throw DimensionError(fmt::format("bias {} does not broadcast over {}", shape_string(bv.shape()),
                                     shape_string(xv.shape())));
  }
  Tensor out = xv;
  const std::size_t cols = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  }
  return x.graph->record(std::move(out), {x.id, bias.id}, [cols](Graph& g, std::size_t self) {
    const std::size_t xi = g.node_input(self, 0), bi = g.node_input(self, 1);
    const Tensor& up = g.node_grad(self);
    if (g.needs_grad(xi)) {
      Tensor& dx = g.grad_buffer(xi);
      for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i];
    }
    if (g.needs_grad(bi)) {
      Tensor& db = g.grad_buffer(bi);
      for (std::size_t i = 0; i < up.size(); ++i) db[i % cols] += up[i];
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row_bias(matmul_t(x, weight), bias); }

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    x.graph->note_kink(v);
    v = v > 0 ? v : Real{0};
  }
  return unary(x, std::move(out), [](Real xi, Real) { return xi > 0 ? Real{1} : Real{0}; });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v >= 0 ? 1 / (1 + std::exp(-v)) : std::exp(v) / (1 + std::exp(v));
  return unary(x, std::move(out), [](Real, Real y) { return y * (1 - y); });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return unary(x, std::move(out), [](Real, Real y) { return 1 - y * y; });
}

Var exp(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::exp(v);
  return unary(x, std::move(out), [](Real, Real y) { return y; });
}

Var square(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v * v;
  return unary(x, std::move(out), [](Real xi, Real) { return 2 * xi; });
}

Var scale(Var x, Real factor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  return unary(x, std::move(out), [factor](Real, Real) { return factor; });
}

Var add_scalar(Var x, Real value) {
  Tensor out = x.value();
  for (auto& v : out.data()) v += value;
  return unary(x, std::move(out), [](Real, Real) { return Real{1}; });
}

namespace {
Var add_signed(Var a, Var b, Real sign) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), sign > 0 ? "add" : "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[i];
  return a.graph->record(std::move(out), {a.id, b.id}, [sign](Graph& g, std::size_t self) {
    const std::size_t ai = g.node_input(self, 0), bi = g.node_input(self, 1);
    const Tensor& up = g.node_grad(self);
    if (g.needs_grad(ai)) {
      Tensor& da = g.grad_buffer(ai);
      for (std::size_t i = 0; i < up.size(); ++i) da[i] += up[i];
    }
    if (g.needs_grad(bi)) {
      Tensor& db = g.grad_buffer(bi);
      for (std::size_t i = 0; i < up.size(); ++i) db[i] += sign * up[i];
    }
  });
}
}  // namespace

Var add(Var a, Var b) { return add_signed(a, b, 1); }
Var sub(Var a, Var b) { return add_signed(a, b, -1); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero parts");
  Graph* g = parts.front().graph;
  const std::size_t rows = parts.front().value().rows();
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_same_graph(parts.front(), p);
    if (p.value().rows() != rows) {
      throw DimensionError(fmt::format("concat: {} rows vs {} rows", rows, p.value().rows()));
    }
    ids.push_back(p.id);
    widths.push_back(p.value().cols());
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = pv.row_span(r);
      std::copy(src.begin(), src.end(), out.row_span(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols();
  }
  return g->record(std::move(out), std::move(ids), [widths, rows, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.node_grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const std::size_t in = g.node_input(self, k);
      if (g.needs_grad(in)) {
        Tensor& d = g.grad_buffer(in);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < widths[k]; ++c) d[r * widths[k] + c] += up[r * cols + offset + c];
        }
      }
      offset += widths[k];
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (count == 0 || begin + count > xv.cols()) {
    throw DimensionError(fmt::format("slice [{}, {}) of {} columns", begin, begin + count, xv.cols()));
  }
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = xv[r * cols + begin + c];
  }
  return x.graph->record(std::move(out), {x.id}, [rows, cols, begin, count](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    const Tensor& up = g.node_grad(self);
    Tensor& d = g.grad_buffer(in);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) d[r * cols + begin + c] += up[r * count + c];
    }
  });
}

Var sum_all(Var x) {
  Real total = 0;
  for (Real v : x.value().data()) total += v;
  return x.graph->record(Tensor({1, 1}, {total}), {x.id}, [](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    const Real u = g.node_grad(self)[0];
    Tensor& d = g.grad_buffer(in);
    for (auto& v : d.data()) v += u;
  });
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<Real>(x.value().size())); }

Var row_distance(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), "row_distance");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = l2_distance(av.row_span(r), bv.row_span(r));
    a.graph->note_singular(out[r]);
  }
  return a.graph->record(std::move(out), {a.id, b.id}, [rows](Graph& g, std::size_t self) {
    const std::size_t ai = g.node_input(self, 0), bi = g.node_input(self, 1);
    const Tensor& up = g.node_grad(self);
    const Tensor& dist = g.node_value(self);
    const Tensor& av = g.node_value(ai);
    const Tensor& bv = g.node_value(bi);
    const std::size_t cols = av.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      if (dist[r] == 0 || up[r] == 0) continue;  // subgradient 0 at coincident rows
      const Real k = up[r] / dist[r];
      for (std::size_t c = 0; c < cols; ++c) {
        const Real diff = k * (av[r * cols + c] - bv[r * cols + c]);
        if (g.needs_grad(ai)) g.grad_buffer(ai)[r * cols + c] += diff;
        if (g.needs_grad(bi)) g.grad_buffer(bi)[r * cols + c] -= diff;
      }
    }
  });
}

Var mse(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), "mse");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Real sum = 0;
  for (std::size_t i = 0; i < av.size(); ++i) sum += (av[i] - bv[i]) * (av[i] - bv[i]);
  const Real n = static_cast<Real>(av.size());
  return a.graph->record(Tensor({1, 1}, {sum / n}), {a.id, b.id}, [n](Graph& g, std::size_t self) {
    const std::size_t ai = g.node_input(self, 0), bi = g.node_input(self, 1);
    const Real u = g.node_grad(self)[0];
    const Tensor& av = g.node_value(ai);
    const Tensor& bv = g.node_value(bi);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const Real d = 2 * u * (av[i] - bv[i]) / n;
      if (g.needs_grad(ai)) g.grad_buffer(ai)[i] += d;
      if (g.needs_grad(bi)) g.grad_buffer(bi)[i] -= d;
    }
  });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  if (z.size() != targets.size()) {
    throw DimensionError(fmt::format("bce: logits {} vs targets {}", shape_string(z.shape()),
                                     shape_string(targets.shape())));
  }
  Real sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Real zi = z[i];
    sum += std::max(zi, Real{0}) - zi * targets[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  const Real n = static_cast<Real>(z.size());
  return logits.graph->record(Tensor({1, 1}, {sum / n}), {logits.id}, [targets, n](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    const Real u = g.node_grad(self)[0];
    const Tensor& z = g.node_value(in);
    Tensor& d = g.grad_buffer(in);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const Real p = z[i] >= 0 ? 1 / (1 + std::exp(-z[i])) : std::exp(z[i]) / (1 + std::exp(z[i]));
      d[i] += u * (p - targets[i]) / n;
    }
  });
}

Var bce_exp_distance(Var distances, const Tensor& targets) {
  const Tensor& d = distances.value();
  if (d.size() != targets.size()) {
    throw DimensionError(fmt::format("bce: distances {} vs targets {}", shape_string(d.shape()),
                                     shape_string(targets.shape())));
  }
  // p = exp(-d) reaches 1 at d = 0, where -log(1 - p) is unbounded; the
  // negative side uses (1 - kExpBceFloor) * exp(-d) so a target-0 entry at
  // distance 0 costs log(1 / kExpBceFloor) instead of infinity.
  Real sum = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Real y = targets[i];
    sum += y * d[i] - (1 - y) * std::log1p(-(1 - kExpBceFloor) * std::exp(-d[i]));
  }
  const Real n = static_cast<Real>(d.size());
  return distances.graph->record(Tensor({1, 1}, {sum / n}), {distances.id}, [targets, n](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    const Real u = g.node_grad(self)[0];
    const Tensor& d = g.node_value(in);
    Tensor& gd = g.grad_buffer(in);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Real q = (1 - kExpBceFloor) * std::exp(-d[i]);
      const Real y = targets[i];
      gd[i] += u * (y - (1 - y) * q / (1 - q)) / n;
    }
  });
}

}  // namespace idn
