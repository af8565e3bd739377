// SPDX-License-Identifier: Apache-2.0
#include "roma/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace roma {
namespace {

constexpr double kMaskNegative = -1e9;  // finite stand-in for -inf in causal masks

void require(bool cond, const char* op, const std::string& msg) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + msg);
}

// C += A(mxk) * B(kxn), row-major, ikj order so the inner loop vectorizes.
void matmul_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A(mxk) * B(nxk)ᵀ  -> dot products of rows.
void matmul_bt_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// C += A(kxm)ᵀ * B(kxn).
void matmul_at_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Rows of a rank-1 tensor: treat the vector as a single row.
int64_t row_count(const Tensor& t) { return t.rank() <= 1 ? 1 : t.shape[0]; }

}  // namespace

Tape::Node& Tape::node(Var v) {
  check_on_tape(v, "tape");
  return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  check_on_tape(v, "tape");
  return nodes_[static_cast<size_t>(v.id)];
}

void Tape::check_on_tape(Var v, const char* op) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument(std::string(op) + ": variable is not on this tape");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  n.op = "leaf";
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const ParamSet& ps, const std::string& name) {
  Var v = leaf(ps.value(name), true);
  bindings_.emplace_back(name, v.id);
  return v;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.numel() == 0) return Tensor::zeros(n.value.shape);
  return n.grad;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::add_grad(int id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
}

int Tape::push(Tensor value, const char* op, std::initializer_list<Var> inputs,
               std::function<void(Tape&, int)> back) {
  if (!value.all_finite())
    throw std::runtime_error(std::string("non-finite output from op '") + op + "'");
  Node n;
  n.value = std::move(value);
  n.op = op;
  bool needs = false;
  for (const Var in : inputs) {
    check_on_tape(in, op);
    n.inputs.push_back(in.id);
    needs = needs || nodes_[static_cast<size_t>(in.id)].requires_grad;
  }
  n.requires_grad = grad_enabled_ && needs;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(Var loss) {
  Node& ln = node(loss);
  if (ln.value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + ln.value.shape_str());
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buf(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad || !n.back) continue;
    if (n.grad.numel() == 0) continue;  // not reached from the loss
    n.back(*this, id);
  }
}

void Tape::backward(Var loss, ParamSet& into) {
  backward(loss);
  for (const auto& [name, id] : bindings_) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) continue;
    Tensor& g = into.grad(name);
    if (!g.same_shape(n.value))
      throw std::invalid_argument("backward: gradient shape mismatch for " + name);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += n.grad.data[i];
  }
}

// --- ops -------------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2, "matmul", "expects rank-2 inputs");
  require(ta.shape[1] == tb.shape[0], "matmul",
          "inner extents differ: " + ta.shape_str() + " x " + tb.shape_str());
  const int64_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
  Tensor out({m, n});
  matmul_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
  const int id = push(std::move(out), "matmul", {a, b}, [a, b, m, k, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad)
      matmul_bt_acc(g.data.data(), t.value(b).data.data(), t.grad_buf(a.id).data.data(), m, n, k);
    if (t.nodes_[static_cast<size_t>(b.id)].requires_grad)
      matmul_at_acc(t.value(a).data.data(), g.data.data(), t.grad_buf(b.id).data.data(), k, m, n);
  });
  return Var{id};
}

Var Tape::transpose(Var a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "transpose", "expects rank-2 input");
  const int64_t m = ta.shape[0], n = ta.shape[1];
  Tensor out({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(j, i) = ta.at(i, j);
  const int id = push(std::move(out), "transpose", {a}, [a, m, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
  });
  return Var{id};
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add", "shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
  const int id = push(std::move(out), "add", {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) t.add_grad(a.id, g);
    if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) t.add_grad(b.id, g);
  });
  return Var{id};
}

Var Tape::add_row(Var a, Var bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  require(ta.rank() == 2 && tb.rank() == 1, "add_row", "expects [m,n] + [n]");
  require(ta.shape[1] == tb.shape[0], "add_row",
          "width mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  const int64_t m = ta.shape[0], n = ta.shape[1];
  Tensor out = ta;
  for (int64_t i = 0; i < m; ++i) {
    double* row = out.row_ptr(i);
    for (int64_t j = 0; j < n; ++j) row[j] += tb.data[static_cast<size_t>(j)];
  }
  const int id = push(std::move(out), "add_row", {a, bias}, [a, bias, m, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) t.add_grad(a.id, g);
    if (t.nodes_[static_cast<size_t>(bias.id)].requires_grad) {
      Tensor& gb = t.grad_buf(bias.id);
      for (int64_t i = 0; i < m; ++i) {
        const double* row = g.row_ptr(i);
        for (int64_t j = 0; j < n; ++j) gb.data[static_cast<size_t>(j)] += row[j];
      }
    }
  });
  return Var{id};
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "sub", "shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= tb.data[i];
  const int id = push(std::move(out), "sub", {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) t.add_grad(a.id, g);
    if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
      Tensor& gb = t.grad_buf(b.id);
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
  return Var{id};
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "mul", "shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
  const int id = push(std::move(out), "mul", {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) {
      Tensor& ga = t.grad_buf(a.id);
      const Tensor& vb = t.value(b);
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * vb.data[i];
    }
    if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
      Tensor& gb = t.grad_buf(b.id);
      const Tensor& va = t.value(a);
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
    }
  });
  return Var{id};
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x *= c;
  const int id = push(std::move(out), "scale", {a}, [a, c](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * g.data[i];
  });
  return Var{id};
}

Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.data) x += c;
  const int id = push(std::move(out), "add_const", {a}, [a](Tape& t, int self) {
    t.add_grad(a.id, t.nodes_[static_cast<size_t>(self)].grad);
  });
  return Var{id};
}

Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::exp(x);
  const int id = push(std::move(out), "exp", {a}, [a](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<size_t>(self)];
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += n.grad.data[i] * n.value.data[i];
  });
  return Var{id};
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = std::log(x);
  const int id = push(std::move(out), "log", {a}, [a](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] / va.data[i];
  });
  return Var{id};
}

Var Tape::gelu(Var a) {
  Tensor out = value(a);
  for (double& x : out.data) x = gelu_value(x);
  const int id = push(std::move(out), "gelu", {a}, [a](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < ga.data.size(); ++i)
      ga.data[i] += g.data[i] * gelu_derivative(va.data[i]);
  });
  return Var{id};
}

Var Tape::rms_norm(Var a, Var gain) {
  constexpr double kEps = 1e-5;
  const Tensor& ta = value(a);
  const Tensor& tg = value(gain);
  require(ta.rank() >= 1 && ta.rank() <= 2, "rms_norm", "expects rank 1 or 2");
  require(tg.rank() == 1 && tg.shape[0] == ta.cols(), "rms_norm", "gain width mismatch");
  const int64_t m = row_count(ta), n = ta.cols();
  Tensor out = ta;
  std::vector<double> inv_rms(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    const double* row = ta.data.data() + i * n;
    double ss = 0.0;
    for (int64_t j = 0; j < n; ++j) ss += row[j] * row[j];
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(n) + kEps);
    inv_rms[static_cast<size_t>(i)] = inv;
    double* orow = out.data.data() + i * n;
    for (int64_t j = 0; j < n; ++j) orow[j] = row[j] * inv * tg.data[static_cast<size_t>(j)];
  }
  const int id = push(std::move(out), "rms_norm", {a, gain},
                      [a, gain, m, n, inv_rms](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = t.value(a);
    const Tensor& vg = t.value(gain);
    const bool need_a = t.nodes_[static_cast<size_t>(a.id)].requires_grad;
    const bool need_g = t.nodes_[static_cast<size_t>(gain.id)].requires_grad;
    for (int64_t i = 0; i < m; ++i) {
      const double* xrow = va.data.data() + i * n;
      const double* grow = g.data.data() + i * n;
      const double inv = inv_rms[static_cast<size_t>(i)];
      if (need_g) {
        Tensor& gg = t.grad_buf(gain.id);
        for (int64_t j = 0; j < n; ++j)
          gg.data[static_cast<size_t>(j)] += grow[j] * xrow[j] * inv;
      }
      if (need_a) {
        Tensor& ga = t.grad_buf(a.id);
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += grow[j] * vg.data[static_cast<size_t>(j)] * xrow[j];
        const double coef = dot * inv * inv * inv / static_cast<double>(n);
        double* garow = ga.data.data() + i * n;
        for (int64_t j = 0; j < n; ++j)
          garow[j] += grow[j] * vg.data[static_cast<size_t>(j)] * inv - xrow[j] * coef;
      }
    }
  });
  return Var{id};
}

Var Tape::embed(Var table, std::span<const int> ids) {
  const Tensor& tt = value(table);
  require(tt.rank() == 2, "embed", "table must be rank 2");
  const int64_t rows = tt.shape[0], n = tt.shape[1];
  for (const int idx : ids)
    require(idx >= 0 && idx < rows, "embed", "index out of range: " + std::to_string(idx));
  Tensor out({static_cast<int64_t>(ids.size()), n});
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tt.row_ptr(ids[i]), n, out.row_ptr(static_cast<int64_t>(i)));
  std::vector<int> idv(ids.begin(), ids.end());
  const int id = push(std::move(out), "embed", {table}, [table, idv, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& gt = t.grad_buf(table.id);
    for (size_t i = 0; i < idv.size(); ++i) {
      const double* grow = g.row_ptr(static_cast<int64_t>(i));
      double* trow = gt.row_ptr(idv[i]);
      for (int64_t j = 0; j < n; ++j) trow[j] += grow[j];
    }
  });
  return Var{id};
}

Var Tape::softmax(Var a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 1 && ta.rank() <= 2, "softmax", "expects rank 1 or 2");
  const int64_t m = row_count(ta), n = ta.cols();
  Tensor out = ta;
  for (int64_t i = 0; i < m; ++i) {
    double* row = out.data.data() + i * n;
    double mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    const double inv = 1.0 / s;
    for (int64_t j = 0; j < n; ++j) row[j] *= inv;
  }
  const int id = push(std::move(out), "softmax", {a}, [a, m, n](Tape& t, int self) {
    const Node& nd = t.nodes_[static_cast<size_t>(self)];
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < m; ++i) {
      const double* y = nd.value.data.data() + i * n;
      const double* g = nd.grad.data.data() + i * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += g[j] * y[j];
      double* garow = ga.data.data() + i * n;
      for (int64_t j = 0; j < n; ++j) garow[j] += y[j] * (g[j] - dot);
    }
  });
  return Var{id};
}

Var Tape::log_softmax(Var a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 1 && ta.rank() <= 2, "log_softmax", "expects rank 1 or 2");
  const int64_t m = row_count(ta), n = ta.cols();
  Tensor out = ta;
  for (int64_t i = 0; i < m; ++i) {
    double* row = out.data.data() + i * n;
    double mx = row[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (int64_t j = 0; j < n; ++j) row[j] -= lse;
  }
  const int id = push(std::move(out), "log_softmax", {a}, [a, m, n](Tape& t, int self) {
    const Node& nd = t.nodes_[static_cast<size_t>(self)];
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < m; ++i) {
      const double* y = nd.value.data.data() + i * n;
      const double* g = nd.grad.data.data() + i * n;
      double gsum = 0.0;
      for (int64_t j = 0; j < n; ++j) gsum += g[j];
      double* garow = ga.data.data() + i * n;
      for (int64_t j = 0; j < n; ++j) garow[j] += g[j] - std::exp(y[j]) * gsum;
    }
  });
  return Var{id};
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (const double v : ta.data) s += v;
  const int id = push(Tensor::scalar(s), "sum", {a}, [a](Tape& t, int self) {
    const double g = t.nodes_[static_cast<size_t>(self)].grad.data[0];
    Tensor& ga = t.grad_buf(a.id);
    for (double& x : ga.data) x += g;
  });
  return Var{id};
}

Var Tape::mean(Var a) {
  const Tensor& ta = value(a);
  require(ta.numel() > 0, "mean", "empty tensor");
  double s = 0.0;
  for (const double v : ta.data) s += v;
  const double inv = 1.0 / static_cast<double>(ta.numel());
  const int id = push(Tensor::scalar(s * inv), "mean", {a}, [a, inv](Tape& t, int self) {
    const double g = t.nodes_[static_cast<size_t>(self)].grad.data[0] * inv;
    Tensor& ga = t.grad_buf(a.id);
    for (double& x : ga.data) x += g;
  });
  return Var{id};
}

Var Tape::pick(Var a, int64_t row, int64_t col) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "pick", "expects rank-2 input");
  require(row >= 0 && row < ta.shape[0] && col >= 0 && col < ta.shape[1], "pick",
          "index out of range");
  const int id = push(Tensor::scalar(ta.at(row, col)), "pick", {a}, [a, row, col](Tape& t, int self) {
    t.grad_buf(a.id).at(row, col) += t.nodes_[static_cast<size_t>(self)].grad.data[0];
  });
  return Var{id};
}

Var Tape::gather_rows(Var a, std::span<const int> cols) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "gather_rows", "expects rank-2 input");
  require(static_cast<int64_t>(cols.size()) == ta.shape[0], "gather_rows",
          "one column index per row required");
  Tensor out({ta.shape[0]});
  for (int64_t i = 0; i < ta.shape[0]; ++i) {
    const int c = cols[static_cast<size_t>(i)];
    require(c >= 0 && c < ta.shape[1], "gather_rows", "column out of range");
    out.at(i) = ta.at(i, c);
  }
  std::vector<int> cv(cols.begin(), cols.end());
  const int id = push(std::move(out), "gather_rows", {a}, [a, cv](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < cv.size(); ++i)
      ga.at(static_cast<int64_t>(i), cv[i]) += g.data[i];
  });
  return Var{id};
}

Var Tape::minimum(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "minimum", "shape mismatch");
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::min(ta.data[i], tb.data[i]);
  const int id = push(std::move(out), "minimum", {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    const bool need_a = t.nodes_[static_cast<size_t>(a.id)].requires_grad;
    const bool need_b = t.nodes_[static_cast<size_t>(b.id)].requires_grad;
    for (size_t i = 0; i < g.data.size(); ++i) {
      if (va.data[i] <= vb.data[i]) {  // ties route to a
        if (need_a) t.grad_buf(a.id).data[i] += g.data[i];
      } else if (need_b) {
        t.grad_buf(b.id).data[i] += g.data[i];
      }
    }
  });
  return Var{id};
}

Var Tape::clamp(Var a, double lo, double hi) {
  require(lo <= hi, "clamp", "lo > hi");
  const Tensor& ta = value(a);
  Tensor out = ta;
  for (double& x : out.data) x = std::clamp(x, lo, hi);
  const int id = push(std::move(out), "clamp", {a}, [a, lo, hi](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (size_t i = 0; i < g.data.size(); ++i)
      if (va.data[i] >= lo && va.data[i] <= hi) ga.data[i] += g.data[i];
  });
  return Var{id};
}

Var Tape::concat_rows(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2, "concat_rows", "expects rank-2 inputs");
  require(ta.shape[1] == tb.shape[1], "concat_rows", "width mismatch");
  const int64_t ma = ta.shape[0], mb = tb.shape[0], n = ta.shape[1];
  Tensor out({ma + mb, n});
  std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.data.size());
  const int id = push(std::move(out), "concat_rows", {a, b}, [a, b, ma, mb, n](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) {
      Tensor& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < ma * n; ++i) ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
    }
    if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
      Tensor& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < mb * n; ++i)
        gb.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(ma * n + i)];
    }
  });
  return Var{id};
}

Var Tape::slice_rows(Var a, int64_t start, int64_t n) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "slice_rows", "expects rank-2 input");
  require(start >= 0 && n >= 0 && start + n <= ta.shape[0], "slice_rows", "range out of bounds");
  const int64_t w = ta.shape[1];
  Tensor out({n, w});
  std::copy_n(ta.row_ptr(start), n * w, out.data.begin());
  const int id = push(std::move(out), "slice_rows", {a}, [a, start, n, w](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < n * w; ++i)
      ga.data[static_cast<size_t>(start * w + i)] += g.data[static_cast<size_t>(i)];
  });
  return Var{id};
}

Var Tape::slice_cols(Var a, int64_t start, int64_t n) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "slice_cols", "expects rank-2 input");
  require(start >= 0 && n >= 0 && start + n <= ta.shape[1], "slice_cols", "range out of bounds");
  const int64_t m = ta.shape[0], w = ta.shape[1];
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i)
    std::copy_n(ta.row_ptr(i) + start, n, out.row_ptr(i));
  const int id = push(std::move(out), "slice_cols", {a}, [a, start, n, m, w](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < m; ++i) {
      const double* grow = g.row_ptr(i);
      double* garow = ga.data.data() + i * w + start;
      for (int64_t j = 0; j < n; ++j) garow[j] += grow[j];
    }
  });
  return Var{id};
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Var acc = parts[0];
  // fold as repeated binary concat; backward splits symmetrically
  for (size_t p = 1; p < parts.size(); ++p) {
    const Tensor& ta = value(acc);
    const Tensor& tb = value(parts[p]);
    require(ta.rank() == 2 && tb.rank() == 2 && ta.shape[0] == tb.shape[0], "concat_cols",
            "row mismatch");
    const int64_t m = ta.shape[0], na = ta.shape[1], nb = tb.shape[1];
    Tensor out({m, na + nb});
    for (int64_t i = 0; i < m; ++i) {
      std::copy_n(ta.row_ptr(i), na, out.row_ptr(i));
      std::copy_n(tb.row_ptr(i), nb, out.row_ptr(i) + na);
    }
    const Var a = acc, b = parts[p];
    const int id = push(std::move(out), "concat_cols", {a, b}, [a, b, m, na, nb](Tape& t, int self) {
      const Tensor& g = t.nodes_[static_cast<size_t>(self)].grad;
      if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) {
        Tensor& ga = t.grad_buf(a.id);
        for (int64_t i = 0; i < m; ++i) {
          const double* grow = g.row_ptr(i);
          double* garow = ga.row_ptr(i);
          for (int64_t j = 0; j < na; ++j) garow[j] += grow[j];
        }
      }
      if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
        Tensor& gb = t.grad_buf(b.id);
        for (int64_t i = 0; i < m; ++i) {
          const double* grow = g.row_ptr(i) + na;
          double* gbrow = gb.row_ptr(i);
          for (int64_t j = 0; j < nb; ++j) gbrow[j] += grow[j];
        }
      }
    });
    acc = Var{id};
  }
  return acc;
}

Var Tape::detach(Var a) {
  return leaf(value(a), false);  // value copied bitwise; no inputs recorded
}

Var Tape::causal_attention(Var q, Var k, Var v) {
  const Tensor& tq = value(q);
  require(tq.rank() == 2, "causal_attention", "expects rank-2 q/k/v");
  const int64_t t_len = tq.shape[0];
  const int64_t d_head = tq.shape[1];
  Tensor mask({t_len, t_len});
  for (int64_t i = 0; i < t_len; ++i)
    for (int64_t j = i + 1; j < t_len; ++j) mask.at(i, j) = kMaskNegative;
  const Var scores = add(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_head))),
                         constant(std::move(mask)));
  return matmul(softmax(scores), v);
}

}  // namespace roma
