#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fairac/rng.hpp"

namespace fairac {

// Dense 2-D double tensor with reverse-mode differentiation. Operations are
// recorded on an explicit Tape; backward() replays the records in reverse.
// A tape and the tensors it touches belong to one logical thread.

struct TensorData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  bool tracked = false;  // requires_grad, or computed from a tracked input

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() : data_(std::make_shared<TensorData>()) {}

  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0,
         bool requires_grad = false)
      : data_(std::make_shared<TensorData>()) {
    data_->rows = rows;
    data_->cols = cols;
    data_->value.assign(rows * cols, fill);
    data_->requires_grad = requires_grad;
    data_->tracked = requires_grad;
  }

  static Tensor scalar(double v) {
    Tensor t(1, 1, v);
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t(r, c, 0.0, requires_grad);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw std::invalid_argument("Tensor::from_rows: ragged rows");
      for (double v : row) t.data_->value[i++] = v;
    }
    return t;
  }

  std::size_t rows() const { return data_->rows; }
  std::size_t cols() const { return data_->cols; }
  std::size_t size() const { return data_->value.size(); }

  double& at(std::size_t r, std::size_t c) { return data_->value[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_->value[r * cols() + c]; }

  std::vector<double>& value() { return data_->value; }
  const std::vector<double>& value() const { return data_->value; }

  bool has_grad() const { return data_->grad.size() == data_->value.size(); }
  std::vector<double>& grad() {
    data_->ensure_grad();
    return data_->grad;
  }
  const std::vector<double>& grad() const {
    if (!has_grad()) throw std::logic_error("Tensor::grad: gradient not populated");
    return data_->grad;
  }
  void zero_grad() {
    data_->ensure_grad();
    std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
  }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool b) {
    data_->requires_grad = b;
    data_->tracked = data_->tracked || b;
  }
  bool tracked() const { return data_->tracked; }

  double item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return data_->value[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  std::shared_ptr<TensorData> ptr() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

// Ordered record of executed differentiable operations. Entries are appended
// in execution order; backward() visits each exactly once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { entries_.push_back(std::move(fn)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  void replay_reverse() const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

 private:
  std::vector<BackwardFn> entries_;
};

// Sparse matrix, CSR. Values are constants with respect to differentiation;
// only the dense operand of spmm receives gradients.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // length rows + 1
  std::vector<std::size_t> col_idx;
  std::vector<double> val;

  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<std::tuple<std::size_t, std::size_t, double>> t) {
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto [r, c, v] = t[i];
      if (r >= rows || c >= cols) throw std::invalid_argument("CsrMatrix: index out of range");
      if (!m.col_idx.empty() && i > 0 && std::get<0>(t[i - 1]) == r &&
          std::get<1>(t[i - 1]) == c) {
        m.val.back() += v;  // merge duplicates
        continue;
      }
      m.col_idx.push_back(c);
      m.val.push_back(v);
      ++m.row_ptr[r + 1];
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }

  double at(std::size_t r, std::size_t c) const {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (col_idx[k] == c) return val[k];
    return 0.0;
  }

  std::size_t nnz() const { return val.size(); }
};

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

// C (m x n) = op(A) * op(B), optionally accumulating into C.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + p * n;
      double* crow = c + i * n;
      if (!trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      }
    }
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// One argument of an op: records only when the output is tracked, and at
// backward time routes into inputs that participate in differentiation.
inline bool wants_grad(const Tensor& t) { return t.tracked(); }

}  // namespace detail

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  Tensor out(a.rows(), b.cols());
  detail::gemm(false, false, a.rows(), b.cols(), a.cols(), a.value().data(),
               b.value().data(), out.value().data(), false);
  if (detail::wants_grad(a) || detail::wants_grad(b)) {
    out.ptr()->tracked = true;
    auto pa = a.ptr(), pb = b.ptr(), po = out.ptr();
    tape.record([pa, pb, po] {
      po->ensure_grad();
      if (pa->tracked) {
        pa->ensure_grad();
        // dA += dC * B^T
        detail::gemm(false, true, pa->rows, pa->cols, pb->cols, po->grad.data(),
                     pb->value.data(), pa->grad.data(), true);
      }
      if (pb->tracked) {
        pb->ensure_grad();
        // dB += A^T * dC
        detail::gemm(true, false, pb->rows, pb->cols, pa->rows, pa->value.data(),
                     po->grad.data(), pb->grad.data(), true);
      }
    });
  }
  return out;
}

// Sparse-dense product: out = A * x with CSR A held constant.
inline Tensor spmm(Tape& tape, const CsrMatrix& a, const Tensor& x) {
  if (a.cols != x.rows())
    throw std::invalid_argument("spmm: inner dimensions differ");
  Tensor out(a.rows, x.cols());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* orow = out.value().data() + i * d;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const double v = a.val[k];
      const double* xrow = x.value().data() + a.col_idx[k] * d;
      for (std::size_t j = 0; j < d; ++j) orow[j] += v * xrow[j];
    }
  }
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr();
    auto po = out.ptr();
    const CsrMatrix* am = &a;  // caller keeps the adjacency alive for the tape's lifetime
    tape.record([am, px, po] {
      po->ensure_grad();
      px->ensure_grad();
      const std::size_t d = px->cols;
      for (std::size_t i = 0; i < am->rows; ++i) {
        const double* grow = po->grad.data() + i * d;
        for (std::size_t k = am->row_ptr[i]; k < am->row_ptr[i + 1]; ++k) {
          double* xrow = px->grad.data() + am->col_idx[k] * d;
          const double v = am->val[k];
          for (std::size_t j = 0; j < d; ++j) xrow[j] += v * grow[j];
        }
      }
    });
  }
  return out;
}

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(Tape& tape, const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, Bwd bwd) {
  check_same_shape(a, b, name);
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.value()[i] = fwd(a.value()[i], b.value()[i]);
  if (wants_grad(a) || wants_grad(b)) {
    out.ptr()->tracked = true;
    auto pa = a.ptr(), pb = b.ptr(), po = out.ptr();
    tape.record([pa, pb, po, bwd] {
      po->ensure_grad();
      if (pa->tracked) pa->ensure_grad();
      if (pb->tracked) pb->ensure_grad();
      for (std::size_t i = 0; i < po->value.size(); ++i) {
        const double g = po->grad[i];
        double da, db;
        bwd(pa->value[i], pb->value[i], da, db);
        if (pa->tracked) pa->grad[i] += g * da;
        if (pb->tracked) pb->grad[i] += g * db;
      }
    });
  }
  return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.value()[i] = fwd(x.value()[i]);
  if (wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po, bwd] {
      po->ensure_grad();
      px->ensure_grad();
      for (std::size_t i = 0; i < po->value.size(); ++i)
        px->grad[i] += po->grad[i] * bwd(px->value[i], po->value[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double& da, double& db) { da = 1.0; db = 1.0; });
}

inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double& da, double& db) { da = 1.0; db = -1.0; });
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double& da, double& db) { da = y; db = x; });
}

inline Tensor scale(Tape& tape, const Tensor& x, double c) {
  return detail::unary_elementwise(
      tape, x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(Tape& tape, const Tensor& x, double c) {
  return detail::unary_elementwise(
      tape, x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

// Broadcast a 1 x d bias over every row of x (n x d).
inline Tensor add_rowvec(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
  Tensor out(x.rows(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      out.value()[r * d + c] = x.value()[r * d + c] + bias.value()[c];
  if (detail::wants_grad(x) || detail::wants_grad(bias)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), pb = bias.ptr(), po = out.ptr();
    tape.record([px, pb, po] {
      po->ensure_grad();
      const std::size_t d = px->cols;
      if (px->tracked) {
        px->ensure_grad();
        for (std::size_t i = 0; i < po->grad.size(); ++i) px->grad[i] += po->grad[i];
      }
      if (pb->tracked) {
        pb->ensure_grad();
        for (std::size_t r = 0; r < px->rows; ++r)
          for (std::size_t c = 0; c < d; ++c) pb->grad[c] += po->grad[r * d + c];
      }
    });
  }
  return out;
}

inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return detail::stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(Tape& tape, const Tensor& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(Tape& tape, const Tensor& x, double slope = 0.2) {
  return detail::unary_elementwise(
      tape, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

inline Tensor square(Tape& tape, const Tensor& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor sqrt_elem(Tape& tape, const Tensor& x) {
  for (double v : x.value())
    if (v < 0.0) throw std::domain_error("sqrt_elem: negative input");
  return detail::unary_elementwise(
      tape, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

inline Tensor row_softmax(Tape& tape, const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  const std::size_t d = x.cols();
  if (d == 0) throw std::invalid_argument("row_softmax: empty rows");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.value().data() + r * d;
    double* o = out.value().data() + r * d;
    double mx = in[0];
    for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < d; ++c) o[c] /= sum;
  }
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po] {
      po->ensure_grad();
      px->ensure_grad();
      const std::size_t d = px->cols;
      for (std::size_t r = 0; r < px->rows; ++r) {
        const double* y = po->value.data() + r * d;
        const double* gy = po->grad.data() + r * d;
        double* gx = px->grad.data() + r * d;
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += gy[c] * y[c];
        for (std::size_t c = 0; c < d; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    });
  }
  return out;
}

inline Tensor sum_all(Tape& tape, const Tensor& x) {
  Tensor out(1, 1);
  double s = 0.0;
  for (double v : x.value()) s += v;
  out.value()[0] = s;
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po] {
      po->ensure_grad();
      px->ensure_grad();
      const double g = po->grad[0];
      for (double& gi : px->grad) gi += g;
    });
  }
  return out;
}

inline Tensor mean_all(Tape& tape, const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  Tensor out(1, 1);
  double s = 0.0;
  for (double v : x.value()) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  out.value()[0] = s * inv;
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po, inv] {
      po->ensure_grad();
      px->ensure_grad();
      const double g = po->grad[0] * inv;
      for (double& gi : px->grad) gi += g;
    });
  }
  return out;
}

// Per-row Euclidean norm: (n x d) -> (n x 1). Zero rows get zero gradient.
inline Tensor row_l2_norm(Tape& tape, const Tensor& x) {
  Tensor out(x.rows(), 1);
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    const double* in = x.value().data() + r * d;
    for (std::size_t c = 0; c < d; ++c) s += in[c] * in[c];
    out.value()[r] = std::sqrt(s);
  }
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po] {
      po->ensure_grad();
      px->ensure_grad();
      const std::size_t d = px->cols;
      for (std::size_t r = 0; r < px->rows; ++r) {
        const double norm = po->value[r];
        if (norm == 0.0) continue;
        const double g = po->grad[r] / norm;
        const double* in = px->value.data() + r * d;
        double* gx = px->grad.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) gx[c] += g * in[c];
      }
    });
  }
  return out;
}

// Numerically stable binary cross entropy on logits, averaged over all
// entries: mean(max(z,0) - z*y + log(1 + exp(-|z|))).
inline Tensor bce_with_logits(Tape& tape, const Tensor& logits, const Tensor& targets) {
  detail::check_same_shape(logits, targets, "bce_with_logits");
  if (logits.size() == 0) throw std::invalid_argument("bce_with_logits: empty input");
  Tensor out(1, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.value()[i];
    const double y = targets.value()[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  const double inv = 1.0 / static_cast<double>(logits.size());
  out.value()[0] = s * inv;
  if (detail::wants_grad(logits) || detail::wants_grad(targets)) {
    out.ptr()->tracked = true;
    auto pz = logits.ptr(), py = targets.ptr(), po = out.ptr();
    tape.record([pz, py, po, inv] {
      po->ensure_grad();
      const double g = po->grad[0] * inv;
      if (pz->tracked) {
        pz->ensure_grad();
        for (std::size_t i = 0; i < pz->value.size(); ++i)
          pz->grad[i] += g * (detail::stable_sigmoid(pz->value[i]) - py->value[i]);
      }
      if (py->tracked) {
        py->ensure_grad();
        for (std::size_t i = 0; i < py->value.size(); ++i)
          py->grad[i] += g * (-pz->value[i]);
      }
    });
  }
  return out;
}

// Inverted dropout: keeps with probability 1-p and scales by 1/(1-p), so
// evaluation needs no rescaling. p == 0 or training == false is an exact
// pass-through that consumes no randomness.
inline Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Tensor out(x.rows(), x.cols());
  auto mask = std::make_shared<std::vector<double>>(x.size());
  const double inv_keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() >= p ? inv_keep : 0.0;
    (*mask)[i] = m;
    out.value()[i] = x.value()[i] * m;
  }
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po, mask] {
      po->ensure_grad();
      px->ensure_grad();
      for (std::size_t i = 0; i < px->value.size(); ++i)
        px->grad[i] += po->grad[i] * (*mask)[i];
    });
  }
  return out;
}

// Column-wise concatenation: (n x a, n x b) -> n x (a+b).
inline Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
  Tensor out(a.rows(), a.cols() + b.cols());
  const std::size_t ca = a.cols(), cb = b.cols(), co = ca + cb;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.value().data() + r * ca, ca, out.value().data() + r * co);
    std::copy_n(b.value().data() + r * cb, cb, out.value().data() + r * co + ca);
  }
  if (detail::wants_grad(a) || detail::wants_grad(b)) {
    out.ptr()->tracked = true;
    auto pa = a.ptr(), pb = b.ptr(), po = out.ptr();
    tape.record([pa, pb, po] {
      po->ensure_grad();
      const std::size_t ca = pa->cols, cb = pb->cols, co = ca + cb;
      if (pa->tracked) {
        pa->ensure_grad();
        for (std::size_t r = 0; r < pa->rows; ++r)
          for (std::size_t c = 0; c < ca; ++c)
            pa->grad[r * ca + c] += po->grad[r * co + c];
      }
      if (pb->tracked) {
        pb->ensure_grad();
        for (std::size_t r = 0; r < pb->rows; ++r)
          for (std::size_t c = 0; c < cb; ++c)
            pb->grad[r * cb + c] += po->grad[r * co + ca + c];
      }
    });
  }
  return out;
}

// Vertical stack of same-width blocks.
inline Tensor concat_rows(Tape& tape, const std::vector<Tensor>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("concat_rows: no blocks");
  const std::size_t d = blocks.front().cols();
  std::size_t total = 0;
  for (const Tensor& b : blocks) {
    if (b.cols() != d) throw std::invalid_argument("concat_rows: column mismatch");
    total += b.rows();
  }
  Tensor out(total, d);
  std::size_t row = 0;
  bool tracked = false;
  for (const Tensor& b : blocks) {
    std::copy(b.value().begin(), b.value().end(), out.value().begin() + static_cast<std::ptrdiff_t>(row * d));
    row += b.rows();
    tracked = tracked || detail::wants_grad(b);
  }
  if (tracked) {
    out.ptr()->tracked = true;
    auto po = out.ptr();
    std::vector<std::shared_ptr<TensorData>> parts;
    parts.reserve(blocks.size());
    for (const Tensor& b : blocks) parts.push_back(b.ptr());
    tape.record([po, parts] {
      po->ensure_grad();
      std::size_t row = 0;
      for (const auto& p : parts) {
        if (p->tracked) {
          p->ensure_grad();
          const std::size_t len = p->value.size();
          const double* src = po->grad.data() + row * p->cols;
          for (std::size_t i = 0; i < len; ++i) p->grad[i] += src[i];
        }
        row += p->rows;
      }
    });
  }
  return out;
}

inline Tensor transpose(Tape& tape, const Tensor& x) {
  Tensor out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.value()[c * x.rows() + r] = x.value()[r * x.cols() + c];
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    tape.record([px, po] {
      po->ensure_grad();
      px->ensure_grad();
      const std::size_t rows = px->rows, cols = px->cols;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          px->grad[r * cols + c] += po->grad[c * rows + r];
    });
  }
  return out;
}

// Row gather: out[i] = x[indices[i]]. Backward scatter-adds, so repeated
// indices accumulate.
inline Tensor gather_rows(Tape& tape, const Tensor& x, const std::vector<std::size_t>& indices) {
  Tensor out(indices.size(), x.cols());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) throw std::out_of_range("gather_rows: row index out of range");
    std::copy_n(x.value().data() + indices[i] * d, d, out.value().data() + i * d);
  }
  if (detail::wants_grad(x)) {
    out.ptr()->tracked = true;
    auto px = x.ptr(), po = out.ptr();
    auto idx = std::make_shared<std::vector<std::size_t>>(indices);
    tape.record([px, po, idx] {
      po->ensure_grad();
      px->ensure_grad();
      const std::size_t d = px->cols;
      for (std::size_t i = 0; i < idx->size(); ++i) {
        double* dst = px->grad.data() + (*idx)[i] * d;
        const double* src = po->grad.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

// Reverse pass from a recorded scalar loss. Gradients accumulate additively;
// callers zero them between steps (AdamState does this after each update).
inline void backward(Tape& tape, const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
  if (tape.empty()) throw std::logic_error("backward: tape is empty");
  loss.ptr()->ensure_grad();
  loss.ptr()->grad[0] += 1.0;
  tape.replay_reverse();
}

}  // namespace fairac
