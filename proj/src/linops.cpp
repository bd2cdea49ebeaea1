#include "latentgibbs/linops.hpp"

#include "latentgibbs/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace latentgibbs {

namespace detail {

struct OperatorImpl {
  OperatorImpl(LinearOperator::Kind kind, Index rows, Index cols)
      : kind(kind), rows(rows), cols(cols) {}
  virtual ~OperatorImpl() = default;

  // y = K x
  virtual void forward(ConstVecRef x, VecRef y) const = 0;
  // x += alpha K^T y
  virtual void adjoint_add(ConstVecRef y, VecRef x, double alpha) const = 0;
  virtual bool has_sq_adjoint() const { return false; }
  // out += alpha (K o K)^T w
  virtual void sq_adjoint_add(ConstVecRef, VecRef, double) const {
    fail(ErrorCode::unsupported_operator,
         std::string(name()) + " does not support squared-adjoint diagonals");
  }
  virtual std::string_view name() const = 0;

  LinearOperator::Kind kind;
  Index rows;
  Index cols;
};

} // namespace detail

namespace {

using detail::OperatorImpl;
using Kind = LinearOperator::Kind;

class IdentityOp final : public OperatorImpl {
public:
  explicit IdentityOp(Index n) : OperatorImpl(Kind::identity, n, n) {}
  void forward(ConstVecRef x, VecRef y) const override { y = x; }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    x += alpha * y;
  }
  bool has_sq_adjoint() const override { return true; }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    out += alpha * w;
  }
  std::string_view name() const override { return "identity"; }
};

class Grad2dCircOp final : public OperatorImpl {
public:
  Grad2dCircOp(Index h, Index w)
      : OperatorImpl(Kind::grad2d_circ, 2 * h * w, h * w), h_(h), w_(w) {}

  void forward(ConstVecRef x, VecRef y) const override {
    const Index n = h_ * w_;
    for (Index i = 0; i < h_; ++i) {
      const Index down = ((i + 1) % h_) * w_;
      for (Index j = 0; j < w_; ++j) {
        const Index p = i * w_ + j;
        y[p] = x[i * w_ + (j + 1) % w_] - x[p];
        y[n + p] = x[down + j] - x[p];
      }
    }
  }

  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    const Index n = h_ * w_;
    for (Index i = 0; i < h_; ++i) {
      const Index down = ((i + 1) % h_) * w_;
      for (Index j = 0; j < w_; ++j) {
        const Index p = i * w_ + j;
        x[i * w_ + (j + 1) % w_] += alpha * y[p];
        x[p] -= alpha * y[p];
        x[down + j] += alpha * y[n + p];
        x[p] -= alpha * y[n + p];
      }
    }
  }

  bool has_sq_adjoint() const override { return true; }

  // A difference row whose wrap-around neighbour is the pixel itself is
  // identically zero (width or height 1) and contributes nothing.
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    const Index n = h_ * w_;
    for (Index i = 0; i < h_; ++i) {
      const Index down = ((i + 1) % h_) * w_;
      for (Index j = 0; j < w_; ++j) {
        const Index p = i * w_ + j;
        const Index right = i * w_ + (j + 1) % w_;
        if (right != p) {
          out[right] += alpha * w[p];
          out[p] += alpha * w[p];
        }
        if (down + j != p) {
          out[down + j] += alpha * w[n + p];
          out[p] += alpha * w[n + p];
        }
      }
    }
  }

  std::string_view name() const override { return "grad2d_circ"; }

private:
  Index h_, w_;
};

class MeanRowOp final : public OperatorImpl {
public:
  explicit MeanRowOp(Index n) : OperatorImpl(Kind::mean_row, 1, n) {}
  void forward(ConstVecRef x, VecRef y) const override { y[0] = x.mean(); }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    x.array() += alpha * y[0] / static_cast<double>(cols);
  }
  bool has_sq_adjoint() const override { return true; }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    const double c = static_cast<double>(cols);
    out.array() += alpha * w[0] / (c * c);
  }
  std::string_view name() const override { return "mean_row"; }
};

class ScaledOp final : public OperatorImpl {
public:
  ScaledOp(LinearOperator inner, double factor)
      : OperatorImpl(Kind::scaled, inner.rows(), inner.cols()),
        inner_(std::move(inner)), factor_(factor) {}

  void forward(ConstVecRef x, VecRef y) const override {
    inner_.impl().forward(x, y);
    y *= factor_;
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    inner_.impl().adjoint_add(y, x, alpha * factor_);
  }
  bool has_sq_adjoint() const override {
    return inner_.impl().has_sq_adjoint();
  }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    inner_.impl().sq_adjoint_add(w, out, alpha * factor_ * factor_);
  }
  std::string_view name() const override { return "scaled"; }

private:
  LinearOperator inner_;
  double factor_;
};

class StackedOp final : public OperatorImpl {
public:
  StackedOp(std::vector<LinearOperator> blocks, Index rows, Index cols)
      : OperatorImpl(Kind::stacked, rows, cols), blocks_(std::move(blocks)) {
    offsets_.reserve(blocks_.size());
    Index offset = 0;
    for (const auto &b : blocks_) {
      offsets_.push_back(offset);
      offset += b.rows();
    }
  }

  void forward(ConstVecRef x, VecRef y) const override {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].impl().forward(x, y.segment(offsets_[k], blocks_[k].rows()));
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].impl().adjoint_add(y.segment(offsets_[k], blocks_[k].rows()),
                                    x, alpha);
  }
  bool has_sq_adjoint() const override {
    for (const auto &b : blocks_)
      if (!b.impl().has_sq_adjoint())
        return false;
    return true;
  }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].impl().sq_adjoint_add(
          w.segment(offsets_[k], blocks_[k].rows()), out, alpha);
  }
  std::string_view name() const override { return "stacked"; }

  const std::vector<LinearOperator> &blocks() const { return blocks_; }

private:
  std::vector<LinearOperator> blocks_;
  std::vector<Index> offsets_;
};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;

Matrix dct_matrix(Index n) {
  Matrix c(n, n);
  const double nn = static_cast<double>(n);
  for (Index k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (Index j = 0; j < n; ++j)
      c(k, j) = scale * std::cos(std::numbers::pi * (static_cast<double>(j) + 0.5) *
                                 static_cast<double>(k) / nn);
  }
  return c;
}

class Dct2dOp final : public OperatorImpl {
public:
  Dct2dOp(Index h, Index w)
      : OperatorImpl(Kind::dct2d, h * w, h * w), h_(h), w_(w),
        ch_(dct_matrix(h)), cw_(dct_matrix(w)) {}

  void forward(ConstVecRef x, VecRef y) const override {
    Eigen::Map<const RowMajor> img(x.data(), h_, w_);
    Eigen::Map<RowMajor> out(y.data(), h_, w_);
    out.noalias() = ch_ * img * cw_.transpose();
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    Eigen::Map<const RowMajor> coeffs(y.data(), h_, w_);
    Eigen::Map<RowMajor> out(x.data(), h_, w_);
    out.noalias() += alpha * (ch_.transpose() * coeffs * cw_);
  }
  std::string_view name() const override { return "dct2d"; }

private:
  Index h_, w_;
  Matrix ch_, cw_;
};

class RowSelectionOp final : public OperatorImpl {
public:
  RowSelectionOp(Index n, std::vector<Index> indices)
      : OperatorImpl(Kind::row_selection, static_cast<Index>(indices.size()), n),
        indices_(std::move(indices)) {}

  void forward(ConstVecRef x, VecRef y) const override {
    for (std::size_t k = 0; k < indices_.size(); ++k)
      y[static_cast<Index>(k)] = x[indices_[k]];
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    for (std::size_t k = 0; k < indices_.size(); ++k)
      x[indices_[k]] += alpha * y[static_cast<Index>(k)];
  }
  bool has_sq_adjoint() const override { return true; }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    adjoint_add(w, out, alpha);
  }
  std::string_view name() const override { return "row_selection"; }

private:
  std::vector<Index> indices_;
};

class DenseOp final : public OperatorImpl {
public:
  explicit DenseOp(Matrix m)
      : OperatorImpl(Kind::dense, m.rows(), m.cols()), m_(std::move(m)),
        squared_(m_.array().square().matrix()) {}

  void forward(ConstVecRef x, VecRef y) const override { y.noalias() = m_ * x; }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    x.noalias() += alpha * (m_.transpose() * y);
  }
  bool has_sq_adjoint() const override { return true; }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    out.noalias() += alpha * (squared_.transpose() * w);
  }
  std::string_view name() const override { return "dense"; }

private:
  Matrix m_;
  Matrix squared_;
};

class EdgeDifferenceOp final : public OperatorImpl {
public:
  EdgeDifferenceOp(Index n, std::vector<std::pair<Index, Index>> edges)
      : OperatorImpl(Kind::edge_difference, static_cast<Index>(edges.size()), n),
        edges_(std::move(edges)) {}

  void forward(ConstVecRef x, VecRef y) const override {
    for (std::size_t k = 0; k < edges_.size(); ++k)
      y[static_cast<Index>(k)] = x[edges_[k].second] - x[edges_[k].first];
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const double v = alpha * y[static_cast<Index>(k)];
      x[edges_[k].second] += v;
      x[edges_[k].first] -= v;
    }
  }
  bool has_sq_adjoint() const override { return true; }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const double v = alpha * w[static_cast<Index>(k)];
      out[edges_[k].second] += v;
      out[edges_[k].first] += v;
    }
  }
  std::string_view name() const override { return "edge_difference"; }

private:
  std::vector<std::pair<Index, Index>> edges_;
};

class ComposedOp final : public OperatorImpl {
public:
  ComposedOp(LinearOperator outer, LinearOperator inner)
      : OperatorImpl(Kind::composed, outer.rows(), inner.cols()),
        outer_(std::move(outer)), inner_(std::move(inner)) {}

  void forward(ConstVecRef x, VecRef y) const override {
    Vector tmp(inner_.rows());
    inner_.impl().forward(x, tmp);
    outer_.impl().forward(tmp, y);
  }
  void adjoint_add(ConstVecRef y, VecRef x, double alpha) const override {
    Vector tmp = Vector::Zero(inner_.rows());
    outer_.impl().adjoint_add(y, tmp, 1.0);
    inner_.impl().adjoint_add(tmp, x, alpha);
  }
  // Row selection keeps whole rows, so (M K) o (M K) = M (K o K).
  bool has_sq_adjoint() const override {
    const auto k = outer_.kind();
    return (k == Kind::row_selection || k == Kind::identity) &&
           inner_.impl().has_sq_adjoint();
  }
  void sq_adjoint_add(ConstVecRef w, VecRef out, double alpha) const override {
    if (!has_sq_adjoint())
      OperatorImpl::sq_adjoint_add(w, out, alpha);
    Vector tmp = Vector::Zero(inner_.rows());
    outer_.impl().adjoint_add(w, tmp, 1.0);
    inner_.impl().sq_adjoint_add(tmp, out, alpha);
  }
  std::string_view name() const override { return "composed"; }

private:
  LinearOperator outer_;
  LinearOperator inner_;
};

void check_size(Index got, Index expected, const char *what) {
  if (got != expected)
    fail(ErrorCode::invalid_argument,
         std::string(what) + ": expected length " + std::to_string(expected) +
             ", got " + std::to_string(got));
}

} // namespace

LinearOperator::LinearOperator(std::shared_ptr<const detail::OperatorImpl> impl)
    : impl_(std::move(impl)) {}

Index LinearOperator::rows() const { return impl_->rows; }
Index LinearOperator::cols() const { return impl_->cols; }
LinearOperator::Kind LinearOperator::kind() const { return impl_->kind; }
std::string_view LinearOperator::name() const { return impl_->name(); }

Vector LinearOperator::apply(ConstVecRef x) const {
  Vector y(rows());
  apply_into(x, y);
  return y;
}

Vector LinearOperator::apply_adjoint(ConstVecRef y) const {
  Vector x(cols());
  apply_adjoint_into(y, x);
  return x;
}

void LinearOperator::apply_into(ConstVecRef x, VecRef y) const {
  check_size(x.size(), cols(), "apply");
  check_size(y.size(), rows(), "apply output");
  impl_->forward(x, y);
}

void LinearOperator::apply_adjoint_into(ConstVecRef y, VecRef x) const {
  check_size(y.size(), rows(), "apply_adjoint");
  check_size(x.size(), cols(), "apply_adjoint output");
  x.setZero();
  impl_->adjoint_add(y, x, 1.0);
}

bool LinearOperator::supports_sq_adjoint() const {
  return impl_->has_sq_adjoint();
}

Vector LinearOperator::sq_adjoint_diag(ConstVecRef w) const {
  check_size(w.size(), rows(), "sq_adjoint_diag");
  if (!impl_->has_sq_adjoint())
    fail(ErrorCode::unsupported_operator,
         std::string(name()) + " does not support squared-adjoint diagonals");
  Vector out = Vector::Zero(cols());
  impl_->sq_adjoint_add(w, out, 1.0);
  return out;
}

Matrix LinearOperator::to_dense() const {
  if (static_cast<double>(rows()) * static_cast<double>(cols()) > 5e7)
    fail(ErrorCode::size_exceeded, "operator too large to materialize");
  Matrix m(rows(), cols());
  Vector e = Vector::Zero(cols());
  Vector col(rows());
  for (Index j = 0; j < cols(); ++j) {
    e[j] = 1.0;
    impl_->forward(e, col);
    m.col(j) = col;
    e[j] = 0.0;
  }
  return m;
}

std::vector<LinearOperator> LinearOperator::blocks() const {
  if (kind() == Kind::stacked)
    return static_cast<const StackedOp &>(*impl_).blocks();
  return {*this};
}

LinearOperator identity(Index n) {
  require(n >= 1, "identity: n must be positive");
  return LinearOperator(std::make_shared<IdentityOp>(n));
}

LinearOperator grad2d_circ(Index height, Index width) {
  require(height >= 1 && width >= 1, "grad2d_circ: empty image");
  return LinearOperator(std::make_shared<Grad2dCircOp>(height, width));
}

LinearOperator mean_row(Index n) {
  require(n >= 1, "mean_row: n must be positive");
  return LinearOperator(std::make_shared<MeanRowOp>(n));
}

LinearOperator scaled(LinearOperator op, double factor) {
  require(std::isfinite(factor) && factor != 0.0,
          "scaled: factor must be finite and nonzero");
  return LinearOperator(std::make_shared<ScaledOp>(std::move(op), factor));
}

LinearOperator stacked(std::vector<LinearOperator> blocks) {
  require(!blocks.empty(), "stacked: no blocks");
  const Index cols = blocks.front().cols();
  Index rows = 0;
  std::vector<LinearOperator> flat;
  for (auto &b : blocks) {
    require(b.cols() == cols, "stacked: blocks disagree on column count");
    rows += b.rows();
    // Nested stacks are flattened so blocks() exposes the leaf operators.
    for (auto &leaf : b.blocks())
      flat.push_back(std::move(leaf));
  }
  return LinearOperator(std::make_shared<StackedOp>(std::move(flat), rows, cols));
}

LinearOperator dct2d(Index height, Index width) {
  require(height >= 1 && width >= 1, "dct2d: empty image");
  return LinearOperator(std::make_shared<Dct2dOp>(height, width));
}

LinearOperator select_rows(Index n, std::vector<Index> indices) {
  require(!indices.empty(), "select_rows: empty selection");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index i : indices) {
    require(i >= 0 && i < n, "select_rows: index out of range");
    require(!seen[static_cast<std::size_t>(i)], "select_rows: duplicate index");
    seen[static_cast<std::size_t>(i)] = true;
  }
  return LinearOperator(std::make_shared<RowSelectionOp>(n, std::move(indices)));
}

LinearOperator dense(Matrix matrix) {
  require(matrix.rows() >= 1 && matrix.cols() >= 1, "dense: empty matrix");
  if (matrix.cols() > 64)
    fail(ErrorCode::size_exceeded, "dense: at most 64 columns supported");
  return LinearOperator(std::make_shared<DenseOp>(std::move(matrix)));
}

LinearOperator edge_differences(Index n,
                                std::vector<std::pair<Index, Index>> edges) {
  require(!edges.empty(), "edge_differences: no edges");
  for (const auto &[from, to] : edges)
    require(from >= 0 && from < n && to >= 0 && to < n && from != to,
            "edge_differences: invalid edge");
  return LinearOperator(std::make_shared<EdgeDifferenceOp>(n, std::move(edges)));
}

LinearOperator composed(LinearOperator outer, LinearOperator inner) {
  require(outer.cols() == inner.rows(), "composed: dimension mismatch");
  return LinearOperator(
      std::make_shared<ComposedOp>(std::move(outer), std::move(inner)));
}

} // namespace latentgibbs
