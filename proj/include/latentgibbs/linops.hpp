#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace latentgibbs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VecRef = Eigen::Ref<Vector>;
using ConstVecRef = Eigen::Ref<const Vector>;

namespace detail {
struct OperatorImpl;
}

/// Matrix-free m x n linear map. Cheap to copy; the underlying operator is
/// immutable and may be applied concurrently.
class LinearOperator {
public:
  enum class Kind {
    identity,
    grad2d_circ,
    mean_row,
    scaled,
    stacked,
    dct2d,
    row_selection,
    dense,
    edge_difference,
    composed,
  };

  Index rows() const;
  Index cols() const;
  Kind kind() const;
  std::string_view name() const;

  Vector apply(ConstVecRef x) const;
  Vector apply_adjoint(ConstVecRef y) const;

  /// y = K x, overwriting y.
  void apply_into(ConstVecRef x, VecRef y) const;
  /// x = K^T y, overwriting x.
  void apply_adjoint_into(ConstVecRef y, VecRef x) const;

  /// Whether (K o K)^T w can be formed without materializing K.
  bool supports_sq_adjoint() const;

  /// diag(K^T diag(w) K) computed as (K o K)^T w. Throws
  /// ErrorCode::unsupported_operator for global operators such as the DCT.
  Vector sq_adjoint_diag(ConstVecRef w) const;

  /// Materializes the operator column by column. Intended for oracles and
  /// setup-time probing on small problems.
  Matrix to_dense() const;

  /// Constituents of a stacked operator, or the operator itself.
  std::vector<LinearOperator> blocks() const;

  const detail::OperatorImpl &impl() const { return *impl_; }

  explicit LinearOperator(std::shared_ptr<const detail::OperatorImpl> impl);

private:
  std::shared_ptr<const detail::OperatorImpl> impl_;
};

LinearOperator identity(Index n);

/// Forward differences with circular boundary on a row-major height x width
/// image. The first n rows are horizontal differences
/// x[i, (j+1) mod w] - x[i, j], the next n rows vertical ones.
LinearOperator grad2d_circ(Index height, Index width);

/// The 1 x n row (1/n, ..., 1/n).
LinearOperator mean_row(Index n);

LinearOperator scaled(LinearOperator op, double factor);

/// Vertical concatenation; all blocks must share the column count.
LinearOperator stacked(std::vector<LinearOperator> blocks);

/// Separable orthonormal DCT-II on a row-major height x width image.
LinearOperator dct2d(Index height, Index width);

/// Selects entries `indices` (distinct, each < n) of an n-vector.
LinearOperator select_rows(Index n, std::vector<Index> indices);

/// Explicit matrix, limited to 64 columns.
LinearOperator dense(Matrix matrix);

/// Row k maps x to x[to_k] - x[from_k] for edge k = (from_k, to_k).
LinearOperator edge_differences(Index n,
                                std::vector<std::pair<Index, Index>> edges);

/// outer o inner.
LinearOperator composed(LinearOperator outer, LinearOperator inner);

} // namespace latentgibbs
