#pragma once

#include "latentgibbs/factors.hpp"
#include "latentgibbs/linops.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace latentgibbs {

/// One latent slot per group.
using LatentState = std::vector<LatentValue>;

/// A group of rows sharing one factor and one latent. Singleton groups are
/// linear rows phi((Kx)_i); larger groups are isotropic,
/// phi(||((K_1 x)_i, ..., (K_d x)_i)||).
struct RowGroup {
  std::vector<Index> rows;
  std::uint32_t factor;
};

/// Product-of-experts model lifted to a Gaussian latent machine: operator
/// K (m x n), factor catalog and the partition of rows into groups.
class GlmModel {
public:
  /// `factors` is a catalog; each group refers to an entry by index so large
  /// GMMs are not copied per row. Every row must belong to exactly one group.
  GlmModel(LinearOperator op, std::vector<Factor> factors,
           std::vector<RowGroup> groups);

  /// One singleton group per row, all sharing `f`.
  static GlmModel uniform(LinearOperator op, const Factor &f);

  const LinearOperator &op() const { return op_; }
  Index n() const { return op_.cols(); }
  Index m() const { return op_.rows(); }

  std::size_t group_count() const { return groups_.size(); }
  const RowGroup &group(std::size_t g) const { return groups_[g]; }
  const std::vector<RowGroup> &groups() const { return groups_; }
  const Factor &group_factor(std::size_t g) const { return factors_[groups_[g].factor]; }
  const std::vector<Factor> &factors() const { return factors_; }
  std::size_t row_group(Index row) const { return row_group_[static_cast<std::size_t>(row)]; }
  bool has_isotropic_groups() const { return isotropic_; }

  /// Signed projection for singleton groups, Euclidean norm otherwise.
  double group_projection(std::size_t g, const Vector &kx) const;

  /// Unnormalized log-density sum_g log phi_g(s_g(x)).
  double log_density(const Vector &x) const;

  /// Latent state that is valid for every factor family; used where a
  /// placeholder is needed before the first latent draw.
  LatentState neutral_latents() const;

  /// Preconditioner plan. Blocks of K that cannot form (K o K)^T w on the
  /// fly but whose rows carry fixed Normal factors get their contribution
  /// probed once at construction.
  bool has_diagonal_preconditioner() const { return diag_available_; }
  /// diag(K^T diag(w) K) for per-row precisions w, using the plan above.
  Vector normal_eq_diagonal(const Vector &row_precision) const;

private:
  LinearOperator op_;
  std::vector<Factor> factors_;
  std::vector<RowGroup> groups_;
  std::vector<std::size_t> row_group_;
  bool isotropic_ = false;

  struct BlockPlan {
    LinearOperator op;
    Index offset;
    std::optional<Vector> fixed;
  };
  std::vector<BlockPlan> blocks_;
  bool diag_available_ = false;
};

} // namespace latentgibbs
