#include "latentgibbs/model.hpp"

#include "latentgibbs/error.hpp"

#include <cmath>
#include <string>

namespace latentgibbs {

namespace {

constexpr Index kProbeLimit = 16384;

} // namespace

GlmModel::GlmModel(LinearOperator op, std::vector<Factor> factors,
                   std::vector<RowGroup> groups)
    : op_(std::move(op)), factors_(std::move(factors)), groups_(std::move(groups)) {
  require(!factors_.empty(), "model: empty factor catalog");
  const auto m = static_cast<std::size_t>(op_.rows());
  constexpr auto unassigned = static_cast<std::size_t>(-1);
  row_group_.assign(m, unassigned);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto &grp = groups_[g];
    require(!grp.rows.empty(), "model: empty row group");
    require(grp.factor < factors_.size(), "model: factor index out of range");
    if (grp.rows.size() > 1) {
      require(factors_[grp.factor].is_gsm(),
              "model: isotropic groups need a zero-mean scale-mixture factor, got " +
                  factors_[grp.factor].describe());
      isotropic_ = true;
    }
    for (Index r : grp.rows) {
      require(r >= 0 && static_cast<std::size_t>(r) < m, "model: row out of range");
      require(row_group_[static_cast<std::size_t>(r)] == unassigned,
              "model: row " + std::to_string(r) + " assigned twice");
      row_group_[static_cast<std::size_t>(r)] = g;
    }
  }
  for (std::size_t r = 0; r < m; ++r)
    require(row_group_[r] != unassigned,
            "model: row " + std::to_string(r) + " has no group");

  diag_available_ = true;
  Index offset = 0;
  for (auto &b : op_.blocks()) {
    BlockPlan plan{b, offset, std::nullopt};
    if (!b.supports_sq_adjoint()) {
      bool fixed = true;
      Vector w(b.rows());
      for (Index i = 0; i < b.rows(); ++i) {
        const Factor &f = group_factor(row_group(offset + i));
        if (f.family() != Family::normal) {
          fixed = false;
          break;
        }
        w[i] = 1.0 / f.as<NormalFactor>().variance;
      }
      if (fixed && b.cols() <= kProbeLimit) {
        Vector diag(b.cols());
        Vector e = Vector::Zero(b.cols());
        Vector col(b.rows());
        for (Index j = 0; j < b.cols(); ++j) {
          e[j] = 1.0;
          b.apply_into(e, col);
          diag[j] = col.cwiseAbs2().dot(w);
          e[j] = 0.0;
        }
        plan.fixed = std::move(diag);
      } else {
        diag_available_ = false;
      }
    }
    offset += b.rows();
    blocks_.push_back(std::move(plan));
  }
}

GlmModel GlmModel::uniform(LinearOperator op, const Factor &f) {
  std::vector<RowGroup> groups(static_cast<std::size_t>(op.rows()));
  for (Index i = 0; i < op.rows(); ++i)
    groups[static_cast<std::size_t>(i)] = RowGroup{{i}, 0};
  return GlmModel(std::move(op), {f}, std::move(groups));
}

double GlmModel::group_projection(std::size_t g, const Vector &kx) const {
  const auto &rows = groups_[g].rows;
  if (rows.size() == 1)
    return kx[rows.front()];
  double s = 0.0;
  for (Index r : rows)
    s += kx[r] * kx[r];
  return std::sqrt(s);
}

double GlmModel::log_density(const Vector &x) const {
  const Vector kx = op_.apply(x);
  double total = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g)
    total += logpdf(group_factor(g), group_projection(g, kx));
  return total;
}

LatentState GlmModel::neutral_latents() const {
  LatentState z(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    switch (group_factor(g).family()) {
    case Family::normal: z[g] = std::monostate{}; break;
    case Family::gmm: z[g] = std::size_t{0}; break;
    default: z[g] = 1.0; break;
    }
  }
  return z;
}

Vector GlmModel::normal_eq_diagonal(const Vector &row_precision) const {
  require(diag_available_, "model: no diagonal preconditioner for this operator");
  Vector d = Vector::Zero(n());
  for (const auto &b : blocks_) {
    if (b.fixed)
      d += *b.fixed;
    else
      d += b.op.sq_adjoint_diag(row_precision.segment(b.offset, b.op.rows()));
  }
  return d;
}

} // namespace latentgibbs
