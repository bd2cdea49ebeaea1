#pragma once

#include "latentgibbs/factors.hpp"
#include "latentgibbs/linops.hpp"
#include "latentgibbs/rng.hpp"

#include <Eigen/LU>

#include <utility>
#include <vector>

namespace latentgibbs {

/// Rooted tree given by a parent array (parent[root] = -1). Edge e joins
/// parent -> child for the e-th non-root node in index order.
class DirectedTree {
public:
  explicit DirectedTree(std::vector<Index> parent);

  /// Path 0 -> 1 -> ... -> n-1.
  static DirectedTree chain(Index n);

  Index size() const { return static_cast<Index>(parent_.size()); }
  Index root() const { return root_; }
  Index parent(Index node) const { return parent_[static_cast<std::size_t>(node)]; }
  const std::vector<Index> &preorder() const { return preorder_; }
  /// (parent, child) pairs; size n - 1.
  const std::vector<std::pair<Index, Index>> &edges() const { return edges_; }
  /// Edge index whose child is `node` (-1 for the root).
  Index edge_of(Index node) const { return edge_of_[static_cast<std::size_t>(node)]; }

private:
  std::vector<Index> parent_;
  Index root_ = 0;
  std::vector<Index> preorder_;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<Index> edge_of_;
};

/// Solves sum_i x_i = u0 and x_child - x_parent = u_e for every edge.
Vector tree_solve(const DirectedTree &tree, double u0, const Vector &u_edges);

/// Exact draw from phi0(sum_i x_i) prod_e phi_e(x_child - x_parent).
/// `edge_factors` holds one factor per edge or a single shared one.
Vector sample_tree_prior(const DirectedTree &tree, const Factor &phi0,
                         const std::vector<Factor> &edge_factors, Rng &rng);

/// Draws U_i ~ phi_i and returns the solution of K X = U, an exact sample
/// of the complete model prod_i phi_i((Kx)_i). Lower-triangular K uses
/// forward substitution; anything else an LU factorization computed once.
class CompleteSampler {
public:
  explicit CompleteSampler(Matrix k);
  explicit CompleteSampler(const LinearOperator &k);

  Vector draw(const std::vector<Factor> &factors, Rng &rng) const;
  Vector solve(const Vector &u) const;

private:
  Matrix k_;
  bool lower_triangular_ = false;
  Eigen::PartialPivLU<Matrix> lu_;
};

Vector sample_complete(const Matrix &k, const std::vector<Factor> &factors, Rng &rng);

} // namespace latentgibbs
