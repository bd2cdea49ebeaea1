#include "latentgibbs/direct.hpp"

#include "latentgibbs/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace latentgibbs {

DirectedTree::DirectedTree(std::vector<Index> parent) : parent_(std::move(parent)) {
  const auto n = static_cast<Index>(parent_.size());
  require(n >= 1, "tree: no nodes");
  root_ = -1;
  std::vector<std::vector<Index>> children(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index p = parent_[static_cast<std::size_t>(i)];
    if (p < 0) {
      require(root_ < 0, "tree: more than one root");
      root_ = i;
      continue;
    }
    require(p < n && p != i, "tree: invalid parent of node " + std::to_string(i));
    children[static_cast<std::size_t>(p)].push_back(i);
  }
  require(root_ >= 0, "tree: no root");

  edge_of_.assign(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    if (i == root_)
      continue;
    edge_of_[static_cast<std::size_t>(i)] = static_cast<Index>(edges_.size());
    edges_.emplace_back(parent_[static_cast<std::size_t>(i)], i);
  }

  preorder_.reserve(static_cast<std::size_t>(n));
  std::vector<Index> stack{root_};
  while (!stack.empty()) {
    const Index v = stack.back();
    stack.pop_back();
    preorder_.push_back(v);
    const auto &ch = children[static_cast<std::size_t>(v)];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it)
      stack.push_back(*it);
  }
  require(static_cast<Index>(preorder_.size()) == n,
          "tree: parent array contains a cycle or unreachable nodes");
}

DirectedTree DirectedTree::chain(Index n) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    parent[static_cast<std::size_t>(i)] = i - 1;
  return DirectedTree(std::move(parent));
}

Vector tree_solve(const DirectedTree &tree, double u0, const Vector &u_edges) {
  const Index n = tree.size();
  require(u_edges.size() == n - 1, "tree_solve: need one value per edge");
  Vector z(n);
  z[tree.root()] = 0.0;
  for (Index v : tree.preorder()) {
    if (v == tree.root())
      continue;
    z[v] = z[tree.parent(v)] + u_edges[tree.edge_of(v)];
  }
  const double base = (u0 - z.sum()) / static_cast<double>(n);
  return z.array() + base;
}

Vector sample_tree_prior(const DirectedTree &tree, const Factor &phi0,
                         const std::vector<Factor> &edge_factors, Rng &rng) {
  const auto edges = static_cast<std::size_t>(tree.size() - 1);
  require(edge_factors.size() == edges || edge_factors.size() == 1,
          "sample_tree_prior: need one factor per edge or a shared one");
  const double u0 = sample_factor(phi0, rng);
  Vector u(static_cast<Index>(edges));
  for (std::size_t e = 0; e < edges; ++e)
    u[static_cast<Index>(e)] =
        sample_factor(edge_factors.size() == 1 ? edge_factors[0] : edge_factors[e], rng);
  return tree_solve(tree, u0, u);
}

CompleteSampler::CompleteSampler(Matrix k) : k_(std::move(k)) {
  require(k_.rows() == k_.cols() && k_.rows() >= 1, "complete model: K must be square");
  const Index n = k_.rows();
  lower_triangular_ = k_.isLowerTriangular(0.0);
  bool singular;
  if (lower_triangular_) {
    singular = (k_.diagonal().array() == 0.0).any();
  } else {
    lu_.compute(k_);
    // PartialPivLU does not report rank; use the singular values instead.
    const Eigen::JacobiSVD<Matrix> svd(k_);
    const auto &s = svd.singularValues();
    singular = !(s[n - 1] > 1e-12 * s[0]);
  }
  if (singular)
    fail(ErrorCode::invalid_argument, "complete model: K is singular");
}

CompleteSampler::CompleteSampler(const LinearOperator &k) : CompleteSampler(k.to_dense()) {}

Vector CompleteSampler::solve(const Vector &u) const {
  require(u.size() == k_.rows(), "complete model: wrong right-hand side length");
  if (lower_triangular_)
    return k_.triangularView<Eigen::Lower>().solve(u);
  return lu_.solve(u);
}

Vector CompleteSampler::draw(const std::vector<Factor> &factors, Rng &rng) const {
  require(static_cast<Index>(factors.size()) == k_.rows(),
          "complete model: need one factor per row");
  Vector u(k_.rows());
  for (Index i = 0; i < u.size(); ++i)
    u[i] = sample_factor(factors[static_cast<std::size_t>(i)], rng);
  return solve(u);
}

Vector sample_complete(const Matrix &k, const std::vector<Factor> &factors, Rng &rng) {
  return CompleteSampler(k).draw(factors, rng);
}

} // namespace latentgibbs
