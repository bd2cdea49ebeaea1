#include "latentgibbs/topologies.hpp"

#include "latentgibbs/error.hpp"
#include "latentgibbs/glm.hpp"

#include <string>
#include <utility>

namespace latentgibbs {

namespace {

Vector edge_functional(Index n, Index from, Index to) {
  Vector v = Vector::Zero(n);
  v[to] = 1.0;
  v[from] = -1.0;
  return v;
}

} // namespace

Baseline build_baseline(Topology topology, const Factor &phi, const Factor &phi0) {
  switch (topology) {
  case Topology::factor:
    return {topology, GlmModel::uniform(identity(1), phi),
            {{MarginalClass::factor, {Vector::Ones(1)}}}};
  case Topology::product: {
    std::vector<LinearOperator> rows(5, identity(1));
    return {topology, GlmModel::uniform(stacked(std::move(rows)), phi),
            {{MarginalClass::product, {Vector::Ones(1)}}}};
  }
  case Topology::loop: {
    const std::vector<std::pair<Index, Index>> edges{{0, 1}, {1, 3}, {2, 3}, {0, 2}};
    auto model = extend_improper(GlmModel::uniform(edge_differences(4, edges), phi), phi0);
    MarginalSet set{MarginalClass::loop, {}};
    for (auto [a, b] : edges)
      set.functionals.push_back(edge_functional(4, a, b));
    return {topology, std::move(model), {std::move(set)}};
  }
  case Topology::grid: {
    // nodes 0 1 2 on the top row, 3 4 5 below; (1, 4) is the inner edge
    const std::vector<std::pair<Index, Index>> edges{
        {0, 1}, {1, 2}, {2, 5}, {4, 5}, {3, 4}, {0, 3}, {1, 4}};
    auto model = extend_improper(GlmModel::uniform(edge_differences(6, edges), phi), phi0);
    MarginalSet inner{MarginalClass::grid_inner, {edge_functional(6, 1, 4)}};
    MarginalSet outer{MarginalClass::grid_outer, {}};
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
      outer.functionals.push_back(edge_functional(6, edges[k].first, edges[k].second));
    return {topology, std::move(model), {std::move(inner), std::move(outer)}};
  }
  }
  fail(ErrorCode::invalid_argument, "unknown topology");
}

Baseline build_baseline(Topology topology, const Factor &phi) {
  return build_baseline(topology, phi, Factor::normal(0.0, 1.0));
}

std::string_view to_string(Topology t) {
  switch (t) {
  case Topology::factor: return "factor";
  case Topology::product: return "product";
  case Topology::loop: return "loop";
  case Topology::grid: return "grid";
  }
  return "unknown";
}

std::string_view to_string(MarginalClass c) {
  switch (c) {
  case MarginalClass::factor: return "factor";
  case MarginalClass::product: return "product";
  case MarginalClass::loop: return "loop";
  case MarginalClass::grid_inner: return "grid-inner";
  case MarginalClass::grid_outer: return "grid-outer";
  }
  return "unknown";
}

Topology parse_topology(std::string_view name) {
  for (auto t : {Topology::factor, Topology::product, Topology::loop, Topology::grid})
    if (to_string(t) == name)
      return t;
  fail(ErrorCode::invalid_argument, "unknown topology '" + std::string(name) + "'");
}

} // namespace latentgibbs
