#pragma once

#include "latentgibbs/model.hpp"

#include <string_view>
#include <vector>

namespace latentgibbs {

/// The four small baseline models. Factor: phi(x). Product: phi(x)^5.
/// Loop: 4-cycle of edge factors phi(x_j - x_i). Grid: 2 x 3 lattice with
/// one inner and six outer edges. Loop and grid are improper and carry the
/// extra mean row with phi0.
enum class Topology { factor, product, loop, grid };

/// Edge classes whose marginal laws coincide and share one ground truth.
enum class MarginalClass { factor, product, loop, grid_inner, grid_outer };

struct MarginalSet {
  MarginalClass cls;
  std::vector<Vector> functionals;
};

struct Baseline {
  Topology topology;
  GlmModel model;
  std::vector<MarginalSet> marginals;
};

Baseline build_baseline(Topology topology, const Factor &phi, const Factor &phi0);
Baseline build_baseline(Topology topology, const Factor &phi);

std::string_view to_string(Topology t);
std::string_view to_string(MarginalClass c);
Topology parse_topology(std::string_view name);

} // namespace latentgibbs
