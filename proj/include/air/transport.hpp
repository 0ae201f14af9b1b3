#pragma once

#include "air/types.hpp"

namespace air {

/// Optimal plan of a balanced transportation problem together with the dual
/// potentials that certify it (row_potential(i) + col_potential(j) <= cost(i, j)
/// everywhere, with equality on the basis).
struct TransportPlan {
  double cost = 0.0;
  Matrix flow;
  Vector row_potential;
  Vector col_potential;
  long pivots = 0;

  double dual_value(const Vector& supply, const Vector& demand) const {
    return row_potential.dot(supply) + col_potential.dot(demand);
  }
};

/// Exact transportation simplex (north-west corner start, MODI potentials,
/// Bland's rule for entering and leaving cells). Supply and demand must be
/// nonnegative with equal totals (relative 1e-10); the demand is rescaled to
/// match the supply total exactly before solving.
TransportPlan solve_transport(const Vector& supply, const Vector& demand, const Matrix& cost);

}  // namespace air
