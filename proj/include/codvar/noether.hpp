#pragma once

#include "codvar/grid.hpp"
#include "codvar/optimality.hpp"

namespace codvar {

// Same record as the optimality certificates; zeta is d x d per cell, witness.beta holds the
// hypo coefficients and witness.energy the conservation constant.
using NoetherCertificate = Certificate;

// Inner-variation inclusion: with the (x, xi) codifferential of f on each cell,
//   (0, -div zeta, zeta) in {(a, v1, grad u^T v2)} + (0, w1, grad u^T w2 - f I),
// tested weakly against interior nodal test fields. d = 1 or 2.
NoetherCertificate check_noether(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                                 const CheckOptions& opt = {});

// Energy (Erdmann) check for an x-independent 1D integrand: a = 0 face coefficients for v2 and w2 in the
// xi codifferential and a constant c with <u'_c, v2_c + w2_c> - f_c = c on every cell.
// A given hyper selection fixes w2; without one w2 ranges over the hyper face as well.
NoetherCertificate check_energy_conservation(const VariationalProblem& p, const DiscreteField& u,
                                             const CellSelection* hyper_sel = nullptr, const CheckOptions& opt = {});

}  // namespace codvar
