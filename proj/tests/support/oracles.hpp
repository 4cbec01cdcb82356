#ifndef GRIDRED_TESTS_ORACLES_HPP
#define GRIDRED_TESTS_ORACLES_HPP

#include <vector>

#include "gridred/case_model.hpp"
#include "gridred/gramians.hpp"
#include "gridred/network.hpp"
#include "gridred/types.hpp"

namespace gridred::testing {

/// Naive Lyapunov solve of A X + X A^T + Q = 0 by Kronecker vectorization;
/// independent of the production Schur-based solver.
MatrixXd lyapunov_kron(const MatrixXd& a, const MatrixXd& q);

/// Random stable linear system with eigenvalues in [-3, -0.5]; the similarity
/// transform is I + 0.3 * random, so it stays well conditioned.
struct LinearTestSystem {
  MatrixXd a, b, c;
  DynamicalSystem system() const;
};
LinearTestSystem random_stable_system(int n, int v, int p, Rng& rng);

MatrixXd random_psd(int n, int rank, Rng& rng, double scale = 1.0);

/// Literal re-assembly of the full augmented admittance matrix (bus nodes
/// plus machine internal nodes) followed by explicit-inverse block
/// elimination; the dense oracle for the production Kron reduction.
struct DenseReduction {
  MatrixXcd y_g, y_gnc, y_ncg, y_nc, r_g, r_nc;
};
DenseReduction dense_eliminate(const AreaView& area, const NetworkConfig& config = {});

/// Grid-refinement solve of the scalar (single ZIP bus) non-conforming-load
/// equation: coarse complex-plane search plus shrinking refinement.
Complex scalar_nc_oracle(const NetworkMatrices& mats, const std::vector<ZipLoad>& zips,
                         const VectorXcd& psi);

}  // namespace gridred::testing

#endif  // GRIDRED_TESTS_ORACLES_HPP
