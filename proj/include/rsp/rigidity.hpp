#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "rsp/qsim.hpp"
#include "rsp/rng.hpp"

namespace rsp::rigidity {

using Matrix = qsim::Matrix;
using Vector = qsim::Vector;

// opt_Q = 1/2 + 1/(2 sqrt 2), the optimal 2->1 QRAC success probability.
double opt_q();

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  void validate(double tol = 1e-10) const;  // unit norm
};

// Encodings indexed by u in {1,3,5,7} (order 1,3,5,7) plus the two
// measurements X_0 and X_2.
struct QracInstance {
  std::array<Matrix, 4> encodings;
  Matrix x0;
  Matrix x2;

  static QracInstance canonical();
  void validate() const;
};

// (1/4) sum_u (1/2) sum_{i in {0,2}} Tr(X_i^{u_i} phi_u) with u_0 = 0 iff
// u in {1,7} and u_2 = 0 iff u in {1,3}.
double qrac_success(const QracInstance& inst);

// 1/2 (1 + S/8) with S = 2|v0+v2| + 2|v0-v2|: the best success achievable by
// any encodings for measurements with these Bloch axes.
double qrac_bound_from_bloch(const BlochVector& v0, const BlochVector& v2);

// Mean over the given states of Tr({X0,X2}^2 phi).
double anticommutator_score(const Matrix& x0, const Matrix& x2,
                            const std::vector<Matrix>& states);

struct OptimizeResult {
  double best_success = 0.0;
  QracInstance best_instance;
};

// Random restarts plus alternating exact maximisation (best encodings for
// fixed measurements, best measurements for fixed encodings).
OptimizeResult qrac_optimize(int trials, std::uint64_t seed,
                             const QracInstance* warm_start = nullptr);

struct IsometryReport {
  Matrix isometry;          // unitary V: C^D -> C^2 (x) C^(D/2)
  double z_residual = 0.0;  // |Z - V^dag (sigma_Z (x) Id) V| in the chosen sense
  double x_residual = 0.0;
  bool state_weighted = false;  // residuals weighted by a supplied state
  std::optional<Matrix> a_x;    // present when a third observable was supplied
  std::optional<Matrix> a_y;
  double axy_identity_error = 0.0;  // |A_X^2 + A_Y^2 - Id|
  double xprime_offdiag_error = 0.0;  // part of X' outside the sigma_X/sigma_Y span
  std::vector<double> block_overlaps;  // cos of the Jordan angle per block
};

// Jordan-lemma standardisation of a pair of binary observables: builds the
// block pairing from the projections (Id+Z)/2 and (Id+X)/2, reports how far
// (Z, X) are from (sigma_Z (x) Id, sigma_X (x) Id) under it, and optionally
// decomposes a third observable as sigma_X (x) A_X + sigma_Y (x) A_Y.
// Degenerate blocks are paired deterministically: eigenvalues sorted, leftover
// vectors phase-canonicalised and matched in order.
IsometryReport jordan_extract(const Matrix& z, const Matrix& x,
                              const Matrix* x_prime = nullptr,
                              const Vector* psi = nullptr);

// Nearest binary observable to a Hermitian matrix (eigenvalue sign snap).
Matrix snap_to_observable(const Matrix& h);

}  // namespace rsp::rigidity
