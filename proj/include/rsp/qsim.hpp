#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsp/entcf.hpp"
#include "rsp/rng.hpp"
#include "rsp/zq.hpp"

namespace rsp::qsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Single qubit; amplitudes kept unit-norm with the global phase canonicalised
// so the first nonzero amplitude is real-positive.
struct QubitState {
  Complex a0{1.0, 0.0};
  Complex a1{0.0, 0.0};

  static QubitState computational(int b);
  // |+_theta> with theta = index * pi/4, index in Z8.
  static QubitState plus(int theta_index);
  static QubitState from_amplitudes(Complex a0, Complex a1);

  void canonicalize();
  double norm() const;
  Matrix density() const;
  // Z8 phase index when the state equals some |+_{k pi/4}>, else nullopt.
  std::optional<int> phase_index(double tol = 1e-9) const;
};

// The prover's post-commitment state, tracked symbolically: two branch
// amplitudes plus the claw labels. Exact at any encoding width.
struct ClawSuperposition {
  Complex a0{0.0, 0.0};
  Complex a1{0.0, 0.0};
  bool two_branch = false;
  int collapsed_branch = 0;  // valid when !two_branch
  entcf::DomainElement x0;
  entcf::DomainElement x1;  // unused when !two_branch
  zq::BitString j0;
  zq::BitString j1;
};

// Dimension cap for adversarial density matrices shipped to the buffer.
inline constexpr int kMaxBufferDim = 16;

void check_density(const Matrix& rho, double trace_tol = 1e-10,
                   double psd_tol = 1e-10, int max_dim = kMaxBufferDim);
void check_observable(const Matrix& o, double tol = 1e-10);

// POVM per challenge label; effects must be PSD and sum to the identity.
struct MeasurementSpec {
  std::map<std::string, std::vector<Matrix>> povms;
};

// Honest commitment: uniform y over the reachable range along with the exact
// post-measurement branch state (equal-amplitude two-branch for claw-free
// keys, collapsed single branch for injective keys).
std::pair<entcf::Commitment, ClawSuperposition> commit(
    const entcf::KeyPair& key, Rng& rng);

// Samples the equation uniformly and returns the residual qubit. Two-branch
// states give |+_theta> with theta = (pi/4) d.(J(x1)-J(x0)); collapsed states
// give the deterministic |b>.
std::pair<zq::EquationVector, QubitState> measure_equation(
    const ClawSuperposition& state, Rng& rng);

struct Basis {
  bool z = true;
  int theta_index = 0;  // in {0,1,2,3} when !z

  static Basis Z() { return Basis{true, 0}; }
  static Basis X(int theta_index) { return Basis{false, theta_index}; }
};

// Born-rule measurement; returns the outcome bit and the post-measurement
// eigenstate. X-basis outcome v corresponds to |+_{theta pi/4 + v pi}>.
std::pair<int, QubitState> measure_qubit(const QubitState& q,
                                         const Basis& basis, Rng& rng);

struct BufferResult {
  std::size_t outcome = 0;
  Matrix post;  // renormalised post-measurement state
};

// Measurement-buffer semantics: select the POVM for the challenge, sample the
// outcome by the Born rule, apply the Luders update.
BufferResult buffer_evaluate(const MeasurementSpec& spec, const Matrix& rho,
                             const std::string& challenge, Rng& rng);

double fidelity(const Matrix& a, const Matrix& b);
double fidelity(const QubitState& a, const QubitState& b);
double trace_distance(const Matrix& a, const Matrix& b);
double trace_distance(const QubitState& a, const QubitState& b);

Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();
// cos(theta) sigma_X + sin(theta) sigma_Y.
Matrix sigma_x_theta(double theta);
Matrix identity(int dim);
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace rsp::qsim
