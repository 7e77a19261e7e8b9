#include "rsp/qsim.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace rsp::qsim {

namespace {

Complex phase(double angle) { return Complex(std::cos(angle), std::sin(angle)); }

Matrix matrix_sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace

QubitState QubitState::computational(int b) {
  if (b != 0 && b != 1) throw std::invalid_argument("bit out of range");
  QubitState q;
  q.a0 = b ? 0.0 : 1.0;
  q.a1 = b ? 1.0 : 0.0;
  return q;
}

QubitState QubitState::plus(int theta_index) {
  if (theta_index < 0 || theta_index > 7) {
    throw std::invalid_argument("phase index not in Z8");
  }
  QubitState q;
  q.a0 = 1.0 / std::sqrt(2.0);
  q.a1 = phase(theta_index * kPi / 4.0) / std::sqrt(2.0);
  return q;
}

QubitState QubitState::from_amplitudes(Complex a0, Complex a1) {
  QubitState q;
  q.a0 = a0;
  q.a1 = a1;
  double n = q.norm();
  if (std::abs(n - 1.0) > 1e-12) {
    if (n < 1e-15) throw std::invalid_argument("zero state");
    q.a0 /= n;
    q.a1 /= n;
  }
  q.canonicalize();
  return q;
}

void QubitState::canonicalize() {
  Complex lead = std::abs(a0) > 1e-12 ? a0 : a1;
  double mag = std::abs(lead);
  if (mag < 1e-15) return;
  Complex rot = std::conj(lead) / mag;
  a0 *= rot;
  a1 *= rot;
}

double QubitState::norm() const {
  return std::sqrt(std::norm(a0) + std::norm(a1));
}

Matrix QubitState::density() const {
  Matrix rho(2, 2);
  rho(0, 0) = a0 * std::conj(a0);
  rho(0, 1) = a0 * std::conj(a1);
  rho(1, 0) = a1 * std::conj(a0);
  rho(1, 1) = a1 * std::conj(a1);
  return rho;
}

std::optional<int> QubitState::phase_index(double tol) const {
  for (int k = 0; k < 8; ++k) {
    if (fidelity(*this, QubitState::plus(k)) > 1.0 - tol) return k;
  }
  return std::nullopt;
}

void check_density(const Matrix& rho, double trace_tol, double psd_tol,
                   int max_dim) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("not square");
  if (rho.rows() < 1 || rho.rows() > max_dim) {
    throw std::invalid_argument("dimension outside supported range");
  }
  if ((rho - rho.adjoint()).norm() > 1e-10) {
    throw std::invalid_argument("not Hermitian");
  }
  double tr = rho.trace().real();
  if (tr > 1.0 + trace_tol) throw std::invalid_argument("trace above one");
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
  if (es.eigenvalues().minCoeff() < -psd_tol) {
    throw std::invalid_argument("not positive semidefinite");
  }
}

void check_observable(const Matrix& o, double tol) {
  if (o.rows() != o.cols()) throw std::invalid_argument("not square");
  if ((o - o.adjoint()).norm() > tol) throw std::invalid_argument("not Hermitian");
  Matrix sq = o * o;
  if ((sq - Matrix::Identity(o.rows(), o.cols())).norm() > tol) {
    throw std::invalid_argument("square is not the identity");
  }
}

std::pair<entcf::Commitment, ClawSuperposition> commit(
    const entcf::KeyPair& key, Rng& rng) {
  ClawSuperposition state;
  if (key.pk.kind == entcf::FamilyKind::ClawFree) {
    // Measuring y on the uniform two-register superposition yields a uniform
    // image point; the residual state is the equal superposition of the claw.
    auto x0 = entcf::random_domain_element(key.pk, rng);
    auto y = entcf::eval(key, 0, x0);
    auto claw = entcf::invert_claw(key, y);
    if (!claw) throw std::logic_error("claw inversion failed on honest commit");
    state.two_branch = true;
    state.a0 = state.a1 = 1.0 / std::sqrt(2.0);
    state.x0 = claw->x0;
    state.x1 = claw->x1;
    state.j0 = entcf::j_encode_domain(key.pk, state.x0);
    state.j1 = entcf::j_encode_domain(key.pk, state.x1);
    return {y, state};
  }
  int b = rng.next_bit();
  auto x = entcf::random_domain_element(key.pk, rng);
  auto y = entcf::eval(key, b, x);
  state.two_branch = false;
  state.collapsed_branch = b;
  state.a0 = 1.0;
  state.x0 = x;
  state.j0 = entcf::j_encode_domain(key.pk, x);
  return {y, state};
}

std::pair<zq::EquationVector, QubitState> measure_equation(
    const ClawSuperposition& state, Rng& rng) {
  std::size_t w = state.j0.size();
  zq::EquationVector d(w);
  for (auto& e : d) e = static_cast<std::uint8_t>(rng.next_below(8));
  if (!state.two_branch) {
    return {d, QubitState::computational(state.collapsed_branch)};
  }
  int theta = zq::relative_phase_mod8(d, state.j0, state.j1);
  return {d, QubitState::plus(theta)};
}

std::pair<int, QubitState> measure_qubit(const QubitState& q,
                                         const Basis& basis, Rng& rng) {
  double n = q.norm();
  if (std::abs(n - 1.0) > 1e-9) throw std::invalid_argument("state not unit norm");
  if (basis.z) {
    double p0 = std::norm(q.a0);
    int bit = rng.next_double() < p0 ? 0 : 1;
    return {bit, QubitState::computational(bit)};
  }
  if (basis.theta_index < 0 || basis.theta_index > 3) {
    throw std::invalid_argument("measurement angle index out of range");
  }
  QubitState plus = QubitState::plus(basis.theta_index);
  QubitState minus = QubitState::plus(basis.theta_index + 4);
  Complex amp0 = std::conj(plus.a0) * q.a0 + std::conj(plus.a1) * q.a1;
  double p0 = std::norm(amp0);
  int bit = rng.next_double() < p0 ? 0 : 1;
  return {bit, bit == 0 ? plus : minus};
}

BufferResult buffer_evaluate(const MeasurementSpec& spec, const Matrix& rho,
                             const std::string& challenge, Rng& rng) {
  auto it = spec.povms.find(challenge);
  if (it == spec.povms.end()) {
    throw std::invalid_argument("no measurement for challenge " + challenge);
  }
  const auto& effects = it->second;
  if (effects.empty()) throw std::invalid_argument("empty POVM");
  check_density(rho);
  Matrix sum = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& e : effects) {
    if (e.rows() != rho.rows() || e.cols() != rho.cols()) {
      throw std::invalid_argument("effect dimension mismatch");
    }
    if ((e - e.adjoint()).norm() > 1e-9) {
      throw std::invalid_argument("effect not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(e);
    if (es.eigenvalues().minCoeff() < -1e-9) {
      throw std::invalid_argument("effect not PSD");
    }
    sum += e;
  }
  if ((sum - Matrix::Identity(rho.rows(), rho.cols())).norm() > 1e-10) {
    throw std::invalid_argument("effects do not sum to identity");
  }

  double tr = rho.trace().real();
  if (tr < 1e-12) throw std::invalid_argument("zero-trace state");
  double u = rng.next_double() * tr;
  std::size_t outcome = effects.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < effects.size(); ++i) {
    acc += (effects[i] * rho).trace().real();
    if (u < acc) {
      outcome = i;
      break;
    }
  }
  Matrix root = matrix_sqrt_psd(effects[outcome]);
  Matrix post = root * rho * root;
  double pt = post.trace().real();
  if (pt < 1e-15) {
    // Zero-probability branch hit by rounding; fall back to the effect range.
    post = effects[outcome] / std::max(effects[outcome].trace().real(), 1e-15);
    pt = post.trace().real();
  }
  return {outcome, post / pt};
}

double fidelity(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("dimension mismatch");
  }
  Matrix ra = matrix_sqrt_psd(a);
  Matrix inner = matrix_sqrt_psd(ra * b * ra);
  double f = inner.trace().real();
  return f * f;
}

double fidelity(const QubitState& a, const QubitState& b) {
  Complex overlap = std::conj(a.a0) * b.a0 + std::conj(a.a1) * b.a1;
  return std::norm(overlap);
}

double trace_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a - b);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const QubitState& a, const QubitState& b) {
  return trace_distance(a.density(), b.density());
}

Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix pauli_y() {
  Matrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix sigma_x_theta(double theta) {
  return std::cos(theta) * pauli_x() + std::sin(theta) * pauli_y();
}

Matrix identity(int dim) { return Matrix::Identity(dim, dim); }

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace rsp::qsim
