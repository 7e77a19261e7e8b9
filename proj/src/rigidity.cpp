#include "rsp/rigidity.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsp::rigidity {

namespace {

using qsim::Complex;

constexpr double kPairTol = 1e-8;

double operator_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

void canonicalize_phase(Eigen::Ref<Vector> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double mag = std::abs(v(i));
    if (mag > 1e-9) {
      v *= std::conj(v(i)) / mag;
      return;
    }
  }
}

// u_0 and u_2 for u in the fixed order (1,3,5,7): u_0 = 0 iff u in {1,7},
// u_2 = 0 iff u in {1,3}.
constexpr int kU0[4] = {0, 1, 1, 0};
constexpr int kU2[4] = {0, 0, 1, 1};

Matrix effect(const Matrix& observable, int bit) {
  Matrix id = Matrix::Identity(observable.rows(), observable.cols());
  return 0.5 * (id + (bit == 0 ? 1.0 : -1.0) * observable);
}

Matrix top_eigen_projector(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Eigen::Index top = h.rows() - 1;  // eigenvalues ascending
  Vector v = es.eigenvectors().col(top);
  return v * v.adjoint();
}

Matrix random_pure_state(Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    v(i) = Complex(rng.next_gaussian(), rng.next_gaussian());
  }
  v.normalize();
  return v * v.adjoint();
}

Matrix random_observable(Rng& rng, int dim) {
  Matrix h(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      h(i, j) = Complex(rng.next_gaussian(), rng.next_gaussian());
    }
  }
  return snap_to_observable(0.5 * (h + h.adjoint()));
}

}  // namespace

double opt_q() { return 0.5 + 0.5 / std::sqrt(2.0); }

double BlochVector::norm() const { return std::sqrt(x * x + y * y + z * z); }

void BlochVector::validate(double tol) const {
  if (std::abs(norm() - 1.0) > tol) {
    throw std::invalid_argument("Bloch vector not unit norm");
  }
}

QracInstance QracInstance::canonical() {
  QracInstance inst;
  const int us[4] = {1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) {
    inst.encodings[i] = qsim::QubitState::plus(us[i]).density();
  }
  inst.x0 = qsim::pauli_x();
  inst.x2 = qsim::pauli_y();
  return inst;
}

void QracInstance::validate() const {
  for (const auto& rho : encodings) {
    if (rho.rows() != 2 || rho.cols() != 2) {
      throw std::invalid_argument("encodings must be single-qubit");
    }
    qsim::check_density(rho, 1e-9, 1e-9);
  }
  qsim::check_observable(x0, 1e-8);
  qsim::check_observable(x2, 1e-8);
}

double qrac_success(const QracInstance& inst) {
  inst.validate();
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    total += 0.5 * ((effect(inst.x0, kU0[i]) * inst.encodings[i]).trace().real() +
                    (effect(inst.x2, kU2[i]) * inst.encodings[i]).trace().real());
  }
  return total / 4.0;
}

double qrac_bound_from_bloch(const BlochVector& v0, const BlochVector& v2) {
  v0.validate();
  v2.validate();
  double sum = std::sqrt((v0.x + v2.x) * (v0.x + v2.x) +
                         (v0.y + v2.y) * (v0.y + v2.y) +
                         (v0.z + v2.z) * (v0.z + v2.z));
  double diff = std::sqrt((v0.x - v2.x) * (v0.x - v2.x) +
                          (v0.y - v2.y) * (v0.y - v2.y) +
                          (v0.z - v2.z) * (v0.z - v2.z));
  double s = 2.0 * sum + 2.0 * diff;
  return 0.5 * (1.0 + s / 8.0);
}

double anticommutator_score(const Matrix& x0, const Matrix& x2,
                            const std::vector<Matrix>& states) {
  if (states.empty()) throw std::invalid_argument("no states given");
  if (x0.rows() != x2.rows() || x0.cols() != x2.cols()) {
    throw std::invalid_argument("dimension mismatch");
  }
  Matrix anti = x0 * x2 + x2 * x0;
  Matrix anti2 = anti * anti;
  double total = 0.0;
  for (const auto& rho : states) {
    if (rho.rows() != x0.rows()) {
      throw std::invalid_argument("dimension mismatch");
    }
    total += (anti2 * rho).trace().real();
  }
  return total / static_cast<double>(states.size());
}

namespace {

// Exact coordinate maximisation: best encodings given measurements, then best
// measurements given encodings. Each step cannot decrease the objective.
double refine(QracInstance& inst, int sweeps) {
  double best = qrac_success(inst);
  for (int it = 0; it < sweeps; ++it) {
    for (int i = 0; i < 4; ++i) {
      inst.encodings[i] = top_eigen_projector(
          effect(inst.x0, kU0[i]) + effect(inst.x2, kU2[i]));
    }
    Matrix n0 = Matrix::Zero(2, 2);
    Matrix n2 = Matrix::Zero(2, 2);
    for (int i = 0; i < 4; ++i) {
      n0 += (kU0[i] == 0 ? 1.0 : -1.0) * inst.encodings[i];
      n2 += (kU2[i] == 0 ? 1.0 : -1.0) * inst.encodings[i];
    }
    inst.x0 = snap_to_observable(n0);
    inst.x2 = snap_to_observable(n2);
    double now = qrac_success(inst);
    if (now <= best + 1e-14) {
      best = std::max(best, now);
      break;
    }
    best = now;
  }
  return best;
}

}  // namespace

OptimizeResult qrac_optimize(int trials, std::uint64_t seed,
                             const QracInstance* warm_start) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  Rng rng(seed);
  OptimizeResult result;
  result.best_instance = warm_start ? *warm_start : QracInstance::canonical();
  if (warm_start) {
    QracInstance inst = *warm_start;
    result.best_success = refine(inst, 32);
    result.best_instance = inst;
    if (trials == 1) return result;
  }
  for (int t = warm_start ? 1 : 0; t < trials; ++t) {
    QracInstance inst;
    for (auto& rho : inst.encodings) rho = random_pure_state(rng, 2);
    inst.x0 = random_observable(rng, 2);
    inst.x2 = random_observable(rng, 2);
    double value = refine(inst, 32);
    if (value > result.best_success) {
      result.best_success = value;
      result.best_instance = inst;
    }
  }
  return result;
}

Matrix snap_to_observable(const Matrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("not square");
  Matrix herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
  Eigen::VectorXd snapped(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < snapped.size(); ++i) {
    snapped(i) = es.eigenvalues()(i) < 0.0 ? -1.0 : 1.0;
  }
  return es.eigenvectors() * snapped.asDiagonal() * es.eigenvectors().adjoint();
}

IsometryReport jordan_extract(const Matrix& z, const Matrix& x,
                              const Matrix* x_prime, const Vector* psi) {
  qsim::check_observable(z, 1e-8);
  qsim::check_observable(x, 1e-8);
  const Eigen::Index dim = z.rows();
  if (x.rows() != dim) throw std::invalid_argument("dimension mismatch");
  if (dim % 2 != 0) throw std::invalid_argument("dimension must be even");
  if (x_prime) {
    qsim::check_observable(*x_prime, 1e-8);
    if (x_prime->rows() != dim) throw std::invalid_argument("dimension mismatch");
  }

  const Eigen::Index half = dim / 2;
  Eigen::SelfAdjointEigenSolver<Matrix> zd(z);
  Matrix plus_basis(dim, dim), minus_basis(dim, dim);
  Eigen::Index np = 0, nm = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (zd.eigenvalues()(i) > 0) {
      plus_basis.col(np++) = zd.eigenvectors().col(i);
    } else {
      minus_basis.col(nm++) = zd.eigenvectors().col(i);
    }
  }
  if (np != half) {
    throw std::invalid_argument(
        "Z eigenspaces have unequal dimension; blocks cannot be paired");
  }
  plus_basis.conservativeResize(dim, np);
  minus_basis.conservativeResize(dim, nm);

  const Matrix id = Matrix::Identity(dim, dim);
  const Matrix p = 0.5 * (id + z);
  const Matrix q = 0.5 * (id + x);

  // Jordan blocks: eigenvectors of Q compressed to range(P).
  Matrix t = plus_basis.adjoint() * q * plus_basis;
  Eigen::SelfAdjointEigenSolver<Matrix> td(t);

  Matrix v = Matrix::Zero(dim, dim);
  std::vector<Eigen::Index> deferred;
  std::vector<Vector> matched_partners;
  IsometryReport report;
  report.block_overlaps.resize(static_cast<std::size_t>(half), 0.0);

  for (Eigen::Index j = 0; j < half; ++j) {
    Vector u = plus_basis * td.eigenvectors().col(j);
    canonicalize_phase(u);
    v.row(j) = u.adjoint();
    double tj = std::clamp(td.eigenvalues()(j), 0.0, 1.0);
    report.block_overlaps[static_cast<std::size_t>(j)] = 2.0 * tj - 1.0;
    Vector w = (id - p) * (x * u);
    double s = w.norm();
    if (s > kPairTol) {
      Vector partner = w / s;
      v.row(half + j) = partner.adjoint();
      matched_partners.push_back(std::move(partner));
    } else {
      deferred.push_back(j);
    }
  }

  if (!deferred.empty()) {
    // Orthonormal basis of the unmatched part of range(Id - P), ordered by
    // its own Q-compression eigenvalues and phase-canonicalised.
    Matrix rem = minus_basis;
    for (const auto& partner : matched_partners) {
      rem -= partner * (partner.adjoint() * rem);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(rem);
    qr.setThreshold(1e-7);
    Eigen::Index rank = qr.rank();
    Matrix qfull = qr.householderQ() * Matrix::Identity(dim, rank);
    std::vector<Vector> leftovers;
    for (Eigen::Index c = 0; c < rank; ++c) leftovers.push_back(qfull.col(c));
    if (leftovers.size() != deferred.size()) {
      throw std::logic_error("block pairing failed to span the space");
    }
    Matrix left(dim, static_cast<Eigen::Index>(leftovers.size()));
    for (std::size_t c = 0; c < leftovers.size(); ++c) {
      left.col(static_cast<Eigen::Index>(c)) = leftovers[c];
    }
    Matrix tq = left.adjoint() * q * left;
    Eigen::SelfAdjointEigenSolver<Matrix> ld(tq);
    for (std::size_t c = 0; c < deferred.size(); ++c) {
      Vector partner = left * ld.eigenvectors().col(static_cast<Eigen::Index>(c));
      canonicalize_phase(partner);
      v.row(half + deferred[c]) = partner.adjoint();
    }
  }

  report.isometry = v;

  Matrix sigma_z_std = qsim::kron(qsim::pauli_z(), Matrix::Identity(half, half));
  Matrix sigma_x_std = qsim::kron(qsim::pauli_x(), Matrix::Identity(half, half));
  Matrix dz = z - v.adjoint() * sigma_z_std * v;
  Matrix dx = x - v.adjoint() * sigma_x_std * v;
  if (psi) {
    if (psi->size() % dim != 0) {
      throw std::invalid_argument("state dimension not a multiple of D");
    }
    const Eigen::Index aux = psi->size() / dim;
    auto weighted = [&](const Matrix& delta) {
      // ||(delta (x) Id_aux) psi||^2 with psi indexed system-major.
      Eigen::Map<const Matrix> m(psi->data(), aux, dim);
      return (m * delta.transpose()).squaredNorm();
    };
    report.state_weighted = true;
    report.z_residual = weighted(dz);
    report.x_residual = weighted(dx);
  } else {
    report.z_residual = operator_norm(dz);
    report.x_residual = operator_norm(dx);
  }

  if (x_prime) {
    Matrix b = v * (*x_prime) * v.adjoint();
    Matrix b01 = b.topRightCorner(half, half);
    Matrix b10 = b.bottomLeftCorner(half, half);
    Matrix ax = 0.5 * (b10 + b01);
    Matrix ay = (b10 - b01) / Complex(0.0, 2.0);
    report.a_x = ax;
    report.a_y = ay;
    report.axy_identity_error =
        operator_norm(ax * ax + ay * ay - Matrix::Identity(half, half));
    Matrix recon = qsim::kron(qsim::pauli_x(), ax) + qsim::kron(qsim::pauli_y(), ay);
    report.xprime_offdiag_error = operator_norm(b - recon);
  }
  return report;
}

}  // namespace rsp::rigidity
