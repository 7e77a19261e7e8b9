#include "rsp/zq.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>

namespace rsp::zq {

bool is_prime(std::uint32_t q) {
  if (q < 2) return false;
  for (std::uint64_t p = 2; p * p <= q; ++p) {
    if (q % p == 0) return false;
  }
  return true;
}

void ModulusParams::validate() const {
  if (!is_prime(q)) throw std::invalid_argument("q must be prime");
  if (n < 1 || ell < 1 || w < 1) {
    throw std::invalid_argument("n, ell, w must be >= 1");
  }
}

AngleOutcome AngleOutcome::of(int theta_hat, int v_hat) {
  if (theta_hat < 0 || theta_hat > 3 || v_hat < 0 || v_hat > 1) {
    throw std::invalid_argument("angle components out of range");
  }
  AngleOutcome a;
  a.defined_ = true;
  a.theta_hat_ = theta_hat;
  a.v_hat_ = v_hat;
  return a;
}

int AngleOutcome::theta_hat() const {
  if (!defined_) throw std::logic_error("theta_hat of bottom outcome");
  return theta_hat_;
}

int AngleOutcome::v_hat() const {
  if (!defined_) throw std::logic_error("v_hat of bottom outcome");
  return v_hat_;
}

int AngleOutcome::z8() const { return theta_hat() + 4 * v_hat(); }

void ResidueVector::validate() const {
  if (q < 2) throw std::invalid_argument("modulus too small");
  for (auto e : entries) {
    if (e >= q) throw std::invalid_argument("entry not reduced mod q");
  }
}

void ResidueMatrix::validate() const {
  if (q < 2) throw std::invalid_argument("modulus too small");
  if (entries.size() != rows * cols) {
    throw std::invalid_argument("shape mismatch");
  }
  for (auto e : entries) {
    if (e >= q) throw std::invalid_argument("entry not reduced mod q");
  }
}

ResidueMatrix random_matrix(std::uint32_t q, std::size_t rows,
                            std::size_t cols, Rng& rng) {
  ResidueMatrix m;
  m.q = q;
  m.rows = rows;
  m.cols = cols;
  m.entries.resize(rows * cols);
  for (auto& e : m.entries) e = static_cast<std::uint32_t>(rng.next_below(q));
  return m;
}

BitString j_encode(std::uint64_t x, std::uint32_t w) {
  if (w == 0 || w > 64) throw std::invalid_argument("width out of range");
  if (w < 64 && x >= (std::uint64_t{1} << w)) {
    throw std::invalid_argument("value does not fit in w bits");
  }
  BitString bits(w);
  for (std::uint32_t i = 0; i < w; ++i) {
    bits[i] = static_cast<std::uint8_t>((x >> i) & 1);
  }
  return bits;
}

std::uint64_t j_decode(const BitString& bits) {
  if (bits.empty() || bits.size() > 64) {
    throw std::invalid_argument("width out of range");
  }
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw std::invalid_argument("non-binary entry");
    x |= std::uint64_t{bits[i]} << i;
  }
  return x;
}

int relative_phase_mod8(const EquationVector& d, const BitString& j0,
                        const BitString& j1) {
  if (d.size() != j0.size() || d.size() != j1.size()) {
    throw std::invalid_argument("length mismatch");
  }
  int acc = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 7) throw std::invalid_argument("equation entry not in Z8");
    acc += static_cast<int>(d[i]) * (static_cast<int>(j1[i]) - static_cast<int>(j0[i]));
  }
  return ((acc % 8) + 8) % 8;
}

AngleOutcome theta_decompose(int m) {
  if (m < 0 || m > 7) throw std::invalid_argument("m not in Z8");
  return AngleOutcome::of(m % 4, m / 4);
}

namespace {

// |representative in (-q/2, q/2]| in (q/32, 3q/32], compared exactly.
bool entry_in_band(std::uint32_t e, std::uint32_t q) {
  std::int64_t rep = static_cast<std::int64_t>(e);
  if (2 * rep > static_cast<std::int64_t>(q)) rep -= q;
  std::int64_t a = std::llabs(rep);
  return 32 * a > static_cast<std::int64_t>(q) &&
         32 * a <= 3 * static_cast<std::int64_t>(q);
}

bool span_vector_moderate(const ResidueMatrix& C,
                          const std::vector<std::uint32_t>& coeff,
                          bool* out_nonzero) {
  const std::size_t n = C.cols;
  std::size_t band = 0;
  bool nonzero = false;
  for (std::size_t j = 0; j < n; ++j) {
    std::uint64_t acc = 0;
    for (std::size_t r = 0; r < C.rows; ++r) {
      acc += static_cast<std::uint64_t>(coeff[r]) * C.at(r, j);
    }
    std::uint32_t e = static_cast<std::uint32_t>(acc % C.q);
    if (e != 0) nonzero = true;
    if (entry_in_band(e, C.q)) ++band;
  }
  *out_nonzero = nonzero;
  return 4 * band >= n;
}

}  // namespace

bool is_moderate_vector(const ResidueVector& b) {
  b.validate();
  std::size_t count = 0;
  for (auto e : b.entries) {
    if (entry_in_band(e, b.q)) ++count;
  }
  return 4 * count >= b.entries.size();
}

ModerateVerdict moderate_matrix_verdict(const ResidueMatrix& C,
                                        std::uint64_t cap, std::size_t samples,
                                        std::uint64_t sample_seed) {
  C.validate();
  double combos = std::pow(static_cast<double>(C.q), static_cast<double>(C.rows));
  std::vector<std::uint32_t> coeff(C.rows, 0);
  if (combos <= static_cast<double>(cap)) {
    // Odometer over all coefficient vectors in Z_q^ell.
    while (true) {
      bool nonzero = false;
      bool ok = span_vector_moderate(C, coeff, &nonzero);
      if (nonzero && !ok) return {false, true};
      std::size_t i = 0;
      while (i < coeff.size() && ++coeff[i] == C.q) coeff[i++] = 0;
      if (i == coeff.size()) break;
    }
    return {true, true};
  }
  Rng rng(sample_seed);
  for (std::size_t t = 0; t < samples; ++t) {
    for (auto& c : coeff) c = static_cast<std::uint32_t>(rng.next_below(C.q));
    bool nonzero = false;
    bool ok = span_vector_moderate(C, coeff, &nonzero);
    if (nonzero && !ok) return {false, false};
  }
  return {true, false};
}

bool is_moderate_matrix(const ResidueMatrix& C, std::uint64_t cap) {
  double combos = std::pow(static_cast<double>(C.q), static_cast<double>(C.rows));
  if (combos > static_cast<double>(cap)) {
    throw std::invalid_argument("row-span enumeration exceeds cap " +
                                std::to_string(cap));
  }
  return moderate_matrix_verdict(C, cap).moderate;
}

HardcoreDistanceReport hardcore_distance_oracle(const ResidueMatrix& C,
                                                const BitString& d_hat,
                                                int modulus_of_z) {
  C.validate();
  if (modulus_of_z != 2 && modulus_of_z != 8) {
    throw std::invalid_argument("modulus must be 2 or 8");
  }
  const std::size_t n = C.cols;
  if (n == 0 || n > 20) throw std::invalid_argument("need 1 <= n <= 20");
  if (d_hat.size() != n) throw std::invalid_argument("d_hat length mismatch");
  const int m = modulus_of_z;

  // Fiber index = mixed-radix encoding of v over q^ell.
  std::map<std::uint64_t, std::vector<std::uint64_t>> fiber_counts;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t s = 0; s < total; ++s) {
    std::uint64_t key = 0;
    for (std::size_t r = 0; r < C.rows; ++r) {
      std::uint64_t acc = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if ((s >> j) & 1) acc += C.at(r, j);
      }
      key = key * C.q + (acc % C.q);
    }
    int z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if ((s >> j) & 1) z += d_hat[j];
    }
    z %= m;
    auto& counts = fiber_counts[key];
    if (counts.empty()) counts.assign(static_cast<std::size_t>(m), 0);
    ++counts[static_cast<std::size_t>(z)];
  }

  HardcoreDistanceReport report;
  report.modulus = m;
  report.bound = 2.0 *
                 std::pow(static_cast<double>(C.q), C.rows / 2.0) *
                 std::pow(2.0, -static_cast<double>(n) / 80.0);
  double weighted = 0.0;
  for (const auto& [key, counts] : fiber_counts) {
    HardcoreFiberEntry entry;
    entry.v.resize(C.rows);
    std::uint64_t k = key;
    for (std::size_t r = C.rows; r-- > 0;) {
      entry.v[r] = static_cast<std::uint32_t>(k % C.q);
      k /= C.q;
    }
    for (auto c : counts) entry.fiber_size += c;
    double tv = 0.0;
    for (auto c : counts) {
      tv += std::abs(static_cast<double>(c) / entry.fiber_size - 1.0 / m);
    }
    entry.tv_distance = tv / 2.0;
    weighted += entry.tv_distance * entry.fiber_size;
    report.max_distance = std::max(report.max_distance, entry.tv_distance);
    report.fibers.push_back(std::move(entry));
  }
  report.mean_distance = weighted / static_cast<double>(total);
  return report;
}

}  // namespace rsp::zq
