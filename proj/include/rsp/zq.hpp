#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rsp/rng.hpp"

namespace rsp::zq {

// Bit order convention used across the project: LSB-first, index 0 is the
// least significant bit.

struct ModulusParams {
  std::uint32_t q = 0;   // prime modulus
  std::uint32_t n = 0;   // lattice dimension
  std::uint32_t ell = 0; // constraint rows
  std::uint32_t w = 0;   // bit-encoding width

  void validate() const;  // throws std::invalid_argument on violation
  bool operator==(const ModulusParams&) const = default;
};

bool is_prime(std::uint32_t q);

using BitString = std::vector<std::uint8_t>;      // entries in {0,1}
using EquationVector = std::vector<std::uint8_t>; // entries in {0,...,7}

// Either both components defined or neither (bottom).
class AngleOutcome {
 public:
  static AngleOutcome bottom() { return AngleOutcome(); }
  static AngleOutcome of(int theta_hat, int v_hat);

  bool defined() const { return defined_; }
  int theta_hat() const;  // in {0,1,2,3}
  int v_hat() const;      // in {0,1}
  int z8() const;         // theta_hat + 4*v_hat

  bool operator==(const AngleOutcome&) const = default;

 private:
  AngleOutcome() = default;
  bool defined_ = false;
  int theta_hat_ = 0;
  int v_hat_ = 0;
};

struct ResidueVector {
  std::uint32_t q = 0;
  std::vector<std::uint32_t> entries;  // reduced into [0, q)

  void validate() const;
};

struct ResidueMatrix {
  std::uint32_t q = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> entries;  // row-major, reduced into [0, q)

  std::uint32_t at(std::size_t r, std::size_t c) const {
    return entries[r * cols + c];
  }
  std::uint32_t& at(std::size_t r, std::size_t c) {
    return entries[r * cols + c];
  }
  void validate() const;
};

ResidueMatrix random_matrix(std::uint32_t q, std::size_t rows, std::size_t cols,
                            Rng& rng);

// Binary expansion of x, LSB first, exactly w bits. Requires 0 <= x < 2^w.
BitString j_encode(std::uint64_t x, std::uint32_t w);
std::uint64_t j_decode(const BitString& bits);

// sum_i d_i * (j1_i - j0_i) mod 8. This is the relative phase picked up by the
// two branches of an honest claw state once the equation d has been measured;
// defining the angle from the difference (rather than the sum of the two
// encodings) makes the honest post-measurement qubit exactly |+_theta>.
int relative_phase_mod8(const EquationVector& d, const BitString& j0,
                        const BitString& j1);

// m = theta_hat + 4*v_hat with theta_hat in {0..3}, v_hat in {0,1}.
AngleOutcome theta_decompose(int m);

// At least n/4 entries whose representative in (-q/2, q/2] has absolute value
// in (q/32, 3q/32].
bool is_moderate_vector(const ResidueVector& b);

struct ModerateVerdict {
  bool moderate = false;
  bool exhaustive = true;  // false when the row span was sampled, not enumerated
};

// Checks every nonzero vector in the row span of C. Enumerates all q^ell
// combinations when that count is within `cap`, otherwise falls back to
// `samples` random combinations and reports a probabilistic verdict.
ModerateVerdict moderate_matrix_verdict(const ResidueMatrix& C,
                                        std::uint64_t cap = 1000000,
                                        std::size_t samples = 10000,
                                        std::uint64_t sample_seed = 1);

// Exhaustive-only variant; throws when q^ell exceeds the cap.
bool is_moderate_matrix(const ResidueMatrix& C, std::uint64_t cap = 1000000);

struct HardcoreFiberEntry {
  std::vector<std::uint32_t> v;  // element of Z_q^ell
  std::uint64_t fiber_size = 0;  // #{s in {0,1}^n : C s = v}
  double tv_distance = 0.0;      // TV of (dhat . s mod m | C s = v) from uniform
};

struct HardcoreDistanceReport {
  int modulus = 2;  // 2 or 8
  std::vector<HardcoreFiberEntry> fibers;
  double mean_distance = 0.0;  // fiber-probability-weighted mean
  double max_distance = 0.0;
  double bound = 0.0;  // 2 * q^(ell/2) * 2^(-n/80)
};

// Exhaustive conditional-distribution tables for the hardcore predicate:
// for each v with a nonempty fiber, the exact total variation distance of
// dhat.s (mod 2 or mod 8) from uniform on its residue set, where s ranges over
// {0,1}^n with C s = v. Requires n <= 20.
HardcoreDistanceReport hardcore_distance_oracle(const ResidueMatrix& C,
                                                const BitString& d_hat,
                                                int modulus_of_z);

}  // namespace rsp::zq
