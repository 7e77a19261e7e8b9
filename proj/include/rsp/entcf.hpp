#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsp/rng.hpp"
#include "rsp/zq.hpp"

namespace rsp::entcf {

enum class FamilyKind : std::uint8_t { ClawFree = 0, Injective = 1 };
enum class Backend : std::uint8_t { Mock = 0, Lwe = 1 };

// Domain element: Mock backend uses words = {x}; Lwe uses one word per Z_q
// coordinate.
struct DomainElement {
  std::vector<std::uint64_t> words;
  bool operator==(const DomainElement&) const = default;
};

// Range element, same representation convention as DomainElement.
struct Commitment {
  std::vector<std::uint64_t> words;
  bool operator==(const Commitment&) const = default;
};

struct PreimagePair {
  int b = 0;
  DomainElement x;
};

struct MockParams {
  std::uint32_t w = 8;        // bit width of the domain
  bool transparent = false;   // identity permutation, test builds only
  std::uint64_t transparent_shift = 0;  // forced claw shift when transparent
};

struct LweParams {
  zq::ModulusParams modulus{17, 4, 1, 20};  // w = n * ceil(log2 q)
  std::uint32_t noise_bound = 1;            // B, inf-norm of the planted error
  std::uint32_t kappa = 0;                  // rounding shift on commitments
  std::uint64_t invert_cap = 1u << 20;      // q^n cap for rounded inversion
  bool operator==(const LweParams&) const = default;
};

struct PublicKey {
  FamilyKind kind = FamilyKind::ClawFree;
  Backend backend = Backend::Mock;
  // Mock payload
  std::uint32_t w = 0;
  bool transparent = false;
  std::array<std::uint64_t, 4> perm_key{};
  // Lwe payload
  LweParams lwe;
  std::vector<std::uint32_t> matrix_a;  // n x n row-major
  std::vector<std::uint32_t> masked_u;  // A s0 + e

  std::vector<std::uint8_t> serialize() const;
  static PublicKey deserialize(const std::vector<std::uint8_t>& bytes);
  bool operator==(const PublicKey&) const = default;
};

struct Trapdoor {
  Backend backend = Backend::Mock;
  FamilyKind kind = FamilyKind::ClawFree;
  // Mock: claw shift (F) along with the permutation key held in the public key.
  std::uint64_t shift = 0;
  // Lwe secrets.
  std::vector<std::uint32_t> s0;
  std::vector<std::uint32_t> noise;

  std::vector<std::uint8_t> serialize() const;
  static Trapdoor deserialize(const std::vector<std::uint8_t>& bytes);
  bool operator==(const Trapdoor&) const = default;
};

struct KeyPair {
  PublicKey pk;
  Trapdoor td;
};

// Claw-free inversion result: both branches of the claw.
struct ClawPreimages {
  DomainElement x0;
  DomainElement x1;
};

// Transparent (identity-permutation) keys exist only for golden-vector tests;
// generation rejects them unless a test explicitly opts in.
namespace testing {
void allow_transparent_keys(bool allowed);
bool transparent_keys_allowed();
}  // namespace testing

KeyPair gen(FamilyKind kind, Backend backend, const MockParams& mock,
            const LweParams& lwe, std::uint64_t seed);
KeyPair gen_mock(FamilyKind kind, const MockParams& params, std::uint64_t seed);
KeyPair gen_lwe(FamilyKind kind, const LweParams& params, std::uint64_t seed);

// f_{k,b}(x). Mock branch 1 needs the claw shift, so evaluation takes the full
// key pair; the protocol only ever evaluates on the verifier side or inside
// the prover's quantum simulation.
Commitment eval(const KeyPair& key, int b, const DomainElement& x);

bool chk(const KeyPair& key, int b, const DomainElement& x,
         const Commitment& y);

// Claw-free keys: both preimages of y, or nullopt when y is outside the range.
std::optional<ClawPreimages> invert_claw(const KeyPair& key,
                                         const Commitment& y);
// Injective keys: the unique preimage, or nullopt.
std::optional<PreimagePair> invert_injective(const KeyPair& key,
                                             const Commitment& y);

// LSB-first bit encoding of a domain element; length = pk.w (Mock) or
// n*ceil(log2 q) (Lwe).
zq::BitString j_encode_domain(const PublicKey& pk, const DomainElement& x);
std::uint32_t encoding_width(const PublicKey& pk);

// Membership of d in G_{k,b,x}. Mock uses the declared surrogate predicate
// (enough nonzero d-coordinates where the two claw encodings differ); Lwe uses
// the blockwise inner-product condition.
bool g_set_membership(const KeyPair& key, int b, const DomainElement& x,
                      const zq::EquationVector& d);

// bottom when d lies outside either branch's G-set; otherwise the decomposition
// of the claw's relative phase.
zq::AngleOutcome extract_angle(const KeyPair& key, const Commitment& y,
                               const zq::EquationVector& d);

struct HkTuple {
  int b = 0;
  DomainElement x;
  zq::EquationVector d;
  int theta = 0;
  int v = 0;
};

bool hk_membership(const KeyPair& key, const HkTuple& tuple);

// Uniform sample of the domain.
DomainElement random_domain_element(const PublicKey& pk, Rng& rng);

// Wire helpers.
std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

}  // namespace rsp::entcf
