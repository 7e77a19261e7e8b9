#include "rsp/entcf.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace rsp::entcf {

namespace {

std::atomic<bool> g_transparent_allowed{false};

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mask_bits(std::uint32_t m) {
  return m >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
}

// Keyed permutation on [0, 2^m): balanced 4-round Feistel on 2*ceil(m/2) bits
// with cycle walking back into the m-bit set.
class FeistelPerm {
 public:
  FeistelPerm(const std::array<std::uint64_t, 4>& key, std::uint32_t m,
              bool transparent)
      : key_(key), m_(m), transparent_(transparent) {
    if (m < 1 || m > 64) throw std::invalid_argument("permutation width");
    half_ = (m + 1) / 2;
  }

  std::uint64_t forward(std::uint64_t x) const {
    if (transparent_) return x;
    std::uint64_t y = x;
    do {
      y = rounds(y, /*inverse=*/false);
    } while (m_ < 64 && y > mask_bits(m_));
    return y;
  }

  std::uint64_t inverse(std::uint64_t y) const {
    if (transparent_) return y;
    std::uint64_t x = y;
    do {
      x = rounds(x, /*inverse=*/true);
    } while (m_ < 64 && x > mask_bits(m_));
    return x;
  }

 private:
  std::uint64_t rounds(std::uint64_t v, bool inverse) const {
    const std::uint64_t hm = mask_bits(half_);
    std::uint64_t left = v & hm;
    std::uint64_t right = (v >> half_) & hm;
    if (!inverse) {
      for (int r = 0; r < 4; ++r) {
        std::uint64_t f = mix64(right ^ key_[r]) & hm;
        std::uint64_t nl = right;
        right = left ^ f;
        left = nl;
      }
    } else {
      for (int r = 3; r >= 0; --r) {
        std::uint64_t f = mix64(left ^ key_[r]) & hm;
        std::uint64_t nr = left;
        left = right ^ f;
        right = nr;
      }
    }
    return left | (right << half_);
  }

  std::array<std::uint64_t, 4> key_;
  std::uint32_t m_;
  std::uint32_t half_;
  bool transparent_;
};

FeistelPerm mock_perm(const PublicKey& pk) {
  // F keys permute w bits; G keys permute w+1 bits so the two branch ranges
  // are disjoint halves of one permuted set.
  std::uint32_t m = pk.kind == FamilyKind::ClawFree ? pk.w : pk.w + 1;
  return FeistelPerm(pk.perm_key, m, pk.transparent);
}

std::uint32_t ceil_log2(std::uint32_t q) {
  std::uint32_t b = 0;
  while ((std::uint64_t{1} << b) < q) ++b;
  return b;
}

std::vector<std::uint32_t> mat_vec(const std::vector<std::uint32_t>& a,
                                   std::uint32_t n, std::uint32_t q,
                                   const std::vector<std::uint64_t>& x) {
  std::vector<std::uint32_t> out(n);
  for (std::uint32_t r = 0; r < n; ++r) {
    std::uint64_t acc = 0;
    for (std::uint32_t c = 0; c < n; ++c) {
      acc += static_cast<std::uint64_t>(a[r * n + c]) * (x[c] % q);
    }
    out[r] = static_cast<std::uint32_t>(acc % q);
  }
  return out;
}

std::vector<std::uint32_t> tall_mat_vec(const std::vector<std::uint32_t>& a,
                                        std::uint32_t rows, std::uint32_t cols,
                                        std::uint32_t q,
                                        const std::vector<std::uint64_t>& x) {
  std::vector<std::uint32_t> out(rows);
  for (std::uint32_t r = 0; r < rows; ++r) {
    std::uint64_t acc = 0;
    for (std::uint32_t c = 0; c < cols; ++c) {
      acc += static_cast<std::uint64_t>(a[r * cols + c]) * (x[c] % q);
    }
    out[r] = static_cast<std::uint32_t>(acc % q);
  }
  return out;
}

std::uint32_t mod_inverse(std::uint32_t a, std::uint32_t q) {
  // Fermat; q prime.
  std::uint64_t result = 1, base = a % q;
  std::uint32_t e = q - 2;
  while (e) {
    if (e & 1) result = result * base % q;
    base = base * base % q;
    e >>= 1;
  }
  return static_cast<std::uint32_t>(result);
}

// Inverse of an n x n matrix mod prime q; nullopt when singular.
std::optional<std::vector<std::uint32_t>> mat_inverse(
    const std::vector<std::uint32_t>& a, std::uint32_t n, std::uint32_t q) {
  std::vector<std::uint64_t> work(n * 2 * n, 0);
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) work[r * 2 * n + c] = a[r * n + c];
    work[r * 2 * n + n + r] = 1;
  }
  for (std::uint32_t col = 0; col < n; ++col) {
    std::uint32_t pivot = col;
    while (pivot < n && work[pivot * 2 * n + col] % q == 0) ++pivot;
    if (pivot == n) return std::nullopt;
    if (pivot != col) {
      for (std::uint32_t c = 0; c < 2 * n; ++c) {
        std::swap(work[pivot * 2 * n + c], work[col * 2 * n + c]);
      }
    }
    std::uint64_t inv = mod_inverse(
        static_cast<std::uint32_t>(work[col * 2 * n + col] % q), q);
    for (std::uint32_t c = 0; c < 2 * n; ++c) {
      work[col * 2 * n + c] = work[col * 2 * n + c] % q * inv % q;
    }
    for (std::uint32_t r = 0; r < n; ++r) {
      if (r == col) continue;
      std::uint64_t factor = work[r * 2 * n + col] % q;
      if (!factor) continue;
      for (std::uint32_t c = 0; c < 2 * n; ++c) {
        std::uint64_t sub = factor * work[col * 2 * n + c] % q;
        work[r * 2 * n + c] = (work[r * 2 * n + c] + q - sub) % q;
      }
    }
  }
  std::vector<std::uint32_t> inv(n * n);
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) {
      inv[r * n + c] = static_cast<std::uint32_t>(work[r * 2 * n + n + c] % q);
    }
  }
  return inv;
}

std::uint32_t quantize(std::uint32_t value, std::uint32_t kappa) {
  return value >> kappa;
}

Commitment lwe_commit(const PublicKey& pk, const std::vector<std::uint32_t>& raw) {
  Commitment y;
  y.words.reserve(raw.size());
  for (auto v : raw) y.words.push_back(quantize(v, pk.lwe.kappa));
  return y;
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t read_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw std::invalid_argument("truncated record");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[pos + i]} << (8 * i);
  pos += 8;
  return v;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw std::invalid_argument("truncated record");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos + i]} << (8 * i);
  pos += 4;
  return v;
}

constexpr std::uint8_t kRecordVersion = 1;

}  // namespace

namespace testing {
void allow_transparent_keys(bool allowed) { g_transparent_allowed = allowed; }
bool transparent_keys_allowed() { return g_transparent_allowed; }
}  // namespace testing

KeyPair gen_mock(FamilyKind kind, const MockParams& params, std::uint64_t seed) {
  if (params.w < 1) throw std::invalid_argument("w must be >= 1");
  std::uint32_t max_w = kind == FamilyKind::ClawFree ? 64 : 63;
  if (params.w > max_w) {
    throw std::invalid_argument("mock backend supports w <= " +
                                std::to_string(max_w) + " for this kind");
  }
  if (params.transparent && !testing::transparent_keys_allowed()) {
    throw std::invalid_argument("transparent keys are test-only");
  }
  Rng rng(seed);
  KeyPair key;
  key.pk.kind = kind;
  key.pk.backend = Backend::Mock;
  key.pk.w = params.w;
  key.pk.transparent = params.transparent;
  for (auto& k : key.pk.perm_key) k = rng.next_u64();
  key.td.backend = Backend::Mock;
  key.td.kind = kind;
  if (kind == FamilyKind::ClawFree) {
    if (params.transparent) {
      if (params.transparent_shift == 0 ||
          (params.w < 64 && params.transparent_shift > mask_bits(params.w))) {
        throw std::invalid_argument("transparent shift out of range");
      }
      key.td.shift = params.transparent_shift;
    } else {
      key.td.shift = 1 + rng.next_below(mask_bits(params.w));
    }
  }
  return key;
}

// The Lwe backend uses a tall matrix A in Z_q^(2n x n). The top n rows carry
// no noise, so the trapdoor decodes a commitment's preimage exactly through
// the inverse of the top block; the bottom rows carry the planted noise
// (claw-free keys, u = A s0 + e) or uniform masking (injective keys), which
// is what separates the two branch ranges under the chk tolerance.
KeyPair gen_lwe(FamilyKind kind, const LweParams& params, std::uint64_t seed) {
  params.modulus.validate();
  const std::uint32_t q = params.modulus.q;
  const std::uint32_t n = params.modulus.n;
  const std::uint32_t m = 2 * n;
  if (params.modulus.w != n * ceil_log2(q)) {
    throw std::invalid_argument("lwe width must be n*ceil(log2 q)");
  }
  if (2 * params.noise_bound + 1 >= q) {
    throw std::invalid_argument("noise bound too large for q");
  }
  Rng rng(seed);
  KeyPair key;
  key.pk.kind = kind;
  key.pk.backend = Backend::Lwe;
  key.pk.lwe = params;
  key.td.backend = Backend::Lwe;
  key.td.kind = kind;

  do {
    key.pk.matrix_a.assign(std::size_t{m} * n, 0);
    for (auto& e : key.pk.matrix_a) {
      e = static_cast<std::uint32_t>(rng.next_below(q));
    }
  } while (!mat_inverse(
      std::vector<std::uint32_t>(key.pk.matrix_a.begin(),
                                 key.pk.matrix_a.begin() + std::size_t{n} * n),
      n, q));

  key.td.s0.resize(n);
  for (auto& e : key.td.s0) e = static_cast<std::uint32_t>(rng.next_below(q));
  key.td.noise.assign(m, 0);
  key.pk.masked_u.resize(m);
  if (kind == FamilyKind::ClawFree) {
    for (std::uint32_t i = n; i < m; ++i) {
      std::int64_t raw = static_cast<std::int64_t>(
                             rng.next_below(2 * params.noise_bound + 1)) -
                         params.noise_bound;
      key.td.noise[i] = static_cast<std::uint32_t>((raw % q + q) % q);
    }
    std::vector<std::uint64_t> s0w(key.td.s0.begin(), key.td.s0.end());
    auto as0 = tall_mat_vec(key.pk.matrix_a, m, n, q, s0w);
    for (std::uint32_t i = 0; i < m; ++i) {
      key.pk.masked_u[i] =
          static_cast<std::uint32_t>((static_cast<std::uint64_t>(as0[i]) +
                                      key.td.noise[i]) % q);
    }
  } else {
    // Injective keys mask with a fully uniform vector; with overwhelming
    // probability it is nowhere near the column space, so the two branch
    // ranges are disjoint under the chk tolerance.
    for (auto& e : key.pk.masked_u) {
      e = static_cast<std::uint32_t>(rng.next_below(q));
    }
  }
  return key;
}

KeyPair gen(FamilyKind kind, Backend backend, const MockParams& mock,
            const LweParams& lwe, std::uint64_t seed) {
  return backend == Backend::Mock ? gen_mock(kind, mock, seed)
                                  : gen_lwe(kind, lwe, seed);
}

namespace {

std::vector<std::uint32_t> lwe_raw_eval(const KeyPair& key, int b,
                                        const DomainElement& x) {
  const auto& p = key.pk.lwe.modulus;
  const std::uint32_t m = 2 * p.n;
  if (x.words.size() != p.n) throw std::invalid_argument("domain size");
  auto ax = tall_mat_vec(key.pk.matrix_a, m, p.n, p.q, x.words);
  if (b) {
    for (std::uint32_t i = 0; i < m; ++i) {
      ax[i] = static_cast<std::uint32_t>(
          (static_cast<std::uint64_t>(ax[i]) + key.pk.masked_u[i]) % p.q);
    }
  }
  return ax;
}

// Exact decode of x from the noise-free top block of a raw commitment.
std::optional<DomainElement> lwe_top_decode(const KeyPair& key, int b,
                                            const std::vector<std::uint64_t>& y) {
  const auto& p = key.pk.lwe.modulus;
  auto inv = mat_inverse(
      std::vector<std::uint32_t>(key.pk.matrix_a.begin(),
                                 key.pk.matrix_a.begin() +
                                     std::size_t{p.n} * p.n),
      p.n, p.q);
  if (!inv) return std::nullopt;
  std::vector<std::uint64_t> target(p.n);
  for (std::uint32_t i = 0; i < p.n; ++i) {
    std::uint64_t word = y[i] % p.q;
    target[i] = b ? (word + p.q - key.pk.masked_u[i] % p.q) % p.q : word;
  }
  auto x = mat_vec(*inv, p.n, p.q, target);
  return DomainElement{std::vector<std::uint64_t>(x.begin(), x.end())};
}

}  // namespace

Commitment eval(const KeyPair& key, int b, const DomainElement& x) {
  if (b != 0 && b != 1) throw std::invalid_argument("branch bit");
  if (key.pk.backend == Backend::Mock) {
    if (x.words.size() != 1) throw std::invalid_argument("domain size");
    std::uint64_t v = x.words[0];
    if (key.pk.w < 64 && v > mask_bits(key.pk.w)) {
      throw std::invalid_argument("domain element out of range");
    }
    auto perm = mock_perm(key.pk);
    if (key.pk.kind == FamilyKind::ClawFree) {
      std::uint64_t input = b ? (v ^ key.td.shift) : v;
      return Commitment{{perm.forward(input)}};
    }
    std::uint64_t input = v | (std::uint64_t{static_cast<std::uint64_t>(b)}
                               << key.pk.w);
    return Commitment{{perm.forward(input)}};
  }
  return lwe_commit(key.pk, lwe_raw_eval(key, b, x));
}

bool chk(const KeyPair& key, int b, const DomainElement& x,
         const Commitment& y) {
  if (b != 0 && b != 1) return false;
  if (key.pk.backend == Backend::Mock) {
    if (x.words.size() != 1 || y.words.size() != 1) return false;
    if (key.pk.w < 64 && x.words[0] > mask_bits(key.pk.w)) return false;
    return eval(key, b, x) == y;
  }
  const auto& p = key.pk.lwe.modulus;
  const std::uint32_t m = 2 * p.n;
  if (x.words.size() != p.n || y.words.size() != m) return false;
  for (auto word : x.words) {
    if (word >= p.q) return false;
  }
  auto raw = lwe_raw_eval(key, b, x);
  // |lift(y) - f| <= 2^(kappa-1) + B coordinatewise, representatives centered.
  const std::uint32_t kappa = key.pk.lwe.kappa;
  const std::int64_t half_step = kappa ? (std::int64_t{1} << (kappa - 1)) : 0;
  const std::int64_t tol = half_step + key.pk.lwe.noise_bound;
  for (std::uint32_t i = 0; i < m; ++i) {
    std::int64_t lifted = static_cast<std::int64_t>(y.words[i] << kappa) + half_step;
    std::int64_t diff = (lifted - static_cast<std::int64_t>(raw[i])) % p.q;
    if (2 * diff > p.q) diff -= p.q;
    if (2 * diff <= -static_cast<std::int64_t>(p.q)) diff += p.q;
    if (std::llabs(diff) > tol) return false;
  }
  return true;
}

std::optional<ClawPreimages> invert_claw(const KeyPair& key,
                                         const Commitment& y) {
  if (key.pk.kind != FamilyKind::ClawFree) {
    throw std::invalid_argument("invert_claw needs a claw-free key");
  }
  if (key.pk.backend == Backend::Mock) {
    if (y.words.size() != 1) return std::nullopt;
    if (key.pk.w < 64 && y.words[0] > mask_bits(key.pk.w)) return std::nullopt;
    auto perm = mock_perm(key.pk);
    std::uint64_t x0 = perm.inverse(y.words[0]);
    return ClawPreimages{DomainElement{{x0}},
                         DomainElement{{x0 ^ key.td.shift}}};
  }
  const auto& p = key.pk.lwe.modulus;
  const std::uint32_t m = 2 * p.n;
  if (y.words.size() != m) return std::nullopt;
  const std::uint32_t q = p.q;
  if (key.pk.lwe.kappa == 0) {
    for (auto word : y.words) {
      if (word >= q) return std::nullopt;
    }
    auto d0 = lwe_top_decode(key, 0, y.words);
    if (!d0) return std::nullopt;
    DomainElement d1 = *d0;
    for (std::uint32_t i = 0; i < p.n; ++i) {
      d1.words[i] = (d1.words[i] + q - key.td.s0[i]) % q;
    }
    if (!chk(key, 0, *d0, y) || !chk(key, 1, d1, y)) return std::nullopt;
    return ClawPreimages{*d0, d1};
  }
  // Rounded commitments: recover the branch-0 preimage by exhausting the
  // domain at desk scale, then derive the claw partner from the trapdoor.
  double domain = std::pow(static_cast<double>(q), static_cast<double>(p.n));
  if (domain > static_cast<double>(key.pk.lwe.invert_cap)) {
    throw std::invalid_argument("rounded inversion exceeds cap");
  }
  DomainElement probe{std::vector<std::uint64_t>(p.n, 0)};
  while (true) {
    if (eval(key, 0, probe) == y) {
      DomainElement partner = probe;
      for (std::uint32_t i = 0; i < p.n; ++i) {
        partner.words[i] = (partner.words[i] + q - key.td.s0[i]) % q;
      }
      if (chk(key, 1, partner, y)) return ClawPreimages{probe, partner};
    }
    std::size_t i = 0;
    while (i < p.n && ++probe.words[i] == q) probe.words[i++] = 0;
    if (i == p.n) break;
  }
  return std::nullopt;
}

std::optional<PreimagePair> invert_injective(const KeyPair& key,
                                             const Commitment& y) {
  if (key.pk.kind != FamilyKind::Injective) {
    throw std::invalid_argument("invert_injective needs an injective key");
  }
  if (key.pk.backend == Backend::Mock) {
    if (y.words.size() != 1) return std::nullopt;
    if (y.words[0] > mask_bits(key.pk.w + 1)) return std::nullopt;
    auto perm = mock_perm(key.pk);
    std::uint64_t z = perm.inverse(y.words[0]);
    int b = static_cast<int>((z >> key.pk.w) & 1);
    return PreimagePair{b, DomainElement{{z & mask_bits(key.pk.w)}}};
  }
  const auto& p = key.pk.lwe.modulus;
  if (y.words.size() != 2 * p.n) return std::nullopt;
  for (int b = 0; b < 2; ++b) {
    if (key.pk.lwe.kappa == 0) {
      auto cand = lwe_top_decode(key, b, y.words);
      if (cand && chk(key, b, *cand, y)) return PreimagePair{b, *cand};
    } else {
      DomainElement probe{std::vector<std::uint64_t>(p.n, 0)};
      while (true) {
        if (eval(key, b, probe) == y) return PreimagePair{b, probe};
        std::size_t i = 0;
        while (i < p.n && ++probe.words[i] == p.q) probe.words[i++] = 0;
        if (i == p.n) break;
      }
    }
  }
  return std::nullopt;
}

std::uint32_t encoding_width(const PublicKey& pk) {
  if (pk.backend == Backend::Mock) return pk.w;
  return pk.lwe.modulus.n * ceil_log2(pk.lwe.modulus.q);
}

zq::BitString j_encode_domain(const PublicKey& pk, const DomainElement& x) {
  if (pk.backend == Backend::Mock) {
    if (x.words.size() != 1) throw std::invalid_argument("domain size");
    return zq::j_encode(x.words[0], pk.w);
  }
  const auto& p = pk.lwe.modulus;
  if (x.words.size() != p.n) throw std::invalid_argument("domain size");
  const std::uint32_t bits = ceil_log2(p.q);
  zq::BitString out;
  out.reserve(p.n * bits);
  for (auto word : x.words) {
    auto chunk = zq::j_encode(word % p.q, bits);
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

bool g_set_membership(const KeyPair& key, int b, const DomainElement& x,
                      const zq::EquationVector& d) {
  if (key.pk.kind != FamilyKind::ClawFree) {
    throw std::invalid_argument("G-sets are defined for claw-free keys");
  }
  if (d.size() != encoding_width(key.pk)) {
    throw std::invalid_argument("equation length mismatch");
  }
  if (key.pk.backend == Backend::Mock) {
    // Surrogate predicate: the nonzero coordinates of d must hit enough of
    // the positions where the two claw encodings differ (= bits of the shift).
    const std::uint32_t w = key.pk.w;
    std::uint32_t hits = 0;
    for (std::uint32_t i = 0; i < w; ++i) {
      if (d[i] != 0 && ((key.td.shift >> i) & 1)) ++hits;
    }
    return 8 * hits >= w;
  }
  const auto& p = key.pk.lwe.modulus;
  const std::uint32_t bits = ceil_log2(p.q);
  // shifted = x - (-1)^b * 1 coordinatewise.
  DomainElement shifted = x;
  for (auto& word : shifted.words) {
    word = b ? (word + 1) % p.q : (word + p.q - 1) % p.q;
  }
  auto jx = j_encode_domain(key.pk, x);
  auto js = j_encode_domain(key.pk, shifted);
  // I_{b,x}(d)_i = <d block i mod 2, (J(x) xor J(shifted)) block i> mod 2.
  std::vector<int> indicator(p.n, 0);
  for (std::uint32_t i = 0; i < p.n; ++i) {
    int acc = 0;
    for (std::uint32_t j = 0; j < bits; ++j) {
      std::uint32_t idx = i * bits + j;
      acc ^= (d[idx] & 1) & (jx[idx] ^ js[idx]);
    }
    indicator[i] = acc;
  }
  const std::uint32_t half = p.n / 2;
  const std::uint32_t start = b ? half : 0;
  const std::uint32_t stop = b ? p.n : half + (p.n % 2);
  std::uint32_t weight = 0;
  for (std::uint32_t i = start; i < stop; ++i) weight += indicator[i];
  return 4 * weight >= p.n;
}

zq::AngleOutcome extract_angle(const KeyPair& key, const Commitment& y,
                               const zq::EquationVector& d) {
  auto claw = invert_claw(key, y);
  if (!claw) throw std::invalid_argument("commitment has no preimages");
  if (!g_set_membership(key, 0, claw->x0, d) ||
      !g_set_membership(key, 1, claw->x1, d)) {
    return zq::AngleOutcome::bottom();
  }
  auto j0 = j_encode_domain(key.pk, claw->x0);
  auto j1 = j_encode_domain(key.pk, claw->x1);
  return zq::theta_decompose(zq::relative_phase_mod8(d, j0, j1));
}

bool hk_membership(const KeyPair& key, const HkTuple& tuple) {
  if (key.pk.kind != FamilyKind::ClawFree) {
    throw std::invalid_argument("H_k is defined for claw-free keys");
  }
  if (tuple.b != 0 && tuple.b != 1) return false;
  Commitment y;
  try {
    y = eval(key, tuple.b, tuple.x);
  } catch (const std::invalid_argument&) {
    return false;
  }
  if (!chk(key, tuple.b, tuple.x, y)) return false;
  auto angle = extract_angle(key, y, tuple.d);
  if (!angle.defined()) return false;
  return angle.theta_hat() == tuple.theta && angle.v_hat() == tuple.v;
}

DomainElement random_domain_element(const PublicKey& pk, Rng& rng) {
  if (pk.backend == Backend::Mock) {
    std::uint64_t bound = pk.w >= 64 ? 0 : (std::uint64_t{1} << pk.w);
    std::uint64_t v = bound ? rng.next_below(bound) : rng.next_u64();
    return DomainElement{{v}};
  }
  const auto& p = pk.lwe.modulus;
  DomainElement x;
  x.words.resize(p.n);
  for (auto& word : x.words) word = rng.next_below(p.q);
  return x;
}

std::vector<std::uint8_t> PublicKey::serialize() const {
  std::vector<std::uint8_t> out;
  out.push_back(kRecordVersion);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.push_back(static_cast<std::uint8_t>(backend));
  if (backend == Backend::Mock) {
    out.push_back(static_cast<std::uint8_t>(w));
    out.push_back(transparent ? 1 : 0);
    for (auto k : perm_key) append_u64(out, k);
  } else {
    append_u32(out, lwe.modulus.q);
    append_u32(out, lwe.modulus.n);
    append_u32(out, lwe.modulus.ell);
    append_u32(out, lwe.modulus.w);
    append_u32(out, lwe.noise_bound);
    append_u32(out, lwe.kappa);
    for (auto e : matrix_a) append_u32(out, e);
    for (auto e : masked_u) append_u32(out, e);
  }
  return out;
}

PublicKey PublicKey::deserialize(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 3) throw std::invalid_argument("truncated record");
  if (bytes[pos++] != kRecordVersion) {
    throw std::invalid_argument("unsupported record version");
  }
  PublicKey pk;
  pk.kind = static_cast<FamilyKind>(bytes[pos++]);
  pk.backend = static_cast<Backend>(bytes[pos++]);
  if (pk.backend == Backend::Mock) {
    if (bytes.size() < pos + 2) throw std::invalid_argument("truncated record");
    pk.w = bytes[pos++];
    pk.transparent = bytes[pos++] != 0;
    for (auto& k : pk.perm_key) k = read_u64(bytes, pos);
  } else {
    pk.lwe.modulus.q = read_u32(bytes, pos);
    pk.lwe.modulus.n = read_u32(bytes, pos);
    pk.lwe.modulus.ell = read_u32(bytes, pos);
    pk.lwe.modulus.w = read_u32(bytes, pos);
    pk.lwe.noise_bound = read_u32(bytes, pos);
    pk.lwe.kappa = read_u32(bytes, pos);
    const std::uint32_t n = pk.lwe.modulus.n;
    pk.matrix_a.resize(std::size_t{2} * n * n);
    for (auto& e : pk.matrix_a) e = read_u32(bytes, pos);
    pk.masked_u.resize(2 * n);
    for (auto& e : pk.masked_u) e = read_u32(bytes, pos);
  }
  if (pos != bytes.size()) throw std::invalid_argument("trailing bytes");
  return pk;
}

std::vector<std::uint8_t> Trapdoor::serialize() const {
  std::vector<std::uint8_t> out;
  out.push_back(kRecordVersion);
  out.push_back(static_cast<std::uint8_t>(kind));
  out.push_back(static_cast<std::uint8_t>(backend));
  if (backend == Backend::Mock) {
    append_u64(out, shift);
  } else {
    append_u32(out, static_cast<std::uint32_t>(s0.size()));
    for (auto e : s0) append_u32(out, e);
    for (auto e : noise) append_u32(out, e);  // 2n entries, bottom half noisy
  }
  return out;
}

Trapdoor Trapdoor::deserialize(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 3) throw std::invalid_argument("truncated record");
  if (bytes[pos++] != kRecordVersion) {
    throw std::invalid_argument("unsupported record version");
  }
  Trapdoor td;
  td.kind = static_cast<FamilyKind>(bytes[pos++]);
  td.backend = static_cast<Backend>(bytes[pos++]);
  if (td.backend == Backend::Mock) {
    td.shift = read_u64(bytes, pos);
  } else {
    std::uint32_t n = read_u32(bytes, pos);
    td.s0.resize(n);
    for (auto& e : td.s0) e = read_u32(bytes, pos);
    td.noise.resize(std::size_t{2} * n);
    for (auto& e : td.noise) e = read_u32(bytes, pos);
  }
  if (pos != bytes.size()) throw std::invalid_argument("trailing bytes");
  return td;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  if (hex.size() % 2) throw std::invalid_argument("odd hex length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 |
                                       nibble(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace rsp::entcf
