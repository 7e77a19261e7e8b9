#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "rsp/rng.hpp"
#include "rsp/zq.hpp"

using namespace rsp;

TEST_CASE("j_encode worked examples") {
  CHECK(zq::j_encode(26, 6) == zq::BitString{0, 1, 0, 1, 1, 0});
  CHECK(zq::j_encode(0, 4) == zq::BitString{0, 0, 0, 0});
  CHECK(zq::j_encode(31, 6) == zq::BitString{1, 1, 1, 1, 1, 0});
  CHECK_THROWS_AS(zq::j_encode(64, 6), std::invalid_argument);
  CHECK_THROWS_AS(zq::j_encode(1, 0), std::invalid_argument);
}

TEST_CASE("j_encode round-trips exhaustively for small widths") {
  for (std::uint32_t w = 1; w <= 20; ++w) {
    std::uint64_t limit = std::uint64_t{1} << w;
    // Exhaustive up to w=14, strided spot checks beyond to keep runtime sane.
    std::uint64_t step = w <= 14 ? 1 : 257;
    for (std::uint64_t x = 0; x < limit; x += step) {
      CAPTURE(w);
      CAPTURE(x);
      REQUIRE(zq::j_decode(zq::j_encode(x, w)) == x);
    }
  }
}

TEST_CASE("relative phase of the worked claw") {
  zq::EquationVector d{3, 1, 2, 0, 7, 5};
  auto j0 = zq::j_encode(26, 6);
  auto j1 = zq::j_encode(31, 6);
  CHECK(zq::relative_phase_mod8(d, j0, j1) == 5);

  SUBCASE("identical preimages give zero") {
    CHECK(zq::relative_phase_mod8(d, j0, j0) == 0);
  }
  SUBCASE("zero equation gives zero") {
    zq::EquationVector zero(6, 0);
    CHECK(zq::relative_phase_mod8(zero, j0, j1) == 0);
  }
  SUBCASE("swapping the preimages negates the phase") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
      zq::EquationVector dd(6);
      for (auto& e : dd) e = static_cast<std::uint8_t>(rng.next_below(8));
      auto a = zq::j_encode(rng.next_below(64), 6);
      auto b = zq::j_encode(rng.next_below(64), 6);
      int fwd = zq::relative_phase_mod8(dd, a, b);
      int bwd = zq::relative_phase_mod8(dd, b, a);
      CHECK((fwd + bwd) % 8 == 0);
    }
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(zq::relative_phase_mod8(d, j0, zq::j_encode(1, 5)),
                    std::invalid_argument);
  }
}

TEST_CASE("theta decomposition") {
  auto a = zq::theta_decompose(5);
  CHECK(a.theta_hat() == 1);
  CHECK(a.v_hat() == 1);
  auto b = zq::theta_decompose(0);
  CHECK(b.theta_hat() == 0);
  CHECK(b.v_hat() == 0);
  auto c = zq::theta_decompose(7);
  CHECK(c.theta_hat() == 3);
  CHECK(c.v_hat() == 1);

  SUBCASE("bijection between Z8 and {0..3}x{0,1}") {
    std::set<std::pair<int, int>> seen;
    for (int m = 0; m < 8; ++m) {
      auto out = zq::theta_decompose(m);
      CHECK(out.z8() == m);
      seen.insert({out.theta_hat(), out.v_hat()});
    }
    CHECK(seen.size() == 8);
  }
  CHECK_THROWS_AS(zq::theta_decompose(8), std::invalid_argument);
  CHECK_THROWS_AS(zq::theta_decompose(-1), std::invalid_argument);
}

TEST_CASE("moderate vector predicate") {
  // q=17: the band (q/32, 3q/32] holds representatives of absolute value 1.
  CHECK(zq::is_moderate_vector({17, {1, 16, 5, 0}}));
  CHECK_FALSE(zq::is_moderate_vector({17, {0, 0, 0, 0}}));
  CHECK_FALSE(zq::is_moderate_vector({17, {5, 5, 5, 5}}));
  CHECK_THROWS_AS(zq::is_moderate_vector({17, {17}}), std::invalid_argument);
}

TEST_CASE("moderate matrix row-span enumeration") {
  Rng rng(11);
  auto c = zq::random_matrix(17, 1, 12, rng);
  auto verdict = zq::moderate_matrix_verdict(c);
  CHECK(verdict.exhaustive);
  CHECK(zq::is_moderate_matrix(c) == verdict.moderate);

  SUBCASE("a scaled row stays in the span check") {
    // All-zero matrix has empty nonzero span, hence vacuously moderate.
    zq::ResidueMatrix zero{17, 1, 8, std::vector<std::uint32_t>(8, 0)};
    CHECK(zq::is_moderate_matrix(zero));
  }
  SUBCASE("beyond the cap the exhaustive variant refuses") {
    zq::ResidueMatrix big{101, 3, 4, std::vector<std::uint32_t>(12, 1)};
    CHECK_THROWS_AS(zq::is_moderate_matrix(big), std::invalid_argument);
    auto sampled = zq::moderate_matrix_verdict(big, 1000, 500, 3);
    CHECK_FALSE(sampled.exhaustive);
  }
}

TEST_CASE("moderate-matrix frequency meets the analytic lower bound") {
  // The band (q/32, 3q/32] holds ~n/8 entries of a random vector in
  // expectation, below the n/4 threshold, so whole-row-span moderacy is
  // unreachable and the frequency is 0. The analytic lower bound
  // 1 - q^ell 2^(-n/32) is negative at this scale, so the stated inequality
  // still holds; asserting both documents the vacuity.
  Rng rng(2024);
  const int samples = 1000;
  int moderate = 0;
  for (int i = 0; i < samples; ++i) {
    auto c = zq::random_matrix(17, 1, 8, rng);
    if (zq::is_moderate_matrix(c)) ++moderate;
  }
  double freq = static_cast<double>(moderate) / samples;
  double bound = 1.0 - 17.0 * std::pow(2.0, -8.0 / 32.0);
  CHECK(bound < 0.0);
  CHECK(freq >= bound);
}

TEST_CASE("hardcore oracle degenerate cases") {
  SUBCASE("all-zero dhat is deterministic, distance 1/2 mod 2") {
    Rng rng(5);
    auto c = zq::random_matrix(5, 1, 6, rng);
    auto report = zq::hardcore_distance_oracle(c, zq::BitString(6, 0), 2);
    for (const auto& f : report.fibers) {
      CHECK(f.tv_distance == doctest::Approx(0.5));
    }
  }
  SUBCASE("zero matrix with a single-bit dhat is a fair unconditioned bit") {
    zq::ResidueMatrix zero{5, 1, 6, std::vector<std::uint32_t>(6, 0)};
    zq::BitString dhat(6, 0);
    dhat[2] = 1;
    auto report = zq::hardcore_distance_oracle(zero, dhat, 2);
    REQUIRE(report.fibers.size() == 1);
    CHECK(report.fibers[0].v == std::vector<std::uint32_t>{0});
    CHECK(report.fibers[0].tv_distance == doctest::Approx(0.0));
    CHECK(report.fibers[0].fiber_size == 64);
  }
  SUBCASE("input validation") {
    Rng rng(5);
    auto c = zq::random_matrix(5, 1, 6, rng);
    CHECK_THROWS_AS(zq::hardcore_distance_oracle(c, zq::BitString(5, 1), 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(zq::hardcore_distance_oracle(c, zq::BitString(6, 1), 3),
                    std::invalid_argument);
    auto wide = zq::random_matrix(5, 1, 21, rng);
    CHECK_THROWS_AS(zq::hardcore_distance_oracle(wide, zq::BitString(21, 1), 2),
                    std::invalid_argument);
  }
}

TEST_CASE("hardcore oracle distances sit below the reported bound") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    auto c = zq::random_matrix(5, 1, 8, rng);
    auto report = zq::hardcore_distance_oracle(c, zq::BitString(8, 1), 2);
    double bound = 2.0 * std::sqrt(5.0) * std::pow(2.0, -0.1);
    CHECK(report.bound == doctest::Approx(bound));
    for (const auto& f : report.fibers) CHECK(f.tv_distance <= report.bound);
  }
}

TEST_CASE("mean conditional distance is non-increasing in n") {
  Rng rng(4242);
  double prev = 1e9;
  for (std::uint32_t n : {8u, 10u, 12u, 14u}) {
    double total = 0.0;
    const int matrices = 20;
    for (int t = 0; t < matrices; ++t) {
      auto c = zq::random_matrix(17, 1, n, rng);
      auto report = zq::hardcore_distance_oracle(c, zq::BitString(n, 1), 2);
      total += report.mean_distance;
    }
    double mean = total / matrices;
    CAPTURE(n);
    CHECK(mean <= prev + 1e-12);
    prev = mean;
  }
}

TEST_CASE("modulus params validation") {
  CHECK(zq::is_prime(17));
  CHECK_FALSE(zq::is_prime(15));
  CHECK_FALSE(zq::is_prime(1));
  zq::ModulusParams good{17, 4, 1, 20};
  CHECK_NOTHROW(good.validate());
  zq::ModulusParams composite{15, 4, 1, 20};
  CHECK_THROWS_AS(composite.validate(), std::invalid_argument);
  zq::ModulusParams zero_dim{17, 0, 1, 20};
  CHECK_THROWS_AS(zero_dim.validate(), std::invalid_argument);
}
