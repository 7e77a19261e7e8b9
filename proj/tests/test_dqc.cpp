#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>
#include <map>

#include "rsp/dqc.hpp"

using namespace rsp;
using dqc::MeasurementPattern;
using dqc::Server;
using dqc::Source;

namespace {

using C = std::complex<double>;

// Independent circuit oracle for line patterns, plain 2x2 arithmetic.
// Measuring a wire vertex at pattern angle phi implements J(phi) = H Rz(-phi):
// projecting <+_phi| on a CZ-entangled pair maps a|0>+b|1> to
// H (a|0> + e^{-i phi} b|1>) up to the flow-corrected byproduct.
std::array<C, 2> apply_j(const std::array<C, 2>& in, double phi) {
  C a = in[0];
  C b = std::exp(C(0, -phi)) * in[1];
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  return {inv_sqrt2 * (a + b), inv_sqrt2 * (a - b)};
}

double line_output_p0(const std::vector<int>& phis) {
  std::array<C, 2> state{C(0.70710678118654752440, 0),
                         C(0.70710678118654752440, 0)};
  for (int phi : phis) state = apply_j(state, phi * qsim::kPi / 4.0);
  return std::norm(state[0]);
}

MeasurementPattern sampled(const std::string& name, std::uint64_t seed) {
  auto pat = dqc::make_pattern(name);
  Rng rng(seed);
  pat.sample_secrets(rng);
  return pat;
}

}  // namespace

TEST_CASE("graph and pattern validation") {
  dqc::GraphSpec g;
  g.vertices = 3;
  g.edges = {{0, 0}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.edges = {{0, 1}, {1, 2}};
  g.flow = {{2, 1}};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.flow = {{0, 1}, {1, 2}};
  CHECK_NOTHROW(g.validate());

  auto pat = dqc::make_pattern("teleport-trap");
  CHECK_NOTHROW(pat.validate());
  pat.dummy[4] = false;  // trap 3 now has a non-dummy neighbour
  CHECK_THROWS_AS(pat.validate(), std::invalid_argument);
}

TEST_CASE("state vector basics") {
  auto sv = dqc::StateVector::product(
      {qsim::QubitState::plus(0), qsim::QubitState::computational(1)});
  Rng rng(1);
  CHECK(sv.qubits() == 2);
  SUBCASE("computational qubits measure deterministically") {
    CHECK(sv.measure_z(1, rng) == 1);
  }
  SUBCASE("plus states answer their own basis deterministically") {
    for (int k = 0; k < 8; ++k) {
      auto s = dqc::StateVector::product({qsim::QubitState::plus(k)});
      CHECK(s.measure_plus_basis(0, k, rng) == 0);
      auto t = dqc::StateVector::product({qsim::QubitState::plus(k)});
      CHECK(t.measure_plus_basis(0, (k + 4) % 8, rng) == 1);
    }
  }
  SUBCASE("cz with a computational control acts as a Z byproduct") {
    auto a = dqc::StateVector::product(
        {qsim::QubitState::plus(3), qsim::QubitState::computational(1)});
    a.apply_cz(0, 1);
    auto b = dqc::StateVector::product(
        {qsim::QubitState::plus(3), qsim::QubitState::computational(1)});
    b.apply_z(0);
    auto ra = a.reduced_density({0});
    auto rb = b.reduced_density({0});
    CHECK(qsim::trace_distance(ra, rb) < 1e-12);
  }
}

TEST_CASE("delta one-time pad is exactly uniform") {
  // For any fixed flow-corrected angle, theta and r wash delta out: over the
  // 16 secret combinations every Z8 value appears exactly twice.
  for (int phi_prime = 0; phi_prime < 8; ++phi_prime) {
    std::array<int, 8> counts{};
    for (int theta = 0; theta < 8; ++theta) {
      for (int r = 0; r < 2; ++r) {
        int delta = ((phi_prime + theta + 4 * r) % 8 + 8) % 8;
        ++counts[static_cast<std::size_t>(delta)];
      }
    }
    for (int c : counts) CHECK(c == 2);
  }
}

namespace {

// Trap wired to two dummies, so d' is a genuine XOR of two bits.
MeasurementPattern double_dummy_trap(std::uint64_t seed) {
  MeasurementPattern p;
  dqc::GraphSpec g;
  g.vertices = 6;  // wire 0-1-2, trap 3 flanked by dummies 4 and 5
  g.edges = {{0, 1}, {1, 2}, {3, 4}, {3, 5}, {4, 1}, {5, 2}};
  g.inputs = {0};
  g.outputs = {2};
  g.flow = {{0, 1}, {1, 2}};
  p.graph = g;
  p.phi = {0, 0, 0, 0, 0, 0};
  p.dummy = {false, false, false, false, true, true};
  p.trap = {false, false, false, true, false, false};
  Rng rng(seed);
  p.sample_secrets(rng);
  return p;
}

}  // namespace

TEST_CASE("honest traps are deterministic") {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto pat = s % 2 == 0 ? sampled("teleport-trap", 100 + s)
                          : double_dummy_trap(100 + s);
    Rng rng(50000 + s);
    auto tr = dqc::fk_delegate(pat, Server::honest(), rng);
    CHECK(tr.accept);
  }
}

TEST_CASE("flip servers are caught by traps") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto pat = sampled("teleport-trap", 300 + s);
    Rng rng(60000 + s);
    auto tr = dqc::fk_delegate(pat, Server::flip_all(), rng);
    CHECK_FALSE(tr.accept);
  }
  SUBCASE("flipping only the trap vertex rejects") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto pat = sampled("teleport-trap", 500 + s);
      Rng rng(70000 + s);
      auto tr = dqc::fk_delegate(pat, Server::flip_vertex(3), rng);
      CHECK_FALSE(tr.accept);
    }
  }
  SUBCASE("flipping a non-trap vertex is not detected without more traps") {
    auto pat = sampled("teleport", 5);
    Rng rng(80000);
    auto tr = dqc::fk_delegate(pat, Server::flip_vertex(0), rng);
    CHECK(tr.accept);  // no traps in this pattern
  }
}

TEST_CASE("dummy isolation: removing trap and dummies preserves the rest") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto pat = sampled("teleport-trap", 900 + s);
    auto full = dqc::prepare_server_state(pat, Source::DirectQuantum);
    // Same wire without the trap/dummy pendant, same secrets on 0,1,2.
    auto wire = dqc::make_pattern("teleport");
    wire.theta = {pat.theta[0], pat.theta[1], pat.theta[2]};
    wire.r = {pat.r[0], pat.r[1], pat.r[2]};
    wire.dummy_bit = {0, 0, 0};
    auto sub = dqc::prepare_server_state(wire, Source::DirectQuantum);
    auto reduced = full.state.reduced_density({0, 1, 2});
    auto direct = sub.state.reduced_density({0, 1, 2});
    CHECK(qsim::trace_distance(reduced, direct) < 1e-10);
  }
}

TEST_CASE("teleport pattern reproduces the circuit distribution") {
  // phi = (0, 0): the wire computes H H |+> = |+>, so the output is uniform.
  int zeros = 0;
  const int runs = 2000;
  for (int t = 0; t < runs; ++t) {
    auto pat = sampled("teleport", 1500 + static_cast<std::uint64_t>(t));
    Rng rng(90000 + static_cast<std::uint64_t>(t));
    auto tr = dqc::fk_delegate(pat, Server::honest(), rng);
    REQUIRE(tr.output_bits.size() == 1);
    zeros += tr.output_bits[0] == 0 ? 1 : 0;
  }
  double p0 = line_output_p0({0, 0});
  CHECK(p0 == doctest::Approx(0.5));
  CHECK(std::abs(zeros / static_cast<double>(runs) - p0) < 0.05);
}

TEST_CASE("rotation pattern reproduces the circuit distribution") {
  auto base = dqc::make_pattern("rotate");
  double p0 = line_output_p0({base.phi[0], base.phi[1]});
  int zeros = 0;
  const int runs = 4000;
  for (int t = 0; t < runs; ++t) {
    auto pat = sampled("rotate", 2500 + static_cast<std::uint64_t>(t));
    Rng rng(110000 + static_cast<std::uint64_t>(t));
    auto tr = dqc::fk_delegate(pat, Server::honest(), rng);
    zeros += tr.output_bits[0] == 0 ? 1 : 0;
  }
  double freq = zeros / static_cast<double>(runs);
  double sigma = std::sqrt(std::max(p0 * (1 - p0), 1e-4) / runs);
  CAPTURE(p0);
  CAPTURE(freq);
  CHECK(std::abs(freq - p0) < 4 * sigma + 0.01);
}

TEST_CASE("cz-pair pattern matches a two-qubit oracle") {
  auto base = dqc::make_pattern("cz-pair");
  // Oracle: CZ (J(phi_a)|+> (x) J(phi_b)|+>), outputs measured in Z.
  std::array<C, 2> qa{C(0.70710678118654752440, 0), C(0.70710678118654752440, 0)};
  std::array<C, 2> qb = qa;
  qa = apply_j(qa, base.phi[0] * qsim::kPi / 4.0);
  qb = apply_j(qb, base.phi[2] * qsim::kPi / 4.0);
  std::array<double, 4> expect{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      C amp = qa[static_cast<std::size_t>(a)] * qb[static_cast<std::size_t>(b)];
      if (a == 1 && b == 1) amp = -amp;
      expect[static_cast<std::size_t>(a * 2 + b)] = std::norm(amp);
    }
  }
  std::array<int, 4> counts{};
  const int runs = 6000;
  for (int t = 0; t < runs; ++t) {
    auto pat = sampled("cz-pair", 3500 + static_cast<std::uint64_t>(t));
    Rng rng(130000 + static_cast<std::uint64_t>(t));
    auto tr = dqc::fk_delegate(pat, Server::honest(), rng);
    REQUIRE(tr.output_bits.size() == 2);
    ++counts[static_cast<std::size_t>(tr.output_bits[0] * 2 + tr.output_bits[1])];
  }
  double tv = 0.0;
  for (int i = 0; i < 4; ++i) {
    tv += std::abs(counts[static_cast<std::size_t>(i)] /
                       static_cast<double>(runs) -
                   expect[static_cast<std::size_t>(i)]);
  }
  CHECK(tv / 2.0 < 0.05);
}

TEST_CASE("rsp outcome binding") {
  auto pat = dqc::make_pattern("teleport-trap");
  Rng rng(7);
  pat.sample_secrets(rng);
  std::vector<protocol::RspOutcome> outs(5);
  for (int i = 0; i < 5; ++i) {
    auto& out = outs[static_cast<std::size_t>(i)];
    if (pat.dummy[static_cast<std::size_t>(i)]) {
      out.kind = protocol::RspOutcome::Kind::ZBit;
      out.bit = 1;
      out.honest_qubit = qsim::QubitState::computational(1);
    } else {
      out.kind = protocol::RspOutcome::Kind::XTheta;
      out.theta_index = 6;
      out.honest_qubit = qsim::QubitState::plus(6);
    }
  }
  CHECK_NOTHROW(dqc::bind_rsp_outcomes(pat, outs));
  CHECK(pat.dummy_bit[4] == 1);

  SUBCASE("branch mismatch is rejected") {
    auto bad = outs;
    bad[4].kind = protocol::RspOutcome::Kind::XTheta;
    CHECK_THROWS_AS(dqc::bind_rsp_outcomes(pat, bad), std::invalid_argument);
  }
  SUBCASE("an ERR outcome aborts the preparation") {
    auto bad = outs;
    bad[0].kind = protocol::RspOutcome::Kind::Err;
    bad[0].err_reason = "forced";
    CHECK_THROWS_AS(dqc::bind_rsp_outcomes(pat, bad), std::runtime_error);
  }
}

TEST_CASE("rsp-sourced preparation equals direct preparation") {
  protocol::ProtocolConfig cfg;
  cfg.max_rounds = 6;
  cfg.delta = 0.3;
  int compared = 0;
  for (std::uint64_t s = 0; s < 8 && compared < 5; ++s) {
    auto pat = dqc::make_pattern("teleport-trap");
    Rng rng(4000 + s);
    pat.sample_secrets(rng);
    std::vector<protocol::RspOutcome> outs;
    bool err = false;
    for (int v = 0; v < pat.graph.vertices; ++v) {
      protocol::ProtocolConfig vcfg = cfg;
      vcfg.basis = pat.dummy[static_cast<std::size_t>(v)] ? 'Z' : 'X';
      vcfg.seed = rng.next_u64();
      auto run = protocol::verifier_run(vcfg, "honest");
      if (run.outcome.kind == protocol::RspOutcome::Kind::Err) {
        err = true;
        break;
      }
      outs.push_back(run.outcome);
    }
    if (err) continue;
    dqc::bind_rsp_outcomes(pat, outs);
    auto from_rsp = dqc::prepare_server_state(pat, Source::FromRsp, &outs);
    auto direct = dqc::prepare_server_state(pat, Source::DirectQuantum);
    C overlap(0, 0);
    for (std::size_t i = 0; i < from_rsp.state.amplitudes().size(); ++i) {
      overlap += std::conj(direct.state.amplitudes()[i]) *
                 from_rsp.state.amplitudes()[i];
    }
    CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-9));
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("rsp_fk_run smoke") {
  protocol::ProtocolConfig cfg;
  cfg.max_rounds = 8;
  cfg.delta = 0.3;
  int accepted = 0;
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto result = dqc::rsp_fk_run(cfg, "teleport-trap", Server::honest(), 600 + s);
    if (!result.err && result.transcript.accept) ++accepted;
  }
  CHECK(accepted >= 4);

  SUBCASE("flip-all after honest preparation is rejected") {
    auto result = dqc::rsp_fk_run(cfg, "teleport-trap", Server::flip_all(), 17);
    if (!result.err) CHECK_FALSE(result.transcript.accept);
  }
}

TEST_CASE("server parsing") {
  CHECK(Server::parse("honest").kind == Server::Kind::Honest);
  CHECK(Server::parse("flipall").kind == Server::Kind::FlipAll);
  auto fv = Server::parse("flip:2");
  CHECK(fv.kind == Server::Kind::FlipVertex);
  CHECK(fv.vertex == 2);
  CHECK_THROWS_AS(Server::parse("bogus"), std::invalid_argument);
}
