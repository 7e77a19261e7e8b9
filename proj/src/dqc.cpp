#include "rsp/dqc.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace rsp::dqc {

namespace {

Complex phase8(int index) {
  double a = (((index % 8) + 8) % 8) * qsim::kPi / 4.0;
  return Complex(std::cos(a), std::sin(a));
}

int mod8(int v) { return ((v % 8) + 8) % 8; }

}  // namespace

void GraphSpec::validate() const {
  if (vertices < 1 || vertices > kMaxVertices) {
    throw std::invalid_argument("vertex count outside supported range");
  }
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= vertices || b >= vertices) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (a == b) throw std::invalid_argument("self-loop");
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second) throw std::invalid_argument("duplicate edge");
  }
  for (int v : outputs) {
    if (v < 0 || v >= vertices) throw std::invalid_argument("output out of range");
  }
  // Flow must point forward in measurement order, which makes it acyclic.
  for (auto [from, to] : flow) {
    if (from < 0 || from >= vertices || to < 0 || to >= vertices) {
      throw std::invalid_argument("flow out of range");
    }
    if (to <= from) throw std::invalid_argument("flow must be acyclic");
  }
}

std::vector<int> GraphSpec::neighbors(int v) const {
  std::vector<int> out;
  for (auto [a, b] : edges) {
    if (a == v) out.push_back(b);
    if (b == v) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool GraphSpec::is_output(int v) const {
  return std::find(outputs.begin(), outputs.end(), v) != outputs.end();
}

void MeasurementPattern::validate() const {
  graph.validate();
  const std::size_t n = static_cast<std::size_t>(graph.vertices);
  if (phi.size() != n || dummy.size() != n || trap.size() != n) {
    throw std::invalid_argument("pattern arrays sized to the graph required");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (trap[i] && dummy[i]) throw std::invalid_argument("trap in dummy set");
    if (trap[i] && phi[i] != 0) throw std::invalid_argument("trap angle must be 0");
    if (trap[i]) {
      for (int nb : graph.neighbors(static_cast<int>(i))) {
        if (!dummy[static_cast<std::size_t>(nb)]) {
          throw std::invalid_argument("trap neighbour is not a dummy");
        }
      }
    }
    if (phi[i] < 0 || phi[i] > 7) throw std::invalid_argument("phi not in Z8");
  }
}

void MeasurementPattern::sample_secrets(Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(graph.vertices);
  theta.assign(n, 0);
  r.assign(n, 0);
  dummy_bit.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = dummy[i] ? 0 : static_cast<int>(rng.next_below(8));
    r[i] = rng.next_bit();
    if (dummy[i]) dummy_bit[i] = rng.next_bit();
  }
}

StateVector StateVector::product(const std::vector<qsim::QubitState>& qubits) {
  int n = static_cast<int>(qubits.size());
  if (n < 1 || n > kMaxVertices) {
    throw std::invalid_argument("qubit count outside supported range");
  }
  std::vector<Complex> amp(std::size_t{1} << n, Complex(0, 0));
  amp[0] = 1.0;
  for (int v = 0; v < n; ++v) {
    std::size_t stride = std::size_t{1} << v;
    for (std::size_t base = 0; base < amp.size(); base += 2 * stride) {
      for (std::size_t k = 0; k < stride; ++k) {
        Complex low = amp[base + k];
        amp[base + k] = low * qubits[v].a0;
        amp[base + k + stride] = low * qubits[v].a1;
      }
    }
  }
  return StateVector(n, std::move(amp));
}

void StateVector::apply_cz(int a, int b) {
  std::size_t ma = std::size_t{1} << a;
  std::size_t mb = std::size_t{1} << b;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    if ((i & ma) && (i & mb)) amp_[i] = -amp_[i];
  }
}

void StateVector::apply_z(int v) {
  std::size_t m = std::size_t{1} << v;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    if (i & m) amp_[i] = -amp_[i];
  }
}

int StateVector::measure_plus_basis(int v, int delta_index, Rng& rng) {
  std::size_t m = std::size_t{1} << v;
  Complex w = std::conj(phase8(delta_index));
  double p0 = 0.0;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    if (i & m) continue;
    Complex proj = (amp_[i] + w * amp_[i | m]) / std::sqrt(2.0);
    p0 += std::norm(proj);
  }
  int outcome = rng.next_double() < p0 ? 0 : 1;
  Complex sign = outcome == 0 ? Complex(1, 0) : Complex(-1, 0);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    if (i & m) continue;
    Complex proj = (amp_[i] + sign * w * amp_[i | m]) / std::sqrt(2.0);
    // Collapse onto |outcome-basis state> (x) rest: store the residual in the
    // v=0 slice, zero the v=1 slice, then renormalise.
    amp_[i] = proj / std::sqrt(2.0);
    amp_[i | m] = sign * phase8(delta_index) * proj / std::sqrt(2.0);
    norm2 += std::norm(amp_[i]) + std::norm(amp_[i | m]);
  }
  double scale = 1.0 / std::sqrt(std::max(norm2, 1e-300));
  for (auto& a : amp_) a *= scale;
  return outcome;
}

int StateVector::measure_z(int v, Rng& rng) {
  std::size_t m = std::size_t{1} << v;
  double p0 = 0.0;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    if (!(i & m)) p0 += std::norm(amp_[i]);
  }
  int outcome = rng.next_double() < p0 ? 0 : 1;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < amp_.size(); ++i) {
    bool keep = ((i & m) != 0) == (outcome == 1);
    if (!keep) amp_[i] = 0.0;
    norm2 += std::norm(amp_[i]);
  }
  double scale = 1.0 / std::sqrt(std::max(norm2, 1e-300));
  for (auto& a : amp_) a *= scale;
  return outcome;
}

qsim::Matrix StateVector::reduced_density(const std::vector<int>& keep) const {
  const int k = static_cast<int>(keep.size());
  const std::size_t dim = std::size_t{1} << k;
  qsim::Matrix rho = qsim::Matrix::Zero(static_cast<Eigen::Index>(dim),
                                        static_cast<Eigen::Index>(dim));
  std::vector<int> traced;
  for (int v = 0; v < n_; ++v) {
    if (std::find(keep.begin(), keep.end(), v) == keep.end()) traced.push_back(v);
  }
  auto assemble = [&](std::size_t kept_bits, std::size_t traced_bits) {
    std::size_t idx = 0;
    for (int j = 0; j < k; ++j) {
      if ((kept_bits >> j) & 1) idx |= std::size_t{1} << keep[j];
    }
    for (std::size_t j = 0; j < traced.size(); ++j) {
      if ((traced_bits >> j) & 1) idx |= std::size_t{1} << traced[j];
    }
    return idx;
  };
  const std::size_t traced_dim = std::size_t{1} << traced.size();
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < dim; ++b) {
      Complex acc(0, 0);
      for (std::size_t t = 0; t < traced_dim; ++t) {
        acc += amp_[assemble(a, t)] * std::conj(amp_[assemble(b, t)]);
      }
      rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
    }
  }
  return rho;
}

std::vector<int> dummy_byproducts(const MeasurementPattern& pattern) {
  const int n = pattern.graph.vertices;
  std::vector<int> dprime(static_cast<std::size_t>(n), 0);
  for (int v = 0; v < n; ++v) {
    if (pattern.dummy[static_cast<std::size_t>(v)]) continue;
    int acc = 0;
    for (int nb : pattern.graph.neighbors(v)) {
      if (pattern.dummy[static_cast<std::size_t>(nb)]) {
        acc ^= pattern.dummy_bit[static_cast<std::size_t>(nb)];
      }
    }
    dprime[static_cast<std::size_t>(v)] = acc;
  }
  return dprime;
}

void bind_rsp_outcomes(MeasurementPattern& pattern,
                       const std::vector<protocol::RspOutcome>& outcomes) {
  const std::size_t n = static_cast<std::size_t>(pattern.graph.vertices);
  if (outcomes.size() != n) {
    throw std::invalid_argument("one outcome per vertex required");
  }
  if (pattern.theta.size() != n) {
    throw std::invalid_argument("pattern secrets not initialised");
  }
  using Kind = protocol::RspOutcome::Kind;
  for (std::size_t i = 0; i < n; ++i) {
    if (outcomes[i].kind == Kind::Err) {
      throw std::runtime_error("state preparation aborted: " +
                               outcomes[i].err_reason);
    }
    if (pattern.dummy[i]) {
      if (outcomes[i].kind != Kind::ZBit) {
        throw std::invalid_argument("dummy vertex needs a Z-branch outcome");
      }
      pattern.dummy_bit[i] = outcomes[i].bit;
    } else if (outcomes[i].kind != Kind::XTheta) {
      throw std::invalid_argument("computation vertex needs an X-branch outcome");
    }
  }
  // The prover holds |+_theta_rsp>. After entangling, dummies contribute
  // Z^(d'); folding d' into the recorded secret keeps delta arithmetic exact.
  auto dprime = dummy_byproducts(pattern);
  for (std::size_t i = 0; i < n; ++i) {
    if (pattern.dummy[i]) continue;
    pattern.theta[i] = mod8(outcomes[i].theta_index - 4 * dprime[i]);
  }
}

ServerState prepare_server_state(
    const MeasurementPattern& pattern, Source source,
    const std::vector<protocol::RspOutcome>* outcomes) {
  pattern.validate();
  const std::size_t n = static_cast<std::size_t>(pattern.graph.vertices);
  if (pattern.theta.size() != n || pattern.r.size() != n ||
      pattern.dummy_bit.size() != n) {
    throw std::invalid_argument("pattern secrets not initialised");
  }
  auto dprime = dummy_byproducts(pattern);
  std::vector<qsim::QubitState> qubits;
  qubits.reserve(n);
  if (source == Source::DirectQuantum) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pattern.dummy[i]) {
        qubits.push_back(qsim::QubitState::computational(pattern.dummy_bit[i]));
      } else {
        // Z^(d') |+_theta> = |+_(theta + 4 d')>.
        qubits.push_back(
            qsim::QubitState::plus(mod8(pattern.theta[i] + 4 * dprime[i])));
      }
    }
  } else {
    if (!outcomes || outcomes->size() != n) {
      throw std::invalid_argument("one BRSP outcome per vertex required");
    }
    using Kind = protocol::RspOutcome::Kind;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& out = (*outcomes)[i];
      if (out.kind == Kind::Err) {
        throw std::runtime_error("state preparation aborted: " + out.err_reason);
      }
      bool want_z = pattern.dummy[i];
      if (want_z != (out.kind == Kind::ZBit)) {
        throw std::invalid_argument("outcome branch does not match vertex role");
      }
      if (!out.honest_qubit) {
        throw std::invalid_argument("prover qubit unavailable for preparation");
      }
      qubits.push_back(*out.honest_qubit);
    }
  }
  StateVector state = StateVector::product(qubits);
  for (auto [a, b] : pattern.graph.edges) state.apply_cz(a, b);
  return ServerState{std::move(state), std::move(dprime)};
}

Server Server::parse(const std::string& text) {
  if (text == "honest") return honest();
  if (text == "flipall") return flip_all();
  if (text.rfind("flip:", 0) == 0) return flip_vertex(std::stoi(text.substr(5)));
  throw std::invalid_argument("unknown server behaviour: " + text);
}

FkTranscript fk_delegate(const MeasurementPattern& pattern, const Server& server,
                         Rng& rng, ServerState* prepared) {
  pattern.validate();
  const int n = pattern.graph.vertices;
  ServerState local =
      prepared ? *prepared : prepare_server_state(pattern, Source::DirectQuantum);
  StateVector& state = local.state;

  FkTranscript tr;
  tr.delta.assign(static_cast<std::size_t>(n), -1);
  tr.b.assign(static_cast<std::size_t>(n), 0);
  tr.s.assign(static_cast<std::size_t>(n), 0);

  auto corrections = [&](int v) {
    int sx = 0, sz = 0;
    for (auto [from, to] : pattern.graph.flow) {
      if (to == v && from < v) sx ^= tr.s[static_cast<std::size_t>(from)];
    }
    for (auto [from, to] : pattern.graph.flow) {
      if (from >= v || to == v) continue;
      for (int nb : pattern.graph.neighbors(to)) {
        if (nb == v && from != v) {
          sz ^= tr.s[static_cast<std::size_t>(from)];
        }
      }
    }
    return std::pair<int, int>{sx, sz};
  };

  for (int v = 0; v < n; ++v) {
    const auto idx = static_cast<std::size_t>(v);
    if (pattern.graph.is_output(v)) continue;
    int delta;
    if (pattern.dummy[idx]) {
      delta = static_cast<int>(rng.next_below(8));
    } else if (pattern.trap[idx]) {
      delta = mod8(pattern.theta[idx] + 4 * pattern.r[idx]);
    } else {
      auto [sx, sz] = corrections(v);
      int phi_prime = mod8((sx ? -pattern.phi[idx] : pattern.phi[idx]) + 4 * sz);
      delta = mod8(phi_prime + pattern.theta[idx] + 4 * pattern.r[idx]);
    }
    tr.delta[idx] = delta;
    int honest_bit = state.measure_plus_basis(v, delta, rng);
    int reported = honest_bit;
    if (server.kind == Server::Kind::FlipAll ||
        (server.kind == Server::Kind::FlipVertex && server.vertex == v)) {
      reported ^= 1;
    }
    tr.b[idx] = reported;
    tr.s[idx] = reported ^ pattern.r[idx];
  }

  tr.accept = true;
  for (int v = 0; v < n; ++v) {
    const auto idx = static_cast<std::size_t>(v);
    if (pattern.trap[idx] && tr.b[idx] != pattern.r[idx]) tr.accept = false;
  }

  for (int v : pattern.graph.outputs) {
    int raw = state.measure_z(v, rng);
    int sx = 0;
    for (auto [from, to] : pattern.graph.flow) {
      if (to == v) sx ^= tr.s[static_cast<std::size_t>(from)];
    }
    int corrected = raw ^ sx;
    if (server.kind == Server::Kind::FlipAll ||
        (server.kind == Server::Kind::FlipVertex && server.vertex == v)) {
      corrected ^= 1;
    }
    tr.output_bits.push_back(corrected);
  }
  return tr;
}

RspFkResult rsp_fk_run(const protocol::ProtocolConfig& brsp_cfg,
                       const std::string& pattern_name, const Server& server,
                       std::uint64_t seed) {
  MeasurementPattern pattern = make_pattern(pattern_name);
  Rng rng(seed);
  pattern.sample_secrets(rng);

  std::vector<protocol::RspOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(pattern.graph.vertices));
  for (int v = 0; v < pattern.graph.vertices; ++v) {
    protocol::ProtocolConfig cfg = brsp_cfg;
    cfg.basis = pattern.dummy[static_cast<std::size_t>(v)] ? 'Z' : 'X';
    cfg.seed = rng.fork(static_cast<std::uint64_t>(v)).next_u64();
    auto run = protocol::verifier_run(cfg, "honest");
    if (run.outcome.kind == protocol::RspOutcome::Kind::Err) {
      RspFkResult failed;
      failed.err = true;
      failed.reason = "vertex " + std::to_string(v) +
                      " preparation failed: " + run.outcome.err_reason;
      return failed;
    }
    outcomes.push_back(run.outcome);
  }

  RspFkResult result;
  try {
    bind_rsp_outcomes(pattern, outcomes);
    auto prepared = prepare_server_state(pattern, Source::FromRsp, &outcomes);
    result.transcript = fk_delegate(pattern, server, rng, &prepared);
  } catch (const std::exception& e) {
    result.err = true;
    result.reason = e.what();
    return result;
  }
  return result;
}

MeasurementPattern make_pattern(const std::string& name) {
  MeasurementPattern p;
  auto line3 = [] {
    GraphSpec g;
    g.vertices = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.inputs = {0};
    g.outputs = {2};
    g.flow = {{0, 1}, {1, 2}};
    return g;
  };
  if (name == "teleport") {
    p.graph = line3();
    p.phi = {0, 0, 0};
    p.dummy = {false, false, false};
    p.trap = {false, false, false};
    return p;
  }
  if (name == "rotate") {
    p.graph = line3();
    p.phi = {2, 3, 0};  // pi/2 then 3pi/4
    p.dummy = {false, false, false};
    p.trap = {false, false, false};
    return p;
  }
  if (name == "cz-pair") {
    GraphSpec g;
    g.vertices = 4;  // 0-1 wire, 2-3 wire, CZ across the outputs
    g.edges = {{0, 1}, {2, 3}, {1, 3}};
    g.inputs = {0, 2};
    g.outputs = {1, 3};
    g.flow = {{0, 1}, {2, 3}};
    p.graph = g;
    p.phi = {1, 0, 6, 0};
    p.dummy = {false, false, false, false};
    p.trap = {false, false, false, false};
    return p;
  }
  if (name == "teleport-trap") {
    GraphSpec g;
    g.vertices = 5;  // teleport wire 0-1-2 plus trap 3 isolated by dummy 4
    g.edges = {{0, 1}, {1, 2}, {3, 4}, {4, 1}};
    g.inputs = {0};
    g.outputs = {2};
    g.flow = {{0, 1}, {1, 2}};
    p.graph = g;
    p.phi = {0, 0, 0, 0, 0};
    p.dummy = {false, false, false, false, true};
    p.trap = {false, false, false, true, false};
    return p;
  }
  throw std::invalid_argument("unknown pattern: " + name);
}

std::vector<std::string> pattern_names() {
  return {"teleport", "rotate", "cz-pair", "teleport-trap"};
}

}  // namespace rsp::dqc
