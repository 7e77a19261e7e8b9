#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsp/protocol.hpp"
#include "rsp/qsim.hpp"
#include "rsp/rng.hpp"

namespace rsp::dqc {

using Complex = std::complex<double>;

inline constexpr int kMaxVertices = 12;

struct GraphSpec {
  int vertices = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> inputs;
  std::vector<int> outputs;
  std::map<int, int> flow;  // successor of each measured computation vertex

  void validate() const;
  std::vector<int> neighbors(int v) const;
  bool is_output(int v) const;
};

// Angles are Z8 indices throughout (theta = index * pi/4).
struct MeasurementPattern {
  GraphSpec graph;
  std::vector<int> phi;          // per-vertex computation angle
  std::vector<bool> dummy;       // D
  std::vector<bool> trap;        // T
  std::vector<int> theta;        // per-vertex secret angle (non-dummies)
  std::vector<int> r;            // per-vertex secret bit
  std::vector<int> dummy_bit;    // d_i for i in D

  void validate() const;  // T and D disjoint, trap neighbours all dummies,
                          // traps carry phi = 0, flow acyclic
  void sample_secrets(Rng& rng);
};

// Dense state vector on <= kMaxVertices qubits, vertex v <-> bit v.
class StateVector {
 public:
  static StateVector product(const std::vector<qsim::QubitState>& qubits);

  int qubits() const { return n_; }
  const std::vector<Complex>& amplitudes() const { return amp_; }

  void apply_cz(int a, int b);
  void apply_z(int v);
  // Measurement in {|+_(delta pi/4)>, |-_(delta pi/4)>}; returns the outcome
  // bit and collapses the state.
  int measure_plus_basis(int v, int delta_index, Rng& rng);
  int measure_z(int v, Rng& rng);

  // Reduced density matrix of the listed qubits (ascending order).
  qsim::Matrix reduced_density(const std::vector<int>& keep) const;

 private:
  StateVector(int n, std::vector<Complex> amp) : n_(n), amp_(std::move(amp)) {}
  int n_ = 0;
  std::vector<Complex> amp_;
};

// XOR of dummy-neighbour bits; the Z byproduct each CZ with a dummy inflicts.
std::vector<int> dummy_byproducts(const MeasurementPattern& pattern);

enum class Source { DirectQuantum, FromRsp };

struct ServerState {
  StateVector state;
  std::vector<int> dprime;
};

// Writes the per-vertex BRSP outcomes into the pattern secrets: dummy bits
// from Z-branch outcomes and theta from X-branch outcomes, with the dummy
// byproduct folded into theta so Alice's angle bookkeeping matches the state
// Bob actually holds. Throws on branch mismatch; any ERR outcome aborts.
void bind_rsp_outcomes(MeasurementPattern& pattern,
                       const std::vector<protocol::RspOutcome>& outcomes);

// Product state per the pattern (DirectQuantum: Alice's own preparation;
// FromRsp: the qubits held by the prover after the BRSP sessions), then CZ
// over every edge.
ServerState prepare_server_state(
    const MeasurementPattern& pattern, Source source,
    const std::vector<protocol::RspOutcome>* outcomes = nullptr);

struct Server {
  enum class Kind { Honest, FlipAll, FlipVertex };
  Kind kind = Kind::Honest;
  int vertex = -1;

  static Server honest() { return {}; }
  static Server flip_all() { return {Kind::FlipAll, -1}; }
  static Server flip_vertex(int v) { return {Kind::FlipVertex, v}; }
  static Server parse(const std::string& text);
};

struct FkTranscript {
  std::vector<int> delta;  // angle sent per vertex (Z8 index; -1 for outputs)
  std::vector<int> b;      // reported measurement outcomes
  std::vector<int> s;      // b xor r
  bool accept = false;
  std::vector<int> output_bits;  // corrected Z outcomes of output vertices
};

// One FK session over an already-prepared server state (or a fresh
// DirectQuantum preparation when none is given). Pattern secrets must be set.
FkTranscript fk_delegate(const MeasurementPattern& pattern, const Server& server,
                         Rng& rng, ServerState* prepared = nullptr);

struct RspFkResult {
  bool err = false;
  std::string reason;
  FkTranscript transcript;
};

// Full RSP-FK composition: one BRSP session per vertex (W=Z for dummies, W=X
// otherwise), outcome binding, preparation from the prover-held qubits, then
// FK delegation.
RspFkResult rsp_fk_run(const protocol::ProtocolConfig& brsp_cfg,
                       const std::string& pattern_name, const Server& server,
                       std::uint64_t seed);

// Fixed pattern library: "teleport", "rotate", "cz-pair", "teleport-trap".
MeasurementPattern make_pattern(const std::string& name);
std::vector<std::string> pattern_names();

}  // namespace rsp::dqc
