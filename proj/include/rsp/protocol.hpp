#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rsp/entcf.hpp"
#include "rsp/qsim.hpp"
#include "rsp/transport.hpp"

namespace rsp::protocol {

using Json = nlohmann::json;

enum class TestKind { Preimage, ZMeas, XMeasA, XMeasB, Vacuous };
enum class Flag { Pass, FailP, FailZ, FailX, FailQ };

const char* to_string(TestKind kind);
const char* to_string(Flag flag);

struct RoundRecord {
  int round = 0;
  int g = 0;
  TestKind kind = TestKind::Vacuous;
  Json challenge;
  Json response;
  Flag flag = Flag::Pass;
};

struct ProtocolConfig {
  std::uint64_t lambda = 8;  // selects backend parameters (mock: bit width)
  int max_rounds = 100;      // N
  double delta = 0.15;
  char basis = 'X';          // W
  entcf::Backend backend = entcf::Backend::Mock;
  bool buffered = false;
  std::uint64_t seed = 1;
  double omega_target = 0.5;

  void validate() const;
  bool soundness_regime() const;  // N >= delta^-3 log(2/(delta omega))
  entcf::MockParams mock_params() const;
  entcf::LweParams lwe_params() const;

  // Test-only: relabel the final d -> theta map by a fixed permutation of Z8.
  const std::array<int, 8>* theta_relabel = nullptr;
};

struct RspOutcome {
  enum class Kind { ZBit, XTheta, Err };
  Kind kind = Kind::Err;
  int bit = 0;          // Z branch
  int theta_index = 0;  // X branch, in Z8
  std::string err_reason;
  // Honest provers expose their simulated final qubit for cross-checks.
  std::optional<qsim::QubitState> honest_qubit;
};

struct CategoryTally {
  int fails = 0;
  int total = 0;
};

struct AbortDecision {
  bool abort = false;
  // Order: Preimage, ZMeas, XMeasA, XMeasB.
  std::array<double, 4> fractions{};
  std::array<double, 4> thresholds{};
  int tripped = -1;
};

// The abort rule: per-category failure fractions against delta
// (categories a-c) and (1 - opt_Q) + delta (category d); empty categories
// count as fraction zero.
AbortDecision evaluate_abort(const std::array<CategoryTally, 4>& tallies,
                             double delta);

struct AzumaReport {
  double bound = 0.0;  // 2 exp(-delta^2 R / 2)
  double opt = 0.0;    // 3/4 + opt_Q/4, the honest per-round pass rate target
};

AzumaReport azuma_abort_probability(double delta, int rounds);

struct Transcript {
  int rounds_executed = 0;  // R
  std::vector<RoundRecord> rounds;
  AbortDecision abort_decision;
  Json final_round;
  std::vector<std::string> verifier_sent;      // framed bytes
  std::vector<std::string> verifier_received;  // framed bytes
  std::string digest() const;                  // order-sensitive byte digest
};

struct RunResult {
  RspOutcome outcome;
  Transcript transcript;
};

// Simulation-only registry mapping public keys to full key pairs. Classically
// simulating the honest prover's post-commit state requires both claw
// branches, which no party could compute from the public key alone; wire
// messages remain the only channel between the two endpoints.
class SimOracle {
 public:
  void put(const entcf::KeyPair& key);
  std::optional<entcf::KeyPair> get(const entcf::PublicKey& pk) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::vector<std::uint8_t>, entcf::KeyPair> keys_;
};

// Prover behaviours. `equation_override`, when set, replaces the next
// equation response (used by replay tests).
class ProverStrategy {
 public:
  virtual ~ProverStrategy() = default;
  virtual std::string name() const = 0;

  struct CommitReply {
    entcf::Commitment y;
    std::optional<qsim::MeasurementSpec> spec;  // buffered mode
  };
  struct EquationReply {
    zq::EquationVector d;
    std::optional<qsim::Matrix> state;  // buffered mode
  };

  virtual CommitReply on_key(const entcf::PublicKey& pk) = 0;
  virtual std::pair<int, entcf::DomainElement> on_challenge_preimage() = 0;
  virtual EquationReply on_request_equation() = 0;
  virtual int on_challenge_measure(const qsim::Basis& basis) = 0;
  virtual void on_buffer_outcome(int /*outcome*/, const qsim::Matrix& /*post*/) {}
  virtual std::optional<qsim::QubitState> final_qubit() const {
    return std::nullopt;
  }

  std::optional<zq::EquationVector> equation_override;
};

std::unique_ptr<ProverStrategy> make_strategy(const std::string& name,
                                              const SimOracle& oracle,
                                              Rng rng, bool buffered);

// Test-round forcing knobs (tests and oracle calibrations only).
struct RoundForcing {
  std::optional<int> g;
  std::optional<bool> measurement;  // false: preimage test
  std::optional<bool> x_basis;      // false: Z-measurement test
  std::optional<int> theta;         // forced challenge angle index
  std::optional<bool> theta_match;  // send theta = theta_hat when defined
};

// One qubit preparation test round against an in-process prover.
RoundRecord qubit_prep_round(const ProtocolConfig& cfg,
                             const std::string& strategy,
                             std::uint64_t seed,
                             const RoundForcing* forcing = nullptr);

// Full protocol run: R <- U{1..N} test rounds, the abort rule, then the final
// state-preparation round. The prover runs on its own thread behind the
// chosen transport.
RunResult verifier_run(const ProtocolConfig& cfg, const std::string& strategy,
                       transport::Mode mode = transport::Mode::InProc);

// Lower-level variant used by tests that need custom strategies or forcing.
RunResult run_session(const ProtocolConfig& cfg,
                      std::unique_ptr<ProverStrategy> prover,
                      transport::Mode mode,
                      const RoundForcing* forcing = nullptr,
                      SimOracle* oracle = nullptr);

}  // namespace rsp::protocol
