#include "rsp/protocol.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace rsp::protocol {

namespace {

constexpr double kOptQ = 0.85355339059327376220;  // 1/2 + 1/(2 sqrt 2)

class ProtocolViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json words_to_json(const std::vector<std::uint64_t>& words) {
  Json arr = Json::array();
  for (auto w : words) arr.push_back(w);
  return arr;
}

std::vector<std::uint64_t> words_from_json(const Json& arr) {
  if (!arr.is_array()) throw ProtocolViolation("expected word array");
  std::vector<std::uint64_t> words;
  words.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
      throw ProtocolViolation("expected integer word");
    }
    words.push_back(v.get<std::uint64_t>());
  }
  return words;
}

Json equation_to_json(const zq::EquationVector& d) {
  Json arr = Json::array();
  for (auto e : d) arr.push_back(static_cast<int>(e));
  return arr;
}

zq::EquationVector equation_from_json(const Json& arr, std::size_t expect_len) {
  if (!arr.is_array() || arr.size() != expect_len) {
    throw ProtocolViolation("equation length mismatch");
  }
  zq::EquationVector d;
  d.reserve(arr.size());
  for (const auto& v : arr) {
    int e = v.is_number_integer() ? v.get<int>() : -1;
    if (e < 0 || e > 7) throw ProtocolViolation("equation entry not in Z8");
    d.push_back(static_cast<std::uint8_t>(e));
  }
  return d;
}

Json matrix_to_json(const qsim::Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

qsim::Matrix matrix_from_json(const Json& rows) {
  if (!rows.is_array() || rows.empty()) throw ProtocolViolation("bad matrix");
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(rows[0].size());
  if (nc < 1 || nr > qsim::kMaxBufferDim || nc > qsim::kMaxBufferDim) {
    throw ProtocolViolation("matrix dimension outside supported range");
  }
  qsim::Matrix m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != nc) {
      throw ProtocolViolation("ragged matrix");
    }
    for (Eigen::Index c = 0; c < nc; ++c) {
      const auto& cell = row[c];
      if (!cell.is_array() || cell.size() != 2) {
        throw ProtocolViolation("bad complex entry");
      }
      m(r, c) = qsim::Complex(cell[0].get<double>(), cell[1].get<double>());
    }
  }
  return m;
}

Json spec_to_json(const qsim::MeasurementSpec& spec) {
  Json out = Json::object();
  for (const auto& [label, effects] : spec.povms) {
    Json arr = Json::array();
    for (const auto& e : effects) arr.push_back(matrix_to_json(e));
    out[label] = std::move(arr);
  }
  return out;
}

qsim::MeasurementSpec spec_from_json(const Json& obj) {
  if (!obj.is_object()) throw ProtocolViolation("bad measurement spec");
  qsim::MeasurementSpec spec;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    std::vector<qsim::Matrix> effects;
    for (const auto& e : it.value()) effects.push_back(matrix_from_json(e));
    spec.povms[it.key()] = std::move(effects);
  }
  return spec;
}

std::string basis_label(const qsim::Basis& basis) {
  return basis.z ? "Z" : "X" + std::to_string(basis.theta_index);
}

qsim::QubitState qubit_from_density(const qsim::Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<qsim::Matrix> es(rho);
  Eigen::Index top = rho.rows() - 1;
  return qsim::QubitState::from_amplitudes(es.eigenvectors()(0, top),
                                           es.eigenvectors()(1, top));
}

}  // namespace

const char* to_string(TestKind kind) {
  switch (kind) {
    case TestKind::Preimage: return "preimage";
    case TestKind::ZMeas: return "z_meas";
    case TestKind::XMeasA: return "x_meas_a";
    case TestKind::XMeasB: return "x_meas_b";
    case TestKind::Vacuous: return "vacuous";
  }
  return "?";
}

const char* to_string(Flag flag) {
  switch (flag) {
    case Flag::Pass: return "pass";
    case Flag::FailP: return "fail_p";
    case Flag::FailZ: return "fail_z";
    case Flag::FailX: return "fail_x";
    case Flag::FailQ: return "fail_q";
  }
  return "?";
}

void ProtocolConfig::validate() const {
  if (max_rounds < 1) throw std::invalid_argument("N must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0,1)");
  }
  if (basis != 'X' && basis != 'Z') {
    throw std::invalid_argument("basis must be X or Z");
  }
  if (lambda < 2) throw std::invalid_argument("lambda too small");
  if (omega_target <= 0.0 || omega_target > 1.0) {
    throw std::invalid_argument("omega target must lie in (0,1]");
  }
}

bool ProtocolConfig::soundness_regime() const {
  double needed = std::pow(delta, -3.0) * std::log(2.0 / (delta * omega_target));
  return static_cast<double>(max_rounds) >= needed;
}

entcf::MockParams ProtocolConfig::mock_params() const {
  entcf::MockParams p;
  p.w = static_cast<std::uint32_t>(std::min<std::uint64_t>(lambda, 32));
  if (p.w < 2) p.w = 2;
  return p;
}

entcf::LweParams ProtocolConfig::lwe_params() const {
  entcf::LweParams p;
  if (lambda <= 8) {
    p.modulus = zq::ModulusParams{17, 4, 1, 20};
  } else {
    p.modulus = zq::ModulusParams{97, 6, 1, 42};
  }
  return p;
}

AbortDecision evaluate_abort(const std::array<CategoryTally, 4>& tallies,
                             double delta) {
  AbortDecision d;
  d.thresholds = {delta, delta, delta, (1.0 - kOptQ) + delta};
  for (int i = 0; i < 4; ++i) {
    d.fractions[i] = tallies[i].total
                         ? static_cast<double>(tallies[i].fails) / tallies[i].total
                         : 0.0;
    if (d.fractions[i] > d.thresholds[i] && !d.abort) {
      d.abort = true;
      d.tripped = i;
    }
  }
  return d;
}

AzumaReport azuma_abort_probability(double delta, int rounds) {
  if (rounds < 1) throw std::invalid_argument("R must be >= 1");
  AzumaReport r;
  r.bound = 2.0 * std::exp(-delta * delta * rounds / 2.0);
  r.opt = 0.75 + kOptQ / 4.0;
  return r;
}

std::string Transcript::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const std::string& bytes, char tag) {
    h ^= static_cast<unsigned char>(tag);
    h *= 0x100000001b3ULL;
    for (char c : bytes) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : verifier_sent) eat(f, 's');
  for (const auto& f : verifier_received) eat(f, 'r');
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void SimOracle::put(const entcf::KeyPair& key) {
  std::lock_guard lk(mutex_);
  keys_[key.pk.serialize()] = key;
}

std::optional<entcf::KeyPair> SimOracle::get(const entcf::PublicKey& pk) const {
  std::lock_guard lk(mutex_);
  auto it = keys_.find(pk.serialize());
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Prover strategies
// ---------------------------------------------------------------------------

namespace {

qsim::MeasurementSpec honest_spec() {
  qsim::MeasurementSpec spec;
  spec.povms["Z"] = {qsim::QubitState::computational(0).density(),
                     qsim::QubitState::computational(1).density()};
  for (int t = 0; t < 4; ++t) {
    spec.povms["X" + std::to_string(t)] = {
        qsim::QubitState::plus(t).density(),
        qsim::QubitState::plus(t + 4).density()};
  }
  return spec;
}

qsim::MeasurementSpec computational_spec() {
  qsim::MeasurementSpec spec;
  std::vector<qsim::Matrix> comp = {qsim::QubitState::computational(0).density(),
                                    qsim::QubitState::computational(1).density()};
  spec.povms["Z"] = comp;
  for (int t = 0; t < 4; ++t) spec.povms["X" + std::to_string(t)] = comp;
  return spec;
}

class HonestStrategy : public ProverStrategy {
 public:
  HonestStrategy(const SimOracle& oracle, Rng rng, bool buffered)
      : oracle_(&oracle), rng_(rng), buffered_(buffered) {}

  std::string name() const override { return "honest"; }

  CommitReply on_key(const entcf::PublicKey& pk) override {
    auto key = oracle_->get(pk);
    if (!key) throw std::logic_error("public key missing from sim oracle");
    key_ = *key;
    auto [y, state] = qsim::commit(key_, rng_);
    state_ = state;
    qubit_.reset();
    CommitReply reply{y, std::nullopt};
    if (buffered_) reply.spec = honest_spec();
    return reply;
  }

  std::pair<int, entcf::DomainElement> on_challenge_preimage() override {
    int b;
    if (state_.two_branch) {
      b = rng_.next_double() < std::norm(state_.a0) ? 0 : 1;
      // Computational measurement collapses the claw.
      state_.two_branch = false;
      state_.collapsed_branch = b;
      if (b == 1) {
        state_.x0 = state_.x1;
        state_.j0 = state_.j1;
      }
    } else {
      b = state_.collapsed_branch;
    }
    return {b, state_.x0};
  }

  EquationReply on_request_equation() override {
    auto [d, q] = qsim::measure_equation(state_, rng_);
    qubit_ = q;
    EquationReply reply{d, std::nullopt};
    if (buffered_) reply.state = q.density();
    return reply;
  }

  int on_challenge_measure(const qsim::Basis& basis) override {
    if (!qubit_) throw std::logic_error("measurement before equation");
    auto [r, post] = qsim::measure_qubit(*qubit_, basis, rng_);
    qubit_ = post;
    return r;
  }

  void on_buffer_outcome(int, const qsim::Matrix& post) override {
    qubit_ = qubit_from_density(post);
  }

  std::optional<qsim::QubitState> final_qubit() const override { return qubit_; }

 protected:
  const SimOracle* oracle_;
  Rng rng_;
  bool buffered_;
  entcf::KeyPair key_;
  qsim::ClawSuperposition state_;
  std::optional<qsim::QubitState> qubit_;
};

// Honest commitment and equation, but every requested measurement is replaced
// by a computational-basis one.
class ZOnlyStrategy : public HonestStrategy {
 public:
  using HonestStrategy::HonestStrategy;

  std::string name() const override { return "zonly"; }

  CommitReply on_key(const entcf::PublicKey& pk) override {
    auto reply = HonestStrategy::on_key(pk);
    if (buffered_) reply.spec = computational_spec();
    return reply;
  }

  int on_challenge_measure(const qsim::Basis&) override {
    return HonestStrategy::on_challenge_measure(qsim::Basis::Z());
  }
};

class RandomAnswerStrategy : public ProverStrategy {
 public:
  RandomAnswerStrategy(Rng rng, bool buffered) : rng_(rng), buffered_(buffered) {}

  std::string name() const override { return "random"; }

  CommitReply on_key(const entcf::PublicKey& pk) override {
    pk_ = pk;
    entcf::Commitment y;
    if (pk.backend == entcf::Backend::Mock) {
      std::uint32_t bits =
          pk.kind == entcf::FamilyKind::ClawFree ? pk.w : pk.w + 1;
      std::uint64_t bound =
          bits >= 64 ? 0 : (std::uint64_t{1} << bits);
      y.words = {bound ? rng_.next_below(bound) : rng_.next_u64()};
    } else {
      std::uint64_t top = ((pk.lwe.modulus.q - 1) >> pk.lwe.kappa) + 1;
      y.words.resize(2 * pk.lwe.modulus.n);
      for (auto& w : y.words) w = rng_.next_below(top);
    }
    CommitReply reply{y, std::nullopt};
    if (buffered_) reply.spec = computational_spec();
    return reply;
  }

  std::pair<int, entcf::DomainElement> on_challenge_preimage() override {
    return {rng_.next_bit(), entcf::random_domain_element(pk_, rng_)};
  }

  EquationReply on_request_equation() override {
    zq::EquationVector d(entcf::encoding_width(pk_));
    for (auto& e : d) e = static_cast<std::uint8_t>(rng_.next_below(8));
    EquationReply reply{d, std::nullopt};
    if (buffered_) {
      reply.state = 0.5 * qsim::Matrix::Identity(2, 2);
    }
    return reply;
  }

  int on_challenge_measure(const qsim::Basis&) override { return rng_.next_bit(); }

 private:
  Rng rng_;
  bool buffered_;
  entcf::PublicKey pk_;
};

// Honest except that each preimage answer is corrupted with the given rate.
class PreimageDefectorStrategy : public HonestStrategy {
 public:
  PreimageDefectorStrategy(const SimOracle& oracle, Rng rng, bool buffered,
                           double rate)
      : HonestStrategy(oracle, rng, buffered), rate_(rate) {}

  std::string name() const override { return "defector"; }

  std::pair<int, entcf::DomainElement> on_challenge_preimage() override {
    auto answer = HonestStrategy::on_challenge_preimage();
    if (rng_.next_double() < rate_) {
      if (key_.pk.backend == entcf::Backend::Mock) {
        answer.second.words[0] ^= 1;
      } else {
        answer.second.words[0] =
            (answer.second.words[0] + 1) % key_.pk.lwe.modulus.q;
      }
    }
    return answer;
  }

 private:
  double rate_;
};

}  // namespace

std::unique_ptr<ProverStrategy> make_strategy(const std::string& name,
                                              const SimOracle& oracle,
                                              Rng rng, bool buffered) {
  if (name == "honest") {
    return std::make_unique<HonestStrategy>(oracle, rng, buffered);
  }
  if (name == "zonly") {
    return std::make_unique<ZOnlyStrategy>(oracle, rng, buffered);
  }
  if (name == "random") {
    return std::make_unique<RandomAnswerStrategy>(rng, buffered);
  }
  if (name.rfind("defector:", 0) == 0) {
    double rate = std::stod(name.substr(9));
    return std::make_unique<PreimageDefectorStrategy>(oracle, rng, buffered,
                                                      rate);
  }
  throw std::invalid_argument("unknown prover strategy: " + name);
}

// ---------------------------------------------------------------------------
// Prover endpoint: generic message loop around a strategy.
// ---------------------------------------------------------------------------

namespace {

class ProverEndpoint {
 public:
  ProverEndpoint(transport::Channel* channel, ProverStrategy* strategy,
                 bool buffered)
      : channel_(channel), strategy_(strategy), buffered_(buffered) {}

  void run() {
    while (true) {
      Json frame = channel_->recv_frame();
      const std::string type = frame.at("type").get<std::string>();
      const Json& payload = frame.at("payload");
      if (type == "err" || type == "outcome") return;
      if (type == "key") {
        auto pk = entcf::PublicKey::deserialize(
            entcf::from_hex(payload.at("pk").get<std::string>()));
        auto reply = strategy_->on_key(pk);
        Json out{{"y", words_to_json(reply.y.words)}};
        if (reply.spec) out["spec"] = spec_to_json(*reply.spec);
        respond(frame, "commit", out);
      } else if (type == "challenge_preimage") {
        auto [b, x] = strategy_->on_challenge_preimage();
        respond(frame, "preimage", Json{{"b", b}, {"x", words_to_json(x.words)}});
      } else if (type == "request_equation") {
        auto reply = strategy_->on_request_equation();
        if (strategy_->equation_override) {
          reply.d = *strategy_->equation_override;
        }
        Json out{{"d", equation_to_json(reply.d)}};
        if (reply.state) out["state"] = matrix_to_json(*reply.state);
        respond(frame, "equation", out);
      } else if (type == "challenge_measure") {
        if (buffered_) continue;  // outcome arrives in a bit frame
        const Json& basis = payload.at("basis");
        qsim::Basis b = basis.is_string() ? qsim::Basis::Z()
                                          : qsim::Basis::X(basis.get<int>());
        respond(frame, "bit", Json{{"r", strategy_->on_challenge_measure(b)}});
      } else if (type == "bit") {
        strategy_->on_buffer_outcome(payload.at("r").get<int>(),
                                     matrix_from_json(payload.at("post")));
      } else {
        throw transport::TransportError("unexpected message type " + type);
      }
    }
  }

 private:
  void respond(const Json& request, const std::string& type, Json payload) {
    channel_->send_frame(Json{{"session", request.at("session")},
                              {"round", request.at("round")},
                              {"type", type},
                              {"payload", std::move(payload)}});
  }

  transport::Channel* channel_;
  ProverStrategy* strategy_;
  bool buffered_;
};

// ---------------------------------------------------------------------------
// Verifier session
// ---------------------------------------------------------------------------

class VerifierSession {
 public:
  VerifierSession(const ProtocolConfig& cfg, transport::Channel* channel,
                  SimOracle* oracle)
      : cfg_(cfg),
        channel_(channel),
        oracle_(oracle),
        rng_(Rng(cfg.seed).fork("verifier")) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(cfg.seed));
    session_id_ = buf;
  }

  RoundRecord test_round(int index, const RoundForcing* forcing) {
    round_ = index;
    RoundRecord rec;
    rec.round = index;
    int g = forcing && forcing->g ? *forcing->g : rng_.next_bit();
    rec.g = g;
    auto key = keygen(g == 0 ? entcf::FamilyKind::ClawFree
                             : entcf::FamilyKind::Injective);
    send("key", Json{{"pk", entcf::to_hex(key.pk.serialize())}});
    Json commit = expect("commit");
    entcf::Commitment y{words_from_json(commit.at("y"))};
    Json round_spec;
    if (cfg_.buffered) {
      if (!commit.contains("spec")) {
        throw ProtocolViolation("buffered prover sent no measurement spec");
      }
      round_spec = commit.at("spec");
    }

    std::optional<entcf::ClawPreimages> claw;
    std::optional<entcf::PreimagePair> pre;
    if (g == 0) {
      claw = entcf::invert_claw(key, y);
    } else {
      pre = entcf::invert_injective(key, y);
    }

    bool measurement =
        forcing && forcing->measurement ? *forcing->measurement : rng_.next_bit();
    if (!measurement) {
      rec.kind = TestKind::Preimage;
      rec.challenge = Json{{"test", "preimage"}};
      send("challenge_preimage", Json::object());
      Json p = expect("preimage");
      int b = p.at("b").get<int>();
      entcf::DomainElement x{words_from_json(p.at("x"))};
      rec.response = p;
      bool ok = false;
      if (b == 0 || b == 1) {
        if (g == 0) {
          ok = claw && x == (b == 0 ? claw->x0 : claw->x1);
        } else {
          ok = pre && b == pre->b && x == pre->x;
        }
      }
      rec.flag = ok ? Flag::Pass : Flag::FailP;
      return rec;
    }

    send("request_equation", Json::object());
    Json eq = expect("equation");
    zq::EquationVector d =
        equation_from_json(eq.at("d"), entcf::encoding_width(key.pk));
    std::optional<qsim::Matrix> shipped_state;
    if (cfg_.buffered) {
      if (!eq.contains("state")) {
        throw ProtocolViolation("buffered prover shipped no state");
      }
      shipped_state = matrix_from_json(eq.at("state"));
    }
    zq::AngleOutcome angle = zq::AngleOutcome::bottom();
    if (g == 0 && claw) angle = entcf::extract_angle(key, y, d);

    bool x_basis =
        forcing && forcing->x_basis ? *forcing->x_basis : rng_.next_bit();
    if (!x_basis) {
      rec.challenge = Json{{"test", "measure"}, {"basis", "Z"}};
      int r = run_measurement(qsim::Basis::Z(), round_spec, shipped_state);
      rec.response = Json{{"r", r}};
      if (g == 1) {
        rec.kind = TestKind::ZMeas;
        rec.flag = (pre && r == pre->b) ? Flag::Pass : Flag::FailZ;
      } else {
        rec.kind = TestKind::Vacuous;
      }
      return rec;
    }

    int theta;
    if (forcing && forcing->theta) {
      theta = *forcing->theta;
    } else if (forcing && forcing->theta_match && angle.defined()) {
      theta = angle.theta_hat();
    } else {
      theta = static_cast<int>(rng_.next_below(4));
    }
    rec.challenge = Json{{"test", "measure"}, {"basis", theta}};
    int v = run_measurement(qsim::Basis::X(theta), round_spec, shipped_state);
    rec.response = Json{{"r", v}};
    rec.kind = TestKind::Vacuous;
    if (g == 0 && angle.defined()) {
      if (theta == angle.theta_hat()) {
        rec.kind = TestKind::XMeasA;
        rec.flag = v == angle.v_hat() ? Flag::Pass : Flag::FailX;
      } else if ((theta == 0 || theta == 2) &&
                 (angle.theta_hat() == 1 || angle.theta_hat() == 3)) {
        rec.kind = TestKind::XMeasB;
        int u = angle.z8();
        int expected = theta == 0 ? ((u == 1 || u == 7) ? 0 : 1)
                                  : ((u == 1 || u == 3) ? 0 : 1);
        rec.flag = v == expected ? Flag::Pass : Flag::FailQ;
      }
    }
    return rec;
  }

  // Final state-preparation round. The key kind is injective for W=Z and
  // claw-free for W=X: bit extraction needs the unique preimage, theta
  // extraction needs both claw branches.
  RspOutcome final_round(int index, Json* record) {
    round_ = index;
    RspOutcome out;
    bool z_branch = cfg_.basis == 'Z';
    auto key = keygen(z_branch ? entcf::FamilyKind::Injective
                               : entcf::FamilyKind::ClawFree);
    send("key", Json{{"pk", entcf::to_hex(key.pk.serialize())}});
    Json commit = expect("commit");
    entcf::Commitment y{words_from_json(commit.at("y"))};
    send("request_equation", Json::object());
    Json eq = expect("equation");
    zq::EquationVector d =
        equation_from_json(eq.at("d"), entcf::encoding_width(key.pk));
    (*record)["y"] = commit.at("y");
    (*record)["d"] = eq.at("d");
    if (z_branch) {
      auto pre = entcf::invert_injective(key, y);
      if (!pre) {
        out.kind = RspOutcome::Kind::Err;
        out.err_reason = "commitment has no preimage";
        return out;
      }
      out.kind = RspOutcome::Kind::ZBit;
      out.bit = pre->b;
      (*record)["b"] = pre->b;
      return out;
    }
    auto claw = entcf::invert_claw(key, y);
    if (!claw) {
      out.kind = RspOutcome::Kind::Err;
      out.err_reason = "commitment has no preimages";
      return out;
    }
    auto angle = entcf::extract_angle(key, y, d);
    if (!angle.defined()) {
      out.kind = RspOutcome::Kind::Err;
      out.err_reason = "equation outside G-set";
      return out;
    }
    int idx = angle.z8();
    if (cfg_.theta_relabel) idx = (*cfg_.theta_relabel)[idx];
    out.kind = RspOutcome::Kind::XTheta;
    out.theta_index = idx;
    (*record)["theta_index"] = idx;
    return out;
  }

  void send_err(const std::string& reason) {
    send("err", Json{{"reason", reason}});
  }
  void send_ok() { send("outcome", Json{{"status", "ok"}}); }

  Rng& rng() { return rng_; }

 private:
  entcf::KeyPair keygen(entcf::FamilyKind kind) {
    auto key = entcf::gen(kind, cfg_.backend, cfg_.mock_params(),
                          cfg_.lwe_params(), rng_.next_u64());
    if (oracle_) oracle_->put(key);
    return key;
  }

  void send(const std::string& type, Json payload) {
    channel_->send_frame(Json{{"session", session_id_},
                              {"round", round_},
                              {"type", type},
                              {"payload", std::move(payload)}});
  }

  Json expect(const std::string& type) {
    Json frame = channel_->recv_frame();
    if (!frame.contains("type") || frame.at("type") != type) {
      throw ProtocolViolation("expected " + type + " message");
    }
    if (!frame.contains("payload")) throw ProtocolViolation("missing payload");
    return frame.at("payload");
  }

  int run_measurement(const qsim::Basis& basis, const Json& round_spec,
                      const std::optional<qsim::Matrix>& shipped_state) {
    send("challenge_measure",
         Json{{"basis", basis.z ? Json("Z") : Json(basis.theta_index)}});
    if (!cfg_.buffered) {
      Json b = expect("bit");
      int r = b.at("r").get<int>();
      if (r != 0 && r != 1) throw ProtocolViolation("non-bit answer");
      return r;
    }
    // Buffered mode: the verifier hosts the measurement buffer. It applies the
    // prover's declared measurement for this challenge to the shipped state
    // and returns outcome plus post-state.
    if (!shipped_state) throw ProtocolViolation("no buffered state");
    qsim::MeasurementSpec spec = spec_from_json(round_spec);
    qsim::BufferResult result;
    try {
      result = qsim::buffer_evaluate(spec, *shipped_state, basis_label(basis),
                                     rng_);
    } catch (const std::invalid_argument& e) {
      throw ProtocolViolation(std::string("buffer rejected input: ") + e.what());
    }
    send("bit", Json{{"r", static_cast<int>(result.outcome)},
                     {"post", matrix_to_json(result.post)}});
    return static_cast<int>(result.outcome);
  }

  const ProtocolConfig& cfg_;
  transport::Channel* channel_;
  SimOracle* oracle_;
  Rng rng_;
  std::string session_id_;
  int round_ = 0;
};

RunResult run_session_impl(const ProtocolConfig& cfg,
                           ProverStrategy* strategy, transport::Mode mode,
                           const RoundForcing* forcing, SimOracle* oracle,
                           bool single_round) {
  cfg.validate();
  auto pair = transport::make_pair(mode);
  auto prover_channel = std::move(pair.prover_end);
  std::thread prover_thread(
      [channel = std::move(prover_channel), strategy, &cfg]() mutable {
        try {
          ProverEndpoint endpoint(channel.get(), strategy, cfg.buffered);
          endpoint.run();
        } catch (...) {
          // Endpoint failure surfaces to the verifier as a transport error.
        }
      });

  RunResult result;
  auto& transcript = result.transcript;
  VerifierSession verifier(cfg, pair.verifier_end.get(), oracle);
  try {
    const int r_rounds =
        single_round ? 1
                     : 1 + static_cast<int>(
                               verifier.rng().next_below(cfg.max_rounds));
    transcript.rounds_executed = r_rounds;
    std::array<CategoryTally, 4> tallies{};
    for (int i = 1; i <= r_rounds; ++i) {
      RoundRecord rec = verifier.test_round(i, forcing);
      switch (rec.kind) {
        case TestKind::Preimage:
          ++tallies[0].total;
          if (rec.flag == Flag::FailP) ++tallies[0].fails;
          break;
        case TestKind::ZMeas:
          ++tallies[1].total;
          if (rec.flag == Flag::FailZ) ++tallies[1].fails;
          break;
        case TestKind::XMeasA:
          ++tallies[2].total;
          if (rec.flag == Flag::FailX) ++tallies[2].fails;
          break;
        case TestKind::XMeasB:
          ++tallies[3].total;
          if (rec.flag == Flag::FailQ) ++tallies[3].fails;
          break;
        case TestKind::Vacuous:
          break;
      }
      transcript.rounds.push_back(std::move(rec));
    }
    if (single_round) {
      verifier.send_ok();
      result.outcome.kind = RspOutcome::Kind::Err;
      result.outcome.err_reason = "single-round mode";
    } else {
      transcript.abort_decision = evaluate_abort(tallies, cfg.delta);
      if (transcript.abort_decision.abort) {
        static const char* kCategories[] = {"preimage", "z", "x", "qrac"};
        const auto& dec = transcript.abort_decision;
        char buf[64];
        std::snprintf(buf, sizeof(buf), " (%.4f > %.4f)",
                      dec.fractions[static_cast<std::size_t>(dec.tripped)],
                      dec.thresholds[static_cast<std::size_t>(dec.tripped)]);
        std::string reason = std::string("abort: fail fraction in ") +
                             kCategories[dec.tripped] + " tests" + buf;
        verifier.send_err(reason);
        result.outcome.kind = RspOutcome::Kind::Err;
        result.outcome.err_reason = reason;
      } else {
        transcript.final_round = Json::object();
        result.outcome =
            verifier.final_round(r_rounds + 1, &transcript.final_round);
        if (result.outcome.kind == RspOutcome::Kind::Err) {
          verifier.send_err(result.outcome.err_reason);
        } else {
          verifier.send_ok();
        }
      }
    }
  } catch (const transport::TransportError& e) {
    result.outcome = RspOutcome{};
    result.outcome.err_reason = std::string("transport failure: ") + e.what();
  } catch (const ProtocolViolation& e) {
    result.outcome = RspOutcome{};
    result.outcome.err_reason = std::string("protocol violation: ") + e.what();
    try {
      verifier.send_err(result.outcome.err_reason);
    } catch (...) {
    }
  }

  transcript.verifier_sent = pair.verifier_end->sent_log();
  transcript.verifier_received = pair.verifier_end->recv_log();
  pair.verifier_end.reset();  // unblocks a prover still waiting on a frame
  prover_thread.join();
  result.outcome.honest_qubit = strategy->final_qubit();
  return result;
}

}  // namespace

RunResult run_session(const ProtocolConfig& cfg,
                      std::unique_ptr<ProverStrategy> prover,
                      transport::Mode mode, const RoundForcing* forcing,
                      SimOracle* oracle) {
  SimOracle local;
  return run_session_impl(cfg, prover.get(), mode, forcing,
                          oracle ? oracle : &local, false);
}

RunResult verifier_run(const ProtocolConfig& cfg, const std::string& strategy,
                       transport::Mode mode) {
  SimOracle oracle;
  auto prover =
      make_strategy(strategy, oracle, Rng(cfg.seed).fork("prover"), cfg.buffered);
  return run_session_impl(cfg, prover.get(), mode, nullptr, &oracle, false);
}

RoundRecord qubit_prep_round(const ProtocolConfig& cfg,
                             const std::string& strategy, std::uint64_t seed,
                             const RoundForcing* forcing) {
  ProtocolConfig local = cfg;
  local.seed = seed;
  SimOracle oracle;
  auto prover =
      make_strategy(strategy, oracle, Rng(seed).fork("prover"), local.buffered);
  auto result =
      run_session_impl(local, prover.get(), transport::Mode::InProc, forcing,
                       &oracle, true);
  if (result.transcript.rounds.empty()) {
    throw std::runtime_error("round did not complete: " +
                             result.outcome.err_reason);
  }
  return result.transcript.rounds.front();
}

}  // namespace rsp::protocol
