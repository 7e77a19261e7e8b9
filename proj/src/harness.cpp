#include "rsp/harness.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rsp/dqc.hpp"
#include "rsp/protocol.hpp"
#include "rsp/rigidity.hpp"
#include "rsp/zq.hpp"

namespace rsp::harness {

double chi_square_uniform(const std::vector<std::uint64_t>& counts) {
  const std::size_t k = counts.size();
  if (k < 2) throw std::invalid_argument("need at least 2 categories");
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total < 5 * k) throw std::invalid_argument("undersampled chi-square input");
  const double expected = static_cast<double>(total) / static_cast<double>(k);
  double stat = 0.0;
  for (auto c : counts) {
    double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  const double df = static_cast<double>(k - 1);
  return boost::math::gamma_q(df / 2.0, stat / 2.0);
}

Json ReportRecord::to_json() const {
  return Json{{"experiment", experiment}, {"params", params},
              {"seed", seed},             {"per_trial", per_trial},
              {"aggregate", aggregate},   {"wall_clock_ms", wall_clock_ms}};
}

ReportRecord ReportRecord::from_json(const Json& j) {
  ReportRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.params = j.at("params");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.per_trial = j.at("per_trial");
  r.aggregate = j.at("aggregate");
  r.wall_clock_ms = j.at("wall_clock_ms").get<double>();
  return r;
}

std::string ReportRecord::to_csv() const {
  std::set<std::string> keys;
  for (const auto& row : per_trial) {
    if (row.is_object()) {
      for (auto it = row.begin(); it != row.end(); ++it) keys.insert(it.key());
    }
  }
  std::ostringstream out;
  out << "trial";
  for (const auto& k : keys) out << "," << k;
  out << "\n";
  int idx = 0;
  for (const auto& row : per_trial) {
    out << idx++;
    for (const auto& k : keys) {
      out << ",";
      if (row.is_object() && row.contains(k)) {
        const auto& v = row.at(k);
        if (v.is_string()) {
          out << v.get<std::string>();
        } else {
          out << v.dump();
        }
      }
    }
    out << "\n";
  }
  return out.str();
}

namespace {

using protocol::ProtocolConfig;
using protocol::RspOutcome;

// Runs `trials` jobs on a small pool; job(i) must only touch slot i of its
// output, so results are independent of scheduling.
void parallel_trials(int trials, const std::function<void(int)>& job) {
  unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                           static_cast<unsigned>(trials)));
  if (workers <= 1) {
    for (int i = 0; i < trials; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) {
        job(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

ProtocolConfig config_from_params(const Json& params, std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.max_rounds = params.value("rounds", 100);
  cfg.delta = params.value("delta", 0.15);
  std::string basis = params.value("basis", "X");
  cfg.basis = basis == "Z" ? 'Z' : 'X';
  cfg.backend = params.value("backend", "mock") == "lwe" ? entcf::Backend::Lwe
                                                         : entcf::Backend::Mock;
  cfg.buffered = params.value("buffered", false);
  cfg.lambda = params.value("lambda", 8);
  cfg.seed = seed;
  return cfg;
}

// Exact phase comparison between the verifier's output and the qubit the
// honest prover ended up holding.
bool outcome_matches_prover(const RspOutcome& outcome) {
  if (!outcome.honest_qubit) return false;
  if (outcome.kind == RspOutcome::Kind::ZBit) {
    return qsim::fidelity(*outcome.honest_qubit,
                          qsim::QubitState::computational(outcome.bit)) >
           1.0 - 1e-12;
  }
  if (outcome.kind == RspOutcome::Kind::XTheta) {
    auto idx = outcome.honest_qubit->phase_index();
    return idx && *idx == outcome.theta_index;
  }
  return false;
}

ReportRecord experiment_honest_accept(const ExperimentSpec& spec) {
  ReportRecord rec;
  std::vector<Json> rows(static_cast<std::size_t>(spec.trials));
  Rng root(spec.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(spec.trials));
  for (auto& s : seeds) s = root.next_u64();
  std::string basis_mode = spec.params.value("basis", "both");
  parallel_trials(spec.trials, [&](int i) {
    ProtocolConfig cfg = config_from_params(spec.params, seeds[i]);
    if (basis_mode == "both") cfg.basis = i % 2 == 0 ? 'X' : 'Z';
    auto run = protocol::verifier_run(cfg, "honest");
    bool accept = run.outcome.kind != RspOutcome::Kind::Err;
    rows[static_cast<std::size_t>(i)] =
        Json{{"basis", std::string(1, cfg.basis)},
             {"accept", accept},
             {"match", accept && outcome_matches_prover(run.outcome)},
             {"err", run.outcome.err_reason}};
  });
  int accepts = 0, matches = 0;
  for (const auto& r : rows) {
    accepts += r.at("accept").get<bool>() ? 1 : 0;
    matches += r.at("match").get<bool>() ? 1 : 0;
  }
  for (auto& r : rows) rec.per_trial.push_back(std::move(r));
  rec.aggregate = Json{
      {"accept_rate", static_cast<double>(accepts) / spec.trials},
      {"accepted", accepts},
      {"matched", matches},
      {"match_rate_given_accept",
       accepts ? static_cast<double>(matches) / accepts : 0.0}};
  return rec;
}

ReportRecord experiment_theta_uniformity(const ExperimentSpec& spec) {
  // `trials` counts completed final rounds; aborted sessions are padded over
  // so the histogram always holds the requested number of samples.
  ReportRecord rec;
  const int padded = spec.trials + spec.trials / 10 + 50;
  std::vector<int> thetas(static_cast<std::size_t>(padded), -1);
  Rng root(spec.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(padded));
  for (auto& s : seeds) s = root.next_u64();
  parallel_trials(padded, [&](int i) {
    ProtocolConfig cfg = config_from_params(spec.params, seeds[i]);
    if (!spec.params.contains("rounds")) cfg.max_rounds = 4;
    cfg.basis = 'X';
    auto run = protocol::verifier_run(cfg, "honest");
    if (run.outcome.kind == RspOutcome::Kind::XTheta) {
      thetas[static_cast<std::size_t>(i)] = run.outcome.theta_index;
    }
  });
  std::vector<std::uint64_t> counts(8, 0);
  int usable = 0;
  for (int t : thetas) {
    if (t < 0) continue;
    ++counts[static_cast<std::size_t>(t)];
    if (++usable == spec.trials) break;
  }
  rec.aggregate = Json{{"counts", counts},
                       {"samples", usable},
                       {"p_value", chi_square_uniform(counts)}};
  return rec;
}

ReportRecord experiment_soundness(const ExperimentSpec& spec) {
  ReportRecord rec;
  std::string strategy = spec.params.value("strategy", "random");
  std::vector<int> aborted(static_cast<std::size_t>(spec.trials), 0);
  Rng root(spec.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(spec.trials));
  for (auto& s : seeds) s = root.next_u64();
  parallel_trials(spec.trials, [&](int i) {
    ProtocolConfig cfg = config_from_params(spec.params, seeds[i]);
    if (!spec.params.contains("basis")) cfg.basis = i % 2 == 0 ? 'X' : 'Z';
    auto run = protocol::verifier_run(cfg, strategy);
    aborted[static_cast<std::size_t>(i)] =
        run.outcome.kind == RspOutcome::Kind::Err ? 1 : 0;
  });
  int total = 0;
  for (std::size_t i = 0; i < aborted.size(); ++i) {
    total += aborted[i];
    rec.per_trial.push_back(Json{{"aborted", aborted[i] == 1}});
  }
  rec.aggregate = Json{{"strategy", strategy},
                       {"aborts", total},
                       {"abort_rate", static_cast<double>(total) / spec.trials}};
  return rec;
}

ReportRecord experiment_qrac_optimize(const ExperimentSpec& spec) {
  ReportRecord rec;
  auto result = rigidity::qrac_optimize(spec.trials, spec.seed);
  rec.aggregate = Json{{"best_success", result.best_success},
                       {"opt_q", rigidity::opt_q()},
                       {"gap", rigidity::opt_q() - result.best_success}};
  return rec;
}

ReportRecord experiment_moderate_frequency(const ExperimentSpec& spec) {
  ReportRecord rec;
  const std::uint32_t q = spec.params.value("q", 17);
  const std::uint32_t ell = spec.params.value("ell", 1);
  const std::uint32_t n = spec.params.value("n", 12);
  std::vector<int> moderate(static_cast<std::size_t>(spec.trials), 0);
  Rng root(spec.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(spec.trials));
  for (auto& s : seeds) s = root.next_u64();
  parallel_trials(spec.trials, [&](int i) {
    Rng rng(seeds[static_cast<std::size_t>(i)]);
    auto c = zq::random_matrix(q, ell, n, rng);
    moderate[static_cast<std::size_t>(i)] = zq::is_moderate_matrix(c) ? 1 : 0;
  });
  int total = 0;
  for (int m : moderate) total += m;
  double bound = 1.0 - std::pow(static_cast<double>(q), static_cast<double>(ell)) *
                           std::pow(2.0, -static_cast<double>(n) / 32.0);
  rec.aggregate = Json{{"q", q},
                       {"ell", ell},
                       {"n", n},
                       {"frequency", static_cast<double>(total) / spec.trials},
                       {"lower_bound", bound}};
  return rec;
}

ReportRecord experiment_hardcore_tables(const ExperimentSpec& spec) {
  ReportRecord rec;
  const std::uint32_t q = spec.params.value("q", 17);
  const std::uint32_t ell = spec.params.value("ell", 1);
  std::vector<std::uint32_t> ns =
      spec.params.value("n_list", std::vector<std::uint32_t>{8, 12, 16});
  const int matrices = spec.params.value("matrices", 20);
  const int modulus = spec.params.value("modulus", 2);
  Rng root(spec.seed);
  Json per_n = Json::array();
  std::vector<double> means;
  bool all_below_bound = true;
  for (auto n : ns) {
    double mean_sum = 0.0;
    double max_seen = 0.0;
    double bound = 0.0;
    int used = 0;
    for (int m = 0; m < matrices; ++m) {
      Rng rng = root.fork(static_cast<std::uint64_t>(n) * 1000 + m);
      zq::ResidueMatrix c = zq::random_matrix(q, ell, n, rng);
      zq::BitString dhat(n, 1);
      auto report = zq::hardcore_distance_oracle(c, dhat, modulus);
      mean_sum += report.mean_distance;
      max_seen = std::max(max_seen, report.max_distance);
      bound = report.bound;
      ++used;
    }
    double mean = used ? mean_sum / used : 0.0;
    means.push_back(mean);
    if (max_seen > bound) all_below_bound = false;
    per_n.push_back(Json{{"n", n},
                         {"matrices_used", used},
                         {"mean_distance", mean},
                         {"max_distance", max_seen},
                         {"bound", bound}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] > means[i - 1] + 1e-12) monotone = false;
  }
  rec.aggregate = Json{{"per_n", per_n},
                       {"mean_non_increasing", monotone},
                       {"all_below_bound", all_below_bound},
                       {"modulus", modulus}};
  return rec;
}

ReportRecord experiment_jordan_residuals(const ExperimentSpec& spec) {
  ReportRecord rec;
  std::vector<int> dims = spec.params.value("dims", std::vector<int>{2, 4, 8});
  std::vector<double> deltas =
      spec.params.value("deltas", std::vector<double>{1e-2, 1e-4});
  Json exact = Json::array();
  double worst_exact = 0.0;
  for (int d : dims) {
    auto z = qsim::kron(qsim::pauli_z(), qsim::identity(d / 2));
    auto x = qsim::kron(qsim::pauli_x(), qsim::identity(d / 2));
    auto report = rigidity::jordan_extract(z, x);
    double worst = std::max(report.z_residual, report.x_residual);
    worst_exact = std::max(worst_exact, worst);
    exact.push_back(Json{{"dim", d}, {"residual", worst}});
  }
  Rng rng(spec.seed);
  Json perturbed = Json::array();
  bool sweep_ok = true;
  for (double delta : deltas) {
    auto z = qsim::kron(qsim::pauli_z(), qsim::identity(2));
    auto x0 = qsim::kron(qsim::pauli_x(), qsim::identity(2));
    qsim::Matrix h(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        h(i, j) = qsim::Complex(rng.next_gaussian(), rng.next_gaussian());
      }
    }
    h = 0.5 * (h + h.adjoint());
    h /= h.norm();
    auto x = rigidity::snap_to_observable(x0 + delta * h);
    auto report = rigidity::jordan_extract(z, x);
    sweep_ok = sweep_ok && report.z_residual <= 5.0 * std::sqrt(delta);
    perturbed.push_back(Json{{"delta", delta},
                             {"z_residual", report.z_residual},
                             {"x_residual", report.x_residual},
                             {"limit", 5.0 * std::sqrt(delta)}});
  }
  rec.aggregate = Json{{"exact", exact},
                       {"worst_exact_residual", worst_exact},
                       {"perturbed", perturbed},
                       {"sweep_within_limit", sweep_ok}};
  return rec;
}

ReportRecord experiment_transport_determinism(const ExperimentSpec& spec) {
  ReportRecord rec;
  Rng root(spec.seed);
  int equal = 0;
  for (int i = 0; i < spec.trials; ++i) {
    ProtocolConfig cfg;
    cfg.max_rounds = 1 + static_cast<int>(root.next_below(30));
    cfg.delta = 0.05 + 0.9 * root.next_double();
    cfg.basis = root.next_bit() ? 'X' : 'Z';
    cfg.buffered = root.next_bit() != 0;
    cfg.lambda = 4 + root.next_below(8);
    cfg.seed = root.next_u64();
    const char* provers[] = {"honest", "zonly", "random"};
    std::string prover = provers[root.next_below(3)];
    auto in_proc = protocol::verifier_run(cfg, prover, transport::Mode::InProc);
    auto tcp = protocol::verifier_run(cfg, prover, transport::Mode::Tcp);
    bool same = in_proc.transcript.verifier_sent == tcp.transcript.verifier_sent &&
                in_proc.transcript.verifier_received ==
                    tcp.transcript.verifier_received;
    equal += same ? 1 : 0;
    rec.per_trial.push_back(Json{{"prover", prover},
                                 {"rounds", cfg.max_rounds},
                                 {"buffered", cfg.buffered},
                                 {"identical", same},
                                 {"digest", in_proc.transcript.digest()}});
  }
  rec.aggregate = Json{{"identical", equal}, {"total", spec.trials}};
  return rec;
}

ReportRecord experiment_fk_run(const ExperimentSpec& spec) {
  ReportRecord rec;
  const std::string pattern = spec.params.value("pattern", "teleport");
  const std::string source = spec.params.value("source", "direct");
  auto server = dqc::Server::parse(spec.params.value("server", "honest"));
  Rng root(spec.seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(spec.trials));
  for (auto& s : seeds) s = root.next_u64();
  std::vector<Json> rows(static_cast<std::size_t>(spec.trials));
  parallel_trials(spec.trials, [&](int i) {
    Json row;
    if (source == "rsp") {
      ProtocolConfig cfg = config_from_params(spec.params, 0);
      auto result = dqc::rsp_fk_run(cfg, pattern, server, seeds[i]);
      row["err"] = result.err;
      row["accept"] = !result.err && result.transcript.accept;
      if (!result.err) row["outputs"] = result.transcript.output_bits;
      if (result.err) row["reason"] = result.reason;
    } else {
      auto pat = dqc::make_pattern(pattern);
      Rng rng(seeds[static_cast<std::size_t>(i)]);
      pat.sample_secrets(rng);
      auto tr = dqc::fk_delegate(pat, server, rng);
      row["err"] = false;
      row["accept"] = tr.accept;
      row["outputs"] = tr.output_bits;
    }
    rows[static_cast<std::size_t>(i)] = std::move(row);
  });
  int accepts = 0, errs = 0;
  std::map<std::string, int> hist;
  for (auto& row : rows) {
    if (row.value("err", false)) ++errs;
    if (row.value("accept", false)) {
      ++accepts;
      std::string key;
      for (const auto& b : row.at("outputs")) key += std::to_string(b.get<int>());
      ++hist[key];
    }
    rec.per_trial.push_back(std::move(row));
  }
  Json hist_json = Json::object();
  for (const auto& [k, v] : hist) hist_json[k] = v;
  rec.aggregate = Json{{"accepts", accepts},
                       {"errors", errs},
                       {"accept_rate", static_cast<double>(accepts) / spec.trials},
                       {"output_histogram", hist_json}};
  return rec;
}

}  // namespace

ReportRecord run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
  auto start = std::chrono::steady_clock::now();
  ReportRecord rec;
  if (spec.name == "honest-accept-rate") {
    rec = experiment_honest_accept(spec);
  } else if (spec.name == "theta-uniformity") {
    rec = experiment_theta_uniformity(spec);
  } else if (spec.name == "soundness") {
    rec = experiment_soundness(spec);
  } else if (spec.name == "qrac-optimize") {
    rec = experiment_qrac_optimize(spec);
  } else if (spec.name == "moderate-frequency") {
    rec = experiment_moderate_frequency(spec);
  } else if (spec.name == "hardcore-tables") {
    rec = experiment_hardcore_tables(spec);
  } else if (spec.name == "jordan-residuals") {
    rec = experiment_jordan_residuals(spec);
  } else if (spec.name == "transport-determinism") {
    rec = experiment_transport_determinism(spec);
  } else if (spec.name == "fk-run") {
    rec = experiment_fk_run(spec);
  } else {
    throw std::invalid_argument("unknown experiment: " + spec.name);
  }
  rec.experiment = spec.name;
  rec.params = spec.params;
  rec.seed = spec.seed;
  rec.wall_clock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  if (!spec.report_path.empty()) {
    write_report(rec, spec.report_path, spec.format);
  }
  return rec;
}

void write_report(const ReportRecord& record, const std::string& path,
                  const std::string& format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report path " + path);
  if (format == "csv") {
    out << record.to_csv();
  } else {
    out << record.to_json().dump(2) << "\n";
  }
  if (!out) throw std::runtime_error("report write failed");
}

qsim::Complex parse_complex(const std::string& token) {
  if (token.empty()) throw std::invalid_argument("empty matrix entry");
  std::string t = token;
  bool imaginary_part = t.back() == 'i' || t.back() == 'j';
  if (!imaginary_part) {
    return qsim::Complex(std::stod(t), 0.0);
  }
  t.pop_back();
  // Split a+bi at the last sign that is not an exponent sign or leading.
  std::size_t split = std::string::npos;
  for (std::size_t i = t.size(); i-- > 1;) {
    if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  auto imag_value = [](const std::string& s) {
    if (s.empty() || s == "+") return 1.0;
    if (s == "-") return -1.0;
    return std::stod(s);
  };
  if (split == std::string::npos) {
    return qsim::Complex(0.0, imag_value(t));
  }
  return qsim::Complex(std::stod(t.substr(0, split)),
                       imag_value(t.substr(split)));
}

const qsim::Matrix* MatrixFile::find(const std::string& name) const {
  for (const auto& [n, m] : entries) {
    if (n == name) return &m;
  }
  return nullptr;
}

MatrixFile load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  MatrixFile file;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    if (pos + 3 > tokens.size()) {
      throw std::runtime_error("truncated matrix header");
    }
    std::string name = tokens[pos];
    int rows = std::stoi(tokens[pos + 1]);
    int cols = std::stoi(tokens[pos + 2]);
    pos += 3;
    if (rows < 1 || cols < 1 ||
        pos + static_cast<std::size_t>(rows) * cols > tokens.size()) {
      throw std::runtime_error("bad matrix dimensions for " + name);
    }
    qsim::Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = parse_complex(tokens[pos++]);
      }
    }
    file.entries.emplace_back(std::move(name), std::move(m));
  }
  return file;
}

}  // namespace rsp::harness
