#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "rsp/dqc.hpp"
#include "rsp/harness.hpp"
#include "rsp/protocol.hpp"
#include "rsp/rigidity.hpp"
#include "rsp/zq.hpp"

namespace {

using Json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitToolError = 1;
constexpr int kExitProtocolErr = 2;

void maybe_write(const std::string& path, const Json& doc) {
  if (path.empty()) return;
  rsp::harness::ReportRecord rec;
  rec.experiment = doc.value("command", "cli");
  rec.params = doc;
  rsp::harness::write_report(rec, path, "json");
}

Json parse_kv_params(const std::vector<std::string>& sets) {
  Json params = Json::object();
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--set expects key=value, got " + kv);
    }
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    try {
      params[key] = Json::parse(value);
    } catch (const Json::parse_error&) {
      params[key] = value;  // plain string
    }
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Buffered remote state preparation simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string report_path;
  std::string format = "json";
  app.add_option("--seed", seed, "root seed")->capture_default_str();
  app.add_option("--report", report_path, "write a JSON/CSV report file");
  app.add_option("--format", format, "report format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  // --- rsp run ---------------------------------------------------------
  auto* rsp_cmd = app.add_subcommand("rsp", "remote state preparation protocol");
  rsp_cmd->fallthrough();
  auto* rsp_run = rsp_cmd->add_subcommand("run", "run one BRSP session");
  rsp_run->fallthrough();
  std::string basis = "X", prover = "honest", backend = "mock",
              transport_name = "inproc", buffered = "off";
  int rounds = 2000;
  double delta = 0.15;
  rsp_run->add_option("--basis", basis, "W: X or Z")
      ->check(CLI::IsMember({"X", "Z"}));
  rsp_run->add_option("--rounds", rounds, "maximum rounds N")
      ->capture_default_str();
  rsp_run->add_option("--delta", delta, "error tolerance")
      ->capture_default_str();
  rsp_run->add_option("--prover", prover,
                      "honest | zonly | random | defector:<rate>");
  rsp_run->add_option("--backend", backend, "mock | lwe")
      ->check(CLI::IsMember({"mock", "lwe"}));
  rsp_run->add_option("--transport", transport_name, "inproc | tcp")
      ->check(CLI::IsMember({"inproc", "tcp"}));
  rsp_run->add_option("--buffered", buffered, "on | off")
      ->check(CLI::IsMember({"on", "off"}));

  // --- dqc run ---------------------------------------------------------
  auto* dqc_cmd = app.add_subcommand("dqc", "FK delegation");
  dqc_cmd->fallthrough();
  auto* dqc_run = dqc_cmd->add_subcommand("run", "run one FK session");
  dqc_run->fallthrough();
  std::string pattern = "teleport", server_name = "honest", source = "direct";
  int dqc_rounds = 2000;
  double dqc_delta = 0.15;
  dqc_run->add_option("--pattern", pattern, "pattern name");
  dqc_run->add_option("--server", server_name, "honest | flipall | flip:<i>");
  dqc_run->add_option("--source", source, "direct | rsp")
      ->check(CLI::IsMember({"direct", "rsp"}));
  dqc_run->add_option("--rounds", dqc_rounds, "BRSP rounds (rsp source)");
  dqc_run->add_option("--delta", dqc_delta, "BRSP delta (rsp source)");

  // --- rigidity --------------------------------------------------------
  auto* rig_cmd = app.add_subcommand("rigidity", "Jordan-lemma report");
  rig_cmd->fallthrough();
  std::string matrices_path;
  rig_cmd->add_option("--matrices", matrices_path,
                      "text file with Z, X and optional XP, PSI")
      ->required();

  // --- hardcore-oracle -------------------------------------------------
  auto* hc_cmd = app.add_subcommand("hardcore-oracle",
                                    "exact hardcore-distance tables");
  hc_cmd->fallthrough();
  std::uint32_t hc_q = 17, hc_ell = 1, hc_n = 12;
  int hc_modulus = 2;
  std::string hc_dhat = "ones";
  hc_cmd->add_option("--q", hc_q, "prime modulus")->capture_default_str();
  hc_cmd->add_option("--ell", hc_ell, "constraint rows")->capture_default_str();
  hc_cmd->add_option("--n", hc_n, "dimension (<= 20)")->capture_default_str();
  hc_cmd->add_option("--modulus", hc_modulus, "2 or 8")
      ->check(CLI::IsMember({2, 8}));
  hc_cmd->add_option("--dhat", hc_dhat, "\"ones\" or comma-separated bits");

  // --- experiment ------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "named experiment");
  exp_cmd->fallthrough();
  std::string exp_name;
  int exp_trials = 1;
  std::vector<std::string> exp_sets;
  exp_cmd->add_option("--name", exp_name, "experiment name")->required();
  exp_cmd->add_option("--trials", exp_trials, "trial count")
      ->capture_default_str();
  exp_cmd->add_option("--set", exp_sets,
                      "experiment parameter key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rsp_run) {
      rsp::protocol::ProtocolConfig cfg;
      cfg.basis = basis[0];
      cfg.max_rounds = rounds;
      cfg.delta = delta;
      cfg.backend = backend == "lwe" ? rsp::entcf::Backend::Lwe
                                     : rsp::entcf::Backend::Mock;
      cfg.buffered = buffered == "on";
      cfg.seed = seed;
      auto mode = transport_name == "tcp" ? rsp::transport::Mode::Tcp
                                          : rsp::transport::Mode::InProc;
      auto result = rsp::protocol::verifier_run(cfg, prover, mode);
      Json tallies = Json::object();
      for (const auto& rec : result.transcript.rounds) {
        std::string key = std::string(rsp::protocol::to_string(rec.kind)) +
                          ":" + rsp::protocol::to_string(rec.flag);
        tallies[key] = tallies.value(key, 0) + 1;
      }
      Json doc{{"command", "rsp run"},
               {"basis", basis},
               {"prover", prover},
               {"rounds_executed", result.transcript.rounds_executed},
               {"round_tallies", tallies},
               {"soundness_regime", cfg.soundness_regime()},
               {"transcript_digest", result.transcript.digest()}};
      switch (result.outcome.kind) {
        case rsp::protocol::RspOutcome::Kind::ZBit:
          doc["outcome"] = Json{{"kind", "Z"}, {"bit", result.outcome.bit}};
          break;
        case rsp::protocol::RspOutcome::Kind::XTheta:
          doc["outcome"] =
              Json{{"kind", "X"}, {"theta_index", result.outcome.theta_index}};
          break;
        case rsp::protocol::RspOutcome::Kind::Err:
          doc["outcome"] =
              Json{{"kind", "ERR"}, {"reason", result.outcome.err_reason}};
          break;
      }
      std::cout << doc.dump(2) << "\n";
      maybe_write(report_path, doc);
      return result.outcome.kind == rsp::protocol::RspOutcome::Kind::Err
                 ? kExitProtocolErr
                 : kExitOk;
    }

    if (*dqc_run) {
      auto server = rsp::dqc::Server::parse(server_name);
      Json doc{{"command", "dqc run"},
               {"pattern", pattern},
               {"server", server_name},
               {"source", source}};
      bool err = false;
      if (source == "rsp") {
        rsp::protocol::ProtocolConfig cfg;
        cfg.max_rounds = dqc_rounds;
        cfg.delta = dqc_delta;
        auto result = rsp::dqc::rsp_fk_run(cfg, pattern, server, seed);
        err = result.err || !result.transcript.accept;
        doc["err"] = result.err;
        if (result.err) {
          doc["reason"] = result.reason;
        } else {
          doc["accept"] = result.transcript.accept;
          doc["outputs"] = result.transcript.output_bits;
        }
      } else {
        auto pat = rsp::dqc::make_pattern(pattern);
        rsp::Rng rng(seed);
        pat.sample_secrets(rng);
        auto tr = rsp::dqc::fk_delegate(pat, server, rng);
        err = !tr.accept;
        doc["accept"] = tr.accept;
        doc["outputs"] = tr.output_bits;
        doc["deltas"] = tr.delta;
      }
      std::cout << doc.dump(2) << "\n";
      maybe_write(report_path, doc);
      return err ? kExitProtocolErr : kExitOk;
    }

    if (*rig_cmd) {
      auto file = rsp::harness::load_matrix_file(matrices_path);
      const auto* z = file.find("Z");
      const auto* x = file.find("X");
      if (!z || !x) throw std::runtime_error("matrix file needs Z and X");
      const auto* xp = file.find("XP");
      rsp::rigidity::Vector psi;
      const rsp::rigidity::Vector* psi_ptr = nullptr;
      if (const auto* psi_m = file.find("PSI")) {
        psi = psi_m->reshaped();
        psi_ptr = &psi;
      }
      auto report = rsp::rigidity::jordan_extract(*z, *x, xp, psi_ptr);
      Json doc{{"command", "rigidity"},
               {"z_residual", report.z_residual},
               {"x_residual", report.x_residual},
               {"state_weighted", report.state_weighted},
               {"block_overlaps", report.block_overlaps}};
      if (report.a_x) {
        doc["axy_identity_error"] = report.axy_identity_error;
        doc["xprime_offdiag_error"] = report.xprime_offdiag_error;
      }
      std::cout << doc.dump(2) << "\n";
      maybe_write(report_path, doc);
      return kExitOk;
    }

    if (*hc_cmd) {
      rsp::Rng rng(seed);
      auto c = rsp::zq::random_matrix(hc_q, hc_ell, hc_n, rng);
      rsp::zq::BitString dhat;
      if (hc_dhat == "ones") {
        dhat.assign(hc_n, 1);
      } else {
        std::stringstream ss(hc_dhat);
        std::string item;
        while (std::getline(ss, item, ',')) {
          dhat.push_back(static_cast<std::uint8_t>(std::stoi(item)));
        }
      }
      auto report = rsp::zq::hardcore_distance_oracle(c, dhat, hc_modulus);
      Json fibers = Json::array();
      for (const auto& f : report.fibers) {
        fibers.push_back(Json{{"v", f.v},
                              {"fiber_size", f.fiber_size},
                              {"tv_distance", f.tv_distance}});
      }
      Json doc{{"command", "hardcore-oracle"},
               {"q", hc_q},
               {"ell", hc_ell},
               {"n", hc_n},
               {"modulus", report.modulus},
               {"moderate", rsp::zq::is_moderate_matrix(c)},
               {"mean_distance", report.mean_distance},
               {"max_distance", report.max_distance},
               {"bound", report.bound},
               {"fibers", fibers}};
      std::cout << doc.dump(2) << "\n";
      maybe_write(report_path, doc);
      return kExitOk;
    }

    if (*exp_cmd) {
      rsp::harness::ExperimentSpec spec;
      spec.name = exp_name;
      spec.trials = exp_trials;
      spec.seed = seed;
      spec.params = parse_kv_params(exp_sets);
      spec.report_path = report_path;
      spec.format = format;
      auto rec = rsp::harness::run_experiment(spec);
      Json doc = rec.to_json();
      doc.erase("per_trial");  // keep stdout short; the report file has it all
      std::cout << doc.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitToolError;
  }
  return kExitToolError;
}
