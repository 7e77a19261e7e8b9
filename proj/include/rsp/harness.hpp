#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rsp/qsim.hpp"

namespace rsp::harness {

using Json = nlohmann::json;

// Chi-square p-value against the uniform null. Needs >= 2 categories and a
// total of at least 5 per category.
double chi_square_uniform(const std::vector<std::uint64_t>& counts);

struct ExperimentSpec {
  std::string name;
  int trials = 1;
  std::uint64_t seed = 1;
  Json params = Json::object();
  std::string report_path;  // empty: no file written
  std::string format = "json";  // json | csv (csv adds a per-trial dump)
};

struct ReportRecord {
  std::string experiment;
  Json params;
  std::uint64_t seed = 0;
  Json per_trial = Json::array();
  Json aggregate = Json::object();
  double wall_clock_ms = 0.0;

  Json to_json() const;
  static ReportRecord from_json(const Json& j);
  std::string to_csv() const;  // per-trial rows
};

// Runs a named experiment; deterministic given the spec's seed (trials run on
// a worker pool with per-trial forked generators). Known names:
//   honest-accept-rate, theta-uniformity, soundness, qrac-optimize,
//   moderate-frequency, hardcore-tables, transport-determinism, fk-run.
ReportRecord run_experiment(const ExperimentSpec& spec);

void write_report(const ReportRecord& record, const std::string& path,
                  const std::string& format);

// Named matrices from the plain-text format used by the rigidity CLI:
// lines of "name rows cols" followed by rows*cols complex entries such as
// 1, -0.5, 2i, 0.5-0.5i. '#' starts a comment.
struct MatrixFile {
  std::vector<std::pair<std::string, qsim::Matrix>> entries;

  const qsim::Matrix* find(const std::string& name) const;
};

MatrixFile load_matrix_file(const std::string& path);
qsim::Complex parse_complex(const std::string& token);

}  // namespace rsp::harness
