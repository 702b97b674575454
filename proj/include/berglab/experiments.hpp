#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "berglab/geometry.hpp"

namespace berglab {

struct ConfigInvalid : std::runtime_error {
  explicit ConfigInvalid(const std::string& m) : std::runtime_error(m) {}
};

struct ExperimentConfig {
  std::string experiment;              // bergman-scan | expansion-fit |
                                       // model-kernel | zeros-equidist |
                                       // fs-speed | degrees
  std::string model = "projective-line";  // | projective-product | flat-torus
  Complex tau{0.0, 1.0};
  std::string sequence = "power";      // | perturbed-power | multi-ray
  double a = 0.5;                      // perturbed-power exponent
  std::string psi_id = "psi-zero";
  std::vector<double> rays;            // multi-ray directions
  std::vector<int> p_list;
  int m = 1;
  int samples = 0;
  std::uint64_t seed = 1;
  std::string out;                     // empty = stdout
  std::string format = "json";         // | csv
  double gap_constant = 0.0;           // user C; rows report 2 a_p - C
};

ExperimentConfig config_from_json(const nlohmann::json& j);

/// Empty iff run's preconditions hold.
std::vector<std::string> validate(const ExperimentConfig& cfg);

struct Report {
  nlohmann::json body;  // config echo, rows, summary, version; no wall time
  std::string csv;      // same rows in the documented per-experiment schema
  bool pass = true;
};

/// Executes the experiment. Throws ConfigInvalid on bad configs; module
/// errors propagate.
Report run(const ExperimentConfig& cfg);

/// Atomic write (temp + rename) of the requested format; stdout when the
/// output path is empty. Appends the wall time outside the report body.
void write_report(const Report& report, const ExperimentConfig& cfg,
                  double wall_ms);

extern const char* kToolVersion;

}  // namespace berglab
