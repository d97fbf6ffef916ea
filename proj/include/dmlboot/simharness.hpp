#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmlboot/dgp.hpp"
#include "dmlboot/engine.hpp"
#include "dmlboot/inference.hpp"

namespace dmlboot {

inline constexpr const char* kVersion = "0.1.0";

enum class StudyKind { consistency, coverage, rates };

const char* to_string(StudyKind s);

/// Configuration for one simulation study (normally parsed from JSON).
struct SimConfig {
  StudyKind study = StudyKind::consistency;
  DgpSpec dgp;
  std::vector<int> n_grid;
  int K = 4;
  std::vector<WeightScheme> schemes;
  int B = 1000;   ///< bootstrap draws per replication
  int M = 200;    ///< Monte Carlo replications per cell
  double level = 0.95;
  LearnerSpec learner = LearnerSpec::oracle(nullptr);  ///< oracle = use truth
  bool apply_c_correction = true;  ///< divide draw deviations by c
  ResampleMode mode = ResampleMode::full_sample;
  CMode c_mode = CMode::theoretical;
  std::vector<CiMethod> ci_methods = {CiMethod::percentile, CiMethod::basic,
                                      CiMethod::studentized};
  SolverConfig solver;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = ".";
  bool dump_draws = false;

  void validate() const;  ///< throws ConfigError family
};

/// One long-format result row.
struct SimRecord {
  std::string study, dgp, scheme, method, statistic;
  int n = 0;
  int K = 0;
  double value = 0.0;
  double mc_se = 0.0;
};

struct SimReport {
  StudyKind study = StudyKind::consistency;
  std::vector<SimRecord> records;
  std::uint64_t config_hash = 0;  ///< FNV-1a of the canonical config JSON
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

/// Distributional check: per replication, fit + bootstrap, then the KS
/// distance of the scaled draw deviations sqrt(n) (theta* - theta_hat) / c
/// against N(0, sigma2_hat) and against the pooled across-replication sample
/// of sqrt(n) (theta_hat - theta0).
SimReport study_consistency(const SimConfig& config);

/// Empirical coverage and mean width of the Wald interval and each requested
/// bootstrap interval, per scheme.
SimReport study_coverage(const SimConfig& config);

/// Weight-scheme growth diagnostics over n_grid: a_n estimates, the
/// sqrt(n)-scaled values against their lower bound of 1, the multinomial
/// scheme's log n / log log n growth ratio, and c^2 estimates.
SimReport study_rates(const SimConfig& config);

/// Dispatch on config.study, write report.csv / report.json (and optional
/// draw dumps) into config.out_dir, and return the report.
SimReport run_study(const SimConfig& config);

void write_report_csv(const SimReport& report, std::ostream& os);
nlohmann::json report_to_json(const SimReport& report,
                              const nlohmann::json& config_echo);

// --- JSON parsing helpers (shared with the CLI) ----------------------------

SimConfig parse_sim_config(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& config);
WeightScheme parse_scheme(const nlohmann::json& j);
LearnerSpec parse_learner(const nlohmann::json& j);
SolverConfig parse_solver(const nlohmann::json& j);
DgpSpec parse_dgp(const nlohmann::json& j);
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace dmlboot
