// Command-line front end: fit and bootstrap a dataset from CSV, or run the
// simulation studies from a JSON config.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dmlboot/csv.hpp"
#include "dmlboot/dgp.hpp"
#include "dmlboot/engine.hpp"
#include "dmlboot/inference.hpp"
#include "dmlboot/rng.hpp"
#include "dmlboot/simharness.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dmlboot::FileIoError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw dmlboot::ConfigError(std::string("config is not valid JSON: ") +
                               e.what());
  }
}

json eigen_vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json eigen_matrix(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json ci_to_json(const dmlboot::ConfidenceInterval& ci) {
  return json{{"method", dmlboot::to_string(ci.method)},
              {"level", ci.level},
              {"lower", eigen_vector(ci.lower)},
              {"upper", eigen_vector(ci.upper)},
              {"c_used", ci.c_used}};
}

/// Assemble a fit from the "data"/"score"/"learner" sections of a config.
dmlboot::DmlFit fit_from_config(const json& j, const Overrides& ov) {
  std::shared_ptr<const dmlboot::Dataset> data;
  std::string score_name;
  try {
    const json& jd = j.at("data");
    const std::string path = jd.at("csv").get<std::string>();
    const std::string outcome = jd.at("outcome").get<std::string>();
    std::optional<std::string> treatment;
    if (jd.contains("treatment"))
      treatment = jd.at("treatment").get<std::string>();
    std::vector<std::string> covariates;
    if (jd.contains("covariates"))
      covariates = jd.at("covariates").get<std::vector<std::string>>();
    data = dmlboot::load_dataset_csv(path, outcome, treatment, covariates);
    score_name = j.value("score", treatment ? "plr" : "mean");
  } catch (const json::exception& e) {
    throw dmlboot::ConfigError(e.what());
  }

  dmlboot::ScoreFunction score;
  if (score_name == "plr") {
    score = dmlboot::plr_score();
  } else if (score_name == "mean") {
    score = dmlboot::mean_score();
  } else {
    throw dmlboot::ConfigError("unknown score '" + score_name +
                               "' (expected plr or mean)");
  }
  try {
    if (j.contains("theta_box")) {
      const auto box = j.at("theta_box").get<std::vector<double>>();
      if (box.size() != 2)
        throw dmlboot::ConfigError("theta_box must be [lower, upper]");
      score.theta_lower.setConstant(box[0]);
      score.theta_upper.setConstant(box[1]);
    }
    dmlboot::LearnerSpec learner = dmlboot::LearnerSpec::ridge();
    if (j.contains("learner")) learner = dmlboot::parse_learner(j.at("learner"));
    if (learner.kind == dmlboot::LearnerKind::oracle)
      throw dmlboot::ConfigError(
          "the oracle learner needs synthetic truth; use it in simulate");
    dmlboot::SolverConfig solver;
    if (j.contains("solver")) solver = dmlboot::parse_solver(j.at("solver"));
    const int K = j.value("K", 4);
    std::uint64_t seed = j.value("seed", std::uint64_t{1});
    if (ov.seed) seed = *ov.seed;
    const int workers = ov.workers.value_or(j.value("workers", 1));
    const bool shuffle = j.value("shuffle_folds", false);
    return dmlboot::fit_dml(data, score, learner, K, solver, seed, workers,
                            shuffle);
  } catch (const json::exception& e) {
    throw dmlboot::ConfigError(e.what());
  }
}

json fit_to_json(const dmlboot::DmlFit& fit) {
  json out{{"n", fit.data->n()},
           {"K", fit.partition.K},
           {"theta_hat", eigen_vector(fit.theta_hat)},
           {"fold_thetas", eigen_matrix(fit.fold_thetas)},
           {"jacobian_hat", eigen_matrix(fit.jacobian_hat)},
           {"sigma2_hat", eigen_matrix(fit.sigma2_hat)},
           {"achieved_norms", eigen_vector(fit.achieved_norms)},
           {"epsilon_n", fit.config.epsilon_n},
           {"seed", fit.seed}};
  out["wald_ci"] = ci_to_json(dmlboot::wald_ci(fit, 0.95));
  return out;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw dmlboot::FileIoError("cannot write " + path);
  os << j.dump(2) << '\n';
}

int cmd_fit(const std::string& config_path, const Overrides& ov) {
  const json cfg = load_config(config_path);
  const dmlboot::DmlFit fit = fit_from_config(cfg, ov);
  const std::string out = ov.out.value_or(cfg.value("out", "fit.json"));
  write_json_file(fit_to_json(fit), out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_bootstrap(const std::string& config_path, const Overrides& ov) {
  const json cfg = load_config(config_path);
  const dmlboot::DmlFit fit = fit_from_config(cfg, ov);
  dmlboot::WeightScheme scheme = dmlboot::WeightScheme::efron();
  int B = 1000;
  dmlboot::ResampleMode mode = dmlboot::ResampleMode::full_sample;
  double level = 0.95;
  dmlboot::CMode c_mode = dmlboot::CMode::theoretical;
  bool dump_draws = false;
  try {
    if (cfg.contains("scheme")) scheme = dmlboot::parse_scheme(cfg.at("scheme"));
    B = cfg.value("B", 1000);
    if (cfg.contains("mode")) {
      const std::string m = cfg.at("mode").get<std::string>();
      if (m == "within_fold") {
        mode = dmlboot::ResampleMode::within_fold;
      } else if (m != "full_sample") {
        throw dmlboot::ConfigError("unknown resample mode '" + m + "'");
      }
    }
    level = cfg.value("level", 0.95);
    if (cfg.contains("c_mode") &&
        cfg.at("c_mode").get<std::string>() == "realized")
      c_mode = dmlboot::CMode::realized;
    dump_draws = cfg.value("dump_draws", false);
  } catch (const json::exception& e) {
    throw dmlboot::ConfigError(e.what());
  }
  std::uint64_t seed = cfg.value("seed", std::uint64_t{1});
  if (ov.seed) seed = *ov.seed;
  const int workers = ov.workers.value_or(cfg.value("workers", 1));

  const dmlboot::BootstrapDistribution dist = dmlboot::bootstrap_dml(
      fit, scheme, B, mode, dmlboot::derive_seed(seed, 0xb00757), workers);

  double c2_acc = 0.0;
  int degenerate = 0;
  for (const auto& d : dist.draws) {
    c2_acc += d.c2_realized;
    degenerate += d.degenerate_folds.empty() ? 0 : 1;
  }
  json out{{"fit", fit_to_json(fit)},
           {"scheme", scheme.name()},
           {"B", B},
           {"mode", dmlboot::to_string(mode)},
           {"c2_theoretical", dmlboot::theoretical_c2(scheme)},
           {"c2_realized_mean", c2_acc / static_cast<double>(B)},
           {"degenerate_draw_fraction",
            static_cast<double>(degenerate) / static_cast<double>(B)}};
  for (const auto method :
       {dmlboot::CiMethod::percentile, dmlboot::CiMethod::basic,
        dmlboot::CiMethod::studentized}) {
    const auto ci = dmlboot::bootstrap_ci(dist, level, method, c_mode);
    out["ci"][dmlboot::to_string(method)] = ci_to_json(ci);
  }
  if (dump_draws) {
    json draws = json::array();
    for (const auto& d : dist.draws) draws.push_back(eigen_vector(d.theta_star));
    out["draws"] = draws;
  }
  const std::string path = ov.out.value_or(cfg.value("out", "bootstrap.json"));
  write_json_file(out, path);
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const Overrides& ov,
                 std::optional<dmlboot::StudyKind> study) {
  const json cfg = load_config(config_path);
  dmlboot::SimConfig sim = dmlboot::parse_sim_config(cfg);
  if (study) sim.study = *study;
  if (ov.seed) sim.seed = *ov.seed;
  if (ov.workers) sim.workers = *ov.workers;
  if (ov.out) sim.out_dir = *ov.out;
  const dmlboot::SimReport report = dmlboot::run_study(sim);
  std::cout << "wrote " << (std::filesystem::path(sim.out_dir) / "report.csv").string()
            << " (" << report.records.size() << " records)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Cross-fitted moment estimation with weighted-bootstrap inference"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  std::uint64_t seed_flag = 0;
  int workers_flag = 0;
  std::string out_flag;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_flag, "override the config's seed");
    sub->add_option("--workers", workers_flag, "override worker thread count");
    sub->add_option("--out", out_flag,
                    "output file (fit/bootstrap) or directory (simulate/rates)");
  };
  const auto gather_overrides = [&](CLI::App* sub) {
    if (sub->count("--seed") > 0) ov.seed = seed_flag;
    if (sub->count("--workers") > 0) ov.workers = workers_flag;
    if (sub->count("--out") > 0) ov.out = out_flag;
  };

  CLI::App* fit = app.add_subcommand("fit", "cross-fitted estimate from CSV");
  add_common(fit);
  CLI::App* boot =
      app.add_subcommand("bootstrap", "fit plus weighted bootstrap draws");
  add_common(boot);
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo study (consistency|coverage)");
  std::string study_arg;
  simulate->add_option("study", study_arg, "consistency or coverage")
      ->required()
      ->check(CLI::IsMember({"consistency", "coverage"}));
  add_common(simulate);
  CLI::App* rates =
      app.add_subcommand("rates", "weight-scheme growth diagnostics");
  add_common(rates);

  try {
    app.parse(argc, argv);
    for (CLI::App* sub : {fit, boot, simulate, rates})
      if (sub->parsed()) gather_overrides(sub);
    if (fit->parsed()) return cmd_fit(config_path, ov);
    if (boot->parsed()) return cmd_bootstrap(config_path, ov);
    if (simulate->parsed()) {
      const auto study = study_arg == "coverage" ? dmlboot::StudyKind::coverage
                                                 : dmlboot::StudyKind::consistency;
      return cmd_simulate(config_path, ov, study);
    }
    if (rates->parsed())
      return cmd_simulate(config_path, ov, dmlboot::StudyKind::rates);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const dmlboot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const dmlboot::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
