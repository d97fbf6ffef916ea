#include "dmlboot/simharness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmlboot/parallel.hpp"
#include "dmlboot/rng.hpp"

namespace dmlboot {

namespace {

constexpr std::uint64_t kTagConsistency = 0xc0517e;
constexpr std::uint64_t kTagCoverage = 0xc0e4;
constexpr std::uint64_t kTagRates = 0x4a7e5;
constexpr std::uint64_t kTagData = 0xda7a;
constexpr std::uint64_t kTagFit = 0xf17;
constexpr std::uint64_t kTagBoot = 0xb007;

LearnerSpec resolve_learner(const LearnerSpec& spec, const GeneratedData& gen) {
  if (spec.kind == LearnerKind::oracle) return LearnerSpec::oracle(gen.truth);
  return spec;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double se_of(const std::vector<double>& v) {
  return sd_of(v) / std::sqrt(static_cast<double>(v.size()));
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
      ch = '_';
  return s;
}

void push(SimReport& rep, const SimConfig& config, int n,
          const std::string& scheme, const std::string& method,
          const std::string& statistic, double value, double mc_se) {
  SimRecord r;
  r.study = to_string(rep.study);
  r.dgp = config.dgp.name();
  r.n = n;
  r.K = config.K;
  r.scheme = scheme;
  r.method = method;
  r.statistic = statistic;
  r.value = value;
  r.mc_se = mc_se;
  rep.records.push_back(std::move(r));
}

SimReport make_report(StudyKind study, const SimConfig& config) {
  SimReport rep;
  rep.study = study;
  rep.seed = config.seed;
  rep.config_hash = fnv1a_hash(sim_config_to_json(config).dump());
  return rep;
}

void dump_draw_file(const SimConfig& config, const std::string& cell,
                    const std::vector<std::vector<double>>& scaled) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const fs::path path =
      fs::path(config.out_dir) / ("draws_" + sanitize(cell) + ".csv");
  std::ofstream os(path);
  if (!os) throw FileIoError("cannot write " + path.string());
  os << "rep,draw,value\n";
  char buf[48];
  for (std::size_t r = 0; r < scaled.size(); ++r)
    for (std::size_t b = 0; b < scaled[r].size(); ++b) {
      std::snprintf(buf, sizeof buf, "%.12g", scaled[r][b]);
      os << r << ',' << b << ',' << buf << '\n';
    }
}

}  // namespace

const char* to_string(StudyKind s) {
  switch (s) {
    case StudyKind::consistency:
      return "consistency";
    case StudyKind::coverage:
      return "coverage";
    case StudyKind::rates:
      return "rates";
  }
  return "unknown";
}

void SimConfig::validate() const {
  dgp.validate();
  if (std::abs(dgp.theta0) > 99.0)
    throw InvalidSpecError("theta0 must lie inside the default score box");
  if (n_grid.empty()) throw InvalidSpecError("n_grid must not be empty");
  if (K < 2) throw InvalidKError("K must be at least 2");
  for (int n : n_grid) {
    if (n < 2) throw InvalidSpecError("every n must be at least 2");
    if (study != StudyKind::rates && n % K != 0)
      throw DivisibilityError("every n in n_grid must be divisible by K");
  }
  if (schemes.empty()) throw InvalidSpecError("schemes must not be empty");
  for (const auto& s : schemes) s.validate();
  if (B < 1) throw InvalidParamError("B must be at least 1");
  if (M < 1) throw InvalidParamError("M must be at least 1");
  if (!(level > 0.0 && level < 1.0))
    throw InvalidParamError("level must be inside (0, 1)");
  if (workers < 1) throw InvalidParamError("workers must be at least 1");
  solver.validate();
  if (study == StudyKind::coverage && ci_methods.empty())
    throw InvalidSpecError("coverage study needs at least one CI method");
  for (CiMethod m : ci_methods)
    if (m == CiMethod::wald)
      throw InvalidSpecError(
          "wald is always reported; list only bootstrap CI methods");
}

// --- consistency -------------------------------------------------------------

SimReport study_consistency(const SimConfig& config) {
  config.validate();
  SimReport rep = make_report(StudyKind::consistency, config);
  const std::string method =
      config.apply_c_correction ? "c_corrected" : "c_uncorrected";

  struct RepOut {
    double ks_normal = 0.0;
    double root_stat = 0.0;
    double c2_mean = 0.0;
    double degen_rate = 0.0;
    std::vector<double> scaled;
  };

  for (std::size_t n_idx = 0; n_idx < config.n_grid.size(); ++n_idx) {
    const int n = config.n_grid[n_idx];
    for (std::size_t s_idx = 0; s_idx < config.schemes.size(); ++s_idx) {
      const WeightScheme& scheme = config.schemes[s_idx];
      const std::uint64_t cell_seed =
          derive_seed(config.seed, kTagConsistency,
                      n_idx * config.schemes.size() + s_idx);
      const double c =
          config.apply_c_correction ? std::sqrt(theoretical_c2(scheme)) : 1.0;
      const double root_n = std::sqrt(static_cast<double>(n));

      std::vector<RepOut> outs(static_cast<std::size_t>(config.M));
      parallel_for(static_cast<std::size_t>(config.M), config.workers,
                   [&](std::size_t r) {
        DgpSpec spec = config.dgp;
        spec.seed = derive_seed(cell_seed, r, kTagData);
        const GeneratedData gen = generate(spec, n);
        const ScoreFunction score = score_for(spec.kind);
        const DmlFit fit =
            fit_dml(gen.data, score, resolve_learner(config.learner, gen),
                    config.K, config.solver, derive_seed(cell_seed, r, kTagFit));
        const BootstrapDistribution dist =
            bootstrap_dml(fit, scheme, config.B, config.mode,
                          derive_seed(cell_seed, r, kTagBoot));
        RepOut& o = outs[r];
        o.scaled.resize(static_cast<std::size_t>(config.B));
        double c2_acc = 0.0;
        int degen = 0;
        for (int b = 0; b < config.B; ++b) {
          const BootstrapDraw& dr = dist.draws[static_cast<std::size_t>(b)];
          o.scaled[static_cast<std::size_t>(b)] =
              root_n * (dr.theta_star[0] - fit.theta_hat[0]) / c;
          c2_acc += dr.c2_realized;
          degen += dr.degenerate_folds.empty() ? 0 : 1;
        }
        o.ks_normal = ks_distance(o.scaled, 0.0, fit.sigma2_hat(0, 0));
        o.root_stat = root_n * (fit.theta_hat[0] - config.dgp.theta0);
        o.c2_mean = c2_acc / config.B;
        o.degen_rate = static_cast<double>(degen) / config.B;
      });

      // Second pass: each replication's draws against the pooled sampling
      // statistics of all replications.
      std::vector<double> pooled(static_cast<std::size_t>(config.M));
      for (int r = 0; r < config.M; ++r)
        pooled[static_cast<std::size_t>(r)] =
            outs[static_cast<std::size_t>(r)].root_stat;
      std::vector<double> ks_sampling(static_cast<std::size_t>(config.M));
      parallel_for(static_cast<std::size_t>(config.M), config.workers,
                   [&](std::size_t r) {
        ks_sampling[r] = ks_distance(outs[r].scaled, pooled);
      });

      std::vector<double> ks_normal(outs.size()), c2_mean(outs.size()),
          degen(outs.size());
      for (std::size_t r = 0; r < outs.size(); ++r) {
        ks_normal[r] = outs[r].ks_normal;
        c2_mean[r] = outs[r].c2_mean;
        degen[r] = outs[r].degen_rate;
      }
      const std::string sname = scheme.name();
      push(rep, config, n, sname, method, "ks_normal", mean_of(ks_normal),
           se_of(ks_normal));
      push(rep, config, n, sname, method, "ks_sampling", mean_of(ks_sampling),
           se_of(ks_sampling));
      push(rep, config, n, sname, method, "root_n_bias", mean_of(pooled),
           se_of(pooled));
      push(rep, config, n, sname, method, "root_n_sd", sd_of(pooled),
           sd_of(pooled) / std::sqrt(2.0 * std::max<std::size_t>(
                                               1, pooled.size() - 1)));
      push(rep, config, n, sname, method, "degenerate_rate", mean_of(degen),
           se_of(degen));
      push(rep, config, n, sname, method, "c2_realized_mean", mean_of(c2_mean),
           se_of(c2_mean));
      push(rep, config, n, sname, method, "c2_theory", theoretical_c2(scheme),
           0.0);

      if (config.dump_draws) {
        std::vector<std::vector<double>> all;
        all.reserve(outs.size());
        for (auto& o : outs) all.push_back(std::move(o.scaled));
        std::ostringstream cell;
        cell << "consistency_" << config.dgp.name() << "_n" << n << "_"
             << sname;
        dump_draw_file(config, cell.str(), all);
      }
    }
  }
  return rep;
}

// --- coverage ----------------------------------------------------------------

SimReport study_coverage(const SimConfig& config) {
  config.validate();
  SimReport rep = make_report(StudyKind::coverage, config);
  const std::size_t n_methods = config.ci_methods.size();

  struct RepOut {
    int wald_cover = 0;
    double wald_width = 0.0;
    std::vector<int> cover;      ///< schemes x methods
    std::vector<double> width;
  };

  for (std::size_t n_idx = 0; n_idx < config.n_grid.size(); ++n_idx) {
    const int n = config.n_grid[n_idx];
    const std::uint64_t cell_seed =
        derive_seed(config.seed, kTagCoverage, n_idx);
    const double theta0 = config.dgp.theta0;

    std::vector<RepOut> outs(static_cast<std::size_t>(config.M));
    parallel_for(static_cast<std::size_t>(config.M), config.workers,
                 [&](std::size_t r) {
      DgpSpec spec = config.dgp;
      spec.seed = derive_seed(cell_seed, r, kTagData);
      const GeneratedData gen = generate(spec, n);
      const ScoreFunction score = score_for(spec.kind);
      const DmlFit fit =
          fit_dml(gen.data, score, resolve_learner(config.learner, gen),
                  config.K, config.solver, derive_seed(cell_seed, r, kTagFit));
      RepOut& o = outs[r];
      o.cover.assign(config.schemes.size() * n_methods, 0);
      o.width.assign(config.schemes.size() * n_methods, 0.0);
      const ConfidenceInterval wald = wald_ci(fit, config.level);
      o.wald_cover = (wald.lower[0] <= theta0 && theta0 <= wald.upper[0]) ? 1 : 0;
      o.wald_width = wald.upper[0] - wald.lower[0];
      for (std::size_t s_idx = 0; s_idx < config.schemes.size(); ++s_idx) {
        const BootstrapDistribution dist =
            bootstrap_dml(fit, config.schemes[s_idx], config.B, config.mode,
                          derive_seed(cell_seed, r, kTagBoot, s_idx));
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
          const ConfidenceInterval ci = bootstrap_ci(
              dist, config.level, config.ci_methods[mi], config.c_mode);
          const std::size_t slot = s_idx * n_methods + mi;
          o.cover[slot] =
              (ci.lower[0] <= theta0 && theta0 <= ci.upper[0]) ? 1 : 0;
          o.width[slot] = ci.upper[0] - ci.lower[0];
        }
      }
    });

    const auto coverage_se = [&](double p) {
      return std::sqrt(std::max(0.0, p * (1.0 - p)) /
                       static_cast<double>(config.M));
    };
    {
      std::vector<double> cov(outs.size()), wid(outs.size());
      for (std::size_t r = 0; r < outs.size(); ++r) {
        cov[r] = outs[r].wald_cover;
        wid[r] = outs[r].wald_width;
      }
      const double p = mean_of(cov);
      push(rep, config, n, "none", "wald", "coverage", p, coverage_se(p));
      push(rep, config, n, "none", "wald", "mean_width", mean_of(wid),
           se_of(wid));
    }
    for (std::size_t s_idx = 0; s_idx < config.schemes.size(); ++s_idx) {
      const std::string sname = config.schemes[s_idx].name();
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        const std::size_t slot = s_idx * n_methods + mi;
        std::vector<double> cov(outs.size()), wid(outs.size());
        for (std::size_t r = 0; r < outs.size(); ++r) {
          cov[r] = outs[r].cover[slot];
          wid[r] = outs[r].width[slot];
        }
        const double p = mean_of(cov);
        const std::string mname = to_string(config.ci_methods[mi]);
        push(rep, config, n, sname, mname, "coverage", p, coverage_se(p));
        push(rep, config, n, sname, mname, "mean_width", mean_of(wid),
             se_of(wid));
      }
    }
  }
  return rep;
}

// --- rates ---------------------------------------------------------------------

SimReport study_rates(const SimConfig& config) {
  config.validate();
  SimReport rep = make_report(StudyKind::rates, config);

  for (std::size_t s_idx = 0; s_idx < config.schemes.size(); ++s_idx) {
    const WeightScheme& scheme = config.schemes[s_idx];
    const std::string sname = scheme.name();
    for (std::size_t n_idx = 0; n_idx < config.n_grid.size(); ++n_idx) {
      const int n = config.n_grid[n_idx];
      const std::uint64_t cell_seed =
          derive_seed(config.seed, kTagRates,
                      s_idx * config.n_grid.size() + n_idx);
      const double root_n = std::sqrt(static_cast<double>(n));

      double an, an_se, an_rootn, c2, c2_se;
      if (scheme.kind == WeightKind::delete_h) {
        const int h = scheme.delete_count(n);
        // an_sqrt_n is formed directly as n/(n-h): dividing by root_n and
        // multiplying back can cost the last bit, and this value is
        // contract-exact.
        an_rootn = static_cast<double>(n) / (n - h);
        an = an_rootn / root_n;
        an_se = 0.0;
        c2 = static_cast<double>(h) / (n - h);
        c2_se = 0.0;
      } else if (scheme.kind == WeightKind::unit) {
        an_rootn = 1.0;
        an = 1.0 / root_n;
        an_se = 0.0;
        c2 = 0.0;
        c2_se = 0.0;
      } else {
        std::vector<double> maxima(static_cast<std::size_t>(config.M));
        std::vector<double> c2s(static_cast<std::size_t>(config.M));
        parallel_for(static_cast<std::size_t>(config.M), config.workers,
                     [&](std::size_t r) {
          const WeightVector wv =
              draw_weights(scheme, n, derive_seed(cell_seed, r, 0xa11a));
          maxima[r] = wv.w.maxCoeff();
          c2s[r] = (wv.w.array() - 1.0).square().sum() / n;
        });
        an_rootn = mean_of(maxima);
        an = an_rootn / root_n;
        an_se = se_of(maxima) / root_n;
        c2 = mean_of(c2s);
        c2_se = se_of(c2s);
      }
      push(rep, config, n, sname, "none", "a_n", an, an_se);
      push(rep, config, n, sname, "none", "an_sqrt_n", an_rootn,
           an_se * root_n);
      push(rep, config, n, sname, "none", "an_lower_margin", an_rootn - 1.0,
           an_se * root_n);
      if (scheme.kind == WeightKind::efron && n >= 16) {
        // Base-10 logs: at desk-scale n the ratio then sits near 1, because the
        // positive second-order term of the occupancy maximum is largely
        // cancelled; with natural logs it would hover around 1.4-1.65 below
        // n ~ 10^6 even though both choices agree asymptotically.
        const double factor =
            std::log10(std::log10(static_cast<double>(n))) /
            std::log10(static_cast<double>(n));
        push(rep, config, n, sname, "none", "efron_ratio", an_rootn * factor,
             an_se * root_n * factor);
      }
      push(rep, config, n, sname, "none", "c2_hat", c2, c2_se);
      push(rep, config, n, sname, "none", "c2_theory", theoretical_c2(scheme),
           0.0);
    }
  }
  return rep;
}

// --- report output ---------------------------------------------------------------

void write_report_csv(const SimReport& report, std::ostream& os) {
  os << "study,dgp,n,K,scheme,method,statistic,value,mc_se\n";
  char buf[48];
  for (const SimRecord& r : report.records) {
    os << r.study << ',' << r.dgp << ',' << r.n << ',' << r.K << ','
       << r.scheme << ',' << r.method << ',' << r.statistic << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.value);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.mc_se);
    os << buf << '\n';
  }
}

nlohmann::json report_to_json(const SimReport& report,
                              const nlohmann::json& config_echo) {
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(report.config_hash));
  nlohmann::json recs = nlohmann::json::array();
  for (const SimRecord& r : report.records) {
    recs.push_back({{"study", r.study},
                    {"dgp", r.dgp},
                    {"n", r.n},
                    {"K", r.K},
                    {"scheme", r.scheme},
                    {"method", r.method},
                    {"statistic", r.statistic},
                    {"value", r.value},
                    {"mc_se", r.mc_se}});
  }
  return nlohmann::json{{"version", report.version},
                        {"study", to_string(report.study)},
                        {"seed", report.seed},
                        {"config_hash", hash_hex},
                        {"config", config_echo},
                        {"records", recs}};
}

SimReport run_study(const SimConfig& config) {
  SimReport rep;
  switch (config.study) {
    case StudyKind::consistency:
      rep = study_consistency(config);
      break;
    case StudyKind::coverage:
      rep = study_coverage(config);
      break;
    case StudyKind::rates:
      rep = study_rates(config);
      break;
  }
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  {
    std::ofstream os(fs::path(config.out_dir) / "report.csv",
                     std::ios::binary);
    if (!os) throw FileIoError("cannot write report.csv in " + config.out_dir);
    write_report_csv(rep, os);
  }
  {
    std::ofstream os(fs::path(config.out_dir) / "report.json",
                     std::ios::binary);
    if (!os) throw FileIoError("cannot write report.json in " + config.out_dir);
    os << report_to_json(rep, sim_config_to_json(config)).dump(2) << '\n';
  }
  return rep;
}

// --- JSON parsing -------------------------------------------------------------------

namespace {

[[noreturn]] void config_fail(const std::string& what) {
  throw ConfigError(what);
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    config_fail(e.what());
  }
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

/// Reject typo'd keys instead of silently ignoring them.
void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) return;
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known)
      config_fail(std::string("unknown ") + what + " key '" + item.key() + "'");
  }
}

}  // namespace

WeightScheme parse_scheme(const nlohmann::json& j) {
  return guarded([&]() -> WeightScheme {
    std::string kind;
    WeightScheme s;
    if (j.is_string()) {
      kind = j.get<std::string>();
    } else {
      check_keys(j, {"kind", "alpha", "gamma"}, "scheme");
      kind = j.at("kind").get<std::string>();
      if (j.contains("alpha")) s.alpha = j.at("alpha").get<double>();
      if (j.contains("gamma")) s.gamma = j.at("gamma").get<double>();
    }
    if (kind == "efron") {
      s.kind = WeightKind::efron;
    } else if (kind == "multiplier" || kind == "normalized_multiplier") {
      s.kind = WeightKind::normalized_multiplier;
    } else if (kind == "bayesian") {
      s.kind = WeightKind::normalized_multiplier;
      s.alpha = 1.0;
    } else if (kind == "double" || kind == "double_bootstrap") {
      s.kind = WeightKind::double_bootstrap;
    } else if (kind == "delete_h") {
      s.kind = WeightKind::delete_h;
    } else if (kind == "unit") {
      s.kind = WeightKind::unit;
    } else {
      config_fail("unknown weight scheme '" + kind + "'");
    }
    s.validate();
    return s;
  });
}

LearnerSpec parse_learner(const nlohmann::json& j) {
  return guarded([&]() -> LearnerSpec {
    const std::string kind =
        j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
    double lambda = -1.0;
    int k = 5;
    if (j.is_object()) {
      check_keys(j, {"kind", "lambda", "k"}, "learner");
      if (j.contains("lambda")) lambda = j.at("lambda").get<double>();
      if (j.contains("k")) k = j.at("k").get<int>();
    }
    if (kind == "ridge") return LearnerSpec::ridge(lambda);
    if (kind == "lasso") return LearnerSpec::lasso(lambda);
    if (kind == "knn") return LearnerSpec::knn(k);
    if (kind == "oracle") return LearnerSpec::oracle(nullptr);
    config_fail("unknown learner '" + kind + "'");
  });
}

SolverConfig parse_solver(const nlohmann::json& j) {
  return guarded([&]() -> SolverConfig {
    SolverConfig c;
    check_keys(j, {"epsilon_n", "max_iters", "fd_step", "fallback"}, "solver");
    if (j.contains("epsilon_n")) c.epsilon_n = j.at("epsilon_n").get<double>();
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
    if (j.contains("fd_step")) c.fd_step = j.at("fd_step").get<double>();
    if (j.contains("fallback"))
      c.fallback_enabled = j.at("fallback").get<bool>();
    c.validate();
    return c;
  });
}

DgpSpec parse_dgp(const nlohmann::json& j) {
  return guarded([&]() -> DgpSpec {
    DgpSpec d;
    check_keys(j, {"kind", "theta0", "dim_x", "sparsity", "sigma_u", "sigma_v",
                   "seed"},
               "dgp");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mean_only") {
      d.kind = DgpKind::mean_only;
    } else if (kind == "plr_linear") {
      d.kind = DgpKind::plr_linear;
    } else if (kind == "plr_sparse") {
      d.kind = DgpKind::plr_sparse;
    } else {
      config_fail("unknown dgp kind '" + kind + "'");
    }
    if (j.contains("theta0")) d.theta0 = j.at("theta0").get<double>();
    if (j.contains("dim_x")) d.dim_x = j.at("dim_x").get<int>();
    if (j.contains("sparsity")) d.sparsity = j.at("sparsity").get<int>();
    if (j.contains("sigma_u")) d.sigma_u = j.at("sigma_u").get<double>();
    if (j.contains("sigma_v")) d.sigma_v = j.at("sigma_v").get<double>();
    if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
    d.validate();
    return d;
  });
}

SimConfig parse_sim_config(const nlohmann::json& j) {
  return guarded([&]() -> SimConfig {
    SimConfig c;
    check_keys(j,
               {"study", "dgp", "n_grid", "n", "K", "schemes", "scheme", "B",
                "M", "level", "learner", "apply_c_correction", "mode", "c_mode",
                "ci_methods", "solver", "seed", "workers", "out_dir",
                "dump_draws"},
               "config");
    if (j.contains("study")) {
      const std::string s = j.at("study").get<std::string>();
      if (s == "consistency") {
        c.study = StudyKind::consistency;
      } else if (s == "coverage") {
        c.study = StudyKind::coverage;
      } else if (s == "rates") {
        c.study = StudyKind::rates;
      } else {
        config_fail("unknown study '" + s + "'");
      }
    }
    if (j.contains("dgp")) c.dgp = parse_dgp(j.at("dgp"));
    if (j.contains("n_grid")) {
      c.n_grid = j.at("n_grid").get<std::vector<int>>();
    } else if (j.contains("n")) {
      c.n_grid = {j.at("n").get<int>()};
    } else {
      config_fail("config needs n_grid (or n)");
    }
    if (j.contains("K")) c.K = j.at("K").get<int>();
    if (j.contains("schemes")) {
      for (const auto& js : j.at("schemes")) c.schemes.push_back(parse_scheme(js));
    } else if (j.contains("scheme")) {
      c.schemes.push_back(parse_scheme(j.at("scheme")));
    } else {
      c.schemes.push_back(WeightScheme::efron());
    }
    if (j.contains("B")) c.B = j.at("B").get<int>();
    if (j.contains("M")) c.M = j.at("M").get<int>();
    if (j.contains("level")) c.level = j.at("level").get<double>();
    if (j.contains("learner")) c.learner = parse_learner(j.at("learner"));
    if (j.contains("apply_c_correction"))
      c.apply_c_correction = j.at("apply_c_correction").get<bool>();
    if (j.contains("mode")) {
      const std::string m = j.at("mode").get<std::string>();
      if (m == "full_sample") {
        c.mode = ResampleMode::full_sample;
      } else if (m == "within_fold") {
        c.mode = ResampleMode::within_fold;
      } else {
        config_fail("unknown resample mode '" + m + "'");
      }
    }
    if (j.contains("c_mode")) {
      const std::string m = j.at("c_mode").get<std::string>();
      if (m == "theoretical") {
        c.c_mode = CMode::theoretical;
      } else if (m == "realized") {
        c.c_mode = CMode::realized;
      } else {
        config_fail("unknown c_mode '" + m + "'");
      }
    }
    if (j.contains("ci_methods")) {
      c.ci_methods.clear();
      for (const auto& jm : j.at("ci_methods")) {
        const std::string m = jm.get<std::string>();
        if (m == "percentile") {
          c.ci_methods.push_back(CiMethod::percentile);
        } else if (m == "basic") {
          c.ci_methods.push_back(CiMethod::basic);
        } else if (m == "studentized") {
          c.ci_methods.push_back(CiMethod::studentized);
        } else {
          config_fail("unknown ci method '" + m + "'");
        }
      }
    }
    if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("dump_draws")) c.dump_draws = j.at("dump_draws").get<bool>();
    c.validate();
    return c;
  });
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json jschemes = nlohmann::json::array();
  for (const auto& s : c.schemes) {
    nlohmann::json js{{"kind", ""}};
    switch (s.kind) {
      case WeightKind::efron:
        js["kind"] = "efron";
        break;
      case WeightKind::normalized_multiplier:
        js["kind"] = "multiplier";
        js["alpha"] = s.alpha;
        break;
      case WeightKind::double_bootstrap:
        js["kind"] = "double";
        break;
      case WeightKind::delete_h:
        js["kind"] = "delete_h";
        js["gamma"] = s.gamma;
        break;
      case WeightKind::unit:
        js["kind"] = "unit";
        break;
    }
    jschemes.push_back(js);
  }
  nlohmann::json jlearner{{"kind", to_string(c.learner.kind)}};
  if (c.learner.kind == LearnerKind::ridge ||
      c.learner.kind == LearnerKind::lasso)
    jlearner["lambda"] = c.learner.lambda;
  if (c.learner.kind == LearnerKind::knn) jlearner["k"] = c.learner.k;
  nlohmann::json jmethods = nlohmann::json::array();
  for (CiMethod m : c.ci_methods) jmethods.push_back(to_string(m));
  return nlohmann::json{
      {"study", to_string(c.study)},
      {"dgp",
       {{"kind", to_string(c.dgp.kind)},
        {"theta0", c.dgp.theta0},
        {"dim_x", c.dgp.dim_x},
        {"sparsity", c.dgp.sparsity},
        {"sigma_u", c.dgp.sigma_u},
        {"sigma_v", c.dgp.sigma_v},
        {"seed", c.dgp.seed}}},
      {"n_grid", c.n_grid},
      {"K", c.K},
      {"schemes", jschemes},
      {"B", c.B},
      {"M", c.M},
      {"level", c.level},
      {"learner", jlearner},
      {"apply_c_correction", c.apply_c_correction},
      {"mode", to_string(c.mode)},
      {"c_mode", to_string(c.c_mode)},
      {"ci_methods", jmethods},
      {"solver",
       {{"epsilon_n", c.solver.epsilon_n},
        {"max_iters", c.solver.max_iters},
        {"fd_step", c.solver.fd_step},
        {"fallback", c.solver.fallback_enabled}}},
      {"seed", c.seed},
      {"dump_draws", c.dump_draws}};
}

}  // namespace dmlboot
