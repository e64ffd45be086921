#include "gce/study.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "gce/error.hpp"
#include "gce/rng.hpp"
#include "gce/subsample.hpp"

namespace gce {

namespace {

constexpr std::uint64_t kDmlTag = 0x646d6c73ULL;
constexpr std::uint64_t kSubTag = 0x73756273ULL;
constexpr std::uint64_t kOracleTag = 0x74727574ULL;

ReplicateRecord record_of(std::size_t rep, const GceEstimate& est) {
  ReplicateRecord r;
  r.replicate = rep;
  r.estimator = est.estimator;
  r.target = est.target;
  r.ok = true;
  for (int a = 0; a < 2; ++a) {
    const auto& inf = est.arms[static_cast<std::size_t>(a)];
    r.lambda[a] = inf.estimate;
    r.se[a] = inf.se;
    r.ci[a] = inf.ci;
    r.se_df[a] = inf.se_df.value_or(inf.se);
    r.ci_df[a] = inf.ci_df.value_or(inf.ci);
  }
  return r;
}

ReplicateRecord failure_of(std::size_t rep, EstimatorKind k, Target t, const std::string& what) {
  ReplicateRecord r;
  r.replicate = rep;
  r.estimator = k;
  r.target = t;
  r.error = "replicate " + std::to_string(rep) + ": " + what;
  return r;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : tree_sum(xs) / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mu) * (xs[i] - mu);
  return std::sqrt(tree_sum(sq) / static_cast<double>(xs.size() - 1));
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::vector<ReplicateRecord> run_replicate(const StudyConfig& cfg, const Contrast& w,
                                           std::size_t replicate) {
  const auto trial = generate_trial(cfg.scenario, cfg.seed, replicate);
  const TrialDataset& data = trial.observed;

  EstimateOptions opts;
  opts.level = cfg.level;
  opts.df_correction = data.m() > static_cast<std::size_t>(cfg.df_p);
  opts.df_p = cfg.df_p;
  opts.keep_projections = false;

  auto pim = std::make_shared<PimLearner>(cfg.pim);
  DmlConfig dml;
  dml.K = cfg.K;
  dml.stratified = cfg.stratify_folds;
  dml.seed = derive_key({cfg.seed, replicate, kDmlTag});
  dml.learner = std::make_shared<BoostedLearner>(cfg.boost);

  std::vector<ReplicateRecord> out;
  for (EstimatorKind kind : cfg.estimators) {
    std::vector<GceEstimate> ests;
    std::string failure;
    try {
      InnerEstimator inner{kind, dml, pim};
      if (cfg.subsample_R) {
        const auto plan = build_subsample_plan(data, *cfg.subsample_R,
                                               derive_key({cfg.seed, replicate, kSubTag}),
                                               cfg.subsample_stratified);
        ests = run_estimator(data, w, cfg.targets, inner, opts, &plan);
      } else {
        ests = run_estimator(data, w, cfg.targets, inner, opts);
      }
    } catch (const Error& e) {
      failure = e.what();
    }
    if (!failure.empty()) {
      for (Target t : cfg.targets) out.push_back(failure_of(replicate, kind, t, failure));
    } else {
      for (const auto& e : ests) out.push_back(record_of(replicate, e));
    }
  }
  return out;
}

std::vector<StudyCell> summarize_study(const std::vector<ReplicateRecord>& records,
                                       const TruthValues& truth,
                                       const std::vector<EstimatorKind>& estimators,
                                       const std::vector<Target>& targets) {
  std::vector<StudyCell> cells;
  for (EstimatorKind k : estimators) {
    for (Target t : targets) {
      StudyCell cell;
      cell.estimator = k;
      cell.target = t;
      std::array<std::vector<double>, 2> est, se, se_df, hit, hit_df;
      for (const auto& r : records) {
        if (r.estimator != k || r.target != t) continue;
        if (!r.ok) {
          ++cell.failures;
          continue;
        }
        for (std::size_t a = 0; a < 2; ++a) {
          const double tv = truth.lambda(t == Target::I)(static_cast<Eigen::Index>(a));
          est[a].push_back(r.lambda[a]);
          se[a].push_back(r.se[a]);
          se_df[a].push_back(r.se_df[a]);
          hit[a].push_back(r.ci[a].contains(tv) ? 1.0 : 0.0);
          hit_df[a].push_back(r.ci_df[a].contains(tv) ? 1.0 : 0.0);
        }
      }
      for (std::size_t a = 0; a < 2; ++a) {
        CellStats& s = cell.arms[a];
        s.n = est[a].size();
        s.truth = truth.lambda(t == Target::I)(static_cast<Eigen::Index>(a));
        if (s.n == 0) continue;
        const double n = static_cast<double>(s.n);
        s.mean = mean_of(est[a]);
        s.bias = s.mean - s.truth;
        s.ese = sd_of(est[a]);
        s.ase = mean_of(se[a]);
        s.ase_df = mean_of(se_df[a]);
        s.ecp = mean_of(hit[a]);
        s.ecp_df = mean_of(hit_df[a]);
        s.bias_mcse = s.ese / std::sqrt(n);
        s.ese_mcse = s.n > 1 ? s.ese / std::sqrt(2.0 * (n - 1.0)) : 0.0;
        s.ecp_mcse = std::sqrt(s.ecp * (1.0 - s.ecp) / n);
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

StudyReport run_study(const StudyConfig& cfg) {
  if (cfg.replicates < 50) {
    throw ConfigError("a study needs at least 50 replicates; got " + std::to_string(cfg.replicates));
  }
  if (cfg.estimators.empty() || cfg.targets.empty()) {
    throw ConfigError("a study needs at least one estimator and one target");
  }
  const Contrast w(scenario_contrast_spec(cfg.scenario), scenario_schema(cfg.scenario));

  StudyReport report;
  report.config = cfg;
  report.truth = cfg.truth ? *cfg.truth
                           : true_estimands_oracle(cfg.scenario, w, cfg.oracle_pairs,
                                                   derive_key({cfg.seed, kOracleTag}), cfg.par);

  std::vector<std::vector<ReplicateRecord>> per(cfg.replicates);
  parallel_for(cfg.replicates, cfg.par, [&](std::size_t rep) { per[rep] = run_replicate(cfg, w, rep); });
  for (auto& v : per) {
    for (auto& r : v) report.records.push_back(std::move(r));
  }
  report.cells = summarize_study(report.records, report.truth, cfg.estimators, cfg.targets);
  return report;
}

nlohmann::json study_config_to_json(const StudyConfig& cfg) {
  nlohmann::json est = nlohmann::json::array(), tgt = nlohmann::json::array();
  for (auto k : cfg.estimators) est.push_back(to_string(k));
  for (auto t : cfg.targets) tgt.push_back(to_string(t));
  nlohmann::json j{{"scenario", scenario_to_json(cfg.scenario)},
                   {"estimators", est},
                   {"targets", tgt},
                   {"replicates", cfg.replicates},
                   {"seed", cfg.seed},
                   {"oracle_pairs", cfg.oracle_pairs},
                   {"K", cfg.K},
                   {"stratify_folds", cfg.stratify_folds},
                   {"pim", PimLearner(cfg.pim).config()},
                   {"boost", BoostedLearner(cfg.boost).config()},
                   {"df_p", cfg.df_p},
                   {"level", cfg.level}};
  if (cfg.truth) j["truth"] = to_json(*cfg.truth);
  if (cfg.subsample_R) {
    j["subsample"] = {{"R", *cfg.subsample_R}, {"stratify", cfg.subsample_stratified}};
  }
  return j;
}

nlohmann::json to_json(const CellStats& s) {
  return {{"n", s.n},           {"truth", s.truth},         {"mean", s.mean},
          {"bias", s.bias},     {"ese", s.ese},             {"ase", s.ase},
          {"ecp", s.ecp},       {"ase_df", s.ase_df},       {"ecp_df", s.ecp_df},
          {"bias_mcse", s.bias_mcse}, {"ese_mcse", s.ese_mcse}, {"ecp_mcse", s.ecp_mcse}};
}

nlohmann::json to_json(const ReplicateRecord& r) {
  nlohmann::json j{{"replicate", r.replicate},
                   {"estimator", to_string(r.estimator)},
                   {"target", to_string(r.target)},
                   {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  for (int a = 0; a < 2; ++a) {
    const std::string sfx = a == 0 ? "_1" : "_0";
    j["lambda" + sfx] = r.lambda[a];
    j["se" + sfx] = r.se[a];
    j["se_df" + sfx] = r.se_df[a];
    j["ci" + sfx] = {r.ci[a].lower, r.ci[a].upper};
    j["ci_df" + sfx] = {r.ci_df[a].lower, r.ci_df[a].upper};
  }
  return j;
}

nlohmann::json to_json(const StudyReport& r, bool with_records) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"estimator", to_string(c.estimator)},
                     {"target", to_string(c.target)},
                     {"failures", c.failures},
                     {"lambda_1", to_json(c.arms[0])},
                     {"lambda_0", to_json(c.arms[1])}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& rec : r.records) {
    if (!rec.ok) failures.push_back(to_json(rec));
  }
  nlohmann::json j{{"config", study_config_to_json(r.config)},
                   {"truth", to_json(r.truth)},
                   {"cells", cells},
                   {"failures", failures}};
  if (with_records) {
    auto& raw = j["records"] = nlohmann::json::array();
    for (const auto& rec : r.records) raw.push_back(to_json(rec));
  }
  return j;
}

std::string study_csv(const StudyReport& r) {
  std::ostringstream os;
  os << "estimator,target,arm,n,failures,truth,mean,bias,ese,ase,ecp,ase_df,ecp_df,bias_mcse,"
        "ese_mcse,ecp_mcse\n";
  for (const auto& c : r.cells) {
    for (int a = 0; a < 2; ++a) {
      const auto& s = c.arms[static_cast<std::size_t>(a)];
      os << to_string(c.estimator) << ',' << to_string(c.target) << ',' << (a == 0 ? 1 : 0) << ','
         << s.n << ',' << c.failures << ',' << fmt(s.truth) << ',' << fmt(s.mean) << ','
         << fmt(s.bias) << ',' << fmt(s.ese) << ',' << fmt(s.ase) << ',' << fmt(s.ecp) << ','
         << fmt(s.ase_df) << ',' << fmt(s.ecp_df) << ',' << fmt(s.bias_mcse) << ','
         << fmt(s.ese_mcse) << ',' << fmt(s.ecp_mcse) << '\n';
    }
  }
  return os.str();
}

std::string records_csv(const std::vector<ReplicateRecord>& records) {
  std::ostringstream os;
  os << "replicate,estimator,target,ok,lambda_1,lambda_0,se_1,se_0,se_df_1,se_df_0,error\n";
  for (const auto& r : records) {
    os << r.replicate << ',' << to_string(r.estimator) << ',' << to_string(r.target) << ','
       << (r.ok ? 1 : 0) << ',';
    if (r.ok) {
      os << fmt(r.lambda[0]) << ',' << fmt(r.lambda[1]) << ',' << fmt(r.se[0]) << ','
         << fmt(r.se[1]) << ',' << fmt(r.se_df[0]) << ',' << fmt(r.se_df[1]) << ",\n";
    } else {
      std::string msg = r.error;
      for (char& ch : msg) {
        if (ch == '"') ch = '\'';
      }
      os << ",,,,,,\"" << msg << "\"\n";
    }
  }
  return os.str();
}

}  // namespace gce
