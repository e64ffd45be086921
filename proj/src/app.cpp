#include "gce/app.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "gce/error.hpp"
#include "gce/rng.hpp"
#include "gce/subsample.hpp"

#ifndef GCE_VERSION
#define GCE_VERSION "0.0.0"
#endif

namespace gce {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kDmlTag = 0x646d6c73ULL;
constexpr std::uint64_t kSubTag = 0x73756273ULL;

json header(const char* command) {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return {{"tool", "gce"},
          {"version", version()},
          {"command", command},
          {"libraries",
           {{"eigen", eigen.str()},
            {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                          std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                          std::to_string(BOOST_VERSION % 100)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

void csv_row(std::ostream& os, const GceEstimate& e, const std::string& quantity,
             const Inference& inf) {
  os << to_string(e.estimator) << ',' << to_string(e.target) << ',' << quantity << ','
     << fmt(inf.estimate) << ',' << fmt(inf.se) << ',' << fmt(inf.ci.lower) << ','
     << fmt(inf.ci.upper) << ',';
  if (inf.se_df) {
    os << fmt(*inf.se_df) << ',' << fmt(inf.ci_df->lower) << ',' << fmt(inf.ci_df->upper);
  } else {
    os << ",,";
  }
  os << '\n';
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

const char* version() { return GCE_VERSION; }

RunOutput run_analyze(AnalyzeConfig cfg, const RunOptions& opt) {
  const auto t0 = Clock::now();
  if (!cfg.seed) cfg.seed = draw_seed();
  const std::uint64_t seed = *cfg.seed;
  const auto& st = cfg.settings;

  const TrialDataset data = load_dataset(cfg.data.string(), cfg.schema, cfg.pi);
  const Contrast w(cfg.contrast, data.schema());

  EstimateOptions eo;
  eo.summary = cfg.summary;
  eo.df_correction = st.df_correction;
  eo.df_p = st.df_p;
  eo.level = st.level;
  eo.keep_projections = false;
  eo.par = opt.par;

  InnerEstimator inner;
  inner.mr_learner = std::make_shared<PimLearner>(st.pim);
  inner.dml.K = st.K;
  inner.dml.stratified = st.stratify_folds;
  inner.dml.seed = derive_key({seed, kDmlTag});
  if (st.dml_learner == "pim") {
    inner.dml.learner = inner.mr_learner;
  } else {
    inner.dml.learner = std::make_shared<BoostedLearner>(st.boost);
  }

  std::optional<SubsamplePlan> plan;
  json seeds{{"master", seed}, {"dml", inner.dml.seed}};
  if (st.subsample_R) {
    const std::uint64_t sub_seed = derive_key({seed, kSubTag});
    plan = build_subsample_plan(data, *st.subsample_R, sub_seed, st.subsample_stratify);
    seeds["subsample"] = sub_seed;
  }

  RunOutput out;
  json results = json::array();
  std::ostringstream csv;
  csv << "estimator,target,quantity,estimate,se,ci_lower,ci_upper,se_df,ci_df_lower,ci_df_upper\n";
  for (EstimatorKind kind : st.estimators) {
    inner.kind = kind;
    const auto ests = run_estimator(data, w, st.targets, inner, eo, plan ? &*plan : nullptr);
    for (const auto& e : ests) {
      results.push_back(to_json(e));
      csv_row(csv, e, "lambda_1", e.arms[0]);
      csv_row(csv, e, "lambda_0", e.arms[1]);
      if (e.summary) csv_row(csv, e, e.summary_map->name(), *e.summary);
    }
  }

  json dataset{{"path", cfg.data.string()},
               {"m", data.m()},
               {"treated", data.arm_count(1)},
               {"control", data.arm_count(0)},
               {"individuals", data.total_individuals()},
               {"pi", data.pi()},
               {"warnings", data.warnings()}};
  out.report = header("analyze");
  out.report["config"] = to_json(cfg);
  out.report["seeds"] = seeds;
  out.report["dataset"] = dataset;
  out.report["contrast_range"] = {w.range().lower, w.range().upper};
  out.report["results"] = results;
  if (opt.timing) out.report["runtime_seconds"] = seconds_since(t0);
  out.csv = csv.str();
  return out;
}

RunOutput run_simulate(SimulateConfig cfg, const RunOptions& opt) {
  const auto t0 = Clock::now();
  if (!cfg.seed) cfg.seed = draw_seed();
  cfg.study.seed = *cfg.seed;
  cfg.study.par = opt.par;
  const StudyReport report = run_study(cfg.study);

  RunOutput out;
  out.report = header("simulate");
  const json body = to_json(report, opt.raw);
  for (auto it = body.begin(); it != body.end(); ++it) out.report[it.key()] = it.value();
  if (opt.timing) out.report["runtime_seconds"] = seconds_since(t0);
  out.csv = study_csv(report);
  if (opt.raw) out.raw_csv = records_csv(report.records);
  return out;
}

RunOutput run_truth(TruthConfig cfg, const RunOptions& opt) {
  const auto t0 = Clock::now();
  if (!cfg.seed) cfg.seed = draw_seed();
  const Contrast w(scenario_contrast_spec(cfg.scenario), scenario_schema(cfg.scenario));
  const TruthValues t = true_estimands_oracle(cfg.scenario, w, cfg.pairs, *cfg.seed, opt.par);

  RunOutput out;
  out.report = header("truth");
  out.report["config"] = to_json(cfg);
  json values = json::object();
  std::ostringstream csv;
  csv << "target,lambda_1,lambda_0,mc_se_1,mc_se_0,pairs,seed\n";
  for (Target target : cfg.targets) {
    const bool ind = target == Target::I;
    const Eigen::Vector2d& l = t.lambda(ind);
    const Eigen::Vector2d& se = ind ? t.se_i : t.se_c;
    values[to_string(target)] = {{"lambda_1", l(0)}, {"lambda_0", l(1)},
                                 {"mc_se_1", se(0)}, {"mc_se_0", se(1)}};
    csv << to_string(target) << ',' << fmt(l(0)) << ',' << fmt(l(1)) << ',' << fmt(se(0)) << ','
        << fmt(se(1)) << ',' << t.pairs << ',' << t.seed << '\n';
  }
  out.report["truth"] = values;
  out.report["pairs"] = t.pairs;
  out.report["seed"] = t.seed;
  if (opt.timing) out.report["runtime_seconds"] = seconds_since(t0);
  out.csv = csv.str();
  return out;
}

int exit_code_for(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return 1;
  switch (err->kind()) {
    case ErrorKind::Config:
    case ErrorKind::ContrastCompile:
    case ErrorKind::FoldFeasibility:
    case ErrorKind::Partition: return 2;
    case ErrorKind::Schema:
    case ErrorKind::Parse:
    case ErrorKind::DegenerateDesign: return 3;
    case ErrorKind::Singularity:
    case ErrorKind::Numerical: return 4;
  }
  return 1;
}

nlohmann::json error_record(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {{"error",
           {{"kind", err ? to_string(err->kind()) : "internal"},
            {"message", e.what()},
            {"exit_code", exit_code_for(e)}}}};
}

}  // namespace gce
