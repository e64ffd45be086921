#include "gce/estimate.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "gce/error.hpp"

namespace gce {

const char* to_string(Target t) { return t == Target::C ? "C" : "I"; }

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::NP: return "np";
    case EstimatorKind::MR: return "mr";
    case EstimatorKind::DML: return "dml";
  }
  return "unknown";
}

Target target_from_string(const std::string& s) {
  if (s == "C" || s == "c") return Target::C;
  if (s == "I" || s == "i") return Target::I;
  throw ConfigError("unknown target '" + s + "' (expected C or I)");
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "np") return EstimatorKind::NP;
  if (s == "mr") return EstimatorKind::MR;
  if (s == "dml") return EstimatorKind::DML;
  throw ConfigError("unknown estimator '" + s + "' (expected np, mr or dml)");
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), p);
}

namespace {

Inference make_inference(double estimate, double var, std::size_t m, double z) {
  Inference out;
  out.estimate = estimate;
  out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(m));
  out.ci = {estimate - z * out.se, estimate + z * out.se};
  return out;
}

void add_df(Inference& inf, double var_df, std::size_t m, double t) {
  inf.se_df = std::sqrt(std::max(var_df, 0.0) / static_cast<double>(m));
  inf.ci_df = Interval{inf.estimate - t * *inf.se_df, inf.estimate + t * *inf.se_df};
}

nlohmann::json interval_json(const Interval& i) { return {i.lower, i.upper}; }

nlohmann::json inference_json(const Inference& inf) {
  nlohmann::json j{{"estimate", inf.estimate}, {"se", inf.se}, {"ci", interval_json(inf.ci)}};
  if (inf.se_df) {
    j["se_df"] = *inf.se_df;
    j["ci_df"] = interval_json(*inf.ci_df);
  }
  return j;
}

nlohmann::json matrix_json(const Eigen::Matrix2d& a) {
  return {{a(0, 0), a(0, 1)}, {a(1, 0), a(1, 1)}};
}

}  // namespace

void refresh_inference(GceEstimate& est) {
  const double alpha = 1.0 - est.level;
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double t = est.df ? t_quantile(1.0 - alpha / 2.0, est.df->dof) : 0.0;
  for (int a = 0; a < 2; ++a) {
    est.arms[a] = make_inference(est.lambda(a), est.cov(a, a), est.m, z);
    if (est.cov_df) add_df(est.arms[a], (*est.cov_df)(a, a), est.m, t);
  }
  est.summary.reset();
  if (est.summary_map) {
    const auto s = summarize(*est.summary_map, est.lambda, est.cov);
    est.summary = make_inference(s.value, s.variance, est.m, z);
    if (est.cov_df) add_df(*est.summary, s.gradient.dot(*est.cov_df * s.gradient), est.m, t);
  }
}

GceEstimate with_summary(GceEstimate est, const SummaryMap& f) {
  if (f.spec().kind == SummarySpec::Kind::Custom) f.check_gradient(est.lambda);
  est.summary_map = f;
  refresh_inference(est);
  return est;
}

GceEstimate df_correct(GceEstimate est, int p) {
  if (p < 0) throw ConfigError("df correction p must be >= 0");
  if (est.m <= static_cast<std::size_t>(p)) {
    throw ConfigError("df correction needs m > p (m = " + std::to_string(est.m) +
                      ", p = " + std::to_string(p) + ")");
  }
  const double m = static_cast<double>(est.m);
  est.cov_df = est.cov * (m / (m - p));
  est.df = DfCorrection{p, m - p};
  refresh_inference(est);
  return est;
}

void check_range(GceEstimate& est, const Range& range) {
  for (int a = 0; a < 2; ++a) {
    if (!range.contains(est.lambda(a))) {
      est.warnings.push_back("lambda_" + std::to_string(1 - a) + " = " +
                             std::to_string(est.lambda(a)) + " lies outside the contrast range [" +
                             std::to_string(range.lower) + ", " + std::to_string(range.upper) +
                             "]");
    }
  }
}

nlohmann::json to_json(const GceEstimate& est, bool with_projections) {
  nlohmann::json j;
  j["target"] = to_string(est.target);
  j["estimator"] = to_string(est.estimator);
  j["m"] = est.m;
  j["level"] = est.level;
  j["lambda_1"] = inference_json(est.arms[0]);
  j["lambda_0"] = inference_json(est.arms[1]);
  j["cov"] = matrix_json(est.cov);
  j["bread"] = matrix_json(est.bread);
  j["meat"] = matrix_json(est.meat);
  if (est.cov_df) {
    j["cov_df"] = matrix_json(*est.cov_df);
    j["df_correction"] = {{"p", est.df->p}, {"dof", est.df->dof}};
  } else {
    j["df_correction"] = nullptr;
  }
  if (est.summary) {
    auto s = inference_json(*est.summary);
    s["name"] = est.summary_map->name();
    j["summary"] = s;
  } else {
    j["summary"] = nullptr;
  }
  if (with_projections) {
    auto& arr = j["projections"] = nlohmann::json::array();
    for (const auto& p : est.projections) arr.push_back({p(0), p(1)});
  }
  j["warnings"] = est.warnings;
  j["diagnostics"] = est.diagnostics;
  return j;
}

}  // namespace gce
