#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gce/contrast.hpp"
#include "gce/parallel.hpp"
#include "gce/summary.hpp"

namespace gce {

enum class Target { C, I };
enum class EstimatorKind { NP, MR, DML };

const char* to_string(Target t);
const char* to_string(EstimatorKind k);
Target target_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// Point estimate, standard error and interval for one scalar, with the
/// degrees-of-freedom corrected versions once df_correct has been applied.
struct Inference {
  double estimate = 0.0;
  double se = 0.0;
  Interval ci;
  std::optional<double> se_df;
  std::optional<Interval> ci_df;
};

struct DfCorrection {
  int p = 4;
  double dof = 0.0;  // degrees of freedom of the t quantile
};

struct GceEstimate {
  Target target = Target::C;
  EstimatorKind estimator = EstimatorKind::NP;
  std::size_t m = 0;
  double level = 0.95;

  Eigen::Vector2d lambda = Eigen::Vector2d::Zero();  // (λ1, λ0)
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();     // covariance of m^{1/2}·λ̂
  Eigen::Matrix2d bread = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
  std::optional<Eigen::Matrix2d> cov_df;
  std::optional<DfCorrection> df;

  std::array<Inference, 2> arms;
  std::optional<SummaryMap> summary_map;
  std::optional<Inference> summary;

  std::vector<Eigen::Vector2d> projections;
  std::vector<std::string> warnings;
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// Settings shared by every estimator.
struct EstimateOptions {
  std::optional<SummarySpec> summary;
  bool df_correction = false;
  int df_p = 4;
  double level = 0.95;
  bool keep_projections = true;
  Parallelism par;
};

double normal_quantile(double p);
double t_quantile(double p, double dof);

/// Recomputes `arms` and `summary` from lambda, cov and cov_df.
void refresh_inference(GceEstimate& est);

/// Attaches f(λ̂) with its delta-method interval. Custom maps have their
/// gradient checked at λ̂ first.
GceEstimate with_summary(GceEstimate est, const SummaryMap& f);

/// Inflates the covariance by m/(m−p) and adds t_{m−p} intervals, keeping
/// the uncorrected ones. Throws ConfigError when m ≤ p.
GceEstimate df_correct(GceEstimate est, int p = 4);

/// Flags λ̂ outside the contrast's declared range.
void check_range(GceEstimate& est, const Range& range);

nlohmann::json to_json(const GceEstimate& est, bool with_projections = false);

}  // namespace gce
