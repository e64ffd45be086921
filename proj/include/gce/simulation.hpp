#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"
#include "gce/parallel.hpp"
#include "gce/rng.hpp"

namespace gce {

/// How the second argument of Normal(μ, s) in the design is read.
enum class NormalScale { Variance, StdDev };

/// "reversed" reports Y1 as 4 − category, "as_written" as the category.
enum class Y1Coding { Reversed, AsWritten };

struct Scenario {
  std::string preset = "study1";
  std::size_t m = 60;
  int contrast_binding = 1;  // 1: weighted tie-inclusive rules, 2: prioritized

  int n_min = 2;
  int n_max = 10;
  double p_treat = 0.5;
  double c1_scale = 4.0;
  double x2_scale = 9.0;
  NormalScale normal_scale = NormalScale::Variance;
  double gamma_sd = 1.0;
  double alpha1_divisor = 10.0;  // α1 = N / alpha1_divisor
  double alpha2_treated = 2.0;
  double alpha2_control = 1.5;
  Y1Coding y1_coding = Y1Coding::Reversed;
  double y2_effect_divisor = 5.0;  // treated Y2 gains N / y2_effect_divisor
  double noise_shape = 1.0;
  double noise_rate = 1.0;

  double c1_sd() const;
  double x2_sd() const;
};

/// Presets "study1", "study2" and "custom" (study-1 design, free overrides).
Scenario scenario_preset(const std::string& name, std::size_t m = 60);

/// Preset named by j["preset"] with every other key applied as an override.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

/// Two outcomes (ordinal Y1 with levels 1..3, real Y2), p_x = 2, p_c = 2.
OutcomeSchema scenario_schema(const Scenario& s);
ContrastSpec scenario_contrast_spec(const Scenario& s);

/// Cumulative probabilities (P(cat ≤ 1), P(cat ≤ 2)) of the ordinal model.
std::array<double, 2> y1_cumulative(const Scenario& s, int n, int arm, double eta);

/// One cluster with both potential outcomes. Outcome vectors are stored in
/// the schema encoding (Y1 as its 0-based level index).
struct LatentCluster {
  int n = 0;
  std::vector<double> c;                      // (C1, C2)
  std::vector<std::vector<double>> x;         // per individual (X1, X2)
  std::vector<std::vector<double>> y1, y0;    // Y(1), Y(0) per individual
};

LatentCluster draw_cluster(const Scenario& s, Stream& rng);

struct HiddenOutcomes {
  std::vector<std::vector<std::vector<double>>> y1, y0;  // cluster → individual → outcome
};

/// Observed-data view plus the hidden potential outcomes. Estimators only
/// ever receive `observed`.
struct SimulatedTrial {
  TrialDataset observed;
  HiddenOutcomes hidden;
};

/// Deterministic in (seed, replicate); cluster i draws from its own stream.
SimulatedTrial generate_trial(const Scenario& s, std::uint64_t seed, std::uint64_t replicate);

struct TruthValues {
  Eigen::Vector2d lambda_c = Eigen::Vector2d::Zero();  // (λ_C1, λ_C0)
  Eigen::Vector2d lambda_i = Eigen::Vector2d::Zero();
  Eigen::Vector2d se_c = Eigen::Vector2d::Zero();
  Eigen::Vector2d se_i = Eigen::Vector2d::Zero();
  std::size_t pairs = 0;
  std::uint64_t seed = 0;

  const Eigen::Vector2d& lambda(bool individual) const { return individual ? lambda_i : lambda_c; }
};

inline constexpr std::size_t kMinOraclePairs = 100000;

/// Monte Carlo truth from independent cluster pairs drawn from the design's
/// potential-outcome law. Both targets at once. Throws ConfigError when
/// n_pairs < 1e5. Results do not depend on the thread count.
TruthValues true_estimands_oracle(const Scenario& s, const Contrast& w, std::size_t n_pairs,
                                  std::uint64_t seed, Parallelism par = {});

nlohmann::json to_json(const TruthValues& t);

}  // namespace gce
