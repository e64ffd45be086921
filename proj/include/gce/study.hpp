#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gce/eif_estimators.hpp"
#include "gce/estimate.hpp"
#include "gce/nuisance.hpp"
#include "gce/simulation.hpp"

namespace gce {

struct StudyConfig {
  Scenario scenario;
  std::vector<EstimatorKind> estimators{EstimatorKind::NP, EstimatorKind::MR, EstimatorKind::DML};
  std::vector<Target> targets{Target::C, Target::I};
  std::size_t replicates = 500;
  std::uint64_t seed = 0;

  std::optional<TruthValues> truth;  // oracle run when absent
  std::size_t oracle_pairs = 1000000;

  std::size_t K = 5;
  bool stratify_folds = false;
  PimConfig pim;
  BoostConfig boost;

  std::optional<std::size_t> subsample_R;
  bool subsample_stratified = true;

  int df_p = 4;
  double level = 0.95;
  Parallelism par;
};

/// One (replicate, estimator, target) outcome. Failed fits keep `error`.
struct ReplicateRecord {
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::NP;
  Target target = Target::C;
  bool ok = false;
  std::string error;
  std::array<double, 2> lambda{};
  std::array<double, 2> se{};
  std::array<double, 2> se_df{};
  std::array<Interval, 2> ci{};
  std::array<Interval, 2> ci_df{};
};

/// Monte Carlo summary of one arm component over the successful replicates.
struct CellStats {
  std::size_t n = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double ese = 0.0;
  double ase = 0.0;
  double ecp = 0.0;
  double ase_df = 0.0;
  double ecp_df = 0.0;
  double bias_mcse = 0.0;
  double ese_mcse = 0.0;
  double ecp_mcse = 0.0;
};

struct StudyCell {
  EstimatorKind estimator = EstimatorKind::NP;
  Target target = Target::C;
  std::size_t failures = 0;
  std::array<CellStats, 2> arms;  // λ1, λ0
};

struct StudyReport {
  StudyConfig config;
  TruthValues truth;
  std::vector<StudyCell> cells;
  std::vector<ReplicateRecord> records;
};

/// Estimates for one replicate; nuisance models are fitted once and shared
/// by both targets.
std::vector<ReplicateRecord> run_replicate(const StudyConfig& cfg, const Contrast& w,
                                           std::size_t replicate);

/// Aggregates records per (estimator, target) in the order given by `estimators`
/// and `targets`. Failed records are counted but excluded from the statistics.
std::vector<StudyCell> summarize_study(const std::vector<ReplicateRecord>& records,
                                       const TruthValues& truth,
                                       const std::vector<EstimatorKind>& estimators,
                                       const std::vector<Target>& targets);

/// Throws ConfigError when replicates < 50. Replicates run concurrently;
/// the report does not depend on the thread count.
StudyReport run_study(const StudyConfig& cfg);

nlohmann::json study_config_to_json(const StudyConfig& cfg);
nlohmann::json to_json(const CellStats& s);
nlohmann::json to_json(const StudyReport& r, bool with_records = false);
nlohmann::json to_json(const ReplicateRecord& r);

/// One row per (estimator, target, arm).
std::string study_csv(const StudyReport& r);
std::string records_csv(const std::vector<ReplicateRecord>& records);

}  // namespace gce
