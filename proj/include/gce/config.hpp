#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"
#include "gce/estimate.hpp"
#include "gce/nuisance.hpp"
#include "gce/simulation.hpp"
#include "gce/study.hpp"
#include "gce/summary.hpp"

namespace gce {

/// Parses JSON allowing // and /* */ comments. Throws ConfigError.
nlohmann::json parse_config_text(const std::string& text, const std::string& origin = "config");
nlohmann::json read_config_file(const std::filesystem::path& path);

// Outcome indices in config files are 1-based.
ContrastSpec contrast_spec_from_json(const nlohmann::json& j);
nlohmann::json contrast_spec_to_json(const ContrastSpec& spec);

SummarySpec summary_spec_from_json(const nlohmann::json& j);
nlohmann::json summary_spec_to_json(const SummarySpec& spec);

PimConfig pim_config_from_json(const nlohmann::json& j);
BoostConfig boost_config_from_json(const nlohmann::json& j);

std::vector<EstimatorKind> estimators_from_json(const nlohmann::json& j);
/// "C", "I" or "both" (also accepts an array).
std::vector<Target> targets_from_json(const nlohmann::json& j);

struct EstimatorSettings {
  std::vector<EstimatorKind> estimators{EstimatorKind::NP};
  std::vector<Target> targets{Target::C, Target::I};
  std::size_t K = 5;
  bool stratify_folds = false;
  std::string dml_learner = "boosted";
  PimConfig pim;
  BoostConfig boost;
  bool df_correction = false;
  int df_p = 4;
  double level = 0.95;
  std::optional<std::size_t> subsample_R;
  bool subsample_stratify = true;
};

struct AnalyzeConfig {
  std::filesystem::path data;
  OutcomeSchema schema;
  std::optional<double> pi;
  ContrastSpec contrast;
  std::optional<SummarySpec> summary;
  EstimatorSettings settings;
  std::optional<std::uint64_t> seed;
};

struct SimulateConfig {
  StudyConfig study;
  std::optional<std::uint64_t> seed;
};

struct TruthConfig {
  Scenario scenario;
  std::vector<Target> targets{Target::C, Target::I};
  std::size_t pairs = 1000000;
  std::optional<std::uint64_t> seed;
};

/// Relative paths are resolved against `base_dir`.
AnalyzeConfig analyze_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
SimulateConfig simulate_config_from_json(const nlohmann::json& j);
TruthConfig truth_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EstimatorSettings& s);
nlohmann::json to_json(const AnalyzeConfig& c);
nlohmann::json to_json(const TruthConfig& c);

/// Fresh nondeterministic seed for configs that leave it out.
std::uint64_t draw_seed();

}  // namespace gce
