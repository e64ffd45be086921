#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gce {

enum class OutcomeKind { Real, Ordinal, Categorical, Binary, Count };

const char* to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(const std::string& name);

/// Declared type of one outcome component.
///
/// Values are stored as doubles: real and count values as themselves, binary
/// as 0/1, ordinal values as the 0-based index of their level (so the numeric
/// order is the declared order), categorical values as the 0-based index of
/// their label. Categorical indices carry no order.
struct OutcomeType {
  OutcomeKind kind = OutcomeKind::Real;
  std::vector<std::string> levels;

  bool ordered() const { return kind != OutcomeKind::Categorical; }
  bool operator==(const OutcomeType&) const = default;
};

struct OutcomeSchema {
  std::vector<OutcomeType> outcomes;
  std::size_t p_x = 0;
  std::size_t p_c = 0;
  std::optional<double> pi;
  char delimiter = ',';

  std::size_t q() const { return outcomes.size(); }
  bool operator==(const OutcomeSchema&) const = default;
};

OutcomeSchema schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const OutcomeSchema& schema);
OutcomeSchema load_schema(const std::string& path);

struct IndividualRecord {
  std::vector<double> outcomes;
  std::vector<double> x;

  bool operator==(const IndividualRecord&) const = default;
};

struct ClusterRecord {
  std::string id;
  int treatment = 0;
  std::vector<double> c;
  std::vector<IndividualRecord> individuals;

  std::size_t size() const { return individuals.size(); }
  bool operator==(const ClusterRecord&) const = default;
};

/// Validated, immutable cluster-randomized trial sample.
class TrialDataset {
 public:
  /// Validates every invariant; throws SchemaError, ParseError, ConfigError or
  /// DegenerateDesignError.
  TrialDataset(std::vector<ClusterRecord> clusters, OutcomeSchema schema, double pi,
               std::vector<std::string> warnings = {});

  const std::vector<ClusterRecord>& clusters() const { return clusters_; }
  const ClusterRecord& cluster(std::size_t i) const { return clusters_[i]; }
  const OutcomeSchema& schema() const { return schema_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::size_t m() const { return clusters_.size(); }
  std::size_t q() const { return schema_.q(); }
  std::size_t p_x() const { return schema_.p_x; }
  std::size_t p_c() const { return schema_.p_c; }
  double pi() const { return pi_; }

  std::size_t arm_count(int arm) const;
  std::size_t total_individuals() const;

  /// Clusters at the given indices, in the given order, with the same pi.
  TrialDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const TrialDataset& other) const {
    return clusters_ == other.clusters_ && schema_ == other.schema_ && pi_ == other.pi_;
  }

 private:
  std::vector<ClusterRecord> clusters_;
  OutcomeSchema schema_;
  double pi_;
  std::vector<std::string> warnings_;
};

/// Reads the long (one row per individual) format. `pi` overrides the
/// schema's pi; when both are absent the empirical treated fraction is used
/// and a warning is attached to the dataset.
TrialDataset load_dataset(std::istream& in, const OutcomeSchema& schema,
                          std::optional<double> pi = std::nullopt);
TrialDataset load_dataset(const std::string& path, const OutcomeSchema& schema,
                          std::optional<double> pi = std::nullopt);

/// Writes the long format accepted by load_dataset. Reals use 17 significant
/// digits so a reload is exact.
void write_dataset(std::ostream& out, const TrialDataset& data);

/// Within-cluster mean of each individual covariate.
std::vector<double> cluster_summary_covariates(const ClusterRecord& cluster);

}  // namespace gce
