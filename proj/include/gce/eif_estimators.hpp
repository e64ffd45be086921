#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"
#include "gce/estimate.hpp"
#include "gce/nuisance.hpp"
#include "gce/ustat.hpp"

namespace gce {

/// Imputed ζ for every unordered pair p = (i<k):
/// ik1 = ζ_{ik,1}, ki1 = ζ_{ki,1}, ik0 = ζ_{ik,0}, ki0 = ζ_{ki,0}.
struct ZetaTable {
  std::size_t m = 0;
  std::vector<double> ik1, ki1, ik0, ki0;

  explicit ZetaTable(std::size_t m_ = 0)
      : m(m_), ik1(pair_count(m_)), ki1(pair_count(m_)), ik0(pair_count(m_)), ki0(pair_count(m_)) {}

  static ZetaTable constant(std::size_t m, double c);
};

/// Efficient-score kernel: h_a = ½[I_ik^a (w̄_ik − ζ_ik,a)/(π(1−π)) +
/// I_ki^a (w̄_ki − ζ_ki,a)/(π(1−π)) + ζ_ik,a + ζ_ki,a], d_a = 1, both
/// multiplied by N_i N_k for target I.
PairKernel eff_kernel(const TrialDataset& data, const ContrastTable& table, const ZetaTable& zeta,
                      Target target);

struct PairCell {
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::vector<OrderedPair> pairs;     // (i<k), in index order
  std::vector<std::size_t> training;  // clusters in neither fold s1 nor s2
};

/// Fold partition over clusters and the induced cell partition over pairs.
struct PairPartition {
  std::size_t m = 0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  bool stratified = false;
  std::vector<std::size_t> fold_of_cluster;
  std::vector<PairCell> cells;
  std::vector<std::uint32_t> cell_of_pair;  // indexed by pair_index

  std::size_t fold_size(std::size_t s) const;
};

/// Folds from explicit assignments; builds the K(K+1)/2 cells.
PairPartition partition_from_folds(std::vector<std::size_t> fold_of_cluster, std::size_t K);

/// Deals `order` into K contiguous blocks whose sizes differ by at most one.
PairPartition partition_from_order(std::span<const std::size_t> order, std::size_t K);

/// Seeded shuffle of 0..m−1 dealt into K folds. Throws ConfigError unless
/// 2 ≤ K ≤ m/2.
PairPartition build_pair_partition(std::size_t m, std::size_t K, std::uint64_t seed);

/// As above; `stratified` shuffles each arm and deals treated then control
/// clusters round-robin so every fold gets a near-equal share of each arm.
PairPartition build_pair_partition(const TrialDataset& data, std::size_t K, std::uint64_t seed,
                                   bool stratified);

/// Throws FoldFeasibilityError naming the first cell whose training
/// complement has fewer than two clusters in some arm.
void check_feasibility(const PairPartition& partition, const TrialDataset& data);

struct NuisanceFit {
  ZetaTable zeta;
  nlohmann::json models = nlohmann::json::array();
  std::vector<std::string> warnings;
  std::optional<PairPartition> partition;
};

/// One model on all cross-arm pairs, ζ imputed for every pair.
NuisanceFit fit_mr_nuisance(const TrialDataset& data, const Contrast& w, const Learner& learner,
                            std::uint64_t seed = 0, Parallelism par = {});

struct DmlConfig {
  std::size_t K = 5;
  std::uint64_t seed = 0;
  bool stratified = false;
  std::shared_ptr<const Learner> learner;  // boosted stumps when null
};

/// Cross-fitted ζ: the model for cell p is trained on the cross-arm pairs of
/// its training complement and used only on the pairs of cell p.
NuisanceFit fit_dml_nuisance(const TrialDataset& data, const Contrast& w, const DmlConfig& cfg,
                             Parallelism par = {});

/// Same with an explicit partition; cell c's learner seed derives from (seed, c).
NuisanceFit fit_dml_nuisance(const TrialDataset& data, const Contrast& w, PairPartition partition,
                             const Learner& learner, std::uint64_t seed, Parallelism par = {});

/// Solves the efficient estimating equation for a given ζ table.
GceEstimate estimate_eff(const TrialDataset& data, const Contrast& w, Target target,
                         const ZetaTable& zeta, EstimatorKind kind,
                         const EstimateOptions& options = {});

GceEstimate estimate_eff(const TrialDataset& data, const Contrast& w, Target target,
                         const NuisanceFit& fit, EstimatorKind kind,
                         const EstimateOptions& options = {});

/// Model-robust estimator with a PIM working model unless another learner
/// is supplied.
GceEstimate estimate_mr(const TrialDataset& data, const Contrast& w, Target target,
                        const EstimateOptions& options = {}, const Learner* learner = nullptr);

GceEstimate estimate_dml(const TrialDataset& data, const Contrast& w, Target target,
                         const DmlConfig& cfg, const EstimateOptions& options = {});

}  // namespace gce
