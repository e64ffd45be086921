#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gce/dataset.hpp"
#include "gce/eif_estimators.hpp"
#include "gce/estimate.hpp"

namespace gce {

/// Disjoint split of the clusters into R subsamples.
struct SubsamplePlan {
  std::size_t R = 1;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<std::size_t> assignment;            // cluster → subsample
  std::vector<std::vector<std::size_t>> members;  // ascending cluster indices

  std::size_t size(std::size_t r) const { return members[r].size(); }
  /// Σ_r m_r(m_r−1)/2, the number of cluster pairs the plan evaluates.
  std::size_t pairs_used() const;
};

/// Stratified: each arm is shuffled and dealt round-robin, treated first.
/// Unstratified: all clusters shuffled and dealt round-robin. Throws
/// PartitionError when a subsample ends up with fewer than 2 clusters in an arm.
SubsamplePlan build_subsample_plan(const TrialDataset& data, std::size_t R, std::uint64_t seed,
                                   bool stratified = true);

struct InnerEstimator {
  EstimatorKind kind = EstimatorKind::NP;
  DmlConfig dml;  // subsample r uses seed dml.seed + r
  std::shared_ptr<const Learner> mr_learner;
};

/// λ* = R⁻¹Σλ^(r), V* = R⁻¹ΣV^(r), SE from (V*/m)^{1/2} with the full m.
/// DF correction is applied inside each subsample with its own m_r.
GceEstimate estimate_subsampled(const TrialDataset& data, const Contrast& w, Target target,
                                const SubsamplePlan& plan, const InnerEstimator& inner,
                                const EstimateOptions& options = {});

/// Runs one inner estimator on a full dataset; shared by the CLI and studies.
GceEstimate run_estimator(const TrialDataset& data, const Contrast& w, Target target,
                          const InnerEstimator& inner, const EstimateOptions& options);

/// One estimate per target. Without a plan, MR and DML nuisance models are
/// fitted once and shared by all targets.
std::vector<GceEstimate> run_estimator(const TrialDataset& data, const Contrast& w,
                                       std::span<const Target> targets,
                                       const InnerEstimator& inner, const EstimateOptions& options,
                                       const SubsamplePlan* plan = nullptr);

}  // namespace gce
