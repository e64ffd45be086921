#pragma once

#include <vector>

#include <Eigen/Core>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"
#include "gce/estimate.hpp"
#include "gce/ustat.hpp"

namespace gce {

/// Kernel of the nonparametric U-estimating equation:
/// h_a = ½[I_ik^a w̄_ik + I_ki^a w̄_ki], d_a = ½[I_ik^a + I_ki^a],
/// both multiplied by N_i N_k for target I.
PairKernel np_kernel(const TrialDataset& data, const ContrastTable& table, Target target);

GceEstimate estimate_np(const TrialDataset& data, const Contrast& w, Target target,
                        const EstimateOptions& options = {});

std::vector<Eigen::Vector2d> hajek_projection(const TrialDataset& data, const Contrast& w,
                                              Target target, const Eigen::Vector2d& lambda,
                                              Parallelism par = {});

Eigen::Matrix2d sandwich_variance_np(const TrialDataset& data, const Contrast& w, Target target,
                                     const Eigen::Vector2d& lambda, Parallelism par = {});

}  // namespace gce
