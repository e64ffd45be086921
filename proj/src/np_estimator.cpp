#include "gce/np_estimator.hpp"

#include <Eigen/LU>

#include "gce/error.hpp"

namespace gce {

PairKernel np_kernel(const TrialDataset& data, const ContrastTable& table, Target target) {
  const std::size_t m = data.m();
  PairKernel k(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ci = data.cluster(i);
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& cj = data.cluster(j);
      const std::size_t p = pair_index(i, j, m);
      const double n = target == Target::I
                           ? static_cast<double>(ci.size()) * static_cast<double>(cj.size())
                           : 1.0;
      double h1 = 0.0, d1 = 0.0, h0 = 0.0, d0 = 0.0;
      if (ci.treatment == 1 && cj.treatment == 0) {
        h1 = 0.5 * table.fwd[p];
        h0 = 0.5 * table.bwd[p];
        d1 = d0 = 0.5;
      } else if (ci.treatment == 0 && cj.treatment == 1) {
        h1 = 0.5 * table.bwd[p];
        h0 = 0.5 * table.fwd[p];
        d1 = d0 = 0.5;
      }
      k.h1[p] = n * h1;
      k.d1[p] = n * d1;
      k.h0[p] = n * h0;
      k.d0[p] = n * d0;
    }
  }
  return k;
}

namespace {

void require_both_arms(const TrialDataset& data) {
  if (data.arm_count(1) == 0 || data.arm_count(0) == 0) {
    throw DegenerateDesignError("both arms need at least one cluster");
  }
}

}  // namespace

GceEstimate estimate_np(const TrialDataset& data, const Contrast& w, Target target,
                        const EstimateOptions& options) {
  require_both_arms(data);
  const auto table = contrast_table(data, w, options.par);
  auto sol = solve_ustat(np_kernel(data, table, target), options.par);
  return assemble_estimate(std::move(sol), target, EstimatorKind::NP, w.range(), options);
}

std::vector<Eigen::Vector2d> hajek_projection(const TrialDataset& data, const Contrast& w,
                                              Target target, const Eigen::Vector2d& lambda,
                                              Parallelism par) {
  const auto table = contrast_table(data, w, par);
  return hajek_projection(np_kernel(data, table, target), lambda, par);
}

Eigen::Matrix2d sandwich_variance_np(const TrialDataset& data, const Contrast& w, Target target,
                                     const Eigen::Vector2d& lambda, Parallelism par) {
  require_both_arms(data);
  const auto table = contrast_table(data, w, par);
  const auto kernel = np_kernel(data, table, target);
  const Eigen::Matrix2d b = kernel_bread(kernel);
  if (b(0, 0) == 0.0 || b(1, 1) == 0.0) throw DegenerateDesignError("singular Jacobian");
  const Eigen::Matrix2d binv = b.inverse();
  const Eigen::Matrix2d meat = projection_meat(hajek_projection(kernel, lambda, par));
  return binv * meat * binv.transpose();
}

}  // namespace gce
