#include "gce/ustat.hpp"

#include <cmath>

#include <Eigen/LU>

#include "gce/error.hpp"

namespace gce {

ContrastTable contrast_table(const TrialDataset& data, const Contrast& w, Parallelism par) {
  const std::size_t m = data.m();
  ContrastTable t;
  t.m = m;
  t.fwd.assign(pair_count(m), 0.0);
  t.bwd.assign(pair_count(m), 0.0);
  parallel_for(m, par, [&](std::size_t i) {
    const auto& ci = data.cluster(i);
    for (std::size_t k = i + 1; k < m; ++k) {
      const auto& ck = data.cluster(k);
      if (ci.treatment == ck.treatment) continue;
      const std::size_t p = pair_index(i, k, m);
      t.fwd[p] = cluster_pair_average(w, ci, ck);
      t.bwd[p] = cluster_pair_average(w, ck, ci);
    }
  });
  return t;
}

std::vector<double> size_products(const TrialDataset& data) {
  const std::size_t m = data.m();
  std::vector<double> out(pair_count(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = i + 1; k < m; ++k) {
      out[pair_index(i, k, m)] =
          static_cast<double>(data.cluster(i).size()) * static_cast<double>(data.cluster(k).size());
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> hajek_projection(const PairKernel& kernel,
                                              const Eigen::Vector2d& lambda, Parallelism par) {
  const std::size_t m = kernel.m;
  std::vector<Eigen::Vector2d> out(m, Eigen::Vector2d::Zero());
  if (m < 2) return out;
  parallel_for(m, par, [&](std::size_t i) {
    std::vector<double> r1, r0;
    r1.reserve(m - 1);
    r0.reserve(m - 1);
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      const Eigen::Vector2d v = kernel.psi(i, k, lambda);
      r1.push_back(v(0));
      r0.push_back(v(1));
    }
    const double scale = 1.0 / static_cast<double>(m - 1);
    out[i] = Eigen::Vector2d(tree_sum(r1) * scale, tree_sum(r0) * scale);
  });
  return out;
}

Eigen::Matrix2d projection_meat(const std::vector<Eigen::Vector2d>& projections) {
  const std::size_t m = projections.size();
  std::vector<double> s11(m), s10(m), s00(m);
  for (std::size_t i = 0; i < m; ++i) {
    s11[i] = projections[i](0) * projections[i](0);
    s10[i] = projections[i](0) * projections[i](1);
    s00[i] = projections[i](1) * projections[i](1);
  }
  const double c = 4.0 / static_cast<double>(m - 1);
  Eigen::Matrix2d out;
  out(0, 0) = c * tree_sum(s11);
  out(0, 1) = out(1, 0) = c * tree_sum(s10);
  out(1, 1) = c * tree_sum(s00);
  return out;
}

Eigen::Matrix2d kernel_bread(const PairKernel& kernel) {
  const double n = static_cast<double>(pair_count(kernel.m));
  Eigen::Matrix2d b = Eigen::Matrix2d::Zero();
  b(0, 0) = -tree_sum(kernel.d1) / n;
  b(1, 1) = -tree_sum(kernel.d0) / n;
  return b;
}

UStatSolution solve_ustat(const PairKernel& kernel, Parallelism par) {
  if (kernel.m < 2) throw DegenerateDesignError("need at least two clusters");
  UStatSolution s;
  const double sd1 = tree_sum(kernel.d1);
  const double sd0 = tree_sum(kernel.d0);
  if (sd1 == 0.0 || sd0 == 0.0) {
    throw DegenerateDesignError("no cross-arm cluster pair: the estimating equation has no root");
  }
  const double sh1 = tree_sum(kernel.h1);
  const double sh0 = tree_sum(kernel.h0);
  s.lambda = Eigen::Vector2d(sh1 / sd1, sh0 / sd0);
  s.residual = std::max(std::abs(sh1 - sd1 * s.lambda(0)), std::abs(sh0 - sd0 * s.lambda(1)));
  s.bread = kernel_bread(kernel);
  if (std::abs(s.bread.determinant()) == 0.0) throw DegenerateDesignError("singular Jacobian");
  s.projections = hajek_projection(kernel, s.lambda, par);
  s.meat = projection_meat(s.projections);
  const Eigen::Matrix2d binv = s.bread.inverse();
  s.cov = binv * s.meat * binv.transpose();
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  return s;
}

GceEstimate assemble_estimate(UStatSolution sol, Target target, EstimatorKind kind,
                              const Range& range, const EstimateOptions& options) {
  GceEstimate est;
  est.target = target;
  est.estimator = kind;
  est.m = sol.projections.size();
  est.level = options.level;
  est.lambda = sol.lambda;
  est.bread = sol.bread;
  est.meat = sol.meat;
  est.cov = sol.cov;
  if (options.keep_projections) est.projections = std::move(sol.projections);
  est.diagnostics["equation_residual"] = sol.residual;
  check_range(est, range);
  refresh_inference(est);
  if (options.summary) est = with_summary(std::move(est), SummaryMap(*options.summary));
  if (options.df_correction) est = df_correct(std::move(est), options.df_p);
  return est;
}

}  // namespace gce
