#include "gce/subsample.hpp"

#include <algorithm>
#include <numeric>

#include "gce/error.hpp"
#include "gce/np_estimator.hpp"
#include "gce/rng.hpp"

namespace gce {

std::size_t SubsamplePlan::pairs_used() const {
  std::size_t n = 0;
  for (const auto& mem : members) n += pair_count(mem.size());
  return n;
}

SubsamplePlan build_subsample_plan(const TrialDataset& data, std::size_t R, std::uint64_t seed,
                                   bool stratified) {
  if (R == 0) throw ConfigError("R must be at least 1");
  SubsamplePlan plan;
  plan.R = R;
  plan.seed = seed;
  plan.stratified = stratified;
  plan.assignment.assign(data.m(), 0);
  plan.members.assign(R, {});

  Stream rng{seed, 0x73756273ULL};
  std::vector<std::size_t> order;
  if (stratified) {
    std::vector<std::size_t> treated, control;
    for (std::size_t i = 0; i < data.m(); ++i) {
      (data.cluster(i).treatment == 1 ? treated : control).push_back(i);
    }
    std::shuffle(treated.begin(), treated.end(), rng);
    std::shuffle(control.begin(), control.end(), rng);
    order = treated;
    order.insert(order.end(), control.begin(), control.end());
  } else {
    order.resize(data.m());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
  }
  for (std::size_t q = 0; q < order.size(); ++q) plan.assignment[order[q]] = q % R;
  for (std::size_t i = 0; i < data.m(); ++i) plan.members[plan.assignment[i]].push_back(i);

  for (std::size_t r = 0; r < R; ++r) {
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i : plan.members[r]) (data.cluster(i).treatment == 1 ? n1 : n0)++;
    if (n1 < 2 || n0 < 2) {
      throw PartitionError("subsample " + std::to_string(r + 1) + " has " + std::to_string(n1) +
                           " treated and " + std::to_string(n0) +
                           " control clusters; at least 2 per arm are required");
    }
  }
  return plan;
}

GceEstimate run_estimator(const TrialDataset& data, const Contrast& w, Target target,
                          const InnerEstimator& inner, const EstimateOptions& options) {
  switch (inner.kind) {
    case EstimatorKind::NP: return estimate_np(data, w, target, options);
    case EstimatorKind::MR: return estimate_mr(data, w, target, options, inner.mr_learner.get());
    case EstimatorKind::DML: return estimate_dml(data, w, target, inner.dml, options);
  }
  throw ConfigError("unknown estimator");
}

std::vector<GceEstimate> run_estimator(const TrialDataset& data, const Contrast& w,
                                       std::span<const Target> targets,
                                       const InnerEstimator& inner, const EstimateOptions& options,
                                       const SubsamplePlan* plan) {
  std::vector<GceEstimate> out;
  if (plan) {
    for (Target t : targets) out.push_back(estimate_subsampled(data, w, t, *plan, inner, options));
    return out;
  }
  if (inner.kind == EstimatorKind::NP) {
    for (Target t : targets) out.push_back(estimate_np(data, w, t, options));
    return out;
  }
  NuisanceFit fit;
  if (inner.kind == EstimatorKind::MR) {
    const PimLearner pim;
    fit = fit_mr_nuisance(data, w, inner.mr_learner ? *inner.mr_learner : pim, inner.dml.seed,
                          options.par);
  } else {
    fit = fit_dml_nuisance(data, w, inner.dml, options.par);
  }
  for (Target t : targets) out.push_back(estimate_eff(data, w, t, fit, inner.kind, options));
  return out;
}

GceEstimate estimate_subsampled(const TrialDataset& data, const Contrast& w, Target target,
                                const SubsamplePlan& plan, const InnerEstimator& inner,
                                const EstimateOptions& options) {
  if (plan.assignment.size() != data.m()) throw ConfigError("subsample plan does not match data");
  const std::size_t R = plan.R;
  EstimateOptions inner_opts = options;
  inner_opts.summary.reset();
  inner_opts.df_correction = false;
  inner_opts.keep_projections = false;
  if (R > 1) inner_opts.par = Parallelism{1};

  std::vector<GceEstimate> parts(R);
  parallel_for(R, R > 1 ? options.par : Parallelism{1}, [&](std::size_t r) {
    const auto sub = data.subset(plan.members[r]);
    InnerEstimator in = inner;
    in.dml.seed = inner.dml.seed + r;
    try {
      parts[r] = run_estimator(sub, w, target, in, inner_opts);
    } catch (const Error& e) {
      rethrow_with_context(e, "subsample " + std::to_string(r + 1) + ": ");
    }
  });

  GceEstimate est;
  est.target = target;
  est.estimator = inner.kind;
  est.m = data.m();
  est.level = options.level;
  auto average = [&](auto get) {
    Eigen::Matrix2d acc;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        std::vector<double> xs(R);
        for (std::size_t r = 0; r < R; ++r) xs[r] = get(parts[r])(a, b);
        acc(a, b) = tree_sum(xs) / static_cast<double>(R);
      }
    }
    return acc;
  };
  for (int a = 0; a < 2; ++a) {
    std::vector<double> xs(R);
    for (std::size_t r = 0; r < R; ++r) xs[r] = parts[r].lambda(a);
    est.lambda(a) = tree_sum(xs) / static_cast<double>(R);
  }
  est.cov = average([](const GceEstimate& e) { return e.cov; });
  est.bread = average([](const GceEstimate& e) { return e.bread; });
  est.meat = average([](const GceEstimate& e) { return e.meat; });
  check_range(est, w.range());
  refresh_inference(est);
  if (options.summary) est = with_summary(std::move(est), SummaryMap(*options.summary));

  if (options.df_correction) {
    double dof = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      parts[r] = df_correct(std::move(parts[r]), options.df_p);
      dof += parts[r].df->dof;
    }
    est.cov_df = average([](const GceEstimate& e) { return *e.cov_df; });
    est.df = DfCorrection{options.df_p, dof};
    refresh_inference(est);
  }

  auto& diag = est.diagnostics["subsample"];
  diag["R"] = R;
  diag["seed"] = plan.seed;
  diag["stratified"] = plan.stratified;
  diag["pairs_used"] = plan.pairs_used();
  diag["pairs_total"] = pair_count(data.m());
  auto& per = diag["estimates"] = nlohmann::json::array();
  for (std::size_t r = 0; r < R; ++r) {
    auto j = to_json(parts[r]);
    j["subsample"] = r + 1;
    per.push_back(std::move(j));
    for (const auto& msg : parts[r].warnings) {
      est.warnings.push_back("subsample " + std::to_string(r + 1) + ": " + msg);
    }
  }
  return est;
}

}  // namespace gce
