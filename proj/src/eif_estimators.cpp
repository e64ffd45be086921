#include "gce/eif_estimators.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "gce/error.hpp"
#include "gce/rng.hpp"

namespace gce {

ZetaTable ZetaTable::constant(std::size_t m, double c) {
  ZetaTable z(m);
  std::fill(z.ik1.begin(), z.ik1.end(), c);
  std::fill(z.ki1.begin(), z.ki1.end(), c);
  std::fill(z.ik0.begin(), z.ik0.end(), c);
  std::fill(z.ki0.begin(), z.ki0.end(), c);
  return z;
}

PairKernel eff_kernel(const TrialDataset& data, const ContrastTable& table, const ZetaTable& zeta,
                      Target target) {
  const std::size_t m = data.m();
  if (zeta.m != m || table.m != m) throw ConfigError("nuisance table does not match the data");
  const double ipw = 1.0 / (data.pi() * (1.0 - data.pi()));
  PairKernel k(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ci = data.cluster(i);
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& cj = data.cluster(j);
      const std::size_t p = pair_index(i, j, m);
      double h1 = zeta.ik1[p] + zeta.ki1[p];
      double h0 = zeta.ik0[p] + zeta.ki0[p];
      if (ci.treatment == 1 && cj.treatment == 0) {
        h1 += ipw * (table.fwd[p] - zeta.ik1[p]);
        h0 += ipw * (table.bwd[p] - zeta.ki0[p]);
      } else if (ci.treatment == 0 && cj.treatment == 1) {
        h1 += ipw * (table.bwd[p] - zeta.ki1[p]);
        h0 += ipw * (table.fwd[p] - zeta.ik0[p]);
      }
      const double n = target == Target::I
                           ? static_cast<double>(ci.size()) * static_cast<double>(cj.size())
                           : 1.0;
      k.h1[p] = n * (0.5 * h1);
      k.h0[p] = n * (0.5 * h0);
      k.d1[p] = n;
      k.d0[p] = n;
    }
  }
  return k;
}

std::size_t PairPartition::fold_size(std::size_t s) const {
  return static_cast<std::size_t>(
      std::count(fold_of_cluster.begin(), fold_of_cluster.end(), s));
}

PairPartition partition_from_folds(std::vector<std::size_t> fold_of_cluster, std::size_t K) {
  PairPartition pp;
  pp.m = fold_of_cluster.size();
  pp.K = K;
  pp.fold_of_cluster = std::move(fold_of_cluster);
  for (std::size_t f : pp.fold_of_cluster) {
    if (f >= K) throw ConfigError("fold id out of range");
  }
  // cell id for folds (s1 ≤ s2), row-major over the upper triangle
  auto cell_id = [K](std::size_t s1, std::size_t s2) { return s1 * (2 * K - s1 + 1) / 2 + (s2 - s1); };
  for (std::size_t s1 = 0; s1 < K; ++s1) {
    for (std::size_t s2 = s1; s2 < K; ++s2) {
      PairCell c;
      c.s1 = s1;
      c.s2 = s2;
      for (std::size_t i = 0; i < pp.m; ++i) {
        const std::size_t f = pp.fold_of_cluster[i];
        if (f != s1 && f != s2) c.training.push_back(i);
      }
      pp.cells.push_back(std::move(c));
    }
  }
  pp.cell_of_pair.assign(pair_count(pp.m), 0);
  for (std::size_t i = 0; i < pp.m; ++i) {
    for (std::size_t k = i + 1; k < pp.m; ++k) {
      const std::size_t a = std::min(pp.fold_of_cluster[i], pp.fold_of_cluster[k]);
      const std::size_t b = std::max(pp.fold_of_cluster[i], pp.fold_of_cluster[k]);
      const std::size_t id = cell_id(a, b);
      pp.cells[id].pairs.emplace_back(i, k);
      pp.cell_of_pair[pair_index(i, k, pp.m)] = static_cast<std::uint32_t>(id);
    }
  }
  return pp;
}

namespace {

void check_k(std::size_t m, std::size_t K) {
  if (K < 2 || 2 * K > m) {
    throw ConfigError("K = " + std::to_string(K) + " folds is out of range for m = " +
                      std::to_string(m) + " clusters (need 2 <= K <= m/2)");
  }
}

}  // namespace

PairPartition partition_from_order(std::span<const std::size_t> order, std::size_t K) {
  const std::size_t m = order.size();
  check_k(m, K);
  std::vector<std::size_t> fold(m, 0);
  const std::size_t base = m / K, extra = m % K;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < K; ++s) {
    const std::size_t size = base + (s < extra ? 1 : 0);
    for (std::size_t q = 0; q < size; ++q) {
      const std::size_t c = order[pos++];
      if (c >= m) throw ConfigError("fold order refers to a cluster out of range");
      fold[c] = s;
    }
  }
  return partition_from_folds(std::move(fold), K);
}

PairPartition build_pair_partition(std::size_t m, std::size_t K, std::uint64_t seed) {
  check_k(m, K);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Stream rng{seed, 0x666f6c64ULL};
  std::shuffle(order.begin(), order.end(), rng);
  auto pp = partition_from_order(order, K);
  pp.seed = seed;
  return pp;
}

PairPartition build_pair_partition(const TrialDataset& data, std::size_t K, std::uint64_t seed,
                                   bool stratified) {
  if (!stratified) return build_pair_partition(data.m(), K, seed);
  const std::size_t m = data.m();
  check_k(m, K);
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < m; ++i) (data.cluster(i).treatment == 1 ? treated : control).push_back(i);
  Stream rng{seed, 0x666f6c64ULL};
  std::shuffle(treated.begin(), treated.end(), rng);
  std::shuffle(control.begin(), control.end(), rng);
  std::vector<std::size_t> fold(m);
  std::size_t pos = 0;
  for (std::size_t c : treated) fold[c] = pos++ % K;
  for (std::size_t c : control) fold[c] = pos++ % K;
  auto pp = partition_from_folds(std::move(fold), K);
  pp.seed = seed;
  pp.stratified = true;
  return pp;
}

void check_feasibility(const PairPartition& partition, const TrialDataset& data) {
  for (const auto& cell : partition.cells) {
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t c : cell.training) (data.cluster(c).treatment == 1 ? n1 : n0)++;
    if (n1 < 2 || n0 < 2) {
      throw FoldFeasibilityError("cell (" + std::to_string(cell.s1 + 1) + "," +
                                 std::to_string(cell.s2 + 1) + ") trains on " + std::to_string(n1) +
                                 " treated and " + std::to_string(n0) +
                                 " control clusters; at least 2 per arm are required");
    }
  }
}

namespace {

using ArmFeatures = std::array<Eigen::MatrixXd, 2>;

std::vector<ArmFeatures> all_features(const TrialDataset& data, const FeatureRecipe& recipe) {
  std::vector<ArmFeatures> out(data.m());
  for (std::size_t i = 0; i < data.m(); ++i) {
    out[i][0] = cluster_features(data.cluster(i), 0, recipe);
    out[i][1] = cluster_features(data.cluster(i), 1, recipe);
  }
  return out;
}

void impute_pair(const NuisanceModel& model, const std::vector<ArmFeatures>& f, std::size_t i,
                 std::size_t k, ZetaTable& z) {
  const std::size_t p = pair_index(i, k, z.m);
  z.ik1[p] = predict_zeta(model, f[i][1], f[k][0]);
  z.ki1[p] = predict_zeta(model, f[k][1], f[i][0]);
  z.ik0[p] = predict_zeta(model, f[i][0], f[k][1]);
  z.ki0[p] = predict_zeta(model, f[k][0], f[i][1]);
}

nlohmann::json model_record(const NuisanceModel& model) {
  auto j = model.describe();
  j["warnings"] = model.warnings;
  return j;
}

}  // namespace

NuisanceFit fit_mr_nuisance(const TrialDataset& data, const Contrast& w, const Learner& learner,
                            std::uint64_t seed, Parallelism par) {
  const FeatureRecipe recipe{data.p_x(), data.p_c()};
  const auto pairs = cross_arm_pairs(data);
  const auto rows = build_pair_training_set(data, w, pairs);
  const auto model = learner.fit(rows, {link_for(w.range()), w.range(), seed});
  const auto feats = all_features(data, recipe);
  NuisanceFit fit;
  fit.zeta = ZetaTable(data.m());
  parallel_for(data.m(), par, [&](std::size_t i) {
    for (std::size_t k = i + 1; k < data.m(); ++k) impute_pair(*model, feats, i, k, fit.zeta);
  });
  fit.models.push_back(model_record(*model));
  fit.warnings = model->warnings;
  return fit;
}

NuisanceFit fit_dml_nuisance(const TrialDataset& data, const Contrast& w, const DmlConfig& cfg,
                             Parallelism par) {
  const BoostedLearner boosted;
  return fit_dml_nuisance(data, w, build_pair_partition(data, cfg.K, cfg.seed, cfg.stratified),
                          cfg.learner ? *cfg.learner : boosted, cfg.seed, par);
}

NuisanceFit fit_dml_nuisance(const TrialDataset& data, const Contrast& w, PairPartition partition,
                             const Learner& learner, std::uint64_t seed, Parallelism par) {
  if (partition.m != data.m()) throw ConfigError("partition does not match the data");
  check_feasibility(partition, data);
  const FeatureRecipe recipe{data.p_x(), data.p_c()};
  const auto feats = all_features(data, recipe);
  const Link link = link_for(w.range());

  NuisanceFit fit;
  fit.zeta = ZetaTable(data.m());
  std::vector<nlohmann::json> records(partition.cells.size());
  std::vector<std::vector<std::string>> warnings(partition.cells.size());
  parallel_for(partition.cells.size(), par, [&](std::size_t c) {
    const auto& cell = partition.cells[c];
    const auto rows = build_pair_training_set(data, w, cross_arm_pairs(data, cell.training));
    const auto model = learner.fit(rows, {link, w.range(), derive_key({seed, c, 0x63656c6cULL})});
    for (const auto& [i, k] : cell.pairs) impute_pair(*model, feats, i, k, fit.zeta);
    records[c] = model_record(*model);
    records[c]["cell"] = {cell.s1 + 1, cell.s2 + 1};
    records[c]["training_clusters"] = cell.training.size();
    records[c]["training_rows"] = rows.rows();
    records[c]["pairs"] = cell.pairs.size();
    for (const auto& msg : model->warnings) {
      warnings[c].push_back("cell (" + std::to_string(cell.s1 + 1) + "," +
                            std::to_string(cell.s2 + 1) + "): " + msg);
    }
  });
  for (auto& r : records) fit.models.push_back(std::move(r));
  for (auto& ws : warnings) fit.warnings.insert(fit.warnings.end(), ws.begin(), ws.end());
  fit.partition = std::move(partition);
  return fit;
}

GceEstimate estimate_eff(const TrialDataset& data, const Contrast& w, Target target,
                         const ZetaTable& zeta, EstimatorKind kind, const EstimateOptions& options) {
  if (data.arm_count(1) == 0 || data.arm_count(0) == 0) {
    throw DegenerateDesignError("both arms need at least one cluster");
  }
  const auto table = contrast_table(data, w, options.par);
  auto sol = solve_ustat(eff_kernel(data, table, zeta, target), options.par);
  return assemble_estimate(std::move(sol), target, kind, w.range(), options);
}

GceEstimate estimate_eff(const TrialDataset& data, const Contrast& w, Target target,
                         const NuisanceFit& fit, EstimatorKind kind,
                         const EstimateOptions& options) {
  auto est = estimate_eff(data, w, target, fit.zeta, kind, options);
  est.warnings.insert(est.warnings.end(), fit.warnings.begin(), fit.warnings.end());
  auto& nd = est.diagnostics["nuisance"];
  nd["link"] = to_string(link_for(w.range()));
  nd["models"] = fit.models;
  if (fit.partition) {
    const auto& pp = *fit.partition;
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < pp.K; ++s) sizes.push_back(pp.fold_size(s));
    nd["partition"] = {{"K", pp.K},
                       {"seed", pp.seed},
                       {"stratified", pp.stratified},
                       {"fold_sizes", sizes},
                       {"cells", pp.cells.size()}};
  }
  return est;
}

GceEstimate estimate_mr(const TrialDataset& data, const Contrast& w, Target target,
                        const EstimateOptions& options, const Learner* learner) {
  const PimLearner pim;
  const auto fit = fit_mr_nuisance(data, w, learner ? *learner : pim, 0, options.par);
  return estimate_eff(data, w, target, fit, EstimatorKind::MR, options);
}

GceEstimate estimate_dml(const TrialDataset& data, const Contrast& w, Target target,
                         const DmlConfig& cfg, const EstimateOptions& options) {
  const auto fit = fit_dml_nuisance(data, w, cfg, options.par);
  return estimate_eff(data, w, target, fit, EstimatorKind::DML, options);
}

}  // namespace gce
