#include "gce/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <Eigen/QR>

#include "gce/error.hpp"

namespace gce {

const char* to_string(Link link) { return link == Link::Logit ? "logit" : "identity"; }

Link link_for(const Range& range) {
  return range.within_unit_interval() ? Link::Logit : Link::Identity;
}

double inverse_link(Link link, double score) {
  if (link == Link::Identity) return score;
  return score >= 0.0 ? 1.0 / (1.0 + std::exp(-score)) : std::exp(score) / (1.0 + std::exp(score));
}

std::vector<std::string> FeatureRecipe::names() const {
  std::vector<std::string> out{"A"};
  for (std::size_t k = 0; k < p_x; ++k) out.push_back("x" + std::to_string(k + 1));
  for (std::size_t k = 0; k < p_x; ++k) out.push_back("xbar" + std::to_string(k + 1));
  for (std::size_t k = 0; k < p_c; ++k) out.push_back("c" + std::to_string(k + 1));
  out.push_back("N");
  return out;
}

Eigen::MatrixXd cluster_features(const ClusterRecord& c, int arm, const FeatureRecipe& recipe) {
  const auto xbar = cluster_summary_covariates(c);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(recipe.dim()));
  for (std::size_t j = 0; j < c.size(); ++j) {
    Eigen::Index col = 0;
    const auto r = static_cast<Eigen::Index>(j);
    u(r, col++) = arm;
    for (std::size_t k = 0; k < recipe.p_x; ++k) u(r, col++) = c.individuals[j].x[k];
    for (std::size_t k = 0; k < recipe.p_x; ++k) u(r, col++) = xbar[k];
    for (std::size_t k = 0; k < recipe.p_c; ++k) u(r, col++) = c.c[k];
    u(r, col++) = static_cast<double>(c.size());
  }
  return u;
}

Eigen::MatrixXd PairTrainingSet::difference_features() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows()), units.cols());
  for (std::size_t r = 0; r < rows(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) =
        units.row(static_cast<Eigen::Index>(winner_unit[r])) -
        units.row(static_cast<Eigen::Index>(loser_unit[r]));
  }
  return x;
}

Eigen::MatrixXd PairTrainingSet::concatenated_features() const {
  const Eigen::Index d = units.cols();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows()), 2 * d);
  for (std::size_t r = 0; r < rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    x.row(i).head(d) = units.row(static_cast<Eigen::Index>(winner_unit[r]));
    x.row(i).tail(d) = units.row(static_cast<Eigen::Index>(loser_unit[r]));
  }
  return x;
}

PairTrainingSet PairTrainingSet::from_rows(const Eigen::MatrixXd& u_winner,
                                           const Eigen::MatrixXd& u_loser,
                                           std::vector<double> labels) {
  if (u_winner.rows() != u_loser.rows() || u_winner.cols() != u_loser.cols() ||
      static_cast<std::size_t>(u_winner.rows()) != labels.size()) {
    throw ConfigError("pair rows: winner, loser and label counts differ");
  }
  PairTrainingSet s;
  const auto n = static_cast<std::size_t>(u_winner.rows());
  s.units.resize(2 * u_winner.rows(), u_winner.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    s.units.row(2 * i) = u_winner.row(i);
    s.units.row(2 * i + 1) = u_loser.row(i);
    s.winner_unit.push_back(2 * r);
    s.loser_unit.push_back(2 * r + 1);
    s.blocks.push_back({r, r, r, 2 * r, 2 * r + 1, 1, 1});
  }
  s.labels = std::move(labels);
  return s;
}

std::vector<OrderedPair> cross_arm_pairs(const TrialDataset& data,
                                         std::span<const std::size_t> clusters) {
  std::vector<OrderedPair> out;
  for (std::size_t i : clusters) {
    for (std::size_t k : clusters) {
      if (i != k && data.cluster(i).treatment != data.cluster(k).treatment) out.emplace_back(i, k);
    }
  }
  return out;
}

std::vector<OrderedPair> cross_arm_pairs(const TrialDataset& data) {
  std::vector<std::size_t> all(data.m());
  std::iota(all.begin(), all.end(), 0);
  return cross_arm_pairs(data, all);
}

PairTrainingSet build_pair_training_set(const TrialDataset& data, const Contrast& w,
                                        std::span<const OrderedPair> pairs) {
  if (pairs.empty()) throw ConfigError("nuisance training needs at least one cluster pair");
  PairTrainingSet s;
  s.recipe = {data.p_x(), data.p_c()};
  std::unordered_map<std::size_t, std::size_t> offset;
  std::vector<Eigen::MatrixXd> pieces;
  std::size_t n_units = 0;
  auto unit_offset = [&](std::size_t c) {
    auto it = offset.find(c);
    if (it != offset.end()) return it->second;
    const auto& cl = data.cluster(c);
    pieces.push_back(cluster_features(cl, cl.treatment, s.recipe));
    offset.emplace(c, n_units);
    n_units += cl.size();
    return n_units - cl.size();
  };
  for (const auto& [i, k] : pairs) {
    if (i >= data.m() || k >= data.m() || i == k) throw ConfigError("invalid cluster pair");
    const auto& ci = data.cluster(i);
    const auto& ck = data.cluster(k);
    if (ci.treatment == ck.treatment) {
      throw ConfigError("nuisance training pairs must be cross-arm; clusters " + ci.id + " and " +
                        ck.id + " share an arm");
    }
    PairBlock b{i, k, s.labels.size(), unit_offset(i), unit_offset(k), ci.size(), ck.size()};
    for (std::size_t j = 0; j < ci.size(); ++j) {
      for (std::size_t l = 0; l < ck.size(); ++l) {
        s.winner_unit.push_back(b.winner_units + j);
        s.loser_unit.push_back(b.loser_units + l);
        s.labels.push_back(w(ci.individuals[j].outcomes, ck.individuals[l].outcomes));
      }
    }
    s.blocks.push_back(b);
  }
  s.units.resize(static_cast<Eigen::Index>(n_units), static_cast<Eigen::Index>(s.recipe.dim()));
  Eigen::Index row = 0;
  for (const auto& p : pieces) {
    s.units.middleRows(row, p.rows()) = p;
    row += p.rows();
  }
  return s;
}

double NuisanceModel::response(double score) const {
  constexpr double eps = 1e-6;
  if (link_ == Link::Logit) return std::clamp(inverse_link(Link::Logit, score), eps, 1.0 - eps);
  return std::clamp(score, range_.lower, range_.upper);
}

namespace {

std::vector<double> prepared_labels(const PairTrainingSet& rows, Link link, double clamp) {
  std::vector<double> y = rows.labels;
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericalError("non-finite training label");
  }
  if (link == Link::Logit) {
    for (double& v : y) {
      if (v < 0.0 || v > 1.0) {
        throw ConfigError("logit link needs labels in [0,1]; got " + std::to_string(v));
      }
      v = std::clamp(v, clamp, 1.0 - clamp);
    }
  }
  return y;
}

double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const double e = eta(r);
    const double log1pexp = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    s += y(r) * e - log1pexp;
  }
  return s;
}

}  // namespace

Eigen::MatrixXd PimModel::scores(const Eigen::MatrixXd& winners,
                                 const Eigen::MatrixXd& losers) const {
  const Eigen::VectorXd sw = winners * theta;
  const Eigen::VectorXd sl = losers * theta;
  Eigen::MatrixXd s(winners.rows(), losers.rows());
  for (Eigen::Index j = 0; j < winners.rows(); ++j) {
    for (Eigen::Index l = 0; l < losers.rows(); ++l) s(j, l) = sw(j) - sl(l);
  }
  return s;
}

nlohmann::json PimModel::describe() const {
  return {{"kind", "pim"},
          {"link", to_string(link())},
          {"coefficients", std::vector<double>(theta.data(), theta.data() + theta.size())},
          {"iterations", iterations},
          {"converged", converged_}};
}

PimModel fit_pim(const PairTrainingSet& rows, Link link, Range range, const PimConfig& cfg) {
  const Eigen::Index p = static_cast<Eigen::Index>(rows.dim());
  if (static_cast<Eigen::Index>(rows.rows()) < p + 1) {
    throw ConfigError("PIM fit needs at least " + std::to_string(p + 1) + " rows, got " +
                      std::to_string(rows.rows()));
  }
  const Eigen::MatrixXd x = rows.difference_features();
  const auto yv = prepared_labels(rows, link, cfg.label_clamp);
  const Eigen::Map<const Eigen::VectorXd> y(yv.data(), static_cast<Eigen::Index>(yv.size()));

  PimModel model(link, range);
  model.theta = Eigen::VectorXd::Zero(p);
  if (link == Link::Identity) {
    model.information = x.transpose() * x;
    model.theta = model.information.completeOrthogonalDecomposition().solve(x.transpose() * y);
    model.iterations = 1;
    model.converged_ = true;
    return model;
  }

  double ll = bernoulli_loglik(x * model.theta, y);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::VectorXd eta = x * model.theta;
    Eigen::VectorXd mu(eta.size()), wt(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      mu(r) = inverse_link(Link::Logit, eta(r));
      wt(r) = std::max(mu(r) * (1.0 - mu(r)), 1e-12);
    }
    const Eigen::VectorXd grad = x.transpose() * (y - mu);
    const Eigen::MatrixXd h = x.transpose() * wt.asDiagonal() * x;
    const Eigen::VectorXd delta = h.completeOrthogonalDecomposition().solve(grad);
    double step = 1.0;
    Eigen::VectorXd cand = model.theta + delta;
    double ll_cand = bernoulli_loglik(x * cand, y);
    while (ll_cand < ll - 1e-12 * std::abs(ll) && step > 1e-10) {
      step *= 0.5;
      cand = model.theta + step * delta;
      ll_cand = bernoulli_loglik(x * cand, y);
    }
    model.theta = cand;
    ll = ll_cand;
    model.iterations = it;
    if ((step * delta).cwiseAbs().maxCoeff() < cfg.tol) {
      model.converged_ = true;
      break;
    }
  }
  {
    const Eigen::VectorXd eta = x * model.theta;
    Eigen::VectorXd wt(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      const double mu = inverse_link(Link::Logit, eta(r));
      wt(r) = mu * (1.0 - mu);
    }
    model.information = x.transpose() * wt.asDiagonal() * x;
  }
  if (!model.converged_) {
    model.warnings.push_back("PIM did not converge in " + std::to_string(cfg.max_iter) +
                             " iterations; using the last iterate");
  }
  return model;
}

double BoostedModel::side_score(int side, std::span<const double> u) const {
  double s = 0.0;
  for (const auto& st : stumps) {
    if (st.side == side) s += st(u[static_cast<std::size_t>(st.feature)]);
  }
  return s;
}

Eigen::MatrixXd BoostedModel::scores(const Eigen::MatrixXd& winners,
                                     const Eigen::MatrixXd& losers) const {
  auto side_scores = [&](const Eigen::MatrixXd& u, int side) {
    std::vector<double> out(static_cast<std::size_t>(u.rows()));
    std::vector<double> row(static_cast<std::size_t>(u.cols()));
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      for (Eigen::Index c = 0; c < u.cols(); ++c) row[static_cast<std::size_t>(c)] = u(r, c);
      out[static_cast<std::size_t>(r)] = side_score(side, row);
    }
    return out;
  };
  const auto sw = side_scores(winners, 0);
  const auto sl = side_scores(losers, 1);
  Eigen::MatrixXd s(winners.rows(), losers.rows());
  for (Eigen::Index j = 0; j < winners.rows(); ++j) {
    for (Eigen::Index l = 0; l < losers.rows(); ++l) {
      s(j, l) = base + sw[static_cast<std::size_t>(j)] + sl[static_cast<std::size_t>(l)];
    }
  }
  return s;
}

nlohmann::json BoostedModel::describe() const {
  return {{"kind", "boosted"},
          {"link", to_string(link())},
          {"base_score", base},
          {"trees", stumps.size()},
          {"shrinkage", config.shrinkage},
          {"subsample", config.subsample}};
}

BoostedModel fit_boosted(const PairTrainingSet& rows, Link link, Range range,
                         const BoostConfig& cfg, std::uint64_t seed) {
  if (rows.rows() < 20) {
    throw ConfigError("boosted learner needs at least 20 rows, got " + std::to_string(rows.rows()));
  }
  if (cfg.trees < 0 || !(cfg.shrinkage > 0.0) || !(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) {
    throw ConfigError("boosted learner: trees >= 0, shrinkage > 0, subsample in (0,1] required");
  }
  const auto y = prepared_labels(rows, link, cfg.label_clamp);
  BoostedModel model(link, range);
  model.config = cfg;

  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  model.base = link == Link::Logit ? std::log(ybar / (1.0 - ybar)) : ybar;

  const auto n_units = static_cast<std::size_t>(rows.units.rows());
  const auto d = static_cast<std::size_t>(rows.units.cols());
  std::vector<std::vector<std::uint32_t>> order(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& o = order[f];
    o.resize(n_units);
    std::iota(o.begin(), o.end(), 0u);
    const auto col = static_cast<Eigen::Index>(f);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      return rows.units(a, col) < rows.units(b, col);
    });
  }

  std::vector<double> score[2] = {std::vector<double>(n_units, 0.0),
                                  std::vector<double>(n_units, 0.0)};
  std::vector<double> g_sum[2], h_sum[2], e_side[2];
  for (int s = 0; s < 2; ++s) {
    g_sum[s].resize(n_units);
    h_sum[s].resize(n_units);
    e_side[s].resize(n_units);
  }

  const std::size_t n_blocks = rows.blocks.size();
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n_blocks))));
  std::vector<std::size_t> block_ids(n_blocks);
  std::iota(block_ids.begin(), block_ids.end(), 0);
  std::mt19937_64 rng(seed);

  for (int t = 0; t < cfg.trees; ++t) {
    if (keep < n_blocks) {
      for (std::size_t b = 0; b < keep; ++b) {
        std::uniform_int_distribution<std::size_t> pick(b, n_blocks - 1);
        std::swap(block_ids[b], block_ids[pick(rng)]);
      }
    }
    for (int s = 0; s < 2; ++s) {
      std::fill(g_sum[s].begin(), g_sum[s].end(), 0.0);
      std::fill(h_sum[s].begin(), h_sum[s].end(), 0.0);
    }
    if (link == Link::Logit) {
      // σ(b + s_w + s_l) = 1 / (1 + e^{−b−s_w}·e^{−s_l}); exponents clamped so the product stays finite
      for (std::size_t u = 0; u < n_units; ++u) {
        e_side[0][u] = std::exp(std::clamp(-model.base - score[0][u], -300.0, 300.0));
        e_side[1][u] = std::exp(std::clamp(-score[1][u], -300.0, 300.0));
      }
    }
    double g_tot = 0.0, h_tot = 0.0;
    for (std::size_t bi = 0; bi < keep; ++bi) {
      const auto& blk = rows.blocks[block_ids[bi]];
      const std::size_t end = blk.first_row + blk.n_winner * blk.n_loser;
      for (std::size_t r = blk.first_row; r < end; ++r) {
        const std::size_t uw = rows.winner_unit[r], ul = rows.loser_unit[r];
        double g, h;
        if (link == Link::Logit) {
          const double p = 1.0 / (1.0 + e_side[0][uw] * e_side[1][ul]);
          g = p - y[r];
          h = std::max(p * (1.0 - p), 1e-12);
        } else {
          g = model.base + score[0][uw] + score[1][ul] - y[r];
          h = 1.0;
        }
        g_sum[0][uw] += g;
        h_sum[0][uw] += h;
        g_sum[1][ul] += g;
        h_sum[1][ul] += h;
        g_tot += g;
        h_tot += h;
      }
    }

    const double parent = g_tot * g_tot / (h_tot + cfg.l2);
    double best_gain = 1e-12;
    Stump best;
    bool found = false;
    for (int s = 0; s < 2; ++s) {
      for (std::size_t f = 0; f < d; ++f) {
        const auto col = static_cast<Eigen::Index>(f);
        const auto& o = order[f];
        double gl = 0.0, hl = 0.0;
        for (std::size_t q = 0; q + 1 < n_units; ++q) {
          gl += g_sum[s][o[q]];
          hl += h_sum[s][o[q]];
          const double x0 = rows.units(o[q], col);
          const double x1 = rows.units(o[q + 1], col);
          if (x0 == x1) continue;
          const double gr = g_tot - gl, hr = h_tot - hl;
          const double gain = gl * gl / (hl + cfg.l2) + gr * gr / (hr + cfg.l2) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best.side = s;
            best.feature = static_cast<int>(f);
            best.threshold = 0.5 * (x0 + x1);
            best.left = -cfg.shrinkage * gl / (hl + cfg.l2);
            best.right = -cfg.shrinkage * gr / (hr + cfg.l2);
            found = true;
          }
        }
      }
    }
    if (!found) continue;
    model.stumps.push_back(best);
    const auto col = static_cast<Eigen::Index>(best.feature);
    for (std::size_t u = 0; u < n_units; ++u) {
      score[best.side][u] += best(rows.units(static_cast<Eigen::Index>(u), col));
    }
  }
  return model;
}

nlohmann::json PimLearner::config() const {
  return {{"learner", "pim"}, {"max_iter", cfg_.max_iter}, {"tol", cfg_.tol}};
}

std::unique_ptr<NuisanceModel> PimLearner::fit(const PairTrainingSet& rows,
                                               const LearnerContext& ctx) const {
  return std::make_unique<PimModel>(fit_pim(rows, ctx.link, ctx.range, cfg_));
}

nlohmann::json BoostedLearner::config() const {
  return {{"learner", "boosted"},
          {"trees", cfg_.trees},
          {"shrinkage", cfg_.shrinkage},
          {"subsample", cfg_.subsample},
          {"l2", cfg_.l2}};
}

std::unique_ptr<NuisanceModel> BoostedLearner::fit(const PairTrainingSet& rows,
                                                   const LearnerContext& ctx) const {
  return std::make_unique<BoostedModel>(fit_boosted(rows, ctx.link, ctx.range, cfg_, ctx.seed));
}

double predict_zeta(const NuisanceModel& model, const Eigen::MatrixXd& winner_features,
                    const Eigen::MatrixXd& loser_features) {
  const Eigen::MatrixXd s = model.scores(winner_features, loser_features);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    for (Eigen::Index l = 0; l < s.cols(); ++l) sum += model.response(s(j, l));
  }
  return sum / static_cast<double>(s.size());
}

double predict_zeta(const NuisanceModel& model, const ClusterRecord& winner,
                    const ClusterRecord& loser, int a, const FeatureRecipe& recipe) {
  return predict_zeta(model, cluster_features(winner, a, recipe),
                      cluster_features(loser, 1 - a, recipe));
}

}  // namespace gce
