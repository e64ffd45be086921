#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"

namespace gce {

enum class Link { Logit, Identity };

const char* to_string(Link link);

/// Logit when the contrast maps into [0,1], identity otherwise.
Link link_for(const Range& range);

double inverse_link(Link link, double score);

/// Column layout of U_ij = (A_i, X_ij, X̄_i, C_i, N_i).
struct FeatureRecipe {
  std::size_t p_x = 0;
  std::size_t p_c = 0;

  std::size_t dim() const { return 2 + 2 * p_x + p_c; }
  std::vector<std::string> names() const;
};

/// One U row per individual, with the treatment column set to `arm`.
Eigen::MatrixXd cluster_features(const ClusterRecord& c, int arm, const FeatureRecipe& recipe);

using OrderedPair = std::pair<std::size_t, std::size_t>;

/// All (j,l) rows of one ordered cluster pair (winner i, loser k).
struct PairBlock {
  std::size_t winner = 0;
  std::size_t loser = 0;
  std::size_t first_row = 0;
  std::size_t winner_units = 0;  // offset of the winner's individuals in `units`
  std::size_t loser_units = 0;
  std::size_t n_winner = 0;
  std::size_t n_loser = 0;
};

/// Individual-pair training rows. Features are stored once per individual;
/// row r pairs unit winner_unit[r] against unit loser_unit[r].
struct PairTrainingSet {
  FeatureRecipe recipe;
  Eigen::MatrixXd units;
  std::vector<PairBlock> blocks;
  std::vector<std::size_t> winner_unit, loser_unit;
  std::vector<double> labels;

  std::size_t rows() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(units.cols()); }

  /// U_ij − U_kl per row (the PIM design).
  Eigen::MatrixXd difference_features() const;
  /// (U_ij, U_kl) per row (the boosted-learner input).
  Eigen::MatrixXd concatenated_features() const;

  /// Generic rows, each its own 1×1 block.
  static PairTrainingSet from_rows(const Eigen::MatrixXd& u_winner, const Eigen::MatrixXd& u_loser,
                                   std::vector<double> labels);
};

/// Ordered cross-arm pairs (i,k), i ≠ k, among the given clusters, in
/// index order.
std::vector<OrderedPair> cross_arm_pairs(const TrialDataset& data,
                                         std::span<const std::size_t> clusters);
std::vector<OrderedPair> cross_arm_pairs(const TrialDataset& data);

/// Throws ConfigError on an empty pair set or a same-arm pair.
PairTrainingSet build_pair_training_set(const TrialDataset& data, const Contrast& w,
                                        std::span<const OrderedPair> pairs);

/// Fitted predictor of the pairwise contrast on the link scale.
class NuisanceModel {
 public:
  NuisanceModel(Link link, Range range) : link_(link), range_(range) {}
  virtual ~NuisanceModel() = default;

  Link link() const { return link_; }
  Range range() const { return range_; }

  /// Link-scale scores for every (winner row, loser row) combination.
  virtual Eigen::MatrixXd scores(const Eigen::MatrixXd& winners,
                                 const Eigen::MatrixXd& losers) const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual bool converged() const { return true; }

  /// g⁻¹(score) clamped to (ε, 1−ε) under logit or to the range otherwise.
  double response(double score) const;

  std::vector<std::string> warnings;

 private:
  Link link_;
  Range range_;
};

struct LearnerContext {
  Link link = Link::Logit;
  Range range;
  std::uint64_t seed = 0;
};

/// Fit/predict contract for ζ learners.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual nlohmann::json config() const = 0;
  virtual std::unique_ptr<NuisanceModel> fit(const PairTrainingSet& rows,
                                             const LearnerContext& ctx) const = 0;
};

struct PimConfig {
  int max_iter = 100;
  double tol = 1e-8;
  double label_clamp = 1e-6;
};

class PimModel final : public NuisanceModel {
 public:
  PimModel(Link link, Range range) : NuisanceModel(link, range) {}

  Eigen::MatrixXd scores(const Eigen::MatrixXd& winners,
                         const Eigen::MatrixXd& losers) const override;
  nlohmann::json describe() const override;
  bool converged() const override { return converged_; }

  Eigen::VectorXd theta;
  Eigen::MatrixXd information;  // XᵀWX at the last iterate
  int iterations = 0;
  bool converged_ = false;
};

/// Working Bernoulli quasi-likelihood (logit) or least squares (identity) on
/// U_ij − U_kl without intercept, by IRLS with step halving.
PimModel fit_pim(const PairTrainingSet& rows, Link link, Range range, const PimConfig& cfg = {});

struct BoostConfig {
  int trees = 200;
  double shrinkage = 0.1;
  double subsample = 0.8;
  double l2 = 1.0;
  double label_clamp = 1e-6;
};

struct Stump {
  int side = 0;  // 0: winner features, 1: loser features
  int feature = 0;
  double threshold = 0.0;
  double left = 0.0;  // value for x ≤ threshold, shrinkage included
  double right = 0.0;

  double operator()(double x) const { return x <= threshold ? left : right; }
};

class BoostedModel final : public NuisanceModel {
 public:
  BoostedModel(Link link, Range range) : NuisanceModel(link, range) {}

  Eigen::MatrixXd scores(const Eigen::MatrixXd& winners,
                         const Eigen::MatrixXd& losers) const override;
  nlohmann::json describe() const override;

  /// Additive part contributed by one side for a single feature row.
  double side_score(int side, std::span<const double> u) const;

  double base = 0.0;
  std::vector<Stump> stumps;
  BoostConfig config;
};

/// Gradient-boosted depth-1 trees on (U_ij, U_kl): logistic loss under the
/// logit link, squared error under identity. Row subsampling draws whole
/// cluster-pair blocks. Deterministic given the seed.
BoostedModel fit_boosted(const PairTrainingSet& rows, Link link, Range range,
                         const BoostConfig& cfg, std::uint64_t seed);

class PimLearner final : public Learner {
 public:
  explicit PimLearner(PimConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "pim"; }
  nlohmann::json config() const override;
  std::unique_ptr<NuisanceModel> fit(const PairTrainingSet& rows,
                                     const LearnerContext& ctx) const override;

 private:
  PimConfig cfg_;
};

class BoostedLearner final : public Learner {
 public:
  explicit BoostedLearner(BoostConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "boosted"; }
  nlohmann::json config() const override;
  std::unique_ptr<NuisanceModel> fit(const PairTrainingSet& rows,
                                     const LearnerContext& ctx) const override;

 private:
  BoostConfig cfg_;
};

/// ζ̂_{ik,a}: mean over (j,l) of g⁻¹(score) with the winner's treatment
/// feature set to a and the loser's to 1−a.
double predict_zeta(const NuisanceModel& model, const ClusterRecord& winner,
                    const ClusterRecord& loser, int a, const FeatureRecipe& recipe);

/// Same, from precomputed feature matrices.
double predict_zeta(const NuisanceModel& model, const Eigen::MatrixXd& winner_features,
                    const Eigen::MatrixXd& loser_features);

}  // namespace gce
