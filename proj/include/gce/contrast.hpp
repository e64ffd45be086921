#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "gce/dataset.hpp"

namespace gce {

enum class Direction { HigherBetter, LowerBetter };

/// Closed interval a contrast maps into. Infinite bounds are allowed.
struct Range {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x >= lower && x <= upper; }
  bool within_unit_interval() const { return lower >= 0.0 && upper <= 1.0; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

// Single-outcome comparison rules w_q(u, v).
namespace rule {

/// 1(u > v)
struct StrictGreater {};

/// 1(u > v) + 0.5·1(u = v) − 1(u < v)
struct Heaviside {};

/// 1(u > v) + 0.5·1(u = v)
struct TieInclusiveWin {};

/// Win (1) when u beats v by more than `margin` in the favourable direction,
/// `tie` when |u − v| ≤ margin, `loss` otherwise.
struct ThresholdWin {
  double margin = 0.0;
  Direction direction = Direction::HigherBetter;
  double loss = 0.0;
  double tie = 0.0;
};

/// u − v, numeric outcomes only.
struct Difference {};

}  // namespace rule

using OutcomeRule = std::variant<rule::StrictGreater, rule::Heaviside, rule::TieInclusiveWin,
                                 rule::ThresholdWin, rule::Difference>;

double eval_rule(const OutcomeRule& r, double u, double v);
Range rule_range(const OutcomeRule& r);

/// Predicate used by prioritized levels.
struct Comparison {
  enum class Op { Greater, Less, Equal, Within };
  Op op = Op::Greater;
  double margin = 0.0;

  bool operator()(double u, double v) const;
  bool symmetric() const { return op == Op::Equal || op == Op::Within; }
};

/// One level of a hierarchical comparison: a win on this outcome decides the
/// pair, a tie passes to the next level, anything else is a loss (0).
struct PriorityLevel {
  std::size_t outcome = 0;
  Comparison win{Comparison::Op::Greater, 0.0};
  Comparison tie{Comparison::Op::Equal, 0.0};
};

struct DimensionWiseSpec {
  std::vector<OutcomeRule> rules;
  std::vector<double> weights;
};

struct PrioritizedSpec {
  std::vector<PriorityLevel> levels;
};

/// w = 1 when u Pareto-dominates v under the per-outcome directions.
struct ParetoSpec {
  std::vector<Direction> directions;
};

struct ContrastSpec {
  std::variant<DimensionWiseSpec, PrioritizedSpec, ParetoSpec> form;
  /// Value of a full tie for prioritized and Pareto contrasts.
  double tie_value = 0.0;
};

/// A contrast spec checked against an outcome schema. Construction is the
/// only place rule/type mismatches are reported.
class Contrast {
 public:
  Contrast(ContrastSpec spec, const OutcomeSchema& schema);

  double operator()(std::span<const double> u, std::span<const double> v) const;

  const ContrastSpec& spec() const { return spec_; }
  Range range() const { return range_; }
  std::size_t q() const { return q_; }

 private:
  ContrastSpec spec_;
  Range range_;
  std::size_t q_ = 0;
};

inline double eval_contrast(const Contrast& w, std::span<const double> u,
                            std::span<const double> v) {
  return w(u, v);
}

/// (N_i N_k)^{-1} Σ_j Σ_l w(Y_ij, Y_kl)
double cluster_pair_average(const Contrast& w, const ClusterRecord& winner,
                            const ClusterRecord& loser);

/// Σ_j Σ_l w(Y_ij, Y_kl), without the size normalization.
double cluster_pair_sum(const Contrast& w, const ClusterRecord& winner, const ClusterRecord& loser);

}  // namespace gce
