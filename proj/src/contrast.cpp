#include "gce/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gce/error.hpp"

namespace gce {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool better(Direction d, double u, double v) {
  return d == Direction::HigherBetter ? u > v : u < v;
}

std::string outcome_name(std::size_t q) { return "outcome_" + std::to_string(q + 1); }

void require_outcome(std::size_t q, const OutcomeSchema& schema) {
  if (q >= schema.q()) {
    throw ContrastCompileError("contrast refers to " + outcome_name(q) + " but the schema has " +
                               std::to_string(schema.q()) + " outcomes");
  }
}

void require_ordered(std::size_t q, const OutcomeSchema& schema, const char* what) {
  require_outcome(q, schema);
  if (!schema.outcomes[q].ordered()) {
    throw ContrastCompileError(std::string(what) + " needs an order but " + outcome_name(q) +
                               " is unordered categorical");
  }
}

void check_rule(const OutcomeRule& r, std::size_t q, const OutcomeSchema& schema) {
  std::visit(overloaded{
                 [&](const rule::Difference&) {
                   require_outcome(q, schema);
                   const auto kind = schema.outcomes[q].kind;
                   if (kind == OutcomeKind::Categorical || kind == OutcomeKind::Ordinal) {
                     throw ContrastCompileError("difference rule needs a numeric outcome; " +
                                                outcome_name(q) + " is " + to_string(kind));
                   }
                 },
                 [&](const rule::ThresholdWin& t) {
                   require_ordered(q, schema, "threshold rule");
                   if (!(t.margin >= 0.0) || !std::isfinite(t.margin)) {
                     throw ContrastCompileError("threshold margin must be finite and >= 0");
                   }
                 },
                 [&](const auto&) { require_ordered(q, schema, "win rule"); },
             },
             r);
}

}  // namespace

double eval_rule(const OutcomeRule& r, double u, double v) {
  return std::visit(
      overloaded{
          [&](const rule::StrictGreater&) { return u > v ? 1.0 : 0.0; },
          [&](const rule::Heaviside&) { return u > v ? 1.0 : (u == v ? 0.5 : -1.0); },
          [&](const rule::TieInclusiveWin&) { return u > v ? 1.0 : (u == v ? 0.5 : 0.0); },
          [&](const rule::ThresholdWin& t) {
            const double gain = t.direction == Direction::HigherBetter ? u - v : v - u;
            if (gain > t.margin) return 1.0;
            if (std::abs(u - v) <= t.margin) return t.tie;
            return t.loss;
          },
          [&](const rule::Difference&) { return u - v; },
      },
      r);
}

Range rule_range(const OutcomeRule& r) {
  return std::visit(overloaded{
                        [](const rule::StrictGreater&) { return Range{0.0, 1.0}; },
                        [](const rule::Heaviside&) { return Range{-1.0, 1.0}; },
                        [](const rule::TieInclusiveWin&) { return Range{0.0, 1.0}; },
                        [](const rule::ThresholdWin& t) {
                          return Range{std::min({1.0, t.tie, t.loss}),
                                       std::max({1.0, t.tie, t.loss})};
                        },
                        [](const rule::Difference&) { return Range{}; },
                    },
                    r);
}

bool Comparison::operator()(double u, double v) const {
  switch (op) {
    case Op::Greater: return u - v > margin;
    case Op::Less: return v - u > margin;
    case Op::Equal: return u == v;
    case Op::Within: return std::abs(u - v) <= margin;
  }
  return false;
}

Contrast::Contrast(ContrastSpec spec, const OutcomeSchema& schema)
    : spec_(std::move(spec)), q_(schema.q()) {
  if (!std::isfinite(spec_.tie_value)) throw ContrastCompileError("tie_value must be finite");
  std::visit(
      overloaded{
          [&](DimensionWiseSpec& d) {
            if (d.rules.size() != schema.q()) {
              throw ContrastCompileError("dimension-wise contrast needs one rule per outcome (" +
                                         std::to_string(schema.q()) + ")");
            }
            if (d.weights.empty()) d.weights.assign(d.rules.size(), 1.0);
            if (d.weights.size() != d.rules.size()) {
              throw ContrastCompileError("dimension-wise weights must match the rule count");
            }
            double total = 0.0;
            for (double w : d.weights) {
              if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ContrastCompileError("dimension-wise weights must be finite and >= 0");
              }
              total += w;
            }
            if (total <= 0.0) throw ContrastCompileError("dimension-wise weights sum to zero");
            for (double& w : d.weights) w /= total;
            range_ = Range{0.0, 0.0};
            for (std::size_t q = 0; q < d.rules.size(); ++q) {
              check_rule(d.rules[q], q, schema);
              if (d.weights[q] == 0.0) continue;
              const Range r = rule_range(d.rules[q]);
              range_.lower += d.weights[q] * r.lower;
              range_.upper += d.weights[q] * r.upper;
            }
          },
          [&](PrioritizedSpec& p) {
            if (p.levels.empty()) throw ContrastCompileError("prioritized contrast has no levels");
            for (const auto& level : p.levels) {
              require_ordered(level.outcome, schema, "prioritized level");
              if (level.win.symmetric()) {
                throw ContrastCompileError("prioritized win predicate must be 'greater' or 'less'");
              }
              if (!level.tie.symmetric()) {
                throw ContrastCompileError("prioritized tie predicate must be symmetric "
                                           "('equal' or 'within')");
              }
              if (!(level.win.margin >= 0.0) || !(level.tie.margin >= 0.0)) {
                throw ContrastCompileError("prioritized margins must be >= 0");
              }
            }
            range_ = Range{std::min(0.0, spec_.tie_value), std::max(1.0, spec_.tie_value)};
          },
          [&](ParetoSpec& p) {
            if (p.directions.size() != schema.q()) {
              throw ContrastCompileError("Pareto contrast needs one direction per outcome");
            }
            for (std::size_t q = 0; q < schema.q(); ++q) require_ordered(q, schema, "Pareto order");
            range_ = Range{std::min(0.0, spec_.tie_value), std::max(1.0, spec_.tie_value)};
          },
      },
      spec_.form);
}

double Contrast::operator()(std::span<const double> u, std::span<const double> v) const {
  return std::visit(
      overloaded{
          [&](const DimensionWiseSpec& d) {
            double s = 0.0;
            for (std::size_t q = 0; q < d.rules.size(); ++q) {
              if (d.weights[q] != 0.0) s += d.weights[q] * eval_rule(d.rules[q], u[q], v[q]);
            }
            return s;
          },
          [&](const PrioritizedSpec& p) {
            for (const auto& level : p.levels) {
              const double a = u[level.outcome];
              const double b = v[level.outcome];
              if (level.win(a, b)) return 1.0;
              if (!level.tie(a, b)) return 0.0;
            }
            return spec_.tie_value;
          },
          [&](const ParetoSpec& p) {
            bool strictly_better = false;
            bool all_equal = true;
            for (std::size_t q = 0; q < p.directions.size(); ++q) {
              if (u[q] == v[q]) continue;
              all_equal = false;
              if (better(p.directions[q], u[q], v[q])) {
                strictly_better = true;
              } else {
                return 0.0;
              }
            }
            if (all_equal) return spec_.tie_value;
            return strictly_better ? 1.0 : 0.0;
          },
      },
      spec_.form);
}

double cluster_pair_sum(const Contrast& w, const ClusterRecord& winner, const ClusterRecord& loser) {
  double s = 0.0;
  for (const auto& a : winner.individuals) {
    for (const auto& b : loser.individuals) s += w(a.outcomes, b.outcomes);
  }
  return s;
}

double cluster_pair_average(const Contrast& w, const ClusterRecord& winner,
                            const ClusterRecord& loser) {
  return cluster_pair_sum(w, winner, loser) /
         (static_cast<double>(winner.size()) * static_cast<double>(loser.size()));
}

}  // namespace gce
