#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gce/contrast.hpp"
#include "gce/dataset.hpp"

namespace fixtures {

// Two outcomes: ordinal with 3 levels (heavy ties) and real rounded to one
// decimal (some ties). One individual and one cluster covariate.
inline gce::OutcomeSchema two_outcome_schema(std::size_t p_x = 1, std::size_t p_c = 1) {
  gce::OutcomeSchema s;
  s.outcomes = {{gce::OutcomeKind::Ordinal, {"lo", "mid", "hi"}}, {gce::OutcomeKind::Real, {}}};
  s.p_x = p_x;
  s.p_c = p_c;
  return s;
}

struct RandomTrialSpec {
  std::size_t m = 6;
  int n_min = 1;
  int n_max = 4;
  std::size_t treated = 0;  // 0: Bernoulli(½) with at least one per arm
  double pi = 0.5;
  std::size_t p_x = 1;
  std::size_t p_c = 1;
  bool size_effect = true;  // outcomes drift with cluster size
};

inline gce::TrialDataset random_trial(const RandomTrialSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(spec.n_min, spec.n_max);
  std::uniform_int_distribution<int> level(0, 2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<int> arms(spec.m, 0);
  if (spec.treated > 0) {
    std::fill(arms.begin(), arms.begin() + static_cast<long>(spec.treated), 1);
    std::shuffle(arms.begin(), arms.end(), rng);
  } else {
    do {
      for (auto& a : arms) a = coin(rng) ? 1 : 0;
    } while (std::count(arms.begin(), arms.end(), 1) == 0 ||
             std::count(arms.begin(), arms.end(), 0) == 0);
  }

  std::vector<gce::ClusterRecord> clusters;
  for (std::size_t i = 0; i < spec.m; ++i) {
    gce::ClusterRecord c;
    c.id = "k" + std::to_string(i);
    c.treatment = arms[i];
    const int n = size(rng);
    for (std::size_t p = 0; p < spec.p_c; ++p) c.c.push_back(std::round(z(rng) * 10.0) / 10.0);
    for (int j = 0; j < n; ++j) {
      gce::IndividualRecord ind;
      const double shift = (spec.size_effect ? 0.2 * n : 0.0) + 0.5 * arms[i];
      int lv = level(rng) + (z(rng) + shift > 1.2 ? 1 : 0);
      ind.outcomes = {static_cast<double>(std::min(lv, 2)),
                      std::round((z(rng) + shift) * 10.0) / 10.0};
      for (std::size_t p = 0; p < spec.p_x; ++p) ind.x.push_back(std::round(z(rng) * 10.0) / 10.0);
      c.individuals.push_back(std::move(ind));
    }
    clusters.push_back(std::move(c));
  }
  return gce::TrialDataset(std::move(clusters), two_outcome_schema(spec.p_x, spec.p_c), spec.pi);
}

inline gce::TrialDataset with_constant_size(const gce::TrialDataset& d, int n) {
  std::vector<gce::ClusterRecord> cs = d.clusters();
  for (auto& c : cs) {
    while (static_cast<int>(c.individuals.size()) < n) c.individuals.push_back(c.individuals.front());
    c.individuals.resize(static_cast<std::size_t>(n));
  }
  return gce::TrialDataset(std::move(cs), d.schema(), d.pi());
}

inline gce::ContrastSpec tie_inclusive_first() {
  gce::DimensionWiseSpec d;
  d.rules = {gce::rule::TieInclusiveWin{}, gce::rule::TieInclusiveWin{}};
  d.weights = {1.0, 0.0};
  return {d, 0.0};
}

inline gce::ContrastSpec half_half() {
  gce::DimensionWiseSpec d;
  d.rules = {gce::rule::TieInclusiveWin{}, gce::rule::StrictGreater{}};
  d.weights = {0.5, 0.5};
  return {d, 0.0};
}

inline gce::ContrastSpec prioritized_two() {
  gce::PrioritizedSpec p;
  p.levels = {{0, {gce::Comparison::Op::Greater, 0.0}, {gce::Comparison::Op::Equal, 0.0}},
              {1, {gce::Comparison::Op::Greater, 0.0}, {gce::Comparison::Op::Equal, 0.0}}};
  return {p, 0.0};
}

inline gce::ContrastSpec heaviside_real() {
  gce::DimensionWiseSpec d;
  d.rules = {gce::rule::TieInclusiveWin{}, gce::rule::Heaviside{}};
  d.weights = {0.0, 1.0};
  return {d, 0.0};
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace fixtures
