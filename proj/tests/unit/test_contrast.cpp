#include <doctest.h>

#include "fixtures.hpp"
#include "gce/error.hpp"

using namespace gce;

namespace {

OutcomeSchema reals(std::size_t q) {
  OutcomeSchema s;
  s.outcomes.assign(q, {OutcomeKind::Real, {}});
  return s;
}

ClusterRecord cluster_of(std::vector<double> ys) {
  ClusterRecord c{"c", 1, {}, {}};
  for (double y : ys) c.individuals.push_back({{y}, {}});
  return c;
}

}  // namespace

TEST_CASE("Heaviside rule scores win, tie and loss") {
  const Contrast w({DimensionWiseSpec{{rule::Heaviside{}}, {}}, 0.0}, reals(1));
  const double a[] = {3}, b[] = {1}, c[] = {2};
  CHECK(w(a, b) == 1.0);
  CHECK(w(c, c) == 0.5);
  CHECK(w(b, a) == -1.0);
  CHECK(w.range().lower == -1.0);
  CHECK(w.range().upper == 1.0);
}

TEST_CASE("prioritized rule passes ties to the next level") {
  const Contrast w(fixtures::prioritized_two(), reals(2));
  const double u[] = {2, 5}, v[] = {2, 3};
  CHECK(w(u, v) == 1.0);
  CHECK(w(v, u) == 0.0);
  CHECK(w(u, u) == 0.0);
}

TEST_CASE("Pareto dominance") {
  const Contrast w({ParetoSpec{{Direction::HigherBetter, Direction::HigherBetter,
                                Direction::LowerBetter}},
                    0.0},
                   reals(3));
  const double same[] = {1, 2, 3};
  CHECK(w(same, same) == 0.0);
  const double better[] = {2, 2, 1};
  CHECK(w(better, same) == 1.0);
  const double mixed[] = {2, 1, 3};
  CHECK(w(mixed, same) == 0.0);
}

TEST_CASE("threshold rule respects margin and direction") {
  rule::ThresholdWin t{1.0, Direction::LowerBetter, -1.0, 0.25};
  CHECK(eval_rule(t, 0.0, 2.0) == 1.0);
  CHECK(eval_rule(t, 1.5, 2.0) == 0.25);
  CHECK(eval_rule(t, 4.0, 2.0) == -1.0);
}

TEST_CASE("dimension-wise weights are normalized") {
  const Contrast w({DimensionWiseSpec{{rule::StrictGreater{}, rule::StrictGreater{}}, {2.0, 6.0}},
                    0.0},
                   reals(2));
  const double u[] = {1, 0}, v[] = {0, 0};
  CHECK(w(u, v) == doctest::Approx(0.25));
  CHECK(w.range().upper == doctest::Approx(1.0));
}

TEST_CASE("cluster pair averages enumerate all individual pairs") {
  const Contrast gt({DimensionWiseSpec{{rule::StrictGreater{}}, {}}, 0.0}, reals(1));
  CHECK(cluster_pair_average(gt, cluster_of({1, 3}), cluster_of({2})) == 0.5);
  const Contrast tie({DimensionWiseSpec{{rule::TieInclusiveWin{}}, {}}, 0.0}, reals(1));
  CHECK(cluster_pair_average(tie, cluster_of({4}), cluster_of({4})) == 0.5);
  const Contrast diff({DimensionWiseSpec{{rule::Difference{}}, {}}, 0.0}, reals(1));
  CHECK(cluster_pair_average(diff, cluster_of({1, 2, 6}), cluster_of({0.5, 1.5})) ==
        doctest::Approx(3.0 - 1.0));
  CHECK(cluster_pair_sum(gt, cluster_of({1, 3}), cluster_of({2})) == 1.0);
}

TEST_CASE("compile-time checks reject invalid specs") {
  OutcomeSchema cat;
  cat.outcomes = {{OutcomeKind::Categorical, {"a", "b"}}};
  CHECK_THROWS_AS(Contrast({DimensionWiseSpec{{rule::StrictGreater{}}, {}}, 0.0}, cat),
                  ContrastCompileError);
  OutcomeSchema ord;
  ord.outcomes = {{OutcomeKind::Ordinal, {"a", "b"}}};
  CHECK_THROWS_AS(Contrast({DimensionWiseSpec{{rule::Difference{}}, {}}, 0.0}, ord),
                  ContrastCompileError);
  PrioritizedSpec bad_index;
  bad_index.levels = {{3, {}, {}}};
  CHECK_THROWS_AS(Contrast({bad_index, 0.0}, reals(2)), ContrastCompileError);
  PrioritizedSpec symmetric_win;
  symmetric_win.levels = {{0, {Comparison::Op::Equal, 0.0}, {Comparison::Op::Equal, 0.0}}};
  CHECK_THROWS_AS(Contrast({symmetric_win, 0.0}, reals(1)), ContrastCompileError);
  CHECK_THROWS_AS(Contrast({ParetoSpec{{Direction::HigherBetter}}, 0.0}, reals(2)),
                  ContrastCompileError);
  CHECK_THROWS_AS(Contrast({DimensionWiseSpec{{rule::StrictGreater{}}, {}}, 0.0}, reals(2)),
                  ContrastCompileError);
}
