#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "gce/eif_estimators.hpp"
#include "gce/error.hpp"

using namespace gce;

TEST_CASE("m=10 with three folds") {
  const auto pp = build_pair_partition(10, 3, 42);
  CHECK(pp.cells.size() == 6);
  std::size_t pairs = 0;
  for (const auto& c : pp.cells) pairs += c.pairs.size();
  CHECK(pairs == 45);
  std::size_t sizes = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(pp.fold_size(s) >= 3);
    CHECK(pp.fold_size(s) <= 4);
    sizes += pp.fold_size(s);
  }
  CHECK(sizes == 10);
}

TEST_CASE("m=4 with two folds in identity order") {
  const std::vector<std::size_t> order{0, 1, 2, 3};
  const auto pp = partition_from_order(order, 2);
  REQUIRE(pp.cells.size() == 3);
  CHECK(pp.cells[0].pairs == std::vector<OrderedPair>{{0, 1}});
  CHECK(pp.cells[0].training == std::vector<std::size_t>{2, 3});
  CHECK(pp.cells[1].pairs == std::vector<OrderedPair>{{0, 2}, {0, 3}, {1, 2}, {1, 3}});
  CHECK(pp.cells[1].training.empty());
  CHECK(pp.cells[2].pairs == std::vector<OrderedPair>{{2, 3}});
  CHECK(pp.cells[2].training == std::vector<std::size_t>{0, 1});
}

TEST_CASE("random partitions cover every pair once and keep training disjoint") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 8 + seed % 13, K = 2 + seed % 3;
    const auto pp = build_pair_partition(m, K, seed);
    std::set<OrderedPair> seen;
    for (std::size_t c = 0; c < pp.cells.size(); ++c) {
      const auto& cell = pp.cells[c];
      const std::set<std::size_t> train(cell.training.begin(), cell.training.end());
      for (const auto& [i, k] : cell.pairs) {
        CHECK(i < k);
        CHECK(seen.insert({i, k}).second);
        CHECK_FALSE(train.count(i));
        CHECK_FALSE(train.count(k));
        CHECK(pp.cell_of_pair[pair_index(i, k, m)] == c);
      }
      for (std::size_t t : cell.training) {
        CHECK(pp.fold_of_cluster[t] != cell.s1);
        CHECK(pp.fold_of_cluster[t] != cell.s2);
      }
    }
    CHECK(seen.size() == pair_count(m));
  }
}

TEST_CASE("stratified folds balance the arms") {
  fixtures::RandomTrialSpec spec;
  spec.m = 20;
  spec.treated = 8;
  const auto d = fixtures::random_trial(spec, 1);
  const auto pp = build_pair_partition(d, 4, 9, true);
  for (std::size_t s = 0; s < 4; ++s) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < d.m(); ++i) t += pp.fold_of_cluster[i] == s && d.cluster(i).treatment;
    CHECK(t == 2);
  }
}

TEST_CASE("fold counts and feasibility") {
  CHECK_THROWS_AS(build_pair_partition(10, 1, 0), ConfigError);
  CHECK_THROWS_AS(build_pair_partition(10, 6, 0), ConfigError);
  fixtures::RandomTrialSpec spec;
  spec.m = 4;
  spec.treated = 2;
  const auto d = fixtures::random_trial(spec, 1);
  const std::vector<std::size_t> order{0, 1, 2, 3};
  CHECK_THROWS_AS(check_feasibility(partition_from_order(order, 2), d), FoldFeasibilityError);
  const Contrast w(fixtures::half_half(), d.schema());
  DmlConfig cfg;
  cfg.K = 2;
  CHECK_THROWS_AS(fit_dml_nuisance(d, w, cfg), FoldFeasibilityError);
}

TEST_CASE("cross-fitting is reproducible and thread independent") {
  fixtures::RandomTrialSpec spec;
  spec.m = 16;
  spec.treated = 8;
  spec.n_min = 2;
  const auto d = fixtures::random_trial(spec, 77);
  const Contrast w(fixtures::half_half(), d.schema());
  DmlConfig cfg;
  cfg.K = 3;
  cfg.seed = 5;
  cfg.stratified = true;
  const auto a = fit_dml_nuisance(d, w, cfg);
  const auto b = fit_dml_nuisance(d, w, cfg, Parallelism{4});
  CHECK(a.zeta.ik1 == b.zeta.ik1);
  CHECK(a.zeta.ki0 == b.zeta.ki0);
  for (std::size_t p = 0; p < pair_count(d.m()); ++p) {
    CHECK(w.range().contains(a.zeta.ik1[p]));
  }
}
