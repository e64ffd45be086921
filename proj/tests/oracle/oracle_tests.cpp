#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "suite.hpp"

TEST_CASE("estimators agree with the literal transcription on 120 small trials") {
  const auto out = oracle_suite::run(120);
  INFO("worst deviation at " << out.worst_at);
  CHECK(out.datasets == 120);
  CHECK(out.dml_fits >= 10);
  CHECK(out.worst <= 1e-12);
}

TEST_CASE("oracle reproduces a single informative pair") {
  std::vector<gce::ClusterRecord> cs(2);
  cs[0] = {"t", 1, {}, {{{5.0}, {}}}};
  cs[1] = {"c", 0, {}, {{{3.0}, {}}}};
  gce::OutcomeSchema schema;
  schema.outcomes = {{gce::OutcomeKind::Real, {}}};
  const gce::TrialDataset d(cs, schema, 0.5);
  auto fn = [](const brute::Outcome& u, const brute::Outcome& v) { return brute::strict(u[0], v[0]); };
  for (bool ind : {false, true}) {
    const auto r = brute::Oracle(d, fn, ind).run();
    CHECK(r.lambda(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.lambda(1) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("m=12 DML with K=3 matches the transcription with shared cell predictions") {
  fixtures::RandomTrialSpec spec;
  spec.m = 12;
  spec.treated = 6;
  spec.n_min = 3;
  spec.n_max = 5;
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const auto data = fixtures::random_trial(spec, seed);
    const gce::Contrast w(fixtures::half_half(), data.schema());
    gce::DmlConfig cfg;
    cfg.K = 3;
    cfg.seed = seed;
    cfg.stratified = true;
    const auto fit = gce::fit_dml_nuisance(data, w, cfg);
    for (gce::Target t : {gce::Target::C, gce::Target::I}) {
      oracle_suite::Outcome out;
      oracle_suite::compare(out, gce::estimate_eff(data, w, t, fit, gce::EstimatorKind::DML),
                            brute::Oracle(data, brute::half_half(), t == gce::Target::I,
                                          oracle_suite::zeta_lookup(fit.zeta))
                                .run(),
                            "m12");
      CHECK(out.worst <= 1e-12);
    }
  }
}
