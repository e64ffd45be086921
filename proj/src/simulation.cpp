#include "gce/simulation.hpp"

#include <cmath>
#include <random>
#include <set>

#include "gce/error.hpp"

namespace gce {

namespace {

constexpr std::uint64_t kClusterTag = 0x636c7573ULL;
constexpr std::uint64_t kArmTag = 0x61726d73ULL;
constexpr std::uint64_t kOracleTag = 0x6f72636cULL;

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate(const Scenario& s) {
  if (s.m < 2) throw ConfigError("scenario m must be at least 2");
  if (s.n_min < 1 || s.n_max < s.n_min) throw ConfigError("scenario needs 1 <= n_min <= n_max");
  if (!(s.p_treat > 0.0 && s.p_treat < 1.0)) throw ConfigError("p_treat must lie in (0,1)");
  if (!(s.c1_scale > 0.0) || !(s.x2_scale > 0.0) || !(s.gamma_sd >= 0.0)) {
    throw ConfigError("scenario scales must be positive");
  }
  if (!(s.noise_shape > 0.0) || !(s.noise_rate > 0.0)) {
    throw ConfigError("noise shape and rate must be positive");
  }
  if (!(s.alpha1_divisor > 0.0) || !(s.y2_effect_divisor > 0.0)) {
    throw ConfigError("divisors must be positive");
  }
  if (s.contrast_binding != 1 && s.contrast_binding != 2) {
    throw ConfigError("contrast_binding must be 1 or 2");
  }
  const double a1 = s.n_max / s.alpha1_divisor;
  if (!(a1 < s.alpha2_treated) || !(a1 < s.alpha2_control)) {
    throw ConfigError("ordinal cutpoints need alpha_1 < alpha_2 for every cluster size");
  }
}

}  // namespace

double Scenario::c1_sd() const {
  return normal_scale == NormalScale::Variance ? std::sqrt(c1_scale) : c1_scale;
}

double Scenario::x2_sd() const {
  return normal_scale == NormalScale::Variance ? std::sqrt(x2_scale) : x2_scale;
}

Scenario scenario_preset(const std::string& name, std::size_t m) {
  Scenario s;
  s.m = m;
  if (name == "study1" || name == "custom") {
    s.contrast_binding = 1;
  } else if (name == "study2") {
    s.contrast_binding = 2;
  } else {
    throw ConfigError("unknown scenario preset '" + name + "' (expected study1, study2 or custom)");
  }
  s.preset = name;
  validate(s);
  return s;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be an object");
  Scenario s = scenario_preset(j.value("preset", std::string("study1")),
                               j.value("m", static_cast<std::size_t>(60)));
  static const std::set<std::string> known{
      "preset",       "m",          "contrast_binding", "n_min",          "n_max",
      "p_treat",      "c1_scale",   "x2_scale",         "normal_scale",   "gamma_sd",
      "alpha1_divisor", "alpha2_treated", "alpha2_control", "y1_coding", "y2_effect_divisor",
      "noise_shape",  "noise_rate"};
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.count(it.key())) throw ConfigError("unknown scenario key '" + it.key() + "'");
    }
    if (j.contains("contrast_binding")) {
      const auto& b = j["contrast_binding"];
      if (b.is_string()) {
        const auto v = b.get<std::string>();
        if (v == "study1") {
          s.contrast_binding = 1;
        } else if (v == "study2") {
          s.contrast_binding = 2;
        } else {
          throw ConfigError("contrast_binding must be study1 or study2");
        }
      } else {
        s.contrast_binding = b.get<int>();
      }
    }
    s.n_min = j.value("n_min", s.n_min);
    s.n_max = j.value("n_max", s.n_max);
    s.p_treat = j.value("p_treat", s.p_treat);
    s.c1_scale = j.value("c1_scale", s.c1_scale);
    s.x2_scale = j.value("x2_scale", s.x2_scale);
    if (j.contains("normal_scale")) {
      const auto v = j["normal_scale"].get<std::string>();
      if (v == "variance") {
        s.normal_scale = NormalScale::Variance;
      } else if (v == "sd") {
        s.normal_scale = NormalScale::StdDev;
      } else {
        throw ConfigError("normal_scale must be 'variance' or 'sd'");
      }
    }
    s.gamma_sd = j.value("gamma_sd", s.gamma_sd);
    s.alpha1_divisor = j.value("alpha1_divisor", s.alpha1_divisor);
    s.alpha2_treated = j.value("alpha2_treated", s.alpha2_treated);
    s.alpha2_control = j.value("alpha2_control", s.alpha2_control);
    if (j.contains("y1_coding")) {
      const auto v = j["y1_coding"].get<std::string>();
      if (v == "reversed") {
        s.y1_coding = Y1Coding::Reversed;
      } else if (v == "as_written") {
        s.y1_coding = Y1Coding::AsWritten;
      } else {
        throw ConfigError("y1_coding must be 'reversed' or 'as_written'");
      }
    }
    s.y2_effect_divisor = j.value("y2_effect_divisor", s.y2_effect_divisor);
    s.noise_shape = j.value("noise_shape", s.noise_shape);
    s.noise_rate = j.value("noise_rate", s.noise_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  validate(s);
  return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  return {{"preset", s.preset},
          {"m", s.m},
          {"contrast_binding", s.contrast_binding},
          {"n_min", s.n_min},
          {"n_max", s.n_max},
          {"p_treat", s.p_treat},
          {"c1_scale", s.c1_scale},
          {"x2_scale", s.x2_scale},
          {"normal_scale", s.normal_scale == NormalScale::Variance ? "variance" : "sd"},
          {"gamma_sd", s.gamma_sd},
          {"alpha1_divisor", s.alpha1_divisor},
          {"alpha2_treated", s.alpha2_treated},
          {"alpha2_control", s.alpha2_control},
          {"y1_coding", s.y1_coding == Y1Coding::Reversed ? "reversed" : "as_written"},
          {"y2_effect_divisor", s.y2_effect_divisor},
          {"noise_shape", s.noise_shape},
          {"noise_rate", s.noise_rate}};
}

OutcomeSchema scenario_schema(const Scenario& s) {
  OutcomeSchema schema;
  schema.outcomes = {OutcomeType{OutcomeKind::Ordinal, {"1", "2", "3"}},
                     OutcomeType{OutcomeKind::Real, {}}};
  schema.p_x = 2;
  schema.p_c = 2;
  schema.pi = s.p_treat;
  return schema;
}

ContrastSpec scenario_contrast_spec(const Scenario& s) {
  ContrastSpec spec;
  if (s.contrast_binding == 1) {
    spec.form = DimensionWiseSpec{{rule::TieInclusiveWin{}, rule::StrictGreater{}}, {0.5, 0.5}};
  } else {
    PriorityLevel y1{0, {Comparison::Op::Greater, 0.0}, {Comparison::Op::Equal, 0.0}};
    PriorityLevel y2{1, {Comparison::Op::Greater, 0.0}, {Comparison::Op::Equal, 0.0}};
    spec.form = PrioritizedSpec{{y1, y2}};
    spec.tie_value = 0.0;
  }
  return spec;
}

std::array<double, 2> y1_cumulative(const Scenario& s, int n, int arm, double eta) {
  const double a1 = n / s.alpha1_divisor;
  const double a2 = arm == 1 ? s.alpha2_treated : s.alpha2_control;
  return {expit(a1 + eta), expit(a2 + eta)};
}

LatentCluster draw_cluster(const Scenario& s, Stream& rng) {
  LatentCluster c;
  c.n = std::uniform_int_distribution<int>(s.n_min, s.n_max)(rng);
  const double n = c.n;
  const double c1 = std::normal_distribution<double>(n / 10.0, s.c1_sd())(rng);
  const double c2 = rng.uniform() < expit(std::log(n / 10.0)) ? 1.0 : 0.0;
  const double gamma = s.gamma_sd > 0.0 ? std::normal_distribution<double>(0.0, s.gamma_sd)(rng) : 0.0;
  c.c = {c1, c2};

  const double p_x1 = std::min(1.0, n / 10.0);
  std::vector<double> x1(c.n);
  double sum_x1 = 0.0;
  for (int j = 0; j < c.n; ++j) {
    x1[j] = rng.uniform() < p_x1 ? 1.0 : 0.0;
    sum_x1 += x1[j];
  }
  std::normal_distribution<double> x2_dist(sum_x1 * (2.0 * c2 - 1.0) / n, s.x2_sd());
  std::gamma_distribution<double> noise(s.noise_shape, 1.0 / s.noise_rate);
  const double noise_mean = s.noise_shape / s.noise_rate;

  c.x.resize(c.n);
  c.y1.resize(c.n);
  c.y0.resize(c.n);
  for (int j = 0; j < c.n; ++j) {
    const double x2 = x2_dist(rng);
    c.x[j] = {x1[j], x2};
    const double eta = c1 + c2 + x1[j] + std::sin(x2) + gamma;
    const double u = rng.uniform();
    const double eps = noise(rng) - noise_mean;
    const double base = std::cos(c1) + c2 + x1[j] + std::sin(x2) + gamma + eps;
    for (int a = 0; a < 2; ++a) {
      const auto cum = y1_cumulative(s, c.n, a, eta);
      const int category = u < cum[0] ? 1 : (u < cum[1] ? 2 : 3);
      const int value = s.y1_coding == Y1Coding::Reversed ? 4 - category : category;
      const double y2 = base + (a == 1 ? n / s.y2_effect_divisor : 0.0);
      (a == 1 ? c.y1 : c.y0)[j] = {static_cast<double>(value - 1), y2};
    }
  }
  return c;
}

SimulatedTrial generate_trial(const Scenario& s, std::uint64_t seed, std::uint64_t replicate) {
  validate(s);
  std::vector<ClusterRecord> clusters(s.m);
  HiddenOutcomes hidden;
  hidden.y1.resize(s.m);
  hidden.y0.resize(s.m);
  for (std::size_t i = 0; i < s.m; ++i) {
    Stream rng{seed, replicate, i, kClusterTag};
    Stream arm_rng{seed, replicate, i, kArmTag};
    auto lc = draw_cluster(s, rng);
    auto& cr = clusters[i];
    cr.id = "c" + std::to_string(i + 1);
    cr.treatment = arm_rng.uniform() < s.p_treat ? 1 : 0;
    cr.c = lc.c;
    cr.individuals.resize(static_cast<std::size_t>(lc.n));
    for (int j = 0; j < lc.n; ++j) {
      cr.individuals[j].x = lc.x[j];
      cr.individuals[j].outcomes = cr.treatment == 1 ? lc.y1[j] : lc.y0[j];
    }
    hidden.y1[i] = std::move(lc.y1);
    hidden.y0[i] = std::move(lc.y0);
  }
  return {TrialDataset(std::move(clusters), scenario_schema(s), s.p_treat), std::move(hidden)};
}

namespace {

struct OracleSums {
  // per orientation a ∈ {1, 0}: Σ w̄, Σ w̄², Σ W, Σ W², Σ W·n
  double wbar[2] = {0, 0}, wbar2[2] = {0, 0}, w[2] = {0, 0}, w2[2] = {0, 0}, wn[2] = {0, 0};
  double n = 0, n2 = 0;

  void add(const OracleSums& o) {
    for (int a = 0; a < 2; ++a) {
      wbar[a] += o.wbar[a];
      wbar2[a] += o.wbar2[a];
      w[a] += o.w[a];
      w2[a] += o.w2[a];
      wn[a] += o.wn[a];
    }
    n += o.n;
    n2 += o.n2;
  }
};

double pair_sum(const Contrast& w, const std::vector<std::vector<double>>& winners,
                const std::vector<std::vector<double>>& losers) {
  double s = 0.0;
  for (const auto& u : winners) {
    for (const auto& v : losers) s += w(u, v);
  }
  return s;
}

OracleSums oracle_chunk(const Scenario& s, const Contrast& w, std::uint64_t seed,
                        std::size_t begin, std::size_t end) {
  OracleSums out;
  for (std::size_t t = begin; t < end; ++t) {
    Stream r1{seed, t, 0, kOracleTag};
    Stream r2{seed, t, 1, kOracleTag};
    const auto c1 = draw_cluster(s, r1);
    const auto c2 = draw_cluster(s, r2);
    const double n = static_cast<double>(c1.n) * c2.n;
    const double big_w[2] = {pair_sum(w, c1.y1, c2.y0), pair_sum(w, c1.y0, c2.y1)};
    for (int a = 0; a < 2; ++a) {
      const double wb = big_w[a] / n;
      out.wbar[a] += wb;
      out.wbar2[a] += wb * wb;
      out.w[a] += big_w[a];
      out.w2[a] += big_w[a] * big_w[a];
      out.wn[a] += big_w[a] * n;
    }
    out.n += n;
    out.n2 += n * n;
  }
  return out;
}

}  // namespace

TruthValues true_estimands_oracle(const Scenario& s, const Contrast& w, std::size_t n_pairs,
                                  std::uint64_t seed, Parallelism par) {
  validate(s);
  if (n_pairs < kMinOraclePairs) {
    throw ConfigError("the truth oracle needs at least " + std::to_string(kMinOraclePairs) +
                      " pair draws, got " + std::to_string(n_pairs));
  }
  constexpr std::size_t chunk = 4096;
  const std::size_t n_chunks = (n_pairs + chunk - 1) / chunk;
  std::vector<OracleSums> parts(n_chunks);
  parallel_for(n_chunks, par, [&](std::size_t c) {
    parts[c] = oracle_chunk(s, w, seed, c * chunk, std::min(n_pairs, (c + 1) * chunk));
  });
  OracleSums tot;
  for (const auto& p : parts) tot.add(p);

  const double T = static_cast<double>(n_pairs);
  TruthValues out;
  out.pairs = n_pairs;
  out.seed = seed;
  for (int a = 0; a < 2; ++a) {
    const double mean_c = tot.wbar[a] / T;
    const double var_c = (tot.wbar2[a] - T * mean_c * mean_c) / (T - 1.0);
    out.lambda_c(a) = mean_c;
    out.se_c(a) = std::sqrt(std::max(var_c, 0.0) / T);
    const double ratio = tot.w[a] / tot.n;
    const double resid2 = tot.w2[a] - 2.0 * ratio * tot.wn[a] + ratio * ratio * tot.n2;
    const double mean_n = tot.n / T;
    out.lambda_i(a) = ratio;
    out.se_i(a) = std::sqrt(std::max(resid2, 0.0) / (T * (T - 1.0))) / mean_n;
  }
  return out;
}

nlohmann::json to_json(const TruthValues& t) {
  return {{"lambda_C", {t.lambda_c(0), t.lambda_c(1)}},
          {"lambda_I", {t.lambda_i(0), t.lambda_i(1)}},
          {"mc_se_C", {t.se_c(0), t.se_c(1)}},
          {"mc_se_I", {t.se_i(0), t.se_i(1)}},
          {"pairs", t.pairs},
          {"seed", t.seed}};
}

}  // namespace gce
