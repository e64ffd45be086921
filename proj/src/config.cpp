#include "gce/config.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gce/error.hpp"

namespace gce {

namespace {

using nlohmann::json;

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

Direction direction_from(const std::string& s) {
  if (s == "higher") return Direction::HigherBetter;
  if (s == "lower") return Direction::LowerBetter;
  throw ConfigError("direction must be 'higher' or 'lower', got '" + s + "'");
}

const char* direction_name(Direction d) { return d == Direction::HigherBetter ? "higher" : "lower"; }

std::size_t outcome_index(const json& j, const std::string& where) {
  const auto k = get_or<long long>(j, "outcome", 0, where);
  if (k < 1) throw ConfigError(where + ".outcome must be a 1-based outcome index");
  return static_cast<std::size_t>(k - 1);
}

OutcomeRule rule_from_json(const json& j) {
  if (j.is_string()) return rule_from_json(json{{"rule", j}});
  allow_keys(j, {"rule", "margin", "direction", "loss", "tie"}, "contrast rule");
  const auto name = get_or<std::string>(j, "rule", "", "contrast rule");
  if (name == "strict_greater") return rule::StrictGreater{};
  if (name == "heaviside") return rule::Heaviside{};
  if (name == "tie_inclusive") return rule::TieInclusiveWin{};
  if (name == "difference") return rule::Difference{};
  if (name == "threshold") {
    rule::ThresholdWin t;
    t.margin = get_or(j, "margin", 0.0, "threshold rule");
    t.direction = direction_from(get_or<std::string>(j, "direction", "higher", "threshold rule"));
    t.loss = get_or(j, "loss", 0.0, "threshold rule");
    t.tie = get_or(j, "tie", 0.0, "threshold rule");
    return t;
  }
  throw ConfigError("unknown contrast rule '" + name + "'");
}

json rule_to_json(const OutcomeRule& r) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, rule::StrictGreater>) return "strict_greater";
        if constexpr (std::is_same_v<T, rule::Heaviside>) return "heaviside";
        if constexpr (std::is_same_v<T, rule::TieInclusiveWin>) return "tie_inclusive";
        if constexpr (std::is_same_v<T, rule::Difference>) return "difference";
        if constexpr (std::is_same_v<T, rule::ThresholdWin>) {
          return json{{"rule", "threshold"},
                      {"margin", x.margin},
                      {"direction", direction_name(x.direction)},
                      {"loss", x.loss},
                      {"tie", x.tie}};
        }
      },
      r);
}

Comparison comparison_from_json(const json& j, const std::string& where) {
  if (j.is_string()) return comparison_from_json(json{{"op", j}}, where);
  allow_keys(j, {"op", "margin"}, where);
  const auto op = get_or<std::string>(j, "op", "", where);
  Comparison c;
  c.margin = get_or(j, "margin", 0.0, where);
  if (op == "greater") {
    c.op = Comparison::Op::Greater;
  } else if (op == "less") {
    c.op = Comparison::Op::Less;
  } else if (op == "equal") {
    c.op = Comparison::Op::Equal;
  } else if (op == "within") {
    c.op = Comparison::Op::Within;
  } else {
    throw ConfigError(where + ": unknown comparison '" + op + "'");
  }
  return c;
}

json comparison_to_json(const Comparison& c) {
  static const char* names[] = {"greater", "less", "equal", "within"};
  return {{"op", names[static_cast<int>(c.op)]}, {"margin", c.margin}};
}

std::uint64_t seed_from(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<std::uint64_t>();
  throw ConfigError("seed must be a non-negative integer");
}

std::optional<std::uint64_t> optional_seed(const json& j) {
  if (!j.contains("seed") || j.at("seed").is_null()) return std::nullopt;
  return seed_from(j.at("seed"));
}

}  // namespace

nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + " is not valid JSON: " + e.what());
  }
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), "config file '" + path.string() + "'");
}

ContrastSpec contrast_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("contrast must be an object");
  const auto type = get_or<std::string>(j, "type", "", "contrast");
  ContrastSpec spec;
  if (type == "dimension_wise") {
    allow_keys(j, {"type", "rules", "weights"}, "contrast");
    if (!j.contains("rules") || !j["rules"].is_array()) {
      throw ConfigError("dimension_wise contrast needs a 'rules' array, one per outcome");
    }
    DimensionWiseSpec d;
    for (const auto& r : j["rules"]) d.rules.push_back(rule_from_json(r));
    d.weights = get_or(j, "weights", std::vector<double>{}, "contrast");
    spec.form = d;
  } else if (type == "prioritized") {
    allow_keys(j, {"type", "levels", "tie_value"}, "contrast");
    if (!j.contains("levels") || !j["levels"].is_array()) {
      throw ConfigError("prioritized contrast needs a 'levels' array");
    }
    PrioritizedSpec p;
    for (const auto& lj : j["levels"]) {
      allow_keys(lj, {"outcome", "win", "tie", "margin", "direction"}, "prioritized level");
      PriorityLevel level;
      level.outcome = outcome_index(lj, "prioritized level");
      const double margin = get_or(lj, "margin", 0.0, "prioritized level");
      const auto dir = direction_from(get_or<std::string>(lj, "direction", "higher", "prioritized level"));
      level.win = {dir == Direction::HigherBetter ? Comparison::Op::Greater : Comparison::Op::Less,
                   margin};
      level.tie = {margin > 0.0 ? Comparison::Op::Within : Comparison::Op::Equal, margin};
      if (lj.contains("win")) level.win = comparison_from_json(lj["win"], "prioritized win");
      if (lj.contains("tie")) level.tie = comparison_from_json(lj["tie"], "prioritized tie");
      p.levels.push_back(level);
    }
    spec.form = p;
    spec.tie_value = get_or(j, "tie_value", 0.0, "contrast");
  } else if (type == "pareto") {
    allow_keys(j, {"type", "directions", "tie_value"}, "contrast");
    ParetoSpec p;
    for (const auto& d : get_or(j, "directions", std::vector<std::string>{}, "contrast")) {
      p.directions.push_back(direction_from(d));
    }
    spec.form = p;
    spec.tie_value = get_or(j, "tie_value", 0.0, "contrast");
  } else {
    throw ConfigError("contrast.type must be dimension_wise, prioritized or pareto");
  }
  return spec;
}

nlohmann::json contrast_spec_to_json(const ContrastSpec& spec) {
  return std::visit(
      [&](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DimensionWiseSpec>) {
          json rules = json::array();
          for (const auto& r : f.rules) rules.push_back(rule_to_json(r));
          return {{"type", "dimension_wise"}, {"rules", rules}, {"weights", f.weights}};
        } else if constexpr (std::is_same_v<T, PrioritizedSpec>) {
          json levels = json::array();
          for (const auto& l : f.levels) {
            levels.push_back({{"outcome", l.outcome + 1},
                              {"win", comparison_to_json(l.win)},
                              {"tie", comparison_to_json(l.tie)}});
          }
          return {{"type", "prioritized"}, {"levels", levels}, {"tie_value", spec.tie_value}};
        } else {
          json dirs = json::array();
          for (auto d : f.directions) dirs.push_back(direction_name(d));
          return {{"type", "pareto"}, {"directions", dirs}, {"tie_value", spec.tie_value}};
        }
      },
      spec.form);
}

SummarySpec summary_spec_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "difference") return SummarySpec::difference();
    if (s == "ratio") return SummarySpec::ratio();
    throw ConfigError("summary must be 'difference', 'ratio' or a custom object");
  }
  allow_keys(j, {"type", "name", "f", "df_du", "df_dv"}, "summary");
  const auto type = get_or<std::string>(j, "type", "custom", "summary");
  if (type != "custom") return summary_spec_from_json(json(type));
  for (const char* k : {"f", "df_du", "df_dv"}) {
    if (!j.contains(k)) throw ConfigError(std::string("custom summary needs '") + k + "'");
  }
  return SummarySpec::custom(get_or<std::string>(j, "name", "custom", "summary"),
                             j["f"].get<std::string>(), j["df_du"].get<std::string>(),
                             j["df_dv"].get<std::string>());
}

nlohmann::json summary_spec_to_json(const SummarySpec& spec) {
  if (spec.kind == SummarySpec::Kind::Difference) return "difference";
  if (spec.kind == SummarySpec::Kind::Ratio) return "ratio";
  return {{"type", "custom"}, {"name", spec.name}, {"f", spec.f}, {"df_du", spec.df_du},
          {"df_dv", spec.df_dv}};
}

PimConfig pim_config_from_json(const json& j) {
  allow_keys(j, {"learner", "max_iter", "tol"}, "pim");
  PimConfig c;
  c.max_iter = get_or(j, "max_iter", c.max_iter, "pim");
  c.tol = get_or(j, "tol", c.tol, "pim");
  if (c.max_iter < 1 || !(c.tol > 0.0)) throw ConfigError("pim needs max_iter >= 1 and tol > 0");
  return c;
}

BoostConfig boost_config_from_json(const json& j) {
  allow_keys(j, {"learner", "trees", "shrinkage", "subsample", "l2"}, "boost");
  BoostConfig c;
  c.trees = get_or(j, "trees", c.trees, "boost");
  c.shrinkage = get_or(j, "shrinkage", c.shrinkage, "boost");
  c.subsample = get_or(j, "subsample", c.subsample, "boost");
  c.l2 = get_or(j, "l2", c.l2, "boost");
  if (c.trees < 1 || !(c.shrinkage > 0.0) || !(c.subsample > 0.0 && c.subsample <= 1.0) ||
      !(c.l2 >= 0.0)) {
    throw ConfigError("boost needs trees >= 1, shrinkage > 0, subsample in (0,1], l2 >= 0");
  }
  return c;
}

std::vector<EstimatorKind> estimators_from_json(const json& j) {
  std::vector<EstimatorKind> out;
  if (j.is_string()) {
    std::stringstream ss(j.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(estimator_from_string(item));
  } else if (j.is_array()) {
    for (const auto& e : j) out.push_back(estimator_from_string(e.get<std::string>()));
  } else {
    throw ConfigError("estimators must be a string or an array of strings");
  }
  if (out.empty()) throw ConfigError("no estimator requested");
  return out;
}

std::vector<Target> targets_from_json(const json& j) {
  if (j.is_array()) {
    std::vector<Target> out;
    for (const auto& t : j) out.push_back(target_from_string(t.get<std::string>()));
    if (out.empty()) throw ConfigError("no target requested");
    return out;
  }
  if (!j.is_string()) throw ConfigError("target must be 'C', 'I' or 'both'");
  const auto s = j.get<std::string>();
  if (s == "both") return {Target::C, Target::I};
  return {target_from_string(s)};
}

namespace {

void read_settings(const json& j, EstimatorSettings& s) {
  if (j.contains("estimators")) s.estimators = estimators_from_json(j["estimators"]);
  if (j.contains("estimator")) s.estimators = estimators_from_json(j["estimator"]);
  if (j.contains("target")) s.targets = targets_from_json(j["target"]);
  if (j.contains("dml")) {
    const auto& d = j["dml"];
    allow_keys(d, {"K", "stratify_folds", "learner"}, "dml");
    s.K = get_or(d, "K", s.K, "dml");
    s.stratify_folds = get_or(d, "stratify_folds", s.stratify_folds, "dml");
    s.dml_learner = get_or(d, "learner", s.dml_learner, "dml");
    if (s.dml_learner != "boosted" && s.dml_learner != "pim") {
      throw ConfigError("dml.learner must be 'boosted' or 'pim'");
    }
  }
  if (j.contains("pim")) s.pim = pim_config_from_json(j["pim"]);
  if (j.contains("boost")) s.boost = boost_config_from_json(j["boost"]);
  s.df_correction = get_or(j, "df_correction", s.df_correction, "config");
  s.df_p = get_or(j, "df_p", s.df_p, "config");
  s.level = get_or(j, "level", s.level, "config");
  if (!(s.level > 0.0 && s.level < 1.0)) throw ConfigError("level must lie in (0,1)");
  if (s.df_p < 0) throw ConfigError("df_p must be >= 0");
  if (j.contains("subsample") && !j["subsample"].is_null()) {
    const auto& sj = j["subsample"];
    allow_keys(sj, {"R", "stratify"}, "subsample");
    const auto R = get_or<long long>(sj, "R", 1, "subsample");
    if (R < 1) throw ConfigError("subsample.R must be >= 1");
    s.subsample_R = static_cast<std::size_t>(R);
    s.subsample_stratify = get_or(sj, "stratify", s.subsample_stratify, "subsample");
  }
}

}  // namespace

AnalyzeConfig analyze_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  allow_keys(j,
             {"data", "schema", "pi", "contrast", "summary", "estimator", "estimators", "target",
              "dml", "pim", "boost", "df_correction", "df_p", "level", "subsample", "seed"},
             "analyze config");
  AnalyzeConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (!j.contains("data") || !j["data"].is_string()) throw ConfigError("config needs 'data' (path)");
  c.data = resolve(j["data"].get<std::string>());
  if (!j.contains("schema")) throw ConfigError("config needs 'schema' (path or object)");
  c.schema = j["schema"].is_string() ? load_schema(resolve(j["schema"].get<std::string>()).string())
                                     : schema_from_json(j["schema"]);
  if (j.contains("pi") && !j["pi"].is_null()) c.pi = get_or(j, "pi", 0.5, "config");
  if (!j.contains("contrast")) throw ConfigError("config needs a 'contrast'");
  c.contrast = contrast_spec_from_json(j["contrast"]);
  if (j.contains("summary") && !j["summary"].is_null()) {
    c.summary = summary_spec_from_json(j["summary"]);
  }
  read_settings(j, c.settings);
  c.seed = optional_seed(j);
  return c;
}

SimulateConfig simulate_config_from_json(const json& j) {
  allow_keys(j,
             {"scenario", "estimators", "estimator", "target", "replicates", "truth",
              "oracle_pairs", "dml", "pim", "boost", "df_p", "level", "subsample", "seed",
              "df_correction"},
             "simulate config");
  SimulateConfig c;
  StudyConfig& s = c.study;
  s.scenario = scenario_from_json(j.value("scenario", json{{"preset", "study1"}}));
  EstimatorSettings st;
  st.estimators = s.estimators;
  read_settings(j, st);
  if (st.dml_learner != "boosted") throw ConfigError("simulate supports the boosted DML learner only");
  s.estimators = st.estimators;
  s.targets = st.targets;
  s.K = st.K;
  s.stratify_folds = st.stratify_folds;
  s.pim = st.pim;
  s.boost = st.boost;
  s.df_p = st.df_p;
  s.level = st.level;
  s.subsample_R = st.subsample_R;
  s.subsample_stratified = st.subsample_stratify;
  s.replicates = get_or(j, "replicates", s.replicates, "simulate config");
  s.oracle_pairs = get_or(j, "oracle_pairs", s.oracle_pairs, "simulate config");
  if (j.contains("truth") && !(j["truth"].is_string() && j["truth"] == "oracle")) {
    const auto& t = j["truth"];
    allow_keys(t, {"lambda_C", "lambda_I"}, "truth");
    TruthValues tv;
    auto pair = [&](const char* k) {
      const auto v = get_or(t, k, std::vector<double>{}, "truth");
      if (v.size() != 2) throw ConfigError(std::string("truth.") + k + " must be [λ1, λ0]");
      return Eigen::Vector2d(v[0], v[1]);
    };
    tv.lambda_c = pair("lambda_C");
    tv.lambda_i = pair("lambda_I");
    s.truth = tv;
  }
  c.seed = optional_seed(j);
  return c;
}

TruthConfig truth_config_from_json(const json& j) {
  allow_keys(j, {"scenario", "target", "pairs", "seed"}, "truth config");
  TruthConfig c;
  c.scenario = scenario_from_json(j.value("scenario", json{{"preset", "study1"}}));
  if (j.contains("target")) c.targets = targets_from_json(j["target"]);
  const double pairs = get_or(j, "pairs", static_cast<double>(c.pairs), "truth config");
  if (!(pairs >= 0.0)) throw ConfigError("pairs must be non-negative");
  c.pairs = static_cast<std::size_t>(pairs);
  c.seed = optional_seed(j);
  return c;
}

nlohmann::json to_json(const EstimatorSettings& s) {
  json est = json::array(), tgt = json::array();
  for (auto k : s.estimators) est.push_back(to_string(k));
  for (auto t : s.targets) tgt.push_back(to_string(t));
  json j{{"estimators", est},
         {"target", tgt},
         {"dml", {{"K", s.K}, {"stratify_folds", s.stratify_folds}, {"learner", s.dml_learner}}},
         {"pim", PimLearner(s.pim).config()},
         {"boost", BoostedLearner(s.boost).config()},
         {"df_correction", s.df_correction},
         {"df_p", s.df_p},
         {"level", s.level}};
  j["pim"].erase("learner");
  j["boost"].erase("learner");
  if (s.subsample_R) j["subsample"] = {{"R", *s.subsample_R}, {"stratify", s.subsample_stratify}};
  return j;
}

nlohmann::json to_json(const AnalyzeConfig& c) {
  json j = to_json(c.settings);
  j["data"] = c.data.string();
  j["schema"] = schema_to_json(c.schema);
  if (c.pi) j["pi"] = *c.pi;
  j["contrast"] = contrast_spec_to_json(c.contrast);
  if (c.summary) j["summary"] = summary_spec_to_json(*c.summary);
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

nlohmann::json to_json(const TruthConfig& c) {
  json tgt = json::array();
  for (auto t : c.targets) tgt.push_back(to_string(t));
  json j{{"scenario", scenario_to_json(c.scenario)}, {"target", tgt}, {"pairs", c.pairs}};
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

std::uint64_t draw_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace gce
