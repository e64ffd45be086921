#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gce/app.hpp"
#include "gce/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  std::string format = "json";
  bool timing = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file (comments allowed)");
  sub->add_option("--seed", c.seed, "master seed; drawn and recorded when absent");
  sub->add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str();
  sub->add_option("--out", c.out, "output file (stdout when absent)");
  sub->add_option("--format", c.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sub->add_flag("--timing", c.timing, "record wall-clock runtime in the report");
}

json load_base(const Common& c) {
  if (c.config.empty()) return json::object();
  json j = gce::read_config_file(c.config);
  if (!j.is_object()) throw gce::ConfigError("config file must hold a JSON object");
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw gce::ConfigError("cannot write '" + path + "'");
  f << text;
}

void emit(const Common& c, const gce::RunOutput& out) {
  if (c.format == "csv") {
    write_text(c.out, out.csv);
    if (!out.raw_csv.empty()) {
      if (c.out.empty()) {
        std::cout << '\n' << out.raw_csv;
      } else {
        fs::path p(c.out);
        write_text((p.parent_path() / (p.stem().string() + "_raw.csv")).string(), out.raw_csv);
      }
    }
  } else {
    write_text(c.out, out.report.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized causal effects for cluster-randomized trials"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gce::version());

  Common ca, cs, ct;
  auto* analyze = app.add_subcommand("analyze", "estimate from a dataset");
  add_common(analyze, ca);
  std::string data, schema, a_estimators, a_target;
  analyze->add_option("--data", data, "dataset CSV (overrides config)");
  analyze->add_option("--schema", schema, "schema JSON (overrides config)");
  analyze->add_option("--estimators", a_estimators, "comma list of np,mr,dml");
  analyze->add_option("--target", a_target, "C, I or both")->check(CLI::IsMember({"C", "I", "both"}));

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(simulate, cs);
  std::string s_preset, s_estimators, s_target;
  std::optional<std::size_t> s_m, s_reps, s_R;
  bool raw = false;
  simulate->add_option("--preset", s_preset, "study1, study2 or custom");
  simulate->add_option("--m", s_m, "clusters per trial");
  simulate->add_option("--reps", s_reps, "replicates (>= 50)");
  simulate->add_option("--estimators", s_estimators, "comma list of np,mr,dml");
  simulate->add_option("--target", s_target, "C, I or both")->check(CLI::IsMember({"C", "I", "both"}));
  simulate->add_option("--R", s_R, "disjoint subsamples per replicate");
  simulate->add_flag("--raw", raw, "write per-replicate estimates");

  auto* truth = app.add_subcommand("truth", "Monte Carlo truth of the estimands");
  add_common(truth, ct);
  std::string t_preset, t_target;
  std::optional<std::size_t> t_m;
  std::optional<double> t_pairs;
  truth->add_option("--preset", t_preset, "study1, study2 or custom");
  truth->add_option("--m", t_m, "unused by the oracle; kept for symmetry with simulate");
  truth->add_option("--target", t_target, "C, I or both")->check(CLI::IsMember({"C", "I", "both"}));
  truth->add_option("--pairs", t_pairs, "cluster pairs drawn (>= 1e5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit_code", 2}}}}.dump()
              << '\n';
    return 2;
  }

  try {
    if (*analyze) {
      json j = load_base(ca);
      if (!data.empty()) j["data"] = fs::absolute(data).string();
      if (!schema.empty()) j["schema"] = fs::absolute(schema).string();
      if (!a_estimators.empty()) j["estimators"] = a_estimators;
      if (!a_target.empty()) j["target"] = a_target;
      if (ca.seed) j["seed"] = *ca.seed;
      const fs::path base = ca.config.empty() ? fs::path{} : fs::path(ca.config).parent_path();
      auto cfg = gce::analyze_config_from_json(j, base);
      emit(ca, gce::run_analyze(std::move(cfg), {{ca.threads}, ca.timing, false}));
    } else if (*simulate) {
      json j = load_base(cs);
      if (!s_preset.empty()) j["scenario"]["preset"] = s_preset;
      if (s_m) j["scenario"]["m"] = *s_m;
      if (s_reps) j["replicates"] = *s_reps;
      if (!s_estimators.empty()) j["estimators"] = s_estimators;
      if (!s_target.empty()) j["target"] = s_target;
      if (s_R) j["subsample"]["R"] = *s_R;
      if (cs.seed) j["seed"] = *cs.seed;
      auto cfg = gce::simulate_config_from_json(j);
      emit(cs, gce::run_simulate(std::move(cfg), {{cs.threads}, cs.timing, raw}));
    } else if (*truth) {
      json j = load_base(ct);
      if (!t_preset.empty()) j["scenario"]["preset"] = t_preset;
      if (t_m) j["scenario"]["m"] = *t_m;
      if (!t_target.empty()) j["target"] = t_target;
      if (t_pairs) j["pairs"] = *t_pairs;
      if (ct.seed) j["seed"] = *ct.seed;
      auto cfg = gce::truth_config_from_json(j);
      emit(ct, gce::run_truth(std::move(cfg), {{ct.threads}, ct.timing, false}));
    }
  } catch (const std::exception& e) {
    std::cerr << gce::error_record(e).dump() << '\n';
    return gce::exit_code_for(e);
  }
  return 0;
}
