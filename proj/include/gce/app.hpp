#pragma once

#include <exception>
#include <string>

#include <json.hpp>

#include "gce/config.hpp"
#include "gce/parallel.hpp"

namespace gce {

const char* version();

struct RunOptions {
  Parallelism par;
  bool timing = false;  // adds wall-clock seconds, which breaks byte-identity
  bool raw = false;     // simulate: keep per-replicate records
};

struct RunOutput {
  nlohmann::json report;
  std::string csv;
  std::string raw_csv;
};

RunOutput run_analyze(AnalyzeConfig cfg, const RunOptions& opt = {});
RunOutput run_simulate(SimulateConfig cfg, const RunOptions& opt = {});
RunOutput run_truth(TruthConfig cfg, const RunOptions& opt = {});

/// 0 ok, 2 config, 3 data, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);
nlohmann::json error_record(const std::exception& e);

}  // namespace gce
