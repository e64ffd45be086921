#include "gce/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "gce/error.hpp"

namespace gce {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::DegenerateDesign: return "degenerate_design";
    case ErrorKind::ContrastCompile: return "contrast_compile";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::FoldFeasibility: return "fold_feasibility";
    case ErrorKind::Partition: return "partition";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

void rethrow_with_context(const Error& e, const std::string& prefix) {
  const std::string msg = prefix + e.what();
  switch (e.kind()) {
    case ErrorKind::Config: throw ConfigError(msg);
    case ErrorKind::Schema: throw SchemaError(msg);
    case ErrorKind::Parse: throw ParseError(msg);
    case ErrorKind::DegenerateDesign: throw DegenerateDesignError(msg);
    case ErrorKind::ContrastCompile: throw ContrastCompileError(msg);
    case ErrorKind::Singularity: throw SingularityError(msg);
    case ErrorKind::FoldFeasibility: throw FoldFeasibilityError(msg);
    case ErrorKind::Partition: throw PartitionError(msg);
    case ErrorKind::Numerical: throw NumericalError(msg);
  }
  throw Error(e.kind(), msg);
}

const char* to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Real: return "real";
    case OutcomeKind::Ordinal: return "ordinal";
    case OutcomeKind::Categorical: return "categorical";
    case OutcomeKind::Binary: return "binary";
    case OutcomeKind::Count: return "count";
  }
  return "unknown";
}

OutcomeKind outcome_kind_from_string(const std::string& name) {
  if (name == "real" || name == "continuous") return OutcomeKind::Real;
  if (name == "ordinal") return OutcomeKind::Ordinal;
  if (name == "categorical") return OutcomeKind::Categorical;
  if (name == "binary") return OutcomeKind::Binary;
  if (name == "count") return OutcomeKind::Count;
  throw ConfigError("unknown outcome type '" + name + "'");
}

namespace {

void validate_schema(const OutcomeSchema& schema) {
  if (schema.outcomes.empty()) throw SchemaError("schema declares no outcomes");
  for (std::size_t q = 0; q < schema.outcomes.size(); ++q) {
    const auto& t = schema.outcomes[q];
    if (t.kind == OutcomeKind::Categorical && t.levels.empty()) {
      throw SchemaError("categorical outcome_" + std::to_string(q + 1) +
                        " must declare its levels");
    }
    std::vector<std::string> sorted = t.levels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw SchemaError("outcome_" + std::to_string(q + 1) + " declares duplicate levels");
    }
  }
  if (schema.pi && !(*schema.pi > 0.0 && *schema.pi < 1.0)) {
    throw ConfigError("pi must lie in (0,1)");
  }
}

double parse_real(std::string_view text, const std::string& where) {
  double value = 0.0;
  auto first = text.data();
  auto last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ParseError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError(where + ": non-finite value '" + std::string(text) + "'");
  }
  return value;
}

double parse_outcome(const OutcomeType& type, std::string_view text, const std::string& where) {
  if (!type.levels.empty()) {
    std::string label(text);
    while (!label.empty() && (label.back() == '\r' || label.back() == ' ')) label.pop_back();
    auto it = std::find(type.levels.begin(), type.levels.end(), label);
    if (it == type.levels.end()) {
      throw ParseError(where + ": '" + label + "' is not a declared level");
    }
    return static_cast<double>(it - type.levels.begin());
  }
  const double v = parse_real(text, where);
  switch (type.kind) {
    case OutcomeKind::Binary:
      if (v != 0.0 && v != 1.0) throw ParseError(where + ": binary outcome must be 0 or 1");
      break;
    case OutcomeKind::Count:
      if (v < 0.0 || v != std::floor(v)) {
        throw ParseError(where + ": count outcome must be a non-negative integer");
      }
      break;
    case OutcomeKind::Ordinal:
      if (v != std::floor(v)) throw ParseError(where + ": ordinal outcome must be an integer");
      break;
    default:
      break;
  }
  return v;
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

OutcomeSchema schema_from_json(const nlohmann::json& j) {
  OutcomeSchema schema;
  try {
    if (!j.contains("outcomes") || !j.at("outcomes").is_array()) {
      throw ConfigError("schema requires an 'outcomes' array");
    }
    for (const auto& o : j.at("outcomes")) {
      OutcomeType t;
      t.kind = outcome_kind_from_string(o.at("type").get<std::string>());
      if (o.contains("levels")) {
        for (const auto& level : o.at("levels")) {
          t.levels.push_back(level.is_string() ? level.get<std::string>() : level.dump());
        }
      }
      schema.outcomes.push_back(std::move(t));
    }
    schema.p_x = j.value("p_x", std::size_t{0});
    schema.p_c = j.value("p_c", std::size_t{0});
    if (j.contains("pi") && !j.at("pi").is_null()) schema.pi = j.at("pi").get<double>();
    const std::string delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
    schema.delimiter = delim[0];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
  validate_schema(schema);
  return schema;
}

nlohmann::json schema_to_json(const OutcomeSchema& schema) {
  nlohmann::json j;
  j["outcomes"] = nlohmann::json::array();
  for (const auto& t : schema.outcomes) {
    nlohmann::json o{{"type", to_string(t.kind)}};
    if (!t.levels.empty()) o["levels"] = t.levels;
    j["outcomes"].push_back(o);
  }
  j["p_x"] = schema.p_x;
  j["p_c"] = schema.p_c;
  if (schema.pi) j["pi"] = *schema.pi;
  j["delimiter"] = std::string(1, schema.delimiter);
  return j;
}

OutcomeSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  try {
    return schema_from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
}

TrialDataset::TrialDataset(std::vector<ClusterRecord> clusters, OutcomeSchema schema, double pi,
                           std::vector<std::string> warnings)
    : clusters_(std::move(clusters)),
      schema_(std::move(schema)),
      pi_(pi),
      warnings_(std::move(warnings)) {
  if (!(pi_ > 0.0 && pi_ < 1.0)) throw ConfigError("pi must lie in (0,1)");
  schema_.pi = pi_;
  validate_schema(schema_);
  if (clusters_.size() < 2) {
    throw DegenerateDesignError("a trial needs at least two clusters");
  }
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& c = clusters_[i];
    if (!seen.emplace(c.id, i).second) {
      throw SchemaError("duplicate cluster id '" + c.id + "'");
    }
    if (c.treatment != 0 && c.treatment != 1) {
      throw SchemaError("cluster '" + c.id + "': treatment must be 0 or 1");
    }
    if (c.individuals.empty()) throw SchemaError("cluster '" + c.id + "' has no individuals");
    if (c.c.size() != schema_.p_c) {
      throw SchemaError("cluster '" + c.id + "': expected " + std::to_string(schema_.p_c) +
                        " cluster covariates");
    }
    for (double v : c.c) {
      if (!std::isfinite(v)) throw ParseError("cluster '" + c.id + "': non-finite covariate");
    }
    for (const auto& ind : c.individuals) {
      if (ind.outcomes.size() != schema_.q() || ind.x.size() != schema_.p_x) {
        throw SchemaError("cluster '" + c.id + "': individual record has wrong dimension");
      }
      for (double v : ind.x) {
        if (!std::isfinite(v)) throw ParseError("cluster '" + c.id + "': non-finite covariate");
      }
      for (std::size_t q = 0; q < schema_.q(); ++q) {
        const double v = ind.outcomes[q];
        const auto& t = schema_.outcomes[q];
        if (!std::isfinite(v)) throw ParseError("cluster '" + c.id + "': non-finite outcome");
        if (!t.levels.empty() &&
            (v < 0.0 || v >= static_cast<double>(t.levels.size()) || v != std::floor(v))) {
          throw SchemaError("cluster '" + c.id + "': outcome_" + std::to_string(q + 1) +
                            " is not a valid level index");
        }
      }
    }
  }
  if (arm_count(1) == 0 || arm_count(0) == 0) {
    throw DegenerateDesignError("both arms need at least one cluster");
  }
}

std::size_t TrialDataset::arm_count(int arm) const {
  return static_cast<std::size_t>(std::count_if(
      clusters_.begin(), clusters_.end(), [arm](const auto& c) { return c.treatment == arm; }));
}

std::size_t TrialDataset::total_individuals() const {
  std::size_t n = 0;
  for (const auto& c : clusters_) n += c.size();
  return n;
}

TrialDataset TrialDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<ClusterRecord> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(clusters_.at(i));
  return TrialDataset(std::move(picked), schema_, pi_);
}

TrialDataset load_dataset(std::istream& in, const OutcomeSchema& schema, std::optional<double> pi) {
  validate_schema(schema);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("input is empty; a header row is required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_row(line, schema.delimiter);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw SchemaError("missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t id_col = require("cluster_id");
  const std::size_t a_col = require("treatment");
  std::vector<std::size_t> y_cols, x_cols, c_cols;
  for (std::size_t q = 0; q < schema.q(); ++q) y_cols.push_back(require("outcome_" + std::to_string(q + 1)));
  for (std::size_t p = 0; p < schema.p_x; ++p) x_cols.push_back(require("x_" + std::to_string(p + 1)));
  for (std::size_t p = 0; p < schema.p_c; ++p) c_cols.push_back(require("c_" + std::to_string(p + 1)));

  std::vector<ClusterRecord> clusters;
  std::unordered_map<std::string, std::size_t> index_of;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_row(line, schema.delimiter);
    const std::string where = "row " + std::to_string(row);
    if (fields.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string& id = fields[id_col];
    if (id.empty()) throw ParseError(where + ": empty cluster_id");
    const double a = parse_real(fields[a_col], where + " treatment");
    if (a != 0.0 && a != 1.0) throw SchemaError(where + ": treatment must be 0 or 1");
    std::vector<double> c;
    for (std::size_t k = 0; k < c_cols.size(); ++k) {
      c.push_back(parse_real(fields[c_cols[k]], where + " c_" + std::to_string(k + 1)));
    }
    IndividualRecord ind;
    for (std::size_t q = 0; q < y_cols.size(); ++q) {
      ind.outcomes.push_back(parse_outcome(schema.outcomes[q], fields[y_cols[q]],
                                           where + " outcome_" + std::to_string(q + 1)));
    }
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      ind.x.push_back(parse_real(fields[x_cols[k]], where + " x_" + std::to_string(k + 1)));
    }

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      index_of.emplace(id, clusters.size());
      clusters.push_back(ClusterRecord{id, static_cast<int>(a), std::move(c), {}});
    } else {
      if (it->second + 1 != clusters.size()) {
        throw SchemaError(where + ": cluster_id '" + id +
                          "' reappears after other clusters (duplicate cluster id)");
      }
      const auto& existing = clusters.back();
      if (existing.treatment != static_cast<int>(a)) {
        throw SchemaError(where + ": treatment is not constant within cluster '" + id + "'");
      }
      if (existing.c != c) {
        throw SchemaError(where + ": cluster covariates are not constant within cluster '" + id +
                          "'");
      }
    }
    clusters.back().individuals.push_back(std::move(ind));
  }

  std::vector<std::string> warnings;
  double resolved_pi = 0.0;
  if (pi) {
    resolved_pi = *pi;
  } else if (schema.pi) {
    resolved_pi = *schema.pi;
  } else {
    const auto treated = std::count_if(clusters.begin(), clusters.end(),
                                       [](const auto& c) { return c.treatment == 1; });
    resolved_pi = clusters.empty() ? 0.0
                                   : static_cast<double>(treated) / static_cast<double>(clusters.size());
    warnings.push_back("pi not declared; using the empirical treated fraction " +
                       format_real(resolved_pi));
    if (treated == 0 || static_cast<std::size_t>(treated) == clusters.size()) {
      throw DegenerateDesignError("both arms need at least one cluster");
    }
  }
  OutcomeSchema stored = schema;
  stored.pi = resolved_pi;
  return TrialDataset(std::move(clusters), std::move(stored), resolved_pi, std::move(warnings));
}

TrialDataset load_dataset(const std::string& path, const OutcomeSchema& schema,
                          std::optional<double> pi) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  return load_dataset(in, schema, pi);
}

void write_dataset(std::ostream& out, const TrialDataset& data) {
  const auto& schema = data.schema();
  const char d = schema.delimiter;
  out << "cluster_id" << d << "treatment";
  for (std::size_t q = 0; q < schema.q(); ++q) out << d << "outcome_" << q + 1;
  for (std::size_t p = 0; p < schema.p_x; ++p) out << d << "x_" << p + 1;
  for (std::size_t p = 0; p < schema.p_c; ++p) out << d << "c_" << p + 1;
  out << '\n';
  for (const auto& c : data.clusters()) {
    for (const auto& ind : c.individuals) {
      out << c.id << d << c.treatment;
      for (std::size_t q = 0; q < schema.q(); ++q) {
        const auto& t = schema.outcomes[q];
        if (!t.levels.empty()) {
          out << d << t.levels[static_cast<std::size_t>(ind.outcomes[q])];
        } else {
          out << d << format_real(ind.outcomes[q]);
        }
      }
      for (double v : ind.x) out << d << format_real(v);
      for (double v : c.c) out << d << format_real(v);
      out << '\n';
    }
  }
}

std::vector<double> cluster_summary_covariates(const ClusterRecord& cluster) {
  if (cluster.individuals.empty()) return {};
  std::vector<double> mean(cluster.individuals.front().x.size(), 0.0);
  for (const auto& ind : cluster.individuals) {
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += ind.x[p];
  }
  for (double& v : mean) v /= static_cast<double>(cluster.individuals.size());
  return mean;
}

}  // namespace gce
