#pragma once

#include "outrate/bayes.hpp"
#include "outrate/empirical.hpp"
#include "outrate/ingest.hpp"
#include "outrate/mcmc.hpp"
#include "outrate/pipeline.hpp"
#include "outrate/synthetic.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace outrate {

using Json = nlohmann::ordered_json;

struct SyntheticSettings {
  GenerativeConfig generative;
  std::vector<int> years{1, 5, 100};
  int oracle_replicates = 1000;
  InventoryConfig inventory;
  RecordOptions records;
};

struct RunConfig {
  std::string records;    // outage CSV
  std::string inventory;  // optional line inventory CSV
  std::string out = "out";
  FilterPolicy filter;
  DayConvention day;
  KernelSettings kernels;
  PriorSpec priors;
  FitOptions fit;
  ChainConfig chains;
  DiagnosticThresholds thresholds;
  SyntheticSettings synthetic;
  std::uint64_t seed = 1;
};

// Per-stage seeds, all derived from the global seed.
enum class Stage : std::uint64_t { sample = 1, synth = 2, oracle = 3, records = 4 };
std::uint64_t stage_seed(const RunConfig& config, Stage stage);

Json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const Json& j);
RunConfig read_run_config(const std::string& path);
void write_run_config(const std::string& path, const RunConfig& config);

Json to_json(const ChainConfig& c);
Json to_json(const PriorSpec& p);
Json to_json(const GenerativeConfig& g);
GenerativeConfig generative_from_json(const Json& j);
Json to_json(const EmpiricalFit& f);
Json to_json(const ChainDiagnostics& d, Index max_offenders = 20);
// Priors, dimensions and kernel summary of a model.
Json model_summary(const ModelSpec& spec);

}  // namespace outrate
