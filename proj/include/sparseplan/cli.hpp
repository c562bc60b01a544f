#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparseplan/denoise.hpp"
#include "sparseplan/evalkit.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/planner.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitBadArgs = 2;

/// Default output root: $SPARSEPLAN_OUT, else ./out.
fs::path default_output_root();

/// Scenario files named on the command line; directories expand to their
/// *.json files whose stem has no further extension, sorted by name.
std::vector<fs::path> collect_scenario_files(const std::vector<std::string>& inputs);

Scenario load_scenario(const fs::path& path);

struct GenOptions {
  std::string template_id = "empty";
  int count = 1;
  std::uint64_t seed = 0;
  fs::path out;
  TemplateParams params;
};

/// Writes <template>_<seed>.json for seeds seed .. seed + count - 1.
std::vector<fs::path> cmd_gen(const GenOptions& opt);

struct RunOptions {
  std::vector<std::string> inputs;
  fs::path out;
  PipelineConfig pipeline;
  Eigen::Index channels = 16;
  int interaction_layers = 3;
  std::optional<fs::path> checkpoint;
  int workers = 1;
  bool dump_grids = false;
};

struct RunFailure {
  fs::path input;
  std::string message;
};

struct RunSummary {
  std::vector<fs::path> plans;
  std::vector<RunFailure> failures;
  int exit_code() const { return failures.empty() ? kExitOk : kExitPartial; }
};

/// One plan/1 and one selection trace per scenario. Scenarios run on
/// `workers` threads; each file depends only on its own scenario.
RunSummary cmd_run(const RunOptions& opt);

struct EvalOptions {
  /// (method name, directory of plan files)
  std::vector<std::pair<std::string, fs::path>> plans;
  std::vector<std::string> scenarios;
  std::vector<CollisionProtocol> protocols = {CollisionProtocol::Obb, CollisionProtocol::Grid};
  std::string baseline;
  EgoDims ego;
  fs::path out;
};

struct EvalSummary {
  std::vector<PlanningReport> reports;
  std::vector<std::string> unmatched;
  int exit_code() const { return unmatched.empty() ? kExitOk : kExitPartial; }
};

EvalSummary cmd_eval(const EvalOptions& opt);

struct TrainOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> holdout;
  std::string template_id;
  int count = 0;
  std::uint64_t seed = 0;
  netlet::TrainConfig train;
  GridSpec grid;
  fs::path out;
};

struct TrainSummary {
  fs::path checkpoint;
  fs::path curve;
  netlet::InteractLoss final_train;
  std::optional<netlet::InteractLoss> holdout;
};

TrainSummary cmd_train_response(const TrainOptions& opt);

struct DenoiseOptions {
  std::string template_id = "empty";
  int trials = 200;
  int groups = 3;
  std::uint64_t seed = 0;
  RefineConfig refine;
  fs::path out;
};

/// Trial i uses scenario seed seed + i / groups and noise group i % groups.
std::vector<DenoiseTrial> cmd_denoise(const DenoiseOptions& opt, fs::path* csv_path = nullptr);

/// Full command line entry point; returns the process exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparseplan::cli
