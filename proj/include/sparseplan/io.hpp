#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparseplan/bevgrid.hpp"
#include "sparseplan/denoise.hpp"
#include "sparseplan/evalkit.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/planner.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan::io {

using Json = nlohmann::json;

inline constexpr const char* kScenarioSchema = "scenario/1";
inline constexpr const char* kPlanSchema = "plan/1";
inline constexpr const char* kSelectionSchema = "selection/1";
inline constexpr const char* kGridSchema = "grid/1";
inline constexpr const char* kCheckpointSchema = "netlet/1";

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories; throws an I/O error naming the path.
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);
Json to_json(const AnchorBox& b);
AnchorBox anchor_from_json(const Json& j);

Json to_json(const Scenario& s);
/// Every schema violation found, empty when the document is a valid scenario/1.
std::vector<std::string> validate_scenario(const Json& j);
/// Throws a parse error listing the violations.
Scenario scenario_from_json(const Json& j);

struct PlanFile {
  std::string scenario;
  Trajectory plan;
  Command command = Command::KeepForward;
  std::vector<double> stage_costs;
};

Json plan_to_json(const std::string& scenario_name, const RefineResult& r);
PlanFile plan_from_json(const Json& j);
Json selection_to_json(const std::string& scenario_name, const RefineResult& r);

Json to_json(const GridSpec& g);
GridSpec grid_spec_from_json(const Json& j);
Json to_json(const BevGrid& g);
BevGrid grid_from_json(const Json& j);

Json to_json(const netlet::ResponseRegressor& r);
netlet::ResponseRegressor regressor_from_json(const Json& j);

Json to_json(const PlanningReport& r);

std::string loss_curve_csv(const std::vector<netlet::LossSample>& curve);
std::string denoise_csv(const std::vector<DenoiseTrial>& rows);

/// Method rows from a CSV with header method,l2_1s,l2_2s,l2_3s,col_1s,col_2s,col_3s.
std::vector<MetricRow> metric_rows_from_csv(const std::string& text);

}  // namespace sparseplan::io
