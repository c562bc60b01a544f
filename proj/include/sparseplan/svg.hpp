#pragma once

#include <string>
#include <vector>

#include "sparseplan/bevgrid.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/planner.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan::svg {

/// Grid as colored cells, forward (+x) pointing up and +y to the left.
std::string heatmap(const BevGrid& grid, const std::string& title = {});

std::string loss_curve(const std::vector<netlet::LossSample>& curve, const std::string& title = {});

/// Map, agents and ego plan. With a result, the last stage's selected agents
/// are highlighted with their top-3 predicted modes.
std::string scene(const Scenario& s, const RefineResult* result = nullptr, const GridSpec& view = {});

}  // namespace sparseplan::svg
