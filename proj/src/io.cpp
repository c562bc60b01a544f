#include "sparseplan/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "sparseplan/error.hpp"

namespace sparseplan::io {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

namespace {

Json points_json(const Eigen::Ref<const Eigen::Matrix2Xd>& pts) {
  Json arr = Json::array();
  for (Eigen::Index c = 0; c < pts.cols(); ++c) arr.push_back({pts(0, c), pts(1, c)});
  return arr;
}

Eigen::Matrix2Xd points_from_json(const Json& arr) {
  Eigen::Matrix2Xd pts(2, static_cast<Eigen::Index>(arr.size()));
  for (std::size_t c = 0; c < arr.size(); ++c) {
    pts(0, static_cast<Eigen::Index>(c)) = arr[c].at(0).get<double>();
    pts(1, static_cast<Eigen::Index>(c)) = arr[c].at(1).get<double>();
  }
  return pts;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}: {}", what, e.what()));
  }
}

Json intent_json(const EgoIntent& i) {
  return {{"velocity", i.velocity},
          {"acceleration", i.acceleration},
          {"yaw_rate", i.yaw_rate},
          {"command", std::string(to_string(i.command))}};
}

const std::vector<std::string> kBoxKeys = {"x", "y", "z", "log_w", "log_h", "log_l", "sin_yaw", "cos_yaw",
                                           "vx", "vy", "vz"};

}  // namespace

Json to_json(const Trajectory& t) { return {{"dt", t.dt}, {"waypoints", points_json(t.points)}}; }

Trajectory trajectory_from_json(const Json& j) {
  return guarded("trajectory", [&] { return Trajectory(points_from_json(j.at("waypoints")), j.at("dt").get<double>()); });
}

Json to_json(const AnchorBox& b) {
  const AnchorBox::Vector v = b.to_vector();
  Json j = Json::object();
  for (std::size_t k = 0; k < kBoxKeys.size(); ++k) j[kBoxKeys[k]] = v[static_cast<Eigen::Index>(k)];
  return j;
}

AnchorBox anchor_from_json(const Json& j) {
  return guarded("box", [&] {
    AnchorBox::Vector v;
    for (std::size_t k = 0; k < kBoxKeys.size(); ++k) v[static_cast<Eigen::Index>(k)] = j.at(kBoxKeys[k]).get<double>();
    return AnchorBox::from_vector(v);
  });
}

Json to_json(const Scenario& s) {
  Json agents = Json::array();
  for (const Agent& a : s.agents) {
    agents.push_back({{"id", a.id},
                      {"label", std::string(to_string(a.label))},
                      {"box", to_json(a.box)},
                      {"gt_future", to_json(a.gt_future)}});
  }
  Json maps = Json::array();
  for (const MapPolyline& m : s.maps)
    maps.push_back({{"id", m.id}, {"kind", std::string(to_string(m.kind))}, {"points", points_json(m.points)}});
  return {{"schema", kScenarioSchema},
          {"name", s.name},
          {"template", s.template_id},
          {"seed", s.seed},
          {"ego", {{"box", to_json(s.ego_box)}, {"intent", intent_json(s.ego_intent)}, {"gt_future", to_json(s.ego_gt_future)}}},
          {"agents", agents},
          {"maps", maps}};
}

namespace {

void check_trajectory(const Json& j, const std::string& where, std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(where + ": not an object");
    return;
  }
  if (!j.contains("dt") || !j["dt"].is_number() || !(j["dt"].get<double>() > 0.0))
    errs.push_back(where + ".dt: missing or not a positive number");
  if (!j.contains("waypoints") || !j["waypoints"].is_array()) {
    errs.push_back(where + ".waypoints: missing or not an array");
    return;
  }
  for (std::size_t k = 0; k < j["waypoints"].size(); ++k) {
    const Json& p = j["waypoints"][k];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      errs.push_back(fmt::format("{}.waypoints[{}]: expected [x, y]", where, k));
  }
  if (j["waypoints"].size() < static_cast<std::size_t>(kHorizonSteps))
    errs.push_back(fmt::format("{}.waypoints: need at least {} waypoints", where, kHorizonSteps));
}

void check_box(const Json& j, const std::string& where, std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(where + ": not an object");
    return;
  }
  bool complete = true;
  for (const auto& k : kBoxKeys) {
    if (!j.contains(k) || !j[k].is_number()) {
      errs.push_back(fmt::format("{}.{}: missing or not a number", where, k));
      complete = false;
    }
  }
  if (complete && !is_valid(anchor_from_json(j))) errs.push_back(where + ": violates box invariants");
}

}  // namespace

std::vector<std::string> validate_scenario(const Json& j) {
  std::vector<std::string> errs;
  if (!j.is_object()) return {"document: not an object"};
  if (j.value("schema", "") != kScenarioSchema) errs.push_back(fmt::format("schema: expected '{}'", kScenarioSchema));
  for (const char* key : {"name", "template"})
    if (!j.contains(key) || !j[key].is_string()) errs.push_back(fmt::format("{}: missing or not a string", key));
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) errs.push_back("seed: missing or not an unsigned integer");
  if (!j.contains("ego") || !j["ego"].is_object()) {
    errs.push_back("ego: missing or not an object");
  } else {
    const Json& ego = j["ego"];
    check_box(ego.value("box", Json()), "ego.box", errs);
    check_trajectory(ego.value("gt_future", Json()), "ego.gt_future", errs);
    const Json intent = ego.value("intent", Json());
    if (!intent.is_object()) {
      errs.push_back("ego.intent: missing or not an object");
    } else {
      for (const char* key : {"velocity", "acceleration", "yaw_rate"})
        if (!intent.contains(key) || !intent[key].is_number())
          errs.push_back(fmt::format("ego.intent.{}: missing or not a number", key));
      if (!intent.contains("command") || !intent["command"].is_string() ||
          !command_from_string(intent["command"].get<std::string>()))
        errs.push_back("ego.intent.command: expected turn_left, turn_right or keep_forward");
    }
  }
  if (!j.contains("agents") || !j["agents"].is_array()) {
    errs.push_back("agents: missing or not an array");
  } else {
    for (std::size_t k = 0; k < j["agents"].size(); ++k) {
      const Json& a = j["agents"][k];
      const std::string where = fmt::format("agents[{}]", k);
      if (!a.is_object()) {
        errs.push_back(where + ": not an object");
        continue;
      }
      if (!a.contains("id") || !a["id"].is_number_integer()) errs.push_back(where + ".id: missing or not an integer");
      if (!a.contains("label") || !a["label"].is_string() || !agent_class_from_string(a["label"].get<std::string>()))
        errs.push_back(where + ".label: unknown agent class");
      check_box(a.value("box", Json()), where + ".box", errs);
      check_trajectory(a.value("gt_future", Json()), where + ".gt_future", errs);
    }
  }
  if (!j.contains("maps") || !j["maps"].is_array()) {
    errs.push_back("maps: missing or not an array");
  } else {
    for (std::size_t k = 0; k < j["maps"].size(); ++k) {
      const Json& m = j["maps"][k];
      const std::string where = fmt::format("maps[{}]", k);
      if (!m.is_object()) {
        errs.push_back(where + ": not an object");
        continue;
      }
      if (!m.contains("id") || !m["id"].is_number_integer()) errs.push_back(where + ".id: missing or not an integer");
      if (!m.contains("kind") || !m["kind"].is_string() || !map_kind_from_string(m["kind"].get<std::string>()))
        errs.push_back(where + ".kind: unknown map kind");
      if (!m.contains("points") || !m["points"].is_array() || m["points"].size() != kMapPoints) {
        errs.push_back(fmt::format("{}.points: expected {} points", where, kMapPoints));
      } else {
        for (const Json& p : m["points"])
          if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            errs.push_back(where + ".points: expected [x, y] pairs");
            break;
          }
      }
    }
  }
  return errs;
}

Scenario scenario_from_json(const Json& j) {
  const auto errs = validate_scenario(j);
  if (!errs.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw Error(ErrorCode::Parse, msg);
  }
  Scenario s;
  s.name = j["name"].get<std::string>();
  s.template_id = j["template"].get<std::string>();
  s.seed = j["seed"].get<std::uint64_t>();
  const Json& ego = j["ego"];
  s.ego_box = anchor_from_json(ego["box"]);
  const Json& intent = ego["intent"];
  s.ego_intent = {intent["velocity"].get<double>(), intent["acceleration"].get<double>(),
                  intent["yaw_rate"].get<double>(), *command_from_string(intent["command"].get<std::string>())};
  s.ego_gt_future = trajectory_from_json(ego["gt_future"]);
  for (const Json& a : j["agents"]) {
    s.agents.push_back({a["id"].get<int>(), anchor_from_json(a["box"]),
                        *agent_class_from_string(a["label"].get<std::string>()), trajectory_from_json(a["gt_future"])});
  }
  for (const Json& m : j["maps"]) {
    MapPolyline p;
    p.id = m["id"].get<int>();
    p.kind = *map_kind_from_string(m["kind"].get<std::string>());
    p.points = points_from_json(m["points"]);
    s.maps.push_back(p);
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

Json cost_json(const PlanCost& c) {
  return {{"collision", c.collision}, {"overstep", c.overstep},     {"direction", c.direction},
          {"regularizer", c.regularizer}, {"attraction", c.attraction}, {"total", c.total}};
}

Json ids_json(const std::vector<QueryEmbedding>& kept) {
  Json arr = Json::array();
  for (const auto& q : kept) arr.push_back(q.id);
  return arr;
}

Json branch_json(const BranchResult& b) {
  Json layers = Json::array();
  for (const auto& l : b.layers) {
    Json entries = Json::array();
    for (const auto& e : l.entries) {
      entries.push_back({{"id", e.id},
                         {"s_attn", e.scores.s_attn},
                         {"s_geo", e.scores.s_geo},
                         {"s_cls", e.scores.s_cls},
                         {"s_inter", e.scores.s_inter},
                         {"kept", e.kept}});
    }
    layers.push_back({{"layer", l.layer}, {"keep", l.keep}, {"entries", entries}});
  }
  return {{"kept", ids_json(b.kept)}, {"layers", layers}};
}

}  // namespace

Json plan_to_json(const std::string& scenario_name, const RefineResult& r) {
  Json stages = Json::array();
  for (const StageTrace& st : r.stages) {
    Json agent_modes = Json::array();
    for (const auto& a : st.motion.agents) {
      Json modes = Json::array();
      for (std::size_t k = 0; k < a.modes.modes.size(); ++k)
        modes.push_back({{"score", a.modes.scores[static_cast<Eigen::Index>(k)]},
                         {"waypoints", points_json(a.modes.modes[k].points)}});
      agent_modes.push_back({{"id", a.id}, {"modes", modes}});
    }
    stages.push_back({{"stage", st.stage},
                      {"reference_line", points_json(st.line.polyline())},
                      {"selected_agents", ids_json(st.selection.agents.kept)},
                      {"selected_maps", ids_json(st.selection.maps.kept)},
                      {"agent_predictions", agent_modes},
                      {"proposal", points_json(st.proposal.points)},
                      {"refined", points_json(st.optimized.refined.points)},
                      {"cost_before", cost_json(st.optimized.before)},
                      {"cost_after", cost_json(st.optimized.after)},
                      {"accepted_steps", st.optimized.accepted_steps}});
  }
  return {{"schema", kPlanSchema},
          {"scenario", scenario_name},
          {"dt", r.plan.dt},
          {"waypoints", points_json(r.plan.points)},
          {"command", std::string(to_string(r.command))},
          {"ego_speed", r.ego_speed},
          {"stages", stages}};
}

PlanFile plan_from_json(const Json& j) {
  return guarded("plan", [&] {
    if (j.at("schema").get<std::string>() != kPlanSchema)
      throw Error(ErrorCode::Parse, fmt::format("plan: expected schema '{}'", kPlanSchema));
    PlanFile p;
    p.scenario = j.at("scenario").get<std::string>();
    p.plan = Trajectory(points_from_json(j.at("waypoints")), j.at("dt").get<double>());
    const auto cmd = command_from_string(j.at("command").get<std::string>());
    if (!cmd) throw Error(ErrorCode::Parse, "plan: unknown command");
    p.command = *cmd;
    for (const Json& st : j.value("stages", Json::array())) p.stage_costs.push_back(st.at("cost_after").at("total").get<double>());
    return p;
  });
}

Json selection_to_json(const std::string& scenario_name, const RefineResult& r) {
  Json stages = Json::array();
  for (const StageTrace& st : r.stages)
    stages.push_back({{"stage", st.stage}, {"agents", branch_json(st.selection.agents)}, {"maps", branch_json(st.selection.maps)}});
  return {{"schema", kSelectionSchema}, {"scenario", scenario_name}, {"stages", stages}};
}

// ---------------------------------------------------------------------------

Json to_json(const GridSpec& g) {
  return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max}, {"cell", g.cell}};
}

GridSpec grid_spec_from_json(const Json& j) {
  return guarded("grid spec", [&] {
    GridSpec g{j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
               j.at("y_max").get<double>(), j.at("cell").get<double>()};
    g.validate();
    return g;
  });
}

Json to_json(const BevGrid& g) {
  Json values = Json::array();
  for (Eigen::Index i = 0; i < g.values.rows(); ++i)
    for (Eigen::Index k = 0; k < g.values.cols(); ++k) values.push_back(g.values(i, k));
  return {{"schema", kGridSchema}, {"spec", to_json(g.spec)}, {"rows", g.values.rows()}, {"cols", g.values.cols()},
          {"values", values}};
}

BevGrid grid_from_json(const Json& j) {
  return guarded("grid", [&] {
    const GridSpec spec = grid_spec_from_json(j.at("spec"));
    const Json& v = j.at("values");
    if (v.size() != static_cast<std::size_t>(spec.rows() * spec.cols()))
      throw Error(ErrorCode::Shape, "grid: value count does not match the spec");
    Eigen::MatrixXd m(spec.rows(), spec.cols());
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = v[n++].get<double>();
    return BevGrid(spec, std::move(m));
  });
}

// ---------------------------------------------------------------------------

namespace {

Json layer_json(const netlet::DenseLayer& l) {
  Json w = Json::array();
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
  Json b = Json::array();
  for (Eigen::Index r = 0; r < l.bias.size(); ++r) b.push_back(l.bias[r]);
  return {{"in", l.in_dim()}, {"out", l.out_dim()}, {"activation", std::string(netlet::to_string(l.activation))}, {"weight", w}, {"bias", b}};
}

netlet::DenseLayer layer_from_json(const Json& j) {
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  auto l = netlet::DenseLayer::zeros(in, out, netlet::activation_from_string(j.at("activation").get<std::string>()));
  const Json& w = j.at("weight");
  const Json& b = j.at("bias");
  if (w.size() != static_cast<std::size_t>(in * out) || b.size() != static_cast<std::size_t>(out))
    throw Error(ErrorCode::Shape, "checkpoint layer size mismatch");
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = w[n++].get<double>();
  for (Eigen::Index r = 0; r < out; ++r) l.bias[r] = b[static_cast<std::size_t>(r)].get<double>();
  return l;
}

Json net_json(const netlet::DenseNet& net) {
  Json arr = Json::array();
  for (const auto& l : net.layers) arr.push_back(layer_json(l));
  return arr;
}

netlet::DenseNet net_from_json(const Json& j) {
  netlet::DenseNet net;
  for (const Json& l : j) net.layers.push_back(layer_from_json(l));
  net.validate();
  return net;
}

}  // namespace

Json to_json(const netlet::ResponseRegressor& r) {
  Json intent = Json::array();
  for (const auto& n : r.intent.nets) intent.push_back(net_json(n));
  return {{"schema", kCheckpointSchema},
          {"channels", r.channels()},
          {"intent", intent},
          {"projection", layer_json(r.projection)},
          {"se", {{"gate", net_json(r.se.gate)}, {"head", layer_json(r.se.head)}}}};
}

netlet::ResponseRegressor regressor_from_json(const Json& j) {
  return guarded("checkpoint", [&] {
    if (j.at("schema").get<std::string>() != kCheckpointSchema)
      throw Error(ErrorCode::Parse, fmt::format("checkpoint: expected schema '{}'", kCheckpointSchema));
    netlet::ResponseRegressor r;
    const Json& intent = j.at("intent");
    if (intent.size() != r.intent.nets.size()) throw Error(ErrorCode::Shape, "checkpoint: wrong intent net count");
    for (std::size_t k = 0; k < intent.size(); ++k) r.intent.nets[k] = net_from_json(intent[k]);
    r.projection = layer_from_json(j.at("projection"));
    r.se.gate = net_from_json(j.at("se").at("gate"));
    r.se.head = layer_from_json(j.at("se").at("head"));
    if (r.channels() != j.at("channels").get<Eigen::Index>()) throw Error(ErrorCode::Shape, "checkpoint: channel mismatch");
    return r;
  });
}

// ---------------------------------------------------------------------------

Json to_json(const PlanningReport& r) {
  const auto horizons = [](const HorizonValues& v, double avg) {
    return Json{{"1s", v[0]}, {"2s", v[1]}, {"3s", v[2]}, {"avg", avg}};
  };
  const auto improvement = [](const RelativeImprovement& i) { return i.defined ? Json(i.value) : Json(nullptr); };
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"method", row.metrics.method},
                    {"l2", horizons(row.metrics.l2, row.l2_avg)},
                    {"collision", horizons(row.metrics.collision, row.collision_avg)}});
  Json imps = Json::array();
  for (const auto& i : r.improvements)
    imps.push_back({{"method", i.method},
                    {"baseline", i.baseline},
                    {"l2_reduction", improvement(i.l2)},
                    {"collision_reduction", improvement(i.collision)}});
  return {{"protocol", r.protocol}, {"rows", rows}, {"improvements", imps}};
}

std::string loss_curve_csv(const std::vector<netlet::LossSample>& curve) {
  std::string out = "step,bce,l2,total\n";
  for (const auto& s : curve) out += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", s.step, s.bce, s.l2, s.total);
  return out;
}

std::string denoise_csv(const std::vector<DenoiseTrial>& rows) {
  std::string out = "seed,group,residual_before,residual_after\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{:.17g},{:.17g}\n", r.seed, r.group, r.residual_before, r.residual_after);
  return out;
}

std::vector<MetricRow> metric_rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MetricRow> rows;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("method", 0) == 0) continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(ErrorCode::Parse, fmt::format("report rows line {}: expected 7 fields", lineno));
    MetricRow r;
    r.method = cells[0];
    try {
      for (int h = 0; h < 3; ++h) {
        r.l2[static_cast<std::size_t>(h)] = std::stod(cells[static_cast<std::size_t>(1 + h)]);
        r.collision[static_cast<std::size_t>(h)] = std::stod(cells[static_cast<std::size_t>(4 + h)]);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, fmt::format("report rows line {}: non-numeric value", lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sparseplan::io
