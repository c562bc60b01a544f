#include "sparseplan/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <ostream>
#include <thread>

#include "sparseplan/error.hpp"
#include "sparseplan/io.hpp"
#include "sparseplan/svg.hpp"

namespace sparseplan::cli {

fs::path default_output_root() {
  if (const char* env = std::getenv("SPARSEPLAN_OUT"); env && *env) return fs::path(env);
  return fs::path("out");
}

std::vector<fs::path> collect_scenario_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const fs::path f = e.path();
        if (e.is_regular_file() && f.extension() == ".json" && f.stem().extension().empty()) found.push_back(f);
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

Scenario load_scenario(const fs::path& path) {
  try {
    return io::scenario_from_json(io::read_json(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(ErrorCode::Parse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

namespace {

/// Runs f(0..n-1) on up to `workers` threads. f must not throw.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<fs::path> cmd_gen(const GenOptions& opt) {
  if (opt.count < 0) throw Error(ErrorCode::Domain, "count must be non-negative");
  std::vector<fs::path> written;
  for (int k = 0; k < opt.count; ++k) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(k);
    const Scenario s = gen_scenario(opt.template_id, seed, opt.params);
    const fs::path path = opt.out / (s.name + ".json");
    io::write_text(path, io::dump(io::to_json(s)));
    written.push_back(path);
  }
  return written;
}

RunSummary cmd_run(const RunOptions& opt) {
  opt.pipeline.refine.validate();
  opt.pipeline.schedule.validate();
  opt.pipeline.grid.validate();
  const std::vector<fs::path> files = collect_scenario_files(opt.inputs);

  std::optional<netlet::ResponseRegressor> learned;
  if (opt.checkpoint) learned = io::regressor_from_json(io::read_json(*opt.checkpoint));
  PipelineModels models;
  models.interaction =
      make_interaction_params(opt.channels, opt.pipeline.schedule.layers(), opt.pipeline.seed);
  models.response = learned ? &*learned : nullptr;

  std::vector<std::optional<fs::path>> plans(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), opt.workers, [&](std::size_t i) {
    try {
      const Scenario s = load_scenario(files[i]);
      const RefineResult r = iterate_refine(s, opt.pipeline, models);
      const std::string stem = files[i].stem().string();
      const fs::path plan_path = opt.out / (stem + ".plan.json");
      io::write_text(plan_path, io::dump(io::plan_to_json(s.name, r)));
      io::write_text(opt.out / (stem + ".selection.json"), io::dump(io::selection_to_json(s.name, r)));
      if (opt.dump_grids) {
        const BevGrid response = models.response
                                     ? netlet::predict_response(*models.response, s.ego_intent, opt.pipeline.grid)
                                     : response_target(opt.pipeline.grid, s.ego_gt_future);
        io::write_text(opt.out / (stem + ".response.json"), io::dump(io::to_json(response)));
        io::write_text(opt.out / (stem + ".distance.json"),
                       io::dump(io::to_json(distance_map(r.stages.front().line, opt.pipeline.grid))));
      }
      plans[i] = plan_path;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  RunSummary summary;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (plans[i]) {
      summary.plans.push_back(*plans[i]);
    } else {
      summary.failures.push_back({files[i], errors[i]});
    }
  }
  return summary;
}

EvalSummary cmd_eval(const EvalOptions& opt) {
  if (opt.plans.empty()) throw Error(ErrorCode::Domain, "eval needs at least one --plans NAME=DIR");
  std::map<std::string, Scenario> scenarios;
  for (const fs::path& f : collect_scenario_files(opt.scenarios)) {
    Scenario s = load_scenario(f);
    scenarios.emplace(s.name, std::move(s));
  }

  EvalSummary summary;
  struct MethodResults {
    std::vector<HorizonValues> l2;
    std::vector<CollisionOutcome> obb, grid;
  };
  std::vector<MethodResults> results(opt.plans.size());
  for (std::size_t m = 0; m < opt.plans.size(); ++m) {
    const fs::path& dir = opt.plans[m].second;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, fmt::format("plan directory '{}' not found", dir.string()));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.size() > 10 && name.ends_with(".plan.json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      try {
        const io::PlanFile plan = io::plan_from_json(io::read_json(f));
        const auto it = scenarios.find(plan.scenario);
        if (it == scenarios.end()) {
          summary.unmatched.push_back(fmt::format("{}: no scenario named '{}'", f.string(), plan.scenario));
          continue;
        }
        const Scenario& s = it->second;
        results[m].l2.push_back(l2_error(plan.plan, s.ego_gt_future));
        results[m].obb.push_back(collision_obb(plan.plan, opt.ego, s.agents));
        results[m].grid.push_back(collision_grid(plan.plan, opt.ego, s.agents));
      } catch (const Error& e) {
        summary.unmatched.push_back(fmt::format("{}: {}", f.string(), e.what()));
      }
    }
  }

  for (CollisionProtocol proto : opt.protocols) {
    std::vector<MetricRow> rows;
    for (std::size_t m = 0; m < opt.plans.size(); ++m) {
      MetricRow row;
      row.method = opt.plans[m].first;
      row.l2 = mean_horizons(results[m].l2);
      row.collision = collision_rate(proto == CollisionProtocol::Obb ? results[m].obb : results[m].grid);
      rows.push_back(row);
    }
    PlanningReport report = aggregate_report(rows, opt.baseline, to_string(proto));
    const std::string base = "report_" + to_string(proto);
    io::write_text(opt.out / (base + ".csv"), report_csv(report));
    io::write_text(opt.out / (base + ".json"), io::dump(io::to_json(report)));
    io::write_text(opt.out / (base + ".txt"), report_text(report));
    summary.reports.push_back(std::move(report));
  }
  return summary;
}

TrainSummary cmd_train_response(const TrainOptions& opt) {
  opt.train.validate();
  std::vector<Scenario> train;
  for (const fs::path& f : collect_scenario_files(opt.inputs)) train.push_back(load_scenario(f));
  for (int k = 0; k < opt.count; ++k)
    train.push_back(gen_scenario(opt.template_id, opt.seed + static_cast<std::uint64_t>(k)));
  std::vector<Scenario> holdout;
  for (const fs::path& f : collect_scenario_files(opt.holdout)) holdout.push_back(load_scenario(f));

  const netlet::TrainResult result = netlet::train_response(train, opt.grid, opt.train);
  TrainSummary summary;
  summary.checkpoint = opt.out / "response.ckpt.json";
  summary.curve = opt.out / "loss.csv";
  io::write_text(summary.checkpoint, io::dump(io::to_json(result.model)));
  io::write_text(summary.curve, io::loss_curve_csv(result.curve));
  io::write_text(opt.out / "loss.svg", svg::loss_curve(result.curve, "response regressor loss"));
  summary.final_train = netlet::evaluate_response(result.model, train, opt.grid, opt.train.w_bce, opt.train.w_l2);
  if (!holdout.empty())
    summary.holdout = netlet::evaluate_response(result.model, holdout, opt.grid, opt.train.w_bce, opt.train.w_l2);
  return summary;
}

std::vector<DenoiseTrial> cmd_denoise(const DenoiseOptions& opt, fs::path* csv_path) {
  if (opt.trials < 0) throw Error(ErrorCode::Domain, "trial count must be non-negative");
  if (opt.groups < 1) throw Error(ErrorCode::Domain, "group count must be at least 1");
  opt.refine.validate();
  std::vector<std::uint64_t> seeds;
  const int scenario_count = (opt.trials + opt.groups - 1) / opt.groups;
  for (int k = 0; k < scenario_count; ++k) seeds.push_back(opt.seed + static_cast<std::uint64_t>(k));
  std::vector<DenoiseTrial> rows = denoise_trials(opt.template_id, seeds, opt.groups, opt.refine);
  rows.resize(static_cast<std::size_t>(opt.trials));
  const fs::path path = opt.out / "denoise.csv";
  io::write_text(path, io::denoise_csv(rows));
  if (csv_path) *csv_path = path;
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

fs::path resolve_out(const std::string& flag, const char* sub) {
  return flag.empty() ? default_output_root() / sub : fs::path(flag);
}

/// Effective options of the running subcommand as a reloadable [section].
void echo_config(const CLI::App& sub, const fs::path& out) {
  io::write_text(out / "effective_config.ini", "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false));
}

bool is_config_error(const Error& e) {
  return e.code() == ErrorCode::Domain || e.code() == ErrorCode::UnknownTemplate;
}

}  // namespace

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sparseplan: ego-centric sparse selection and planning toolkit"};
  app.set_config("--config", "", "INI/TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // gen
  GenOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate scenario files from a template");
  gen_cmd->add_option("template", gen.template_id, "Template id")->required();
  gen_cmd->add_option("count", gen.count, "Number of scenarios")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "First scenario seed")->capture_default_str();
  gen_cmd->add_option("--ego-speed-min", gen.params.ego_speed_min)->capture_default_str();
  gen_cmd->add_option("--ego-speed-max", gen.params.ego_speed_max)->capture_default_str();
  gen_cmd->add_option("--clutter-min", gen.params.clutter_min)->capture_default_str();
  gen_cmd->add_option("--clutter-max", gen.params.clutter_max)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output directory (default $SPARSEPLAN_OUT/gen)");

  // run
  RunOptions run;
  std::string run_out, run_ckpt, agent_source = "predicted";
  PipelineConfig& pc = run.pipeline;
  auto* run_cmd = app.add_subcommand("run", "Run the planning pipeline on scenario files");
  run_cmd->add_option("inputs", run.inputs, "Scenario files or directories")->required();
  run_cmd->add_option("--out", run_out, "Output directory (default $SPARSEPLAN_OUT/run)");
  run_cmd->add_option("--seed", pc.seed, "Root seed for perception noise and parameter init")->capture_default_str();
  run_cmd->add_option("--stages", pc.refine.stages, "Refinement stages")->capture_default_str();
  run_cmd->add_option("--refine-steps", pc.refine.steps, "Descent steps per stage")->capture_default_str();
  run_cmd->add_option("--step-size", pc.refine.step_size)->capture_default_str();
  run_cmd->add_option("--d-safe", pc.refine.d_safe, "Safety distance (m)")->capture_default_str();
  run_cmd->add_option("--w-collision", pc.refine.weights.collision)->capture_default_str();
  run_cmd->add_option("--w-boundary", pc.refine.weights.boundary)->capture_default_str();
  run_cmd->add_option("--w-direction", pc.refine.weights.direction)->capture_default_str();
  run_cmd->add_option("--w-regularizer", pc.refine.weights.regularizer)->capture_default_str();
  run_cmd->add_option("--agent-source", agent_source, "Agent futures in the collision cost")
      ->check(CLI::IsMember({"predicted", "gt"}))
      ->capture_default_str();
  run_cmd->add_option("--tau", pc.tau_ref, "Reference-line threshold")->capture_default_str();
  run_cmd->add_option("--agent-fractions", pc.schedule.agent_fractions, "Per-layer agent keep fractions")
      ->delimiter(',')
      ->capture_default_str();
  run_cmd->add_option("--map-fractions", pc.schedule.map_fractions, "Per-layer map keep fractions")
      ->delimiter(',')
      ->capture_default_str();
  run_cmd->add_option("--channels", run.channels, "Query channels C")->capture_default_str();
  run_cmd->add_option("--cell", pc.grid.cell, "BEV cell size (m)")->capture_default_str();
  run_cmd->add_option("--x-min", pc.grid.x_min)->capture_default_str();
  run_cmd->add_option("--x-max", pc.grid.x_max)->capture_default_str();
  run_cmd->add_option("--y-min", pc.grid.y_min)->capture_default_str();
  run_cmd->add_option("--y-max", pc.grid.y_max)->capture_default_str();
  run_cmd->add_option("--sigma-xy", pc.perception.sigma_xy)->capture_default_str();
  run_cmd->add_option("--sigma-logdim", pc.perception.sigma_logdim)->capture_default_str();
  run_cmd->add_option("--sigma-yaw", pc.perception.sigma_yaw)->capture_default_str();
  run_cmd->add_option("--sigma-v", pc.perception.sigma_v)->capture_default_str();
  run_cmd->add_option("--drop-rate", pc.perception.drop_rate)->capture_default_str();
  run_cmd->add_option("--checkpoint", run_ckpt, "Learned response-map checkpoint (default: ground-truth response)");
  run_cmd->add_option("--workers", run.workers, "Scenario worker threads")->capture_default_str();
  run_cmd->add_flag("--dump-grids", run.dump_grids, "Also write response and distance grids");

  // eval
  EvalOptions eval;
  std::vector<std::string> eval_plans;
  std::vector<std::string> eval_protocols = {"obb", "grid"};
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score plan files against scenario ground truth");
  eval_cmd->add_option("--plans", eval_plans, "NAME=DIR of plan files (repeatable)")->required();
  eval_cmd->add_option("--scenarios", eval.scenarios, "Scenario files or directories")->required();
  eval_cmd->add_option("--protocol", eval_protocols, "Collision protocols")
      ->delimiter(',')
      ->check(CLI::IsMember({"obb", "grid"}))
      ->capture_default_str();
  eval_cmd->add_option("--baseline", eval.baseline, "Method that improvements are measured against");
  eval_cmd->add_option("--ego-length", eval.ego.length)->capture_default_str();
  eval_cmd->add_option("--ego-width", eval.ego.width)->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Output directory (default $SPARSEPLAN_OUT/eval)");

  // train-response
  TrainOptions train;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train-response", "Fit the response-map regressor");
  train_cmd->add_option("inputs", train.inputs, "Scenario files or directories");
  train_cmd->add_option("--template", train.template_id, "Generate training scenarios from this template");
  train_cmd->add_option("--count", train.count, "Generated scenario count")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "First generated scenario seed")->capture_default_str();
  train_cmd->add_option("--holdout", train.holdout, "Held-out scenario files or directories");
  train_cmd->add_option("--lr", train.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--steps", train.train.steps)->capture_default_str();
  train_cmd->add_option("--batch", train.train.batch_size, "Scenarios per step, 0 = all")->capture_default_str();
  train_cmd->add_option("--channels", train.train.channels)->capture_default_str();
  train_cmd->add_option("--w-bce", train.train.w_bce)->capture_default_str();
  train_cmd->add_option("--w-l2", train.train.w_l2)->capture_default_str();
  train_cmd->add_option("--init-seed", train.train.seed, "Parameter initialization seed")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Output directory (default $SPARSEPLAN_OUT/train-response)");

  // denoise
  DenoiseOptions den;
  std::string den_out;
  auto* den_cmd = app.add_subcommand("denoise", "Trajectory noise recovery experiment");
  den_cmd->add_option("--template", den.template_id)->capture_default_str();
  den_cmd->add_option("--trials", den.trials)->capture_default_str();
  den_cmd->add_option("--groups", den.groups)->capture_default_str();
  den_cmd->add_option("--seed", den.seed)->capture_default_str();
  den_cmd->add_option("--refine-steps", den.refine.steps)->capture_default_str();
  den_cmd->add_option("--step-size", den.refine.step_size)->capture_default_str();
  den_cmd->add_option("--out", den_out, "Output directory (default $SPARSEPLAN_OUT/denoise)");

  // plot
  std::string plot_kind, plot_in, plot_out;
  bool plot_run = false;
  std::uint64_t plot_seed = 0;
  auto* plot_cmd = app.add_subcommand("plot", "Render an SVG");
  plot_cmd->add_option("kind", plot_kind, "bev (grid JSON), curve (loss CSV) or scene (scenario JSON)")
      ->required()
      ->check(CLI::IsMember({"bev", "curve", "scene"}));
  plot_cmd->add_option("input", plot_in)->required();
  plot_cmd->add_option("output", plot_out, "SVG path")->required();
  plot_cmd->add_flag("--with-plan", plot_run, "Scene: run the pipeline and overlay plan and selection");
  plot_cmd->add_option("--seed", plot_seed, "Scene: pipeline seed")->capture_default_str();

  // report
  std::string report_in, report_baseline, report_protocol = "obb", report_out;
  auto* report_cmd = app.add_subcommand("report", "Aggregate per-method metric rows into a report");
  report_cmd->add_option("rows", report_in, "CSV: method,l2_1s,l2_2s,l2_3s,col_1s,col_2s,col_3s")->required();
  report_cmd->add_option("--baseline", report_baseline);
  report_cmd->add_option("--protocol", report_protocol, "Label for the collision columns")->capture_default_str();
  report_cmd->add_option("--out", report_out, "Output directory (default $SPARSEPLAN_OUT/report)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadArgs;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.out = resolve_out(gen_out, "gen");
      const auto files = cmd_gen(gen);
      out << fmt::format("wrote {} scenario file(s) to {}\n", files.size(), gen.out.string());
      return kExitOk;
    }
    if (run_cmd->parsed()) {
      run.out = resolve_out(run_out, "run");
      pc.refine.agent_source = agent_source == "gt" ? AgentFutureSource::GroundTruth : AgentFutureSource::Predicted;
      if (!run_ckpt.empty()) run.checkpoint = run_ckpt;
      if (run.workers < 1) throw Error(ErrorCode::Domain, "--workers must be at least 1");
      pc.refine.validate();
      pc.schedule.validate();
      pc.grid.validate();
      echo_config(*run_cmd, run.out);
      const RunSummary s = cmd_run(run);
      for (const auto& f : s.failures) err << fmt::format("error: {}: {}\n", f.input.string(), f.message);
      out << fmt::format("{} plan(s) written to {}, {} failure(s)\n", s.plans.size(), run.out.string(), s.failures.size());
      return s.exit_code();
    }
    if (eval_cmd->parsed()) {
      eval.out = resolve_out(eval_out, "eval");
      for (const auto& spec : eval_plans) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << fmt::format("error: --plans expects NAME=DIR, got '{}'\n", spec);
          return kExitBadArgs;
        }
        eval.plans.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      eval.protocols.clear();
      for (const auto& p : eval_protocols) eval.protocols.push_back(protocol_from_string(p));
      echo_config(*eval_cmd, eval.out);
      const EvalSummary s = cmd_eval(eval);
      for (const auto& u : s.unmatched) err << "skipped: " << u << "\n";
      for (const auto& r : s.reports) out << report_text(r) << "\n";
      return s.exit_code();
    }
    if (train_cmd->parsed()) {
      train.out = resolve_out(train_out, "train-response");
      if (train.count > 0 && train.template_id.empty()) throw Error(ErrorCode::Domain, "--count needs --template");
      echo_config(*train_cmd, train.out);
      const TrainSummary s = cmd_train_response(train);
      out << fmt::format("checkpoint {}\nloss curve {}\ntrain loss: bce {:.6f} l2 {:.6f} total {:.6f}\n",
                         s.checkpoint.string(), s.curve.string(), s.final_train.bce, s.final_train.l2,
                         s.final_train.total);
      if (s.holdout)
        out << fmt::format("held-out loss: bce {:.6f} l2 {:.6f} total {:.6f}\n", s.holdout->bce, s.holdout->l2,
                           s.holdout->total);
      return kExitOk;
    }
    if (den_cmd->parsed()) {
      den.out = resolve_out(den_out, "denoise");
      echo_config(*den_cmd, den.out);
      fs::path csv;
      const auto rows = cmd_denoise(den, &csv);
      std::size_t improved = 0;
      for (const auto& r : rows) improved += r.residual_after < r.residual_before ? 1 : 0;
      out << fmt::format("{} trial(s), residual reduced in {}, written to {}\n", rows.size(), improved, csv.string());
      return kExitOk;
    }
    if (plot_cmd->parsed()) {
      std::string svg_text;
      if (plot_kind == "bev") {
        svg_text = svg::heatmap(io::grid_from_json(io::read_json(plot_in)), fs::path(plot_in).stem().string());
      } else if (plot_kind == "curve") {
        std::vector<netlet::LossSample> curve;
        const std::string text = io::read_text(plot_in);
        std::istringstream lines(text);
        std::string line;
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) {
          if (line.empty()) continue;
          netlet::LossSample s;
          if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &s.step, &s.bce, &s.l2, &s.total) != 4)
            throw Error(ErrorCode::Parse, fmt::format("'{}': malformed loss row '{}'", plot_in, line));
          curve.push_back(s);
        }
        svg_text = svg::loss_curve(curve, fs::path(plot_in).stem().string());
      } else {
        const Scenario s = load_scenario(plot_in);
        if (plot_run) {
          PipelineConfig cfg;
          cfg.seed = plot_seed;
          PipelineModels models;
          models.interaction = make_interaction_params(16, cfg.schedule.layers(), cfg.seed);
          const RefineResult r = iterate_refine(s, cfg, models);
          svg_text = svg::scene(s, &r);
        } else {
          svg_text = svg::scene(s);
        }
      }
      io::write_text(plot_out, svg_text);
      out << "wrote " << plot_out << "\n";
      return kExitOk;
    }
    if (report_cmd->parsed()) {
      const fs::path dir = resolve_out(report_out, "report");
      const auto rows = io::metric_rows_from_csv(io::read_text(report_in));
      const PlanningReport r = aggregate_report(rows, report_baseline, report_protocol);
      io::write_text(dir / "report.csv", report_csv(r));
      io::write_text(dir / "report.json", io::dump(io::to_json(r)));
      io::write_text(dir / "report.txt", report_text(r));
      out << report_text(r);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e) ? kExitBadArgs : kExitPartial;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitBadArgs;
}

}  // namespace sparseplan::cli
