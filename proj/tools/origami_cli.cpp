#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "origami/config.hpp"
#include "origami/env.hpp"
#include "origami/experiment.hpp"
#include "origami/kinematics.hpp"
#include "origami/util.hpp"

namespace fs = std::filesystem;
using namespace origami;
using json = nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::string task;
  std::string fixed_stiffness;
  std::vector<std::string> params;  // key=value
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "worker threads");
  cmd->add_option("--param,-p", f.params, "override a config key: key=value");
}

// defaults < config file < ORIGAMI_* environment < command-line flags
ConfigMap layered(const CommonFlags& f, const ConfigMap& base) {
  ConfigMap map = base;
  if (!f.config_path.empty()) map.merge(ConfigMap::load_file(f.config_path));
  map.apply_environment();
  if (f.seed) map.set("run.seed", std::to_string(*f.seed), "--seed");
  if (!f.out.empty()) map.set("run.out", f.out, "--out");
  if (f.workers) map.set("run.workers", std::to_string(*f.workers), "--workers");
  if (!f.task.empty()) map.set("task.name", f.task, "--task");
  if (!f.fixed_stiffness.empty()) {
    map.set("design.fixed_stiffness", f.fixed_stiffness, "--fixed-stiffness");
  }
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig, "--param expects key=value, got '" + kv + "'");
    }
    map.set(kv.substr(0, eq), kv.substr(eq + 1), "--param " + kv.substr(0, eq));
  }
  return map;
}

ExperimentConfig load_config(const CommonFlags& f) {
  return ExperimentConfig::from_map(layered(f, ConfigMap{}));
}

std::string out_path(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.run.out);
  return (fs::path(c.run.out) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  return out;
}

json vec_json(const VecX& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json vec3_json(const Vec3& v) { return {v[0], v[1], v[2]}; }

// A set name, or a literal vector of 3N numbers.
VecX stiffness_arg(const ExperimentConfig& c, const std::string& set, const std::string& fallback) {
  return c.resolve_stiffness(set.empty() ? fallback : set);
}

int cmd_forward(const CommonFlags& f, const std::string& d_text, const std::string& set,
                const std::string& json_path) {
  const ExperimentConfig c = load_config(f);
  const auto d = parse_number_list(d_text);
  if (d.size() != 3) throw Error(ErrorKind::kInvalidArgument, "--d needs 3 values");
  const VecX s = stiffness_arg(c, set, c.trajectory_set);
  const TendonCommand cmd(d[0], d[1], d[2]);
  ShapeSolution sol;
  try {
    sol = solve_forward(cmd, s, c.manipulator, nullptr, c.solver);
  } catch (const Error& e) {
    std::fprintf(stderr, "forward: %s\n", e.what());
    return 2;
  }
  std::printf("tip      %s %s %s\n", fmt9(sol.tip[0]).c_str(), fmt9(sol.tip[1]).c_str(),
              fmt9(sol.tip[2]).c_str());
  std::printf("energy   %s\n", fmt9(sol.energy).c_str());
  std::printf("tensions %s %s %s\n", fmt9(sol.tensions[0]).c_str(),
              fmt9(sol.tensions[1]).c_str(), fmt9(sol.tensions[2]).c_str());
  std::printf("slacks   %s %s %s\n", fmt9(sol.slacks[0]).c_str(), fmt9(sol.slacks[1]).c_str(),
              fmt9(sol.slacks[2]).c_str());
  std::printf("chords  ");
  for (int i = 0; i < sol.chords.size(); ++i) std::printf(" %s", fmt9(sol.chords[i]).c_str());
  std::printf("\niterations %d\n", sol.iterations);
  if (!json_path.empty()) {
    json j;
    j["command"] = vec3_json(cmd);
    j["stiffness"] = vec_json(s);
    j["tip"] = vec3_json(sol.tip);
    j["energy"] = sol.energy;
    j["objective"] = sol.objective;
    j["tensions"] = vec3_json(sol.tensions);
    j["slacks"] = vec3_json(sol.slacks);
    j["chords"] = vec_json(sol.chords);
    j["converged"] = sol.converged;
    open_out(json_path) << j.dump(2) << "\n";
  }
  return sol.converged ? 0 : 2;
}

int cmd_trajectory(const CommonFlags& f, const std::string& set) {
  const ExperimentConfig c = load_config(f);
  const std::string name = set.empty() ? c.trajectory_set : set;
  const VecX s = c.resolve_stiffness(name);
  ActuationSchedule schedule;
  schedule.samples = c.schedule_samples;
  const TrajectoryResult traj = demo_trajectory(s, schedule, c.manipulator, c.solver);
  const bool named = !name.empty() && std::isalpha(static_cast<unsigned char>(name[0]));
  const std::string path = out_path(c, "trajectory_" + (named ? name : std::string("custom")) + ".csv");
  auto out = open_out(path);
  write_trajectory_csv(out, traj);
  const Vec3 tip = traj.solutions.back().tip;
  std::printf("%s: %zu samples, final tip %s %s %s -> %s\n", name.c_str(), traj.times.size(),
              fmt9(tip[0]).c_str(), fmt9(tip[1]).c_str(), fmt9(tip[2]).c_str(), path.c_str());
  return 0;
}

int cmd_workspace(const CommonFlags& f, const std::vector<std::string>& sets_flag) {
  const ExperimentConfig c = load_config(f);
  const auto sets = sets_flag.empty() ? c.workspace_sets : sets_flag;
  std::vector<WorkspaceCloud> clouds;
  for (const auto& name : sets) {
    const VecX s = c.resolve_stiffness(name);
    clouds.push_back(sample_workspace(s, c.workspace_samples, c.run.seed, c.manipulator,
                                      c.run.workers));
    const std::string path = out_path(c, "workspace_" + name + ".csv");
    auto out = open_out(path);
    write_workspace_csv(out, clouds.back());
    std::printf("%s: %zu/%d converged -> %s\n", name.c_str(), clouds.back().points.size(),
                c.workspace_samples, path.c_str());
  }
  for (size_t i = 0; i < clouds.size(); ++i) {
    for (size_t j = i + 1; j < clouds.size(); ++j) {
      const VoxelComparison v =
          workspace_compare(clouds[i].points, clouds[j].points, c.workspace_voxel);
      std::printf("%s vs %s: voxels %lld / %lld, union %lld, intersection %lld, "
                  "symmetric difference %lld (%.4f of union)\n",
                  sets[i].c_str(), sets[j].c_str(), static_cast<long long>(v.count_a),
                  static_cast<long long>(v.count_b), static_cast<long long>(v.union_count),
                  static_cast<long long>(v.intersection),
                  static_cast<long long>(v.symmetric_difference), v.difference_fraction());
    }
  }
  return 0;
}

int cmd_train(const CommonFlags& f, std::optional<int> iterations, bool resume) {
  const ExperimentConfig c = load_config(f);
  TrainOptions opt;
  opt.resume = resume;
  opt.max_iterations = iterations;
  opt.on_iteration = [](const IterationStats& s) {
    std::printf("iter %4d  steps %8lld  return %9.3f  success %.3f  collision %.3f  dist %7.2f\n",
                s.iteration, static_cast<long long>(s.timesteps), s.mean_return, s.success_rate,
                s.collision_rate, s.mean_final_distance);
    std::fflush(stdout);
  };
  const TrainOutcome out = run_train(c, opt);
  std::printf("checkpoint %s (%s)\n", out.checkpoint_path.c_str(),
              out.finished ? "budget reached" : "stopped early");
  return 0;
}

ExperimentConfig config_for_checkpoint(const CommonFlags& f, const std::string& ckpt) {
  // The embedded config is the base layer; any overrides must leave the
  // result-relevant settings unchanged or loading fails on the hash.
  const ExperimentConfig stored = checkpoint_config(ckpt);
  return ExperimentConfig::from_map(
      layered(f, ConfigMap::parse(stored.to_text(), ckpt + " (embedded)")));
}

std::string checkpoint_arg(const CommonFlags& f, const std::string& ckpt) {
  if (!ckpt.empty()) return ckpt;
  return (fs::path(f.out.empty() ? "out" : f.out) / "checkpoint.bin").string();
}

int cmd_eval(const CommonFlags& f, const std::string& ckpt_flag) {
  const std::string ckpt = checkpoint_arg(f, ckpt_flag);
  const ExperimentConfig c = config_for_checkpoint(f, ckpt);
  auto trainer = make_trainer(c);
  load_checkpoint(ckpt, c, *trainer);
  const EvalOutcome e = evaluate(c, *trainer);
  const std::string path = out_path(c, "eval_trace.jsonl");
  auto out = open_out(path);
  for (const auto& line : e.trace) out << line << "\n";
  json verdict;
  verdict["success"] = e.summary.success;
  verdict["collision"] = e.summary.collision;
  verdict["solver_failure"] = e.summary.failure;
  verdict["final_distance"] = e.summary.final_distance;
  verdict["steps"] = e.summary.length;
  verdict["return"] = e.summary.total_return;
  verdict["design"] = vec_json(e.design);
  verdict["iteration"] = trainer->iteration();
  verdict["trace"] = path;
  std::printf("%s\n", verdict.dump().c_str());
  return 0;
}

int cmd_export(const CommonFlags& f, const std::string& ckpt_flag) {
  const std::string ckpt = checkpoint_arg(f, ckpt_flag);
  const ExperimentConfig c = config_for_checkpoint(f, ckpt);
  auto trainer = make_trainer(c);
  load_checkpoint(ckpt, c, *trainer);
  json j;
  j["config"] = c.to_text();
  j["iteration"] = trainer->iteration();
  j["timesteps"] = trainer->timesteps();
  j["observation_size"] = trainer->model().obs_dim();
  j["action_size"] = trainer->model().act_dim();
  j["hidden"] = trainer->model().hidden();
  j["parameters"] = vec_json(trainer->model().parameters());
  j["obs_mean"] = vec_json(trainer->obs_normalizer().stats().mean());
  j["obs_var"] = vec_json(trainer->obs_normalizer().stats().var());
  if (trainer->design()) {
    j["design_mu"] = vec_json(trainer->design()->mu());
    j["design_sigma"] = vec_json(trainer->design()->sigma());
    j["design_mode"] = vec_json(trainer->design()->mode());
  } else {
    j["design_mode"] = vec_json(c.fixed_design());
  }
  const std::string path = out_path(c, "policy.json");
  open_out(path) << j.dump(1) << "\n";
  std::printf("%s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"origami: tendon-driven origami manipulator simulation and co-optimization"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* forward = app.add_subcommand("forward", "solve one equilibrium shape");
  add_common(forward, flags);
  std::string d_text, set, json_path;
  forward->add_option("--d", d_text, "tendon displacements d1,d2,d3 (mm)")->required();
  forward->add_option("--set", set, "stiffness set name or 3N values");
  forward->add_option("--json", json_path, "also write the solution as JSON");

  auto* trajectory = app.add_subcommand("trajectory", "solve the fixed actuation schedule");
  add_common(trajectory, flags);
  trajectory->add_option("--set", set, "stiffness set name or 3N values");

  auto* workspace = app.add_subcommand("workspace", "sample and compare reachable workspaces");
  add_common(workspace, flags);
  std::vector<std::string> sets;
  workspace->add_option("--set", sets, "stiffness sets to sample (repeatable)");

  auto* train = app.add_subcommand("train", "train a policy (co-optimizing stiffness by default)");
  add_common(train, flags);
  std::optional<int> iterations;
  bool resume = false;
  train->add_option("--task", flags.task, "one-obstacle | two-obstacles | free");
  train->add_option("--fixed-stiffness", flags.fixed_stiffness, "train with a fixed design");
  train->add_option("--iterations", iterations, "stop after this many iterations");
  train->add_flag("--resume", resume, "continue from <out>/checkpoint.bin");

  std::string ckpt;
  auto* eval = app.add_subcommand("eval", "deterministic rollout of a checkpoint");
  add_common(eval, flags);
  eval->add_option("--checkpoint", ckpt, "checkpoint file (default <out>/checkpoint.bin)");

  auto* exp = app.add_subcommand("export", "write checkpoint contents as JSON");
  add_common(exp, flags);
  exp->add_option("--checkpoint", ckpt, "checkpoint file (default <out>/checkpoint.bin)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*forward) return cmd_forward(flags, d_text, set, json_path);
    if (*trajectory) return cmd_trajectory(flags, set);
    if (*workspace) return cmd_workspace(flags, sets);
    if (*train) return cmd_train(flags, iterations, resume);
    if (*eval) return cmd_eval(flags, ckpt);
    if (*exp) return cmd_export(flags, ckpt);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::kConfig ? 3 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
