#include "origami/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "origami/env.hpp"
#include "origami/util.hpp"

namespace origami {

namespace fs = std::filesystem;

EnvFactory make_env_factory(const ExperimentConfig& config) {
  const VecX design = config.fixed_design();
  const bool designable = config.co_optimize();
  const ManipulatorParams params = config.manipulator;
  const TaskSpec task = config.task;
  return [params, task, design, designable](int) {
    return std::make_unique<ReachingTask>(params, task, design, designable);
  };
}

std::unique_ptr<PpoTrainer> make_trainer(const ExperimentConfig& config) {
  std::optional<DesignDistribution> design;
  if (config.co_optimize()) design = DesignDistribution(config.manipulator.n_chords(), config.design);
  return std::make_unique<PpoTrainer>(config.train, make_env_factory(config), design);
}

void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "short write to '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot rename '" + tmp + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string checkpoint_bytes(const ExperimentConfig& config, const PpoTrainer& trainer) {
  BinaryWriter w;
  w.raw(std::string(kCheckpointMagic, 8));
  w.u8(kCheckpointVersion);
  w.u64(config.hash());
  // Only settings that shape the results are embedded, so the same run
  // written to a different directory or with more workers is byte-identical.
  ExperimentConfig embedded = config;
  embedded.run = RunOptions{};
  embedded.run.seed = config.run.seed;
  w.str(embedded.to_text());
  trainer.save(w);
  return w.bytes();
}

void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const PpoTrainer& trainer) {
  write_atomic(path, checkpoint_bytes(config, trainer));
}

namespace {

struct Header {
  std::uint64_t hash;
  std::string config_text;
};

Header read_header(BinaryReader& r, const std::string& path) {
  if (r.take(8) != std::string(kCheckpointMagic, 8)) {
    throw Error(ErrorKind::kCheckpoint, "'" + path + "' is not a checkpoint");
  }
  const int version = r.u8();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint version " + std::to_string(version) +
                                            " is not supported (expected " +
                                            std::to_string(kCheckpointVersion) + ")");
  }
  Header h;
  h.hash = r.u64();
  h.config_text = r.str();
  return h;
}

}  // namespace

ExperimentConfig checkpoint_config(const std::string& path) {
  BinaryReader r(read_file(path));
  const Header h = read_header(r, path);
  return ExperimentConfig::from_map(ConfigMap::parse(h.config_text, path + " (embedded)"));
}

void load_checkpoint(const std::string& path, const ExperimentConfig& config,
                     PpoTrainer& trainer) {
  BinaryReader r(read_file(path));
  const Header h = read_header(r, path);
  if (h.hash != config.hash()) {
    throw Error(ErrorKind::kCheckpoint,
                "checkpoint '" + path + "' was written with a different configuration");
  }
  trainer.load(r);
  if (!r.at_end()) throw Error(ErrorKind::kCheckpoint, "trailing bytes in '" + path + "'");
}

std::string train_log_header() {
  return "iteration,timesteps,episodes,mean_return,mean_length,success_rate,collision_rate,"
         "failure_rate,mean_final_distance,clip_fraction,approx_kl,entropy,entropy_coef,"
         "learning_rate,policy_loss,value_loss,explained_variance";
}

std::string train_log_row(const IterationStats& s) {
  return csv_row({std::to_string(s.iteration), std::to_string(s.timesteps),
                  std::to_string(s.episodes), fmt9(s.mean_return), fmt9(s.mean_length),
                  fmt9(s.success_rate), fmt9(s.collision_rate), fmt9(s.failure_rate),
                  fmt9(s.mean_final_distance), fmt9(s.clip_fraction), fmt9(s.approx_kl),
                  fmt9(s.entropy), fmt9(s.entropy_coef), fmt9(s.learning_rate),
                  fmt9(s.policy_loss), fmt9(s.value_loss), fmt9(s.explained_variance)});
}

std::string design_log_header(int dim) {
  std::string h = "iteration";
  for (int i = 0; i < dim; ++i) h += ",mu" + std::to_string(i + 1);
  for (int i = 0; i < dim; ++i) h += ",sigma" + std::to_string(i + 1);
  return h + ",best_return,mean_return,batch";
}

std::string design_log_row(const IterationStats& s, const DesignDistribution& d) {
  std::vector<std::string> f{std::to_string(s.iteration)};
  for (int i = 0; i < d.dim(); ++i) f.push_back(fmt9(d.mu()[i]));
  for (int i = 0; i < d.dim(); ++i) f.push_back(fmt9(d.sigma()[i]));
  f.push_back(fmt9(s.best_return));
  f.push_back(fmt9(s.mean_return));
  f.push_back(std::to_string(s.design_batch));
  return csv_row(f);
}

namespace {

// Keeps the header and rows whose leading iteration is <= last, so logs line
// up with the checkpoint after an interrupted run.
void truncate_log(const std::string& path, int last) {
  if (!fs::exists(path)) return;
  std::istringstream in(read_file(path));
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    if (std::stoi(line.substr(0, line.find(','))) <= last) kept += line + "\n";
  }
  write_atomic(path, kept);
}

}  // namespace

TrainOutcome run_train(const ExperimentConfig& config, const TrainOptions& options) {
  fs::create_directories(config.run.out);
  const std::string dir = config.run.out;
  const std::string ckpt = (fs::path(dir) / "checkpoint.bin").string();
  const std::string train_log = (fs::path(dir) / "train_log.csv").string();
  const std::string design_log = (fs::path(dir) / "design_log.csv").string();

  auto trainer = make_trainer(config);
  if (options.resume) {
    load_checkpoint(ckpt, config, *trainer);
    truncate_log(train_log, trainer->iteration());
    truncate_log(design_log, trainer->iteration());
  } else {
    write_atomic((fs::path(dir) / "config.txt").string(), config.to_text());
    write_atomic(train_log, train_log_header() + "\n");
    if (trainer->design()) {
      write_atomic(design_log, design_log_header(trainer->design()->dim()) + "\n");
    }
  }

  std::ofstream tlog(train_log, std::ios::app);
  std::ofstream dlog;
  if (trainer->design()) dlog.open(design_log, std::ios::app);

  TrainOutcome out;
  out.checkpoint_path = ckpt;
  int done = 0;
  while (!trainer->finished() && (!options.max_iterations || done < *options.max_iterations)) {
    const IterationStats s = trainer->iterate();
    ++done;
    out.iterations.push_back(s);
    tlog << train_log_row(s) << "\n";
    tlog.flush();
    if (trainer->design()) {
      dlog << design_log_row(s, *trainer->design()) << "\n";
      dlog.flush();
    }
    if (options.on_iteration) options.on_iteration(s);
    if (config.run.checkpoint_every > 0 && s.iteration % config.run.checkpoint_every == 0) {
      save_checkpoint(ckpt, config, *trainer);
    }
  }
  save_checkpoint(ckpt, config, *trainer);
  out.finished = trainer->finished();
  return out;
}

EvalOutcome evaluate(const ExperimentConfig& config, const PpoTrainer& trainer) {
  EvalOutcome out;
  out.design = trainer.design() ? trainer.design()->mode() : config.fixed_design();
  ReachingEnv env(config.manipulator, config.task);
  VecX obs = env.reset(out.design);
  const double scale = config.task.action_bound;
  for (;;) {
    const VecX mean = trainer.model().policy(trainer.normalize(obs)).mean;
    const StepResult s = env.step(scale * Vec3(mean[0], mean[1], mean[2]));
    out.trace.push_back(trace_record(env.step_index(), s));
    out.summary.total_return += s.reward;
    ++out.summary.length;
    out.summary.final_distance = s.info.distance;
    out.summary.success = out.summary.success || s.info.success;
    out.summary.collision = out.summary.collision || s.info.collision;
    out.summary.failure = out.summary.failure || s.info.solver_failure;
    if (s.terminated || s.truncated) break;
    obs = s.observation;
  }
  return out;
}

}  // namespace origami
