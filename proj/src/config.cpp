#include "origami/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "origami/kinematics.hpp"
#include "origami/serialize.hpp"

extern char** environ;

namespace origami {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string obstacles_text(const std::vector<ObstacleRect>& obs) {
  std::vector<std::string> parts;
  for (const auto& o : obs) {
    parts.push_back(exact(o.plane_x) + " " + exact(o.y_min) + " " + exact(o.y_max) + " " +
                    exact(o.z_min) + " " + exact(o.z_max));
  }
  return join(parts, "; ");
}

std::vector<ObstacleRect> parse_obstacles(const std::string& s) {
  std::vector<ObstacleRect> out;
  for (const auto& part : split(s, ';')) {
    const auto v = parse_number_list(part);
    if (v.size() != 5) {
      throw std::invalid_argument("obstacle needs 5 numbers (x y_min y_max z_min z_max)");
    }
    ObstacleRect r;
    r.plane_x = v[0];
    r.y_min = v[1];
    r.y_max = v[2];
    r.z_min = v[3];
    r.z_max = v[4];
    out.push_back(r);
  }
  return out;
}

struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
  bool affects_results = true;
};

std::vector<Binding> bindings(ExperimentConfig& c) {
  std::vector<Binding> b;
  auto num = [&](const std::string& key, double* f, bool results = true) {
    b.push_back({key, [f](const std::string& s) { *f = parse_double(s); },
                 [f] { return exact(*f); }, results});
  };
  auto integer = [&](const std::string& key, auto* f, bool results = true) {
    using T = std::remove_pointer_t<decltype(f)>;
    b.push_back({key, [f](const std::string& s) { *f = static_cast<T>(parse_int(s)); },
                 [f] { return std::to_string(*f); }, results});
  };
  auto flag = [&](const std::string& key, bool* f) {
    b.push_back({key, [f](const std::string& s) { *f = parse_bool(s); },
                 [f] { return std::string(*f ? "true" : "false"); }, true});
  };
  auto text = [&](const std::string& key, std::string* f, bool results = true) {
    b.push_back({key, [f](const std::string& s) { *f = trim(s); }, [f] { return *f; }, results});
  };

  ManipulatorParams& m = c.manipulator;
  integer("manipulator.n_modules", &m.n_modules);
  num("manipulator.plate_circumradius", &m.plate_circumradius);
  num("manipulator.vertical_link_length", &m.vertical_link_length);
  num("manipulator.spherical_stiffness", &m.spherical_stiffness);
  num("manipulator.force_limit", &m.force_limit);
  num("manipulator.stiffness_min", &m.stiffness_min);
  num("manipulator.stiffness_max", &m.stiffness_max);
  num("manipulator.chord_floor_factor", &m.chord_floor_factor);
  b.push_back({"manipulator.chirality",
               [&m](const std::string& s) {
                 const std::string t = trim(s);
                 if (t == "next-bottom") m.chirality = Chirality::kNextBottom;
                 else if (t == "next-top") m.chirality = Chirality::kNextTop;
                 else throw std::invalid_argument("expected next-bottom or next-top");
               },
               [&m] {
                 return std::string(m.chirality == Chirality::kNextBottom ? "next-bottom"
                                                                          : "next-top");
               },
               true});

  num("solver.stationarity_tolerance", &c.solver.stationarity_tolerance);
  num("solver.step_tolerance", &c.solver.step_tolerance);
  integer("solver.max_iterations", &c.solver.max_iterations);
  num("solver.tension_step", &c.solver.tension_step);

  // task.name is applied before the other task keys (see from_map).
  b.push_back({"task.name",
               [&c](const std::string& s) {
                 c.task_name = trim(s);
                 c.task = make_task(c.task_name);
               },
               [&c] { return c.task_name; }, true});
  b.push_back({"task.goal",
               [&c](const std::string& s) {
                 const auto v = parse_number_list(s);
                 if (v.size() != 3) throw std::invalid_argument("goal needs 3 numbers");
                 c.task.goal = Vec3(v[0], v[1], v[2]);
               },
               [&c] {
                 return exact(c.task.goal[0]) + ", " + exact(c.task.goal[1]) + ", " +
                        exact(c.task.goal[2]);
               },
               true});
  b.push_back({"task.obstacles",
               [&c](const std::string& s) { c.task.obstacles = parse_obstacles(s); },
               [&c] { return obstacles_text(c.task.obstacles); }, true});
  num("task.success_threshold", &c.task.success_threshold);
  num("task.reward_collision", &c.task.reward.collision);
  num("task.reward_success", &c.task.reward.success);
  num("task.reward_distance", &c.task.reward.distance);
  integer("task.horizon", &c.task.horizon);
  num("task.action_bound", &c.task.action_bound);
  flag("task.collision_terminates", &c.task.collision_terminates);

  TrainConfig& t = c.train;
  integer("train.total_timesteps", &t.total_timesteps);
  integer("train.steps_per_iteration", &t.steps_per_iteration);
  integer("train.n_envs", &t.n_envs);
  integer("train.minibatch_size", &t.minibatch_size);
  integer("train.epochs", &t.epochs);
  num("train.clip", &t.clip);
  num("train.value_clip", &t.value_clip);
  num("train.gamma", &t.gamma);
  num("train.gae_lambda", &t.gae_lambda);
  num("train.entropy_start", &t.entropy_start);
  num("train.entropy_end", &t.entropy_end);
  num("train.lr_start", &t.lr_start);
  num("train.lr_end", &t.lr_end);
  num("train.value_coef", &t.value_coef);
  num("train.max_grad_norm", &t.max_grad_norm);
  flag("train.normalize_obs", &t.normalize_obs);
  flag("train.normalize_reward", &t.normalize_reward);
  num("train.obs_clip", &t.obs_clip);
  num("train.reward_clip", &t.reward_clip);
  integer("train.hidden", &t.hidden);

  DesignConfig& d = c.design;
  num("design.mu_init", &d.mu_init);
  num("design.sigma_init", &d.sigma_init);
  num("design.sigma_floor", &d.sigma_floor);
  num("design.lr_mu", &d.lr_mu);
  num("design.lr_sigma", &d.lr_sigma);
  text("design.fixed_stiffness", &c.fixed_stiffness);

  integer("kinematics.schedule_samples", &c.schedule_samples);
  text("kinematics.trajectory_set", &c.trajectory_set);
  integer("workspace.samples", &c.workspace_samples);
  num("workspace.voxel", &c.workspace_voxel);
  b.push_back({"workspace.sets",
               [&c](const std::string& s) { c.workspace_sets = split(s, ','); },
               [&c] { return join(c.workspace_sets, ", "); }, true});

  b.push_back({"run.seed", [&c](const std::string& s) {
                 c.run.seed = static_cast<std::uint64_t>(parse_int(s));
               },
               [&c] { return std::to_string(c.run.seed); }, true});
  integer("run.workers", &c.run.workers, false);
  text("run.out", &c.run.out, false);
  integer("run.checkpoint_every", &c.run.checkpoint_every, false);
  return b;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string cleaned = text;
  for (char& ch : cleaned) {
    if (ch == ',' || ch == '[' || ch == ']') ch = ' ';
  }
  std::istringstream is(cleaned);
  std::string tok;
  while (is >> tok) out.push_back(parse_double(tok));
  return out;
}

ConfigMap ConfigMap::parse(const std::string& text, const std::string& source) {
  ConfigMap map;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig, where + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || key.find(' ') != std::string::npos) {
      throw Error(ErrorKind::kConfig, where + ": malformed key '" + key + "'");
    }
    map.set(key, trim(line.substr(eq + 1)), where);
  }
  return map;
}

ConfigMap ConfigMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void ConfigMap::set(const std::string& key, const std::string& value,
                    const std::string& origin) {
  entries_[key] = Entry{value, origin};
}

void ConfigMap::merge(const ConfigMap& other) {
  for (const auto& [k, e] : other.entries_) entries_[k] = e;
}

void ConfigMap::apply_environment(const std::string& prefix) {
  for (char** env = environ; env && *env; ++env) {
    const std::string kv = *env;
    if (kv.rfind(prefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string name = kv.substr(prefix.size(), eq - prefix.size());
    std::string key;
    for (size_t i = 0; i < name.size(); ++i) {
      if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(name[i])));
      }
    }
    set(key, kv.substr(eq + 1), "env " + kv.substr(0, eq));
  }
}

const ConfigMap::Entry& ConfigMap::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorKind::kConfig, "missing key '" + key + "'");
  return it->second;
}

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& map) {
  ExperimentConfig c;
  auto table = bindings(c);
  auto apply = [&](const Binding& b) {
    if (!map.has(b.key)) return;
    const auto& e = map.at(b.key);
    try {
      b.set(e.value);
    } catch (const std::exception& ex) {
      throw Error(ErrorKind::kConfig, e.origin + ": key '" + b.key + "': " + ex.what());
    }
  };
  for (const auto& [key, e] : map.entries()) {
    bool known = false;
    for (const auto& b : table) known = known || b.key == key;
    if (!known) throw Error(ErrorKind::kConfig, e.origin + ": unknown key '" + key + "'");
  }
  for (const auto& b : table) {
    if (b.key == "task.name") apply(b);
  }
  for (const auto& b : table) {
    if (b.key != "task.name") apply(b);
  }
  // The design bounds always follow the manipulator's stiffness range.
  c.design.s_min = c.manipulator.stiffness_min;
  c.design.s_max = c.manipulator.stiffness_max;
  c.train.seed = c.run.seed;
  c.train.workers = c.run.workers;
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, std::string(e.what()));
  }
  return c;
}

VecX ExperimentConfig::resolve_stiffness(const std::string& spec) const {
  const int n = manipulator.n_chords();
  const std::string t = trim(spec);
  VecX s;
  if (!t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])))) {
    s = named_stiffness(t, n);
  } else {
    const auto v = parse_number_list(t);
    if (static_cast<int>(v.size()) != n) {
      throw Error(ErrorKind::kConfig,
                  "stiffness vector has " + std::to_string(v.size()) +
                      " entries but 3N = " + std::to_string(n));
    }
    s = Eigen::Map<const VecX>(v.data(), n);
  }
  validate_stiffness(s, manipulator);
  return s;
}

VecX ExperimentConfig::fixed_design() const {
  if (co_optimize()) {
    return VecX::Constant(manipulator.n_chords(), design.mu_init)
        .cwiseMax(manipulator.stiffness_min)
        .cwiseMin(manipulator.stiffness_max);
  }
  return resolve_stiffness(fixed_stiffness);
}

void ExperimentConfig::validate() const {
  manipulator.validate();
  task.validate();
  train.validate();
  if (!(design.sigma_floor > 0.0) || !(design.sigma_init > 0.0)) {
    throw Error(ErrorKind::kConfig, "design.sigma_floor and design.sigma_init must be > 0");
  }
  if (schedule_samples < 1) throw Error(ErrorKind::kConfig, "kinematics.schedule_samples must be >= 1");
  if (workspace_samples < 1) throw Error(ErrorKind::kConfig, "workspace.samples must be >= 1");
  if (!(workspace_voxel > 0.0)) throw Error(ErrorKind::kConfig, "workspace.voxel must be > 0");
  if (run.workers < 1) throw Error(ErrorKind::kConfig, "run.workers must be >= 1");
  if (!co_optimize()) resolve_stiffness(fixed_stiffness);
}

std::string ExperimentConfig::to_text() const {
  ExperimentConfig copy = *this;
  auto table = bindings(copy);
  std::vector<std::string> lines;
  for (const auto& b : table) lines.push_back(b.key + " = " + b.get());
  std::sort(lines.begin(), lines.end());
  return join(lines, "\n") + "\n";
}

std::uint64_t ExperimentConfig::hash() const {
  ExperimentConfig copy = *this;
  auto table = bindings(copy);
  std::string canon;
  for (const auto& b : table) {
    if (b.affects_results) canon += b.key + "=" + b.get() + "\n";
  }
  return fnv1a64(canon);
}

}  // namespace origami
