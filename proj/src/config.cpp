#include "mifprop/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mifprop {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (used != v.size()) bad_value(key, v);
  return x;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int x{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v);
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int<std::size_t>(key, trim(item)));
  if (out.size() < 2) bad_value(key, v);
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fmt_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

struct Key {
  const char* name;
  const char* doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MIFPROP_DOUBLE_KEY(NAME, DOC, FIELD)                                                   \
  Key {                                                                                         \
    NAME, DOC, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.FIELD); }                                  \
  }
#define MIFPROP_SIZE_KEY(NAME, DOC, FIELD)                                                     \
  Key {                                                                                         \
    NAME, DOC,                                                                                  \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_int<std::size_t>(NAME, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define MIFPROP_INT_KEY(NAME, DOC, FIELD)                                                      \
  Key {                                                                                         \
    NAME, DOC, [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_int<int>(NAME, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define MIFPROP_SCHEDULE_KEY(NAME, DOC, FIELD)                                                 \
  Key {                                                                                         \
    NAME, DOC,                                                                                  \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = SpikeSchedule::parse(v); },   \
        [](const ExperimentConfig& c) { return c.FIELD.to_string(); }                           \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"dataset.dir", "directory holding the IDX files; empty uses $MIFPROP_DATA_DIR",
       [](ExperimentConfig& c, const std::string& v) { c.data_dir = v; },
       [](const ExperimentConfig& c) { return c.data_dir; }},
      {"dataset.name", "mnist | fashion-mnist (same IDX layout)",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "mnist" && v != "fashion-mnist") bad_value("dataset.name", v);
         c.dataset_name = v;
       },
       [](const ExperimentConfig& c) { return c.dataset_name; }},
      MIFPROP_SIZE_KEY("dataset.train_limit", "use the first N training samples (0 = all)", train_limit),
      MIFPROP_SIZE_KEY("dataset.test_limit", "use the first N test samples (0 = all)", test_limit),
      {"arch.widths", "layer widths: input,hidden...,MIF outputs",
       [](ExperimentConfig& c, const std::string& v) { c.widths = to_widths("arch.widths", v); },
       [](const ExperimentConfig& c) { return fmt_widths(c.widths); }},
      MIFPROP_DOUBLE_KEY("mif.e_rest", "mV", mif.e_rest),
      MIFPROP_DOUBLE_KEY("mif.e_reset", "mV", mif.e_reset),
      MIFPROP_DOUBLE_KEY("mif.c", "per-step membrane divisor", mif.c),
      MIFPROP_DOUBLE_KEY("mif.k_th", "mV", mif.k_th),
      MIFPROP_DOUBLE_KEY("mif.v_on1", "mV", mif.v_on1),
      MIFPROP_DOUBLE_KEY("mif.v_on2", "mV", mif.v_on2),
      MIFPROP_DOUBLE_KEY("mif.v_off1", "mV", mif.v_off1),
      MIFPROP_DOUBLE_KEY("mif.v_off2", "mV", mif.v_off2),
      MIFPROP_DOUBLE_KEY("mif.r_on1", "kOhm", mif.r_on1),
      MIFPROP_DOUBLE_KEY("mif.r_on2", "kOhm", mif.r_on2),
      MIFPROP_DOUBLE_KEY("mif.r_off1", "kOhm", mif.r_off1),
      MIFPROP_DOUBLE_KEY("mif.r_off2", "kOhm", mif.r_off2),
      MIFPROP_DOUBLE_KEY("mif.tau1", "steps", mif.tau1),
      MIFPROP_DOUBLE_KEY("mif.tau2", "steps", mif.tau2),
      MIFPROP_DOUBLE_KEY("mif.tau_syn", "steps", mif.tau_syn),
      {"mif.literal_g2", "G2 = x1/R_on2 + (1-x2)/R_off2 instead of the symmetric form",
       [](ExperimentConfig& c, const std::string& v) { c.mif.literal_g2 = to_bool("mif.literal_g2", v); },
       [](const ExperimentConfig& c) { return std::string(c.mif.literal_g2 ? "true" : "false"); }},
      MIFPROP_INT_KEY("sim.t_total", "steps simulated per sample", t_total),
      MIFPROP_SCHEDULE_KEY("sim.injections", "input injection steps, step[:scale],...", schedule),
      MIFPROP_SIZE_KEY("train.batch_size", "samples per iteration", batch_size),
      MIFPROP_SIZE_KEY("train.epochs", "passes over the training set", epochs),
      MIFPROP_DOUBLE_KEY("train.lr", "Adam learning rate", adam.lr),
      MIFPROP_DOUBLE_KEY("train.beta1", "Adam first-moment decay", adam.beta1),
      MIFPROP_DOUBLE_KEY("train.beta2", "Adam second-moment decay", adam.beta2),
      MIFPROP_DOUBLE_KEY("train.eps", "Adam epsilon", adam.eps),
      {"train.seed", "seed for weight init and batch shuffling",
       [](ExperimentConfig& c, const std::string& v) { c.seed = to_int<std::uint64_t>("train.seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      MIFPROP_SIZE_KEY("train.metrics_every", "iterations between metrics rows", metrics_every),
      MIFPROP_SIZE_KEY("train.checkpoint_every", "iterations between checkpoints (0 = per epoch)",
                       checkpoint_every),
      MIFPROP_SIZE_KEY("train.eval_limit", "test samples scored in each metrics row (0 = all)", eval_limit),
      MIFPROP_SIZE_KEY("train.shards", "batch shards; results depend on this, not on threads", shards),
      MIFPROP_SIZE_KEY("train.threads", "worker threads for the shards", threads),
      {"train.tape_mode", "full | recompute",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "full") c.tape_mode = TapeMode::full;
         else if (v == "recompute") c.tape_mode = TapeMode::recompute;
         else bad_value("train.tape_mode", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.tape_mode == TapeMode::full ? "full" : "recompute");
       }},
      MIFPROP_INT_KEY("train.tape_segment", "stored-state spacing in recompute mode", tape_segment),
      {"output.dir", "run directory for metrics and checkpoints",
       [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
      MIFPROP_INT_KEY("simulate.t_total", "steps for `simulate`", sim_t_total),
      MIFPROP_SCHEDULE_KEY("simulate.injections", "single-neuron drive, step:weighted_input,...",
                           sim_schedule),
      {"gradcheck.widths", "network used by `gradcheck`",
       [](ExperimentConfig& c, const std::string& v) { c.gc_widths = to_widths("gradcheck.widths", v); },
       [](const ExperimentConfig& c) { return fmt_widths(c.gc_widths); }},
      MIFPROP_INT_KEY("gradcheck.t_total", "steps", gc_t_total),
      MIFPROP_SCHEDULE_KEY("gradcheck.injections", "injection steps", gc_schedule),
      MIFPROP_SIZE_KEY("gradcheck.batch", "random samples per check", gc_batch),
      MIFPROP_SIZE_KEY("gradcheck.seeds", "independent random networks", gc_seeds),
      MIFPROP_SIZE_KEY("gradcheck.max_weights", "refuse larger networks", gc_max_weights),
      MIFPROP_DOUBLE_KEY("gradcheck.h", "central-difference step", gc_h),
      MIFPROP_DOUBLE_KEY("gradcheck.abs_tol", "absolute error floor", gc_abs_tol),
  };
  return k;
}

#undef MIFPROP_DOUBLE_KEY
#undef MIFPROP_SIZE_KEY
#undef MIFPROP_INT_KEY
#undef MIFPROP_SCHEDULE_KEY

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(*this, trim(value));
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  mif.validate();
  require(widths.size() >= 2, "arch.widths needs at least two entries");
  for (auto w : widths) require(w > 0, "arch.widths entries must be positive");
  require(t_total >= 1, "sim.t_total must be >= 1");
  schedule.validate(t_total);
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(adam.lr > 0.0, "train.lr must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "train.beta1 must be in [0,1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "train.beta2 must be in [0,1)");
  require(adam.eps > 0.0, "train.eps must be positive");
  require(metrics_every >= 1, "train.metrics_every must be >= 1");
  require(shards >= 1 && threads >= 1, "train.shards and train.threads must be >= 1");
  require(tape_segment >= 1, "train.tape_segment must be >= 1");
  require(sim_t_total >= 0, "simulate.t_total must be >= 0");
  sim_schedule.validate(sim_t_total);
  require(gc_t_total >= 1, "gradcheck.t_total must be >= 1");
  gc_schedule.validate(gc_t_total);
  require(gc_batch >= 1 && gc_seeds >= 1, "gradcheck.batch and gradcheck.seeds must be >= 1");
  require(gc_h > 0.0, "gradcheck.h must be positive");
}

std::filesystem::path ExperimentConfig::dataset_dir() const {
  if (!data_dir.empty()) return data_dir;
  if (const char* env = std::getenv("MIFPROP_DATA_DIR"); env != nullptr && *env != '\0') return env;
  throw std::invalid_argument("no dataset directory: set dataset.dir or MIFPROP_DATA_DIR");
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  for (const auto& k : keys()) m[k.name] = k.get(*this);
  return m;
}

void ExperimentConfig::write(std::ostream& os) const {
  os << "# mifprop experiment configuration\n";
  for (const auto& k : keys()) os << "\n# " << k.doc << '\n' << k.name << " = " << k.get(*this) << '\n';
}

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  return parse(in);
}

ShardOptions ExperimentConfig::shard_options() const {
  ShardOptions o;
  o.shards = shards;
  o.threads = threads;
  o.tape.mode = tape_mode;
  o.tape.segment = tape_segment;
  return o;
}

}  // namespace mifprop
