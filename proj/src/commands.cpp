#include "mifprop/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace mifprop {
namespace {

namespace fs = std::filesystem;

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(fs::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw std::runtime_error("cannot lock " + path_.string() + ": " + std::strerror(errno) +
                               " (another run active, or a stale lock to delete)");
  }
  ~RunLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

fs::path require_dataset_dir(const ExperimentConfig& config) {
  const fs::path dir = config.dataset_dir();
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
  return dir;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& config, const std::optional<fs::path>& resume,
                       std::ostream& log) {
  config.validate();
  const fs::path data_dir = require_dataset_dir(config);
  const fs::path out(config.out_dir);
  fs::create_directories(out);
  RunLock lock(out / "train.lock");

  Dataset train = load_dataset(data_dir, Split::train, config.train_limit);
  Dataset test = load_dataset(data_dir, Split::test, config.test_limit);
  log << "train: " << train.size() << " samples, test: " << test.size() << " samples ("
      << config.dataset_name << ")\n";

  Trainer trainer(config, std::move(train), std::move(test));
  TrainOutcome outcome;
  outcome.metrics_path = out / "metrics.csv";
  outcome.final_path = out / "final.mifp";

  std::ofstream metrics;
  if (resume) {
    trainer.resume(Checkpoint::load(*resume));
    metrics.open(outcome.metrics_path, std::ios::app);
  } else {
    trainer.initialize();
    metrics.open(outcome.metrics_path, std::ios::trunc);
    metrics << kMetricsVersionLine << '\n' << kMetricsHeader << '\n';
    trainer.checkpoint().save(out / "checkpoint.mifp");
  }
  if (!metrics) throw std::runtime_error("cannot write " + outcome.metrics_path.string());

  trainer.run(
      [&](const MetricsRow& row) {
        write_metrics_row(metrics, row);
        metrics.flush();
        log << "iter " << row.iteration << " epoch " << row.epoch << " loss " << row.train_loss
            << " train_acc " << row.train_acc << " test_acc " << row.test_acc << '\n';
      },
      [&](const Checkpoint& c) { c.save(out / "checkpoint.mifp"); });

  outcome.final_checkpoint = trainer.checkpoint();
  outcome.final_checkpoint.save(outcome.final_path);
  log << "wrote " << outcome.final_path.string() << '\n';
  return outcome;
}

EvalResult cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, std::ostream& log) {
  config.validate();
  const Network net = Checkpoint::load(checkpoint).network();
  if (net.input_width() != kImagePixels)
    throw std::invalid_argument("checkpoint input width " + std::to_string(net.input_width()) +
                                " does not match the 784-pixel dataset");
  const Dataset test = load_dataset(require_dataset_dir(config), Split::test, config.test_limit);
  const EvalResult r = evaluate(net, test, config.schedule, config.t_total);

  const fs::path out(config.out_dir);
  fs::create_directories(out);
  std::ofstream csv(out / "confusion.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + (out / "confusion.csv").string());
  write_confusion_csv(csv, r);
  log << "accuracy " << r.accuracy() << " (" << r.correct << "/" << r.count << ")\n";
  return r;
}

fs::path cmd_simulate(const ExperimentConfig& config, std::ostream& log) {
  config.mif.validate();
  const Trajectory tr = simulate_neuron(config.mif, config.sim_schedule, config.sim_t_total);
  const fs::path out(config.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  const fs::path path = out / "waveform.csv";
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + path.string());
  write_waveform_csv(csv, tr);
  csv.flush();
  if (!csv) throw std::runtime_error("write failed for " + path.string());
  log << "wrote " << tr.size() << " rows to " << path.string() << '\n';
  return path;
}

GradcheckFixture make_gradcheck_fixture(const ExperimentConfig& config, std::size_t seed_index) {
  GradcheckFixture f{Network(config.gc_widths, config.mif), {}, {}};
  init_network(f.net, derive_seed(config.seed, 2'000'000 + seed_index));
  Rng rng(derive_seed(config.seed, 3'000'000 + seed_index));
  f.images.resize(config.gc_batch * f.net.input_width());
  for (double& x : f.images) x = rng.uniform01();
  for (std::size_t b = 0; b < config.gc_batch; ++b)
    f.labels.push_back(static_cast<std::uint8_t>(rng.below(f.net.output_width())));
  return f;
}

GradcheckSummary cmd_gradcheck(const ExperimentConfig& config, double tolerance, std::ostream& log,
                               const GradientFn& gradient_fn) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("gradcheck: tolerance must be positive");
  config.validate();
  GradcheckSummary s;
  for (std::size_t seed = 0; seed < config.gc_seeds; ++seed) {
    const GradcheckFixture f = make_gradcheck_fixture(config, seed);
    if (f.net.weight_count() > config.gc_max_weights)
      throw std::invalid_argument("gradcheck: network has " + std::to_string(f.net.weight_count()) +
                                  " weights, limit is " + std::to_string(config.gc_max_weights));
    const GradcheckReport r = gradient_check(f.net, f.view(), config.gc_schedule, config.gc_t_total, tolerance,
                                             config.gc_abs_tol, config.gc_h, gradient_fn);
    s.weights_checked += r.entries.size();
    s.max_rel_err = std::max(s.max_rel_err, r.max_rel_err);
    const auto& worst = r.entries[r.worst_index];
    log << "seed " << seed << ": " << (r.passed ? "ok" : "FAIL") << "  max rel err " << r.max_rel_err
        << "  worst weight " << worst.index << " (analytic " << worst.analytic << ", numeric "
        << worst.numeric << ")\n";
    if (!r.passed && s.passed) {
      s.passed = false;
      s.failing_seed = seed;
      s.failing_index = r.worst_index;
    }
  }
  log << (s.passed ? "PASS" : "FAIL") << ": " << s.weights_checked << " weights, max rel err " << s.max_rel_err
      << '\n';
  return s;
}

}  // namespace mifprop
