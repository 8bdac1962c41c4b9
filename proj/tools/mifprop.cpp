// mifprop: train, evaluate and probe memristive integrate-and-fire networks.
//
//   mifprop config init [--out DIR]
//   mifprop train     [--config F] [--seed N] [--out DIR] [--override k=v]... [--resume CKPT]
//   mifprop eval      --checkpoint CKPT [--config F] [--out DIR] [--override k=v]...
//   mifprop simulate  [--config F] [--out DIR] [--override k=v]...
//   mifprop gradcheck [--config F] [--tol T] [--override k=v]...

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mifprop/commands.hpp"
#include "mifprop/simd.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_seed) {
  cmd->add_option("--config", o.config_path, "experiment config file")->check(CLI::ExistingFile);
  if (with_seed) cmd->add_option("--seed", o.seed, "overrides train.seed");
  cmd->add_option("--out", o.out_dir, "output directory (overrides output.dir)");
  cmd->add_option("--override", o.overrides, "key=value, repeatable")->take_all();
}

mifprop::ExperimentConfig build_config(const CommonOptions& o) {
  mifprop::ExperimentConfig c =
      o.config_path.empty() ? mifprop::ExperimentConfig{} : mifprop::ExperimentConfig::load(o.config_path);
  for (const auto& kv : o.overrides) c.apply_override(kv);
  if (o.seed) c.seed = *o.seed;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable memristive integrate-and-fire network simulator"};
  app.require_subcommand(1);
  std::string simd_backend;
  app.add_option("--simd", simd_backend, "kernel backend: scalar | avx2 (default: best available)");

  CommonOptions train_opts, eval_opts, sim_opts, gc_opts, init_opts;
  std::string resume_path, eval_ckpt;
  double tolerance = 1e-4;

  auto* train = app.add_subcommand("train", "train on MNIST-format IDX data");
  add_common(train, train_opts, true);
  train->add_option("--resume", resume_path, "continue from a checkpoint")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "accuracy and confusion matrix on the test split");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "single-neuron waveform CSV");
  add_common(simulate, sim_opts, false);

  auto* gradcheck = app.add_subcommand("gradcheck", "compare backward() with central differences");
  add_common(gradcheck, gc_opts, true);
  gradcheck->add_option("--tol", tolerance, "relative tolerance");

  auto* config = app.add_subcommand("config", "configuration helpers");
  config->require_subcommand(1);
  auto* init = config->add_subcommand("init", "print every key with its default");
  add_common(init, init_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!simd_backend.empty()) mifprop::simd::select_backend(mifprop::simd::parse_backend(simd_backend));

    if (*train) {
      std::optional<std::filesystem::path> resume;
      if (!resume_path.empty()) resume = resume_path;
      mifprop::cmd_train(build_config(train_opts), resume, std::cout);
    } else if (*eval) {
      mifprop::cmd_eval(build_config(eval_opts), eval_ckpt, std::cout);
    } else if (*simulate) {
      mifprop::cmd_simulate(build_config(sim_opts), std::cout);
    } else if (*gradcheck) {
      const auto s = mifprop::cmd_gradcheck(build_config(gc_opts), tolerance, std::cout);
      return s.passed ? 0 : 1;
    } else if (*init) {
      const mifprop::ExperimentConfig c = build_config(init_opts);
      if (init_opts.out_dir.empty()) {
        c.write(std::cout);
      } else {
        std::filesystem::create_directories(init_opts.out_dir);
        const auto path = std::filesystem::path(init_opts.out_dir) / "mifprop.conf";
        std::ofstream f(path);
        c.write(f);
        std::cout << "wrote " << path.string() << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "mifprop: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
