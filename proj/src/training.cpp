#include "mifprop/training.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "mifprop/bptt.hpp"

namespace mifprop {

EvalResult evaluate(const Network& net, const Dataset& data, const SpikeSchedule& schedule, int t_total) {
  if (net.input_width() != kImagePixels)
    throw std::invalid_argument("evaluate: network input width " + std::to_string(net.input_width()) +
                                " does not match 784-pixel images");
  EvalResult r;
  r.classes = net.output_width();
  r.confusion.assign(r.classes * r.classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto truth = static_cast<std::size_t>(data.labels[i]);
    if (truth >= r.classes) throw std::invalid_argument("evaluate: label exceeds output population");
    const auto pred = static_cast<std::size_t>(predict(net, data.image(i), schedule, t_total));
    ++r.confusion[truth * r.classes + pred];
    ++r.count;
    if (pred == truth) ++r.correct;
  }
  return r;
}

void write_confusion_csv(std::ostream& os, const EvalResult& r) {
  os << "true\\pred";
  for (std::size_t c = 0; c < r.classes; ++c) os << ',' << c;
  os << '\n';
  for (std::size_t t = 0; t < r.classes; ++t) {
    os << t;
    for (std::size_t c = 0; c < r.classes; ++c) os << ',' << r.at(t, c);
    os << '\n';
  }
}

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%.9g,%.6f,%.6f\n",
                static_cast<unsigned long long>(row.iteration), static_cast<unsigned long long>(row.epoch),
                row.train_loss, row.train_acc, row.test_acc);
  os << buf;
}

Trainer::Trainer(ExperimentConfig config, Dataset train, Dataset test)
    : config_(std::move(config)),
      train_(std::move(train)),
      test_(std::move(test)),
      net_(config_.widths, config_.mif),
      adam_(AdamState::for_network(net_, config_.adam)) {
  config_.validate();
  if (net_.input_width() != kImagePixels)
    throw std::invalid_argument("training: network input width must be 784");
  if (train_.size() == 0) throw std::invalid_argument("training: empty training set");
}

void Trainer::initialize() {
  init_network(net_, config_.seed);
  adam_ = AdamState::for_network(net_, config_.adam);
  epoch_ = batch_in_epoch_ = iteration_ = 0;
}

void Trainer::resume(const Checkpoint& ckpt) {
  if (ckpt.widths != config_.widths) throw std::invalid_argument("checkpoint architecture differs from config");
  net_ = ckpt.network();
  adam_ = ckpt.adam;
  config_.seed = ckpt.seed;
  epoch_ = ckpt.epoch;
  batch_in_epoch_ = ckpt.batch_in_epoch;
  iteration_ = ckpt.iteration;
}

Checkpoint Trainer::checkpoint() const {
  return Checkpoint::capture(net_, adam_, config_.seed, epoch_, batch_in_epoch_, iteration_);
}

void Trainer::run(const std::function<void(const MetricsRow&)>& on_metrics,
                  const std::function<void(const Checkpoint&)>& on_checkpoint) {
  const Dataset eval_set = test_.head(config_.eval_limit);
  const ShardOptions shard_opts = config_.shard_options();

  while (epoch_ < config_.epochs) {
    const auto batches = make_batches(train_.size(), config_.batch_size, derive_seed(config_.seed, 1'000'000 + epoch_));
    for (std::size_t b = batch_in_epoch_; b < batches.size(); ++b) {
      const Dataset batch = train_.subset(batches[b]);
      BatchGradient g = compute_gradients(net_, batch.view(), config_.schedule, config_.t_total, shard_opts);
      if (!g.gradients.all_finite()) throw std::runtime_error("training: non-finite gradient");
      adam_step(net_.layers(), g.gradients.layers, adam_);
      net_.check_finite();
      ++iteration_;
      batch_in_epoch_ = b + 1;

      if (iteration_ % config_.metrics_every == 0) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) hits += g.predictions[i] == batch.labels[i];
        MetricsRow row;
        row.iteration = iteration_;
        row.epoch = epoch_;
        row.train_loss = g.loss;
        row.train_acc = static_cast<double>(hits) / static_cast<double>(batch.size());
        row.test_acc = eval_set.size() > 0
                           ? evaluate(net_, eval_set, config_.schedule, config_.t_total).accuracy()
                           : 0.0;
        on_metrics(row);
      }
      const bool epoch_done = batch_in_epoch_ == batches.size();
      if (epoch_done) {
        ++epoch_;
        batch_in_epoch_ = 0;
      }
      if (epoch_done || (config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0))
        on_checkpoint(checkpoint());
      if (epoch_done) break;
    }
  }
}

}  // namespace mifprop
