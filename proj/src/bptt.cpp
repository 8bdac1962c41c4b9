#include "mifprop/bptt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "mifprop/simd.hpp"

namespace mifprop {
namespace {

// Step index -> injection ordinal, -1 where nothing is injected.
std::vector<int> injection_ordinals(const SpikeSchedule& schedule, int t_total) {
  schedule.validate(t_total);
  std::vector<int> ord(static_cast<std::size_t>(t_total), -1);
  int n = 0;
  for (const auto& inj : schedule.injections()) ord[static_cast<std::size_t>(inj.step)] = n++;
  return ord;
}

struct LayerOffsets {
  std::vector<std::size_t> pre;
  std::vector<std::size_t> post;
  std::size_t stride = 0;
};

LayerOffsets layer_offsets(const Network& net) {
  LayerOffsets o;
  for (const auto& w : net.layers()) {
    o.pre.push_back(o.stride);
    o.post.push_back(o.stride + w.rows);
    o.stride += 2 * w.rows;
  }
  return o;
}

void scaled_copy(std::span<const double> image, double scale, std::span<double> out) {
  for (std::size_t j = 0; j < image.size(); ++j) out[j] = scale * image[j];
}

// Adjoint of mif_step (dt = 1). `adj` holds the adjoint of the state at
// t + 1 on entry and of the state at t on exit; returns d/d(weighted input).
double mif_step_adjoint(const MifState& s, MifState& adj, const MifParams& p) {
  const double keep_syn = 1.0 - 1.0 / p.tau_syn;

  const double a_bar = adj.a * keep_syn + adj.i / p.tau_syn;
  const double i_bar = adj.i * keep_syn + adj.v / p.c;
  const double input_bar = adj.a;

  const auto [g1, g2] = memductances(s.x1, s.x2, p);
  const double g1_bar = -adj.v * (s.v - p.e_rest) / p.c;
  const double g2_bar = -adj.v * (s.v - p.e_reset) / p.c;

  // Memristor gates: d/dz logistic(z) = logistic(z) * logistic(-z).
  auto gate_partials = [&](double x, double e_ref, double v_on, double v_off, double tau,
                           double& dx, double& dv) {
    const double u = s.v - e_ref;
    const double zg = (u - v_on) / p.k_th;
    const double zd = (v_off - u) / p.k_th;
    const double sg = logistic(zg);
    const double sd = logistic(zd);
    const double dsg = sg * logistic(-zg);
    const double dsd = sd * logistic(-zd);
    dx = 1.0 + (-sg - sd) / tau;
    dv = ((1.0 - x) * dsg / p.k_th + x * dsd / p.k_th) / tau;
  };
  double dx1 = 0, dv1 = 0, dx2 = 0, dv2 = 0;
  gate_partials(s.x1, p.e_rest, p.v_on1, p.v_off1, p.tau1, dx1, dv1);
  gate_partials(s.x2, p.e_reset, p.v_on2, p.v_off2, p.tau2, dx2, dv2);

  double x1_bar = adj.x1 * dx1 + g1_bar * (1.0 / p.r_on1 - 1.0 / p.r_off1);
  double x2_bar = adj.x2 * dx2;
  if (p.literal_g2) {
    x1_bar += g2_bar / p.r_on2;
    x2_bar += g2_bar * (-1.0 / p.r_off2);
  } else {
    x2_bar += g2_bar * (1.0 / p.r_on2 - 1.0 / p.r_off2);
  }
  const double v_bar = adj.v * (1.0 - (g1 + g2) / p.c) + adj.x1 * dv1 + adj.x2 * dv2;

  adj = MifState{v_bar, x1_bar, x2_bar, i_bar, a_bar};
  return input_bar;
}

}  // namespace

std::size_t Tape::bytes() const {
  return images.size() * sizeof(double) + labels.size() + states.size() * sizeof(MifState) +
         dense.size() * sizeof(double);
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const auto& w : net.layers()) g.layers.emplace_back(w.rows, w.cols);
  return g;
}

std::size_t Gradients::size() const {
  std::size_t n = 0;
  for (const auto& m : layers) n += m.size();
  return n;
}

double Gradients::flat(std::size_t index) const {
  for (const auto& m : layers) {
    if (index < m.size()) return m.data[index];
    index -= m.size();
  }
  throw std::out_of_range("gradient index out of range");
}

bool Gradients::all_finite() const {
  for (const auto& m : layers)
    for (double g : m.data)
      if (!std::isfinite(g)) return false;
  return true;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].same_shape(other.layers[l])) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t i = 0; i < layers[l].size(); ++i) layers[l].data[i] += other.layers[l].data[i];
  }
  return *this;
}

ForwardResult forward_record(const Network& net, const BatchView& batch,
                             const SpikeSchedule& schedule, int t_total,
                             const TapeOptions& options) {
  if (batch.size() == 0) throw std::invalid_argument("forward_record: empty batch");
  if (t_total < 1) throw std::invalid_argument("forward_record: t_total must be >= 1");
  if (batch.width != net.input_width())
    throw std::invalid_argument("forward_record: input width " + std::to_string(batch.width) +
                                " does not match network input " + std::to_string(net.input_width()));
  if (batch.images.size() != batch.size() * batch.width)
    throw std::invalid_argument("forward_record: image buffer does not match label count");
  if (options.mode == TapeMode::recompute && options.segment < 1)
    throw std::invalid_argument("forward_record: recompute segment must be >= 1");

  const MifParams& p = net.params();
  const std::vector<int> inj = injection_ordinals(schedule, t_total);
  const LayerOffsets off = layer_offsets(net);
  const std::size_t n_out = net.output_width();
  const std::size_t n_inj = schedule.size();

  ForwardResult r;
  Tape& tape = r.tape;
  tape.steps = t_total;
  tape.batch = batch.size();
  tape.n_out = n_out;
  tape.width = batch.width;
  tape.mode = options.mode;
  tape.stride = options.mode == TapeMode::full ? 1 : std::min(options.segment, t_total);
  tape.normalizer = options.normalizer > 0.0 ? options.normalizer : static_cast<double>(batch.size());
  tape.fingerprint = net.fingerprint();
  tape.schedule = schedule;
  tape.images.assign(batch.images.begin(), batch.images.end());
  tape.labels.assign(batch.labels.begin(), batch.labels.end());
  tape.dense_stride = off.stride;
  tape.dense.assign(batch.size() * n_inj * off.stride, 0.0);
  tape.states.resize(batch.size() * tape.stored_per_sample() * n_out);

  std::vector<double> x(batch.width);
  std::vector<double> drive(n_out);
  std::vector<double> v(n_out);
  std::vector<double> summed(n_out);
  std::vector<MifState> cur(n_out);
  DenseTrace trace;
  r.predictions.resize(batch.size());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int label = batch.labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= n_out)
      throw std::invalid_argument("forward_record: label out of range");
    std::fill(cur.begin(), cur.end(), initial_state(p));
    std::fill(summed.begin(), summed.end(), 0.0);
    MifState* store = tape.states.data() + b * tape.stored_per_sample() * n_out;
    std::copy(cur.begin(), cur.end(), store);

    double sample_loss = 0.0;
    for (int t = 0; t < t_total; ++t) {
      const int k_inj = inj[static_cast<std::size_t>(t)];
      if (k_inj >= 0) {
        scaled_copy(batch.image(b), schedule.injections()[static_cast<std::size_t>(k_inj)].scale, x);
        drive = dense_forward(net, x, &trace);
        double* rec = tape.dense.data() + (b * n_inj + static_cast<std::size_t>(k_inj)) * off.stride;
        for (std::size_t l = 0; l < trace.pre.size(); ++l) {
          const bool last = l + 1 == trace.pre.size();
          for (std::size_t j = 0; j < trace.pre[l].size(); ++j) {
            const double z = trace.pre[l][j];
            rec[off.pre[l] + j] = z;
            rec[off.post[l] + j] = last ? z : (z > 0.0 ? z : 0.0);
          }
        }
      } else {
        std::fill(drive.begin(), drive.end(), 0.0);
      }
      for (std::size_t k = 0; k < n_out; ++k) {
        cur[k] = mif_step(cur[k], drive[k], p);
        v[k] = cur[k].v;
        summed[k] += v[k];
      }
      sample_loss += step_loss(v, label);
      if ((t + 1) % tape.stride == 0)
        std::copy(cur.begin(), cur.end(), store + static_cast<std::size_t>((t + 1) / tape.stride) * n_out);
    }
    r.loss += sample_loss / tape.normalizer;
    r.predictions[b] = argmax(summed);
  }
  return r;
}

Gradients backward(const Tape& tape, const Network& net) {
  if (tape.fingerprint != net.fingerprint()) throw StaleTapeError();
  if (tape.n_out != net.output_width() || tape.width != net.input_width())
    throw std::invalid_argument("backward: tape shape does not match network");

  const MifParams& p = net.params();
  const auto& layers = net.layers();
  const LayerOffsets off = layer_offsets(net);
  const std::vector<int> inj = injection_ordinals(tape.schedule, tape.steps);
  const std::size_t n_out = tape.n_out;
  const std::size_t n_inj = tape.schedule.size();
  const std::size_t stride = static_cast<std::size_t>(tape.stride);
  const std::size_t steps = static_cast<std::size_t>(tape.steps);
  const std::size_t n_seg = (steps + stride - 1) / stride;

  Gradients grads = Gradients::zeros_like(net);
  std::vector<MifState> adj(n_out);
  std::vector<MifState> seg((stride + 1) * n_out);
  std::vector<double> v(n_out), soft(n_out), s_bar(n_out), x(tape.width);
  std::vector<double> g_cur, g_prev;

  for (std::size_t b = 0; b < tape.batch; ++b) {
    const int label = tape.labels[b];
    const std::span<const double> image(tape.images.data() + b * tape.width, tape.width);
    std::fill(adj.begin(), adj.end(), MifState{0, 0, 0, 0, 0});

    for (std::size_t si = n_seg; si-- > 0;) {
      const std::size_t t0 = si * stride;
      const std::size_t t1 = std::min(t0 + stride, steps);

      // States at t0..t1, from the tape or by replaying the segment.
      const auto first = tape.snapshot(b, si);
      std::copy(first.begin(), first.end(), seg.begin());
      if (stride == 1) {
        const auto last = tape.snapshot(b, si + 1);
        std::copy(last.begin(), last.end(), seg.begin() + static_cast<std::ptrdiff_t>(n_out));
      } else {
        for (std::size_t t = t0; t < t1; ++t) {
          const int k_inj = inj[t];
          const double* rec = k_inj >= 0
              ? tape.dense.data() + (b * n_inj + static_cast<std::size_t>(k_inj)) * off.stride +
                    off.post.back()
              : nullptr;
          for (std::size_t k = 0; k < n_out; ++k)
            seg[(t + 1 - t0) * n_out + k] =
                mif_step(seg[(t - t0) * n_out + k], rec != nullptr ? rec[k] : 0.0, p);
        }
      }

      for (std::size_t t = t1; t-- > t0;) {
        const MifState* next = seg.data() + (t + 1 - t0) * n_out;
        const MifState* cur = seg.data() + (t - t0) * n_out;

        for (std::size_t k = 0; k < n_out; ++k) v[k] = next[k].v;
        softmax(v, soft);
        for (std::size_t k = 0; k < n_out; ++k) {
          const double target = static_cast<int>(k) == label ? 1.0 : 0.0;
          adj[k].v += (soft[k] - target) / tape.normalizer;
        }
        for (std::size_t k = 0; k < n_out; ++k) s_bar[k] = mif_step_adjoint(cur[k], adj[k], p);

        const int k_inj = inj[t];
        if (k_inj < 0) continue;
        const double* rec = tape.dense.data() + (b * n_inj + static_cast<std::size_t>(k_inj)) * off.stride;
        scaled_copy(image, tape.schedule.injections()[static_cast<std::size_t>(k_inj)].scale, x);

        g_cur.assign(s_bar.begin(), s_bar.end());
        for (std::size_t l = layers.size(); l-- > 0;) {
          const Matrix& w = layers[l];
          const std::span<const double> layer_in =
              l == 0 ? std::span<const double>(x) : std::span<const double>(rec + off.post[l - 1], w.cols);
          simd::ger_acc(grads.layers[l].data, w.rows, w.cols, g_cur, layer_in);
          if (l == 0) break;
          g_prev.assign(w.cols, 0.0);
          simd::gemv_t_acc(w.data, w.rows, w.cols, g_cur, g_prev);
          const double* pre = rec + off.pre[l - 1];
          for (std::size_t j = 0; j < w.cols; ++j)
            if (!(pre[j] > 0.0)) g_prev[j] = 0.0;
          std::swap(g_cur, g_prev);
        }
      }
    }
  }
  return grads;
}

double batch_loss(const Network& net, const BatchView& batch, const SpikeSchedule& schedule,
                  int t_total) {
  if (batch.size() == 0) throw std::invalid_argument("batch_loss: empty batch");
  double loss = 0.0;
  const double n = static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    loss += total_loss(net, batch.image(b), batch.labels[b], schedule, t_total) / n;
  return loss;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("central_difference: h must be positive");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double finite_difference_grad(const Network& net, const BatchView& batch,
                              const SpikeSchedule& schedule, int t_total,
                              std::size_t weight_index, double h) {
  Network probe = net;
  const double w0 = net.weight(weight_index);
  return central_difference(
      [&](double w) {
        probe.weight(weight_index) = w;
        return batch_loss(probe, batch, schedule, t_total);
      },
      w0, h);
}

BatchGradient compute_gradients(const Network& net, const BatchView& batch,
                                const SpikeSchedule& schedule, int t_total,
                                const ShardOptions& options) {
  if (batch.size() == 0) throw std::invalid_argument("compute_gradients: empty batch");
  const std::size_t n_shards = std::clamp<std::size_t>(options.shards, 1, batch.size());
  const std::size_t n_threads = std::clamp<std::size_t>(options.threads, 1, n_shards);

  TapeOptions tape_opts = options.tape;
  tape_opts.normalizer = static_cast<double>(batch.size());

  struct ShardResult {
    Gradients grads;
    double loss = 0.0;
    std::vector<int> predictions;
  };
  std::vector<ShardResult> results(n_shards);
  auto run_shard = [&](std::size_t s) {
    const std::size_t begin = s * batch.size() / n_shards;
    const std::size_t end = (s + 1) * batch.size() / n_shards;
    ForwardResult fwd = forward_record(net, batch.slice(begin, end - begin), schedule, t_total, tape_opts);
    results[s] = {backward(fwd.tape, net), fwd.loss, std::move(fwd.predictions)};
  };

  if (n_threads == 1) {
    for (std::size_t s = 0; s < n_shards; ++s) run_shard(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t s = next++; s < n_shards; s = next++) run_shard(s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  BatchGradient out{std::move(results[0].grads), results[0].loss, std::move(results[0].predictions)};
  for (std::size_t s = 1; s < n_shards; ++s) {
    out.gradients += results[s].grads;
    out.loss += results[s].loss;
    out.predictions.insert(out.predictions.end(), results[s].predictions.begin(),
                           results[s].predictions.end());
  }
  return out;
}

Gradients analytic_gradients(const Network& net, const BatchView& batch,
                             const SpikeSchedule& schedule, int t_total) {
  return backward(forward_record(net, batch, schedule, t_total).tape, net);
}

GradcheckReport gradient_check(const Network& net, const BatchView& batch,
                               const SpikeSchedule& schedule, int t_total, double rel_tol,
                               double abs_tol, double h, const GradientFn& gradient_fn) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("gradient_check: tolerance must be positive");
  const Gradients analytic = gradient_fn(net, batch, schedule, t_total);
  if (analytic.size() != net.weight_count())
    throw std::invalid_argument("gradient_check: gradient shape does not match network");

  GradcheckReport report;
  double worst_ratio = -1.0;
  for (std::size_t i = 0; i < net.weight_count(); ++i) {
    GradcheckEntry e;
    e.index = i;
    e.analytic = analytic.flat(i);
    e.numeric = finite_difference_grad(net, batch, schedule, t_total, i, h);
    e.abs_err = std::abs(e.analytic - e.numeric);
    const double scale = std::max(std::abs(e.numeric), std::abs(e.analytic));
    e.rel_err = scale > 0.0 ? e.abs_err / scale : 0.0;
    const double allowed =
        std::isinf(rel_tol) ? std::numeric_limits<double>::infinity()
                            : std::max(rel_tol * std::abs(e.numeric), abs_tol);
    e.ok = e.abs_err <= allowed;
    const double ratio = allowed > 0.0 ? e.abs_err / allowed : (e.abs_err > 0.0 ? INFINITY : 0.0);
    if (ratio > worst_ratio || std::isnan(ratio)) {
      worst_ratio = std::isnan(ratio) ? INFINITY : ratio;
      report.worst_index = i;
    }
    if (!e.ok) report.passed = false;
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace mifprop
