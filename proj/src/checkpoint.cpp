#include "mifprop/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "mifprop/data.hpp"

namespace mifprop {
namespace {

constexpr char kMagic[4] = {'M', 'I', 'F', 'P'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void array(const std::string& name, std::span<const double> values) {
    u32(static_cast<std::uint32_t>(name.size()));
    out_.insert(out_.end(), name.begin(), name.end());
    u64(values.size());
    for (double v : values) u64(std::bit_cast<std::uint64_t>(v));
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{in_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated");
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<double> params_to_array(const MifParams& p) {
  return {p.e_rest, p.e_reset, p.c,      p.k_th,   p.v_on1, p.v_on2, p.v_off1, p.v_off2,
          p.r_on1,  p.r_on2,   p.r_off1, p.r_off2, p.tau1,  p.tau2,  p.tau_syn, p.literal_g2 ? 1.0 : 0.0};
}

MifParams params_from_array(const std::vector<double>& a) {
  if (a.size() != 16) throw std::runtime_error("checkpoint: mif.params has wrong length");
  MifParams p;
  double* fields[] = {&p.e_rest, &p.e_reset, &p.c,      &p.k_th,   &p.v_on1, &p.v_on2, &p.v_off1, &p.v_off2,
                      &p.r_on1,  &p.r_on2,   &p.r_off1, &p.r_off2, &p.tau1,  &p.tau2,  &p.tau_syn};
  for (std::size_t i = 0; i < 15; ++i) *fields[i] = a[i];
  p.literal_g2 = a[15] != 0.0;
  return p;
}

std::uint64_t as_count(double d) {
  if (!(d >= 0.0 && d <= 0x1.0p53) || d != static_cast<double>(static_cast<std::uint64_t>(d)))
    throw std::runtime_error("checkpoint: bad integer field");
  return static_cast<std::uint64_t>(d);
}

}  // namespace

Checkpoint Checkpoint::capture(const Network& net, const AdamState& adam, std::uint64_t seed,
                               std::uint64_t epoch, std::uint64_t batch_in_epoch,
                               std::uint64_t iteration) {
  return Checkpoint{net.widths(), net.params(), net.layers(), adam, seed, epoch, batch_in_epoch, iteration};
}

Network Checkpoint::network() const {
  Network net(widths, mif);
  if (weights.size() != net.layer_count()) throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].same_shape(net.layers()[l])) throw std::runtime_error("checkpoint: weight shape mismatch");
    net.layers()[l] = weights[l];
  }
  return net;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  const std::size_t layers = weights.size();
  Writer w;
  for (char c : kMagic) w.bytes().push_back(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(6 + 3 * layers));

  std::vector<double> dims(widths.begin(), widths.end());
  w.array("arch.widths", dims);
  w.array("mif.params", params_to_array(mif));
  for (std::size_t l = 0; l < layers; ++l) w.array("weights." + std::to_string(l), weights[l].data);
  const std::vector<double> hyper{adam.config.lr, adam.config.beta1, adam.config.beta2, adam.config.eps};
  w.array("adam.hyper", hyper);
  const std::vector<double> t{static_cast<double>(adam.t)};
  w.array("adam.t", t);
  for (std::size_t l = 0; l < layers; ++l) w.array("adam.m." + std::to_string(l), adam.m[l].data);
  for (std::size_t l = 0; l < layers; ++l) w.array("adam.u." + std::to_string(l), adam.u[l].data);
  const std::vector<double> rng{static_cast<double>(seed >> 32), static_cast<double>(seed & 0xffffffffu)};
  w.array("rng.seed", rng);
  const std::vector<double> progress{static_cast<double>(epoch), static_cast<double>(batch_in_epoch),
                                     static_cast<double>(iteration)};
  w.array("progress", progress);
  return std::move(w.bytes());
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic");
  const auto version = r.uint(4);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.uint(4);

  std::map<std::string, std::vector<double>> arrays;
  for (std::uint64_t a = 0; a < count; ++a) {
    const std::string name = r.str(static_cast<std::size_t>(r.uint(4)));
    const std::uint64_t n = r.uint(8);
    r.need(static_cast<std::size_t>(n) * 8);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = std::bit_cast<double>(r.uint(8));
    if (!arrays.emplace(name, std::move(values)).second)
      throw std::runtime_error("checkpoint: duplicate array " + name);
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");

  auto take = [&](const std::string& name, std::size_t expected = 0) -> std::vector<double>& {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw std::runtime_error("checkpoint: missing array " + name);
    if (expected != 0 && it->second.size() != expected)
      throw std::runtime_error("checkpoint: array " + name + " has wrong length");
    return it->second;
  };

  Checkpoint c;
  for (double d : take("arch.widths")) c.widths.push_back(static_cast<std::size_t>(as_count(d)));
  if (c.widths.size() < 2) throw std::runtime_error("checkpoint: bad architecture");
  c.mif = params_from_array(take("mif.params"));
  const std::size_t layers = c.widths.size() - 1;
  const auto& hyper = take("adam.hyper", 4);
  c.adam.config = AdamConfig{hyper[0], hyper[1], hyper[2], hyper[3]};
  c.adam.t = as_count(take("adam.t", 1)[0]);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t rows = c.widths[l + 1], cols = c.widths[l];
    auto load = [&](const std::string& name) {
      Matrix m(rows, cols);
      m.data = take(name, rows * cols);
      return m;
    };
    c.weights.push_back(load("weights." + std::to_string(l)));
    c.adam.m.push_back(load("adam.m." + std::to_string(l)));
    c.adam.u.push_back(load("adam.u." + std::to_string(l)));
  }
  const auto& rng = take("rng.seed", 2);
  c.seed = (as_count(rng[0]) << 32) | as_count(rng[1]);
  const auto& progress = take("progress", 3);
  c.epoch = as_count(progress[0]);
  c.batch_in_epoch = as_count(progress[1]);
  c.iteration = as_count(progress[2]);
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

}  // namespace mifprop
