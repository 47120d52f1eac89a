#include "nnde/checkpoint.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nnde/csv.hpp"

namespace nnde {

namespace {

constexpr const char* kMagic = "nnde-checkpoint";

void store_net(Checkpoint& ckpt, const NetworkParams& net, const std::string& prefix) {
  auto put = [&](const char* key, std::span<const double> v) {
    ckpt.arrays[prefix + key] = std::vector<double>(v.begin(), v.end());
  };
  ckpt.arrays[prefix + "width"] = {static_cast<double>(net.width())};
  ckpt.arrays[prefix + "out_dim"] = {static_cast<double>(net.out_dim())};
  put("W1", net.w1());
  put("b1", net.b1());
  put("W2", net.w2());
  put("b2", net.b2());
  put("W3", net.w3());
  put("b3", net.b3());
}

NetworkParams load_net(const Checkpoint& ckpt, const std::string& prefix) {
  const auto width = static_cast<std::size_t>(ckpt.scalar(prefix + "width"));
  const auto out_dim = static_cast<std::size_t>(ckpt.scalar(prefix + "out_dim"));
  NetworkParams net(width, out_dim);
  auto get = [&](const char* key, std::span<double> dst) {
    const auto& src = ckpt.array(prefix + key);
    if (src.size() != dst.size()) throw std::runtime_error("checkpoint: wrong size for " + prefix + key);
    std::copy(src.begin(), src.end(), dst.begin());
  };
  get("W1", net.w1());
  get("b1", net.b1());
  get("W2", net.w2());
  get("b2", net.b2());
  get("W3", net.w3());
  get("b3", net.b3());
  return net;
}

void store_adam(Checkpoint& ckpt, const AdamState& st, const AdamConfig& cfg, const std::string& prefix) {
  ckpt.arrays[prefix + "adam.config"] = {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  ckpt.arrays[prefix + "adam.step"] = {static_cast<double>(st.step)};
  ckpt.arrays[prefix + "adam.m"] = st.m;
  ckpt.arrays[prefix + "adam.v"] = st.v;
}

void load_adam(const Checkpoint& ckpt, AdamState& st, AdamConfig& cfg, const std::string& prefix) {
  if (!ckpt.arrays.contains(prefix + "adam.config")) return;
  const auto& c = ckpt.array(prefix + "adam.config");
  if (c.size() != 4) throw std::runtime_error("checkpoint: bad adam.config");
  cfg = {c[0], c[1], c[2], c[3]};
  st.step = static_cast<std::uint64_t>(ckpt.scalar(prefix + "adam.step"));
  st.m = ckpt.array(prefix + "adam.m");
  st.v = ckpt.array(prefix + "adam.v");
}

}  // namespace

const std::vector<double>& Checkpoint::array(const std::string& key) const {
  auto it = arrays.find(key);
  if (it == arrays.end()) throw std::runtime_error("checkpoint: missing key '" + key + "'");
  return it->second;
}

double Checkpoint::scalar(const std::string& key) const {
  const auto& v = array(key);
  if (v.size() != 1) throw std::runtime_error("checkpoint: '" + key + "' is not a scalar");
  return v[0];
}

const std::string& Checkpoint::label(const std::string& key) const {
  auto it = labels.find(key);
  if (it == labels.end()) throw std::runtime_error("checkpoint: missing label '" + key + "'");
  return it->second;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << " 1\n";
  for (const auto& [key, value] : ckpt.labels) out << '@' << key << ' ' << value << '\n';
  for (const auto& [key, values] : ckpt.arrays) {
    out << key << ' ' << values.size();
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != 1)
    throw std::runtime_error("checkpoint: not an nnde checkpoint");
  Checkpoint ckpt;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.starts_with('@')) {
      std::string value;
      ls >> value;
      ckpt.labels[key.substr(1)] = value;
      continue;
    }
    std::size_t n = 0;
    if (!(ls >> n)) throw std::runtime_error("checkpoint: bad line for '" + key + "'");
    std::vector<double> values(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(ls >> tok)) throw std::runtime_error("checkpoint: truncated array '" + key + "'");
      values[i] = parse_double(tok);
    }
    ckpt.arrays[key] = std::move(values);
  }
  return ckpt;
}

void store_solver(Checkpoint& ckpt, const SolverState& s, const std::string& prefix) {
  store_net(ckpt, s.net, prefix);
  ckpt.arrays[prefix + "z0"] = s.z0;
  ckpt.arrays[prefix + "T"] = {s.horizon};
  ckpt.arrays[prefix + "M"] = {static_cast<double>(s.batch)};
  ckpt.arrays[prefix + "iteration"] = {static_cast<double>(s.iteration)};
  store_adam(ckpt, s.optimizer, s.adam, prefix);
}

SolverState load_solver(const Checkpoint& ckpt, const std::string& prefix) {
  SolverState s;
  s.net = load_net(ckpt, prefix);
  s.z0 = ckpt.array(prefix + "z0");
  s.horizon = ckpt.scalar(prefix + "T");
  s.batch = static_cast<std::size_t>(ckpt.scalar(prefix + "M"));
  s.iteration = static_cast<std::uint64_t>(ckpt.scalar(prefix + "iteration"));
  load_adam(ckpt, s.optimizer, s.adam, prefix);
  s.validate();
  return s;
}

Checkpoint corrected_model_checkpoint(const SolverState& s, const CorrectionState& c,
                                      const std::string& system) {
  Checkpoint ckpt;
  ckpt.labels["system"] = system;
  ckpt.labels["mode"] = std::string(to_string(c.mode));
  store_solver(ckpt, s, "primary.");
  store_net(ckpt, c.net2, "correction.");
  ckpt.arrays["correction.output_scale"] = c.output_scale;
  ckpt.arrays["correction.iteration"] = {static_cast<double>(c.iteration)};
  ckpt.arrays["correction.order"] = {static_cast<double>(c.order)};
  ckpt.arrays["correction.M"] = {static_cast<double>(c.batch)};
  store_adam(ckpt, c.optimizer, c.adam, "correction.");
  return ckpt;
}

CorrectionState load_correction(const Checkpoint& ckpt, const std::string& prefix) {
  CorrectionState c;
  c.net2 = load_net(ckpt, prefix);
  c.output_scale = ckpt.array(prefix + "output_scale");
  c.iteration = static_cast<std::uint64_t>(ckpt.scalar(prefix + "iteration"));
  c.order = static_cast<int>(ckpt.scalar(prefix + "order"));
  c.batch = static_cast<std::size_t>(ckpt.scalar(prefix + "M"));
  c.mode = parse_correction_mode(ckpt.label("mode"));
  load_adam(ckpt, c.optimizer, c.adam, prefix);
  return c;
}

}  // namespace nnde
