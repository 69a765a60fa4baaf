#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qaware/errors.hpp"
#include "qaware/random.hpp"

namespace qaware::dqn {

enum class Mode { train, eval };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Hidden width for an M-dimensional state: 2.5 M rounded, ties to even.
inline int hidden_width(int state_dim) {
  return std::max(1, static_cast<int>(std::nearbyint(2.5 * state_dim)));
}

// Input, hidden, hidden, output sizes for M state components, C clients, N sensors.
inline std::vector<int> architecture(int state_dim, int clients, int sensors) {
  return {state_dim * state_dim + state_dim + clients, hidden_width(state_dim), state_dim, sensors};
}

/// Fully connected Q-network with ReLU on every layer and dropout on the
/// hidden layers in training mode.
///
/// The last ReLU clamps the raw output at zero, so the network represents
/// the cost-to-go -Q and `forward` returns its negation. Rewards in this
/// problem are never positive, so the returned Q-values are never positive.
class QNetwork {
 public:
  struct Trace {
    std::vector<Eigen::VectorXd> inputs;  // input to each layer
    std::vector<Eigen::VectorXd> pre;     // affine output of each layer
    std::vector<Eigen::VectorXd> masks;   // dropout scale per hidden unit (0 or 1/keep)
  };

  QNetwork() = default;

  QNetwork(std::vector<int> sizes, double dropout) : sizes_(std::move(sizes)), dropout_(dropout) {
    if (sizes_.size() < 2) throw ConfigError("network needs at least an input and an output size");
    for (int s : sizes_)
      if (s < 1) throw ConfigError("layer sizes must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
  }

  /// He-uniform weights, zero hidden biases and a positive output bias so the
  /// output ReLU starts in its active region.
  static QNetwork initialized(std::vector<int> sizes, double dropout, Rng& rng, double output_bias = 1.0) {
    QNetwork net(std::move(sizes), dropout);
    for (auto& layer : net.layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    }
    net.layers_.back().bias.setConstant(output_bias);
    return net;
  }

  [[nodiscard]] const std::vector<int>& sizes() const { return sizes_; }
  [[nodiscard]] int input_size() const { return sizes_.front(); }
  [[nodiscard]] int output_size() const { return sizes_.back(); }
  [[nodiscard]] double dropout() const { return dropout_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& s, Mode mode, Rng& rng, Trace* trace = nullptr) const {
    if (s.size() != input_size()) throw ConfigError("network input has the wrong length");
    if (!s.allFinite()) throw NumericError("non-finite network input");
    if (trace) *trace = Trace{};
    const double keep = 1.0 - dropout_;
    Eigen::VectorXd a = s;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
      if (trace) {
        trace->inputs.push_back(a);
        trace->pre.push_back(z);
      }
      a = z.cwiseMax(0.0);
      if (l + 1 < layers_.size() && mode == Mode::train && dropout_ > 0.0) {
        Eigen::VectorXd mask(a.size());
        for (Eigen::Index i = 0; i < a.size(); ++i) mask[i] = uniform01(rng) < keep ? 1.0 / keep : 0.0;
        a = a.cwiseProduct(mask);
        if (trace) trace->masks.push_back(std::move(mask));
      } else if (trace && l + 1 < layers_.size()) {
        trace->masks.push_back(Eigen::VectorXd::Ones(a.size()));
      }
    }
    return -a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& s) const {
    Rng unused{0};
    return forward(s, Mode::eval, unused);
  }

  /// Adds d(loss)/d(params) to `grads`, given d(loss)/dQ for one action.
  void backward(const Trace& trace, std::size_t action, double dloss_dq, std::vector<DenseLayer>& grads) const {
    const auto last = layers_.size() - 1;
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(layers_[last].bias.size());
    const auto a = static_cast<Eigen::Index>(action);
    // Q_a = -relu(z_a)
    delta[a] = trace.pre[last][a] > 0.0 ? -dloss_dq : 0.0;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      grads[l].weight.noalias() += delta * trace.inputs[l].transpose();
      grads[l].bias += delta;
      if (l == 0) break;
      Eigen::VectorXd upstream = layers_[l].weight.transpose() * delta;
      const auto& z = trace.pre[l - 1];
      delta = upstream.cwiseProduct(trace.masks[l - 1]);
      for (Eigen::Index i = 0; i < delta.size(); ++i)
        if (z[i] <= 0.0) delta[i] = 0.0;
    }
  }

  [[nodiscard]] std::vector<DenseLayer> zero_gradients() const {
    std::vector<DenseLayer> g;
    for (const auto& layer : layers_)
      g.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                   Eigen::VectorXd::Zero(layer.bias.size())});
    return g;
  }

  // Weights (column-major per layer) then biases, layer by layer.
  [[nodiscard]] Eigen::VectorXd flat_parameters() const {
    Eigen::Index total = 0;
    for (const auto& l : layers_) total += l.weight.size() + l.bias.size();
    Eigen::VectorXd flat(total);
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
      flat.segment(off, l.weight.size()) = l.weight.reshaped();
      off += l.weight.size();
      flat.segment(off, l.bias.size()) = l.bias;
      off += l.bias.size();
    }
    return flat;
  }

  void set_flat_parameters(const Eigen::VectorXd& flat) {
    Eigen::Index off = 0;
    for (auto& l : layers_) {
      l.weight.reshaped() = flat.segment(off, l.weight.size());
      off += l.weight.size();
      l.bias = flat.segment(off, l.bias.size());
      off += l.bias.size();
    }
  }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
  }

  friend bool operator==(const QNetwork& a, const QNetwork& b) {
    if (a.sizes_ != b.sizes_ || a.dropout_ != b.dropout_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l)
      if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
    return true;
  }

 private:
  std::vector<int> sizes_;
  double dropout_ = 0.0;
  std::vector<DenseLayer> layers_;
};

inline Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(total);
  Eigen::Index off = 0;
  for (const auto& l : layers) {
    flat.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    flat.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return flat;
}

// FNV-1a over the raw parameter bytes; used to detect any parameter change.
inline std::uint64_t parameter_hash(const QNetwork& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const Eigen::VectorXd flat = net.flat_parameters();
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(flat.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(const QNetwork& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(net.zero_gradients()), v_(net.zero_gradients()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(QNetwork& net, const std::vector<DenseLayer>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      apply(layers[l].weight, grads[l].weight, m_[l].weight, v_[l].weight, lr, c1, c2);
      apply(layers[l].bias, grads[l].bias, m_[l].bias, v_[l].bias, lr, c1, c2);
    }
  }

  [[nodiscard]] std::int64_t steps() const { return t_; }

 private:
  template <typename P, typename G>
  void apply(P& param, const G& grad, G& m, G& v, double lr, double c1, double c2) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }

  std::vector<DenseLayer> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct Experience {
  Eigen::VectorXd s;
  std::size_t action = 0;
  double reward = 0.0;
  Eigen::VectorXd s_next;
};

/// Fixed-capacity FIFO of experiences with uniform sampling.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 10000) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay memory capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Experience e) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(e));
    } else {
      items_[next_] = std::move(e);
    }
    next_ = (next_ + 1) % capacity_;
  }

  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] const Experience& operator[](std::size_t i) const { return items_[i]; }

  // Indices drawn uniformly with replacement.
  [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> dist(0, items_.size() - 1);
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = dist(rng);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> items_;
};

struct TrainConfig {
  double gamma = 0.9;
  int episodes = 100;
  int episode_len = 100;
  int batch = 128;
  int target_update_period = 10;
  double learning_rate = 1e-4;
  double dropout = 0.1;
  std::size_t memory_capacity = 10000;
  double temperature_start = 1.0;
  double temperature_decay = 0.96;
  double temperature_floor = 0.05;
  std::uint64_t seed = 1;

  [[nodiscard]] double temperature(int episode) const {
    return std::max(temperature_floor, temperature_start * std::pow(temperature_decay, episode));
  }

  // Stable hash of every field except the seed, recorded in checkpoints.
  [[nodiscard]] std::uint64_t hash() const {
    std::ostringstream os;
    os.precision(17);
    os << gamma << ' ' << episodes << ' ' << episode_len << ' ' << batch << ' ' << target_update_period << ' '
       << learning_rate << ' ' << dropout << ' ' << memory_capacity << ' ' << temperature_start << ' '
       << temperature_decay << ' ' << temperature_floor;
    return qaware::detail::fnv1a(os.str());
  }
};

inline double td_target(const Experience& e, const QNetwork& target, double gamma) {
  if (gamma == 0.0) return e.reward;
  return e.reward + gamma * target.forward(e.s_next).maxCoeff();
}

/// Softmax over Q / temperature, computed with max subtraction.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& q, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
  Eigen::ArrayXd e = ((q.array() - q.maxCoeff()) / temperature).exp();
  return (e / e.sum()).matrix();
}

inline std::size_t softmax_select(const Eigen::VectorXd& q, double temperature, Rng& rng) {
  const Eigen::VectorXd p = softmax(q, temperature);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<std::size_t>(i);
  }
  // Rounding left u above the total; fall back to the last action with mass.
  for (Eigen::Index i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<std::size_t>(i);
  return 0;
}

inline std::size_t greedy_action(const Eigen::VectorXd& q) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return static_cast<std::size_t>(best);
}

/// Mean squared TD error over a batch and its gradient.
///
/// `targets[i]` is the label for `batch[i]`; only the output of the action
/// taken in each experience receives gradient.
inline double batch_loss_and_gradient(const QNetwork& net, std::span<const Experience* const> batch,
                                      std::span<const double> targets, Mode mode, Rng& rng,
                                      std::vector<DenseLayer>* grads) {
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  QNetwork::Trace trace;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Experience& e = *batch[i];
    const Eigen::VectorXd q = net.forward(e.s, mode, rng, grads ? &trace : nullptr);
    const double err = q[static_cast<Eigen::Index>(e.action)] - targets[i];
    loss += err * err * inv;
    if (grads) net.backward(trace, e.action, 2.0 * err * inv, *grads);
  }
  return loss;
}

/// One Adam step on a uniformly sampled batch. Returns nothing when memory
/// holds fewer than `batch` experiences.
inline std::optional<double> train_step(QNetwork& update_net, const QNetwork& target_net, const ReplayMemory& memory,
                                        const TrainConfig& config, Adam& optimizer, Rng& rng) {
  const auto b = static_cast<std::size_t>(config.batch);
  if (memory.size() < b || b == 0) return std::nullopt;
  std::vector<const Experience*> batch;
  std::vector<double> targets;
  batch.reserve(b);
  targets.reserve(b);
  for (auto i : memory.sample_indices(b, rng)) {
    batch.push_back(&memory[i]);
    targets.push_back(td_target(memory[i], target_net, config.gamma));
  }
  auto grads = update_net.zero_gradients();
  const double loss = batch_loss_and_gradient(update_net, batch, targets, Mode::train, rng, &grads);
  optimizer.step(update_net, grads, config.learning_rate);
  if (!update_net.all_finite()) throw NumericError("network parameters diverged");
  return loss;
}

inline void sync_target(const QNetwork& update_net, QNetwork& target_net) { target_net = update_net; }

/// Basic operations for one forward pass: sum over layers of out * (2 in + k).
inline std::int64_t count_operations(std::span<const std::int64_t> sizes, std::int64_t k) {
  if (sizes.size() < 2) throw std::invalid_argument("need at least two layer sizes");
  std::int64_t total = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) total += sizes[i + 1] * (2 * sizes[i] + k);
  return total;
}

// One training step costs a forward-pass equivalent per batch sample.
inline std::int64_t count_train(std::span<const std::int64_t> sizes, std::int64_t k, std::int64_t batch) {
  return batch * count_operations(sizes, k);
}

// Reference operation count quoted for the M=20, C=2, N=20 network;
// evaluating the formula on those layer sizes gives 45090 instead.
inline constexpr std::int64_t kReportedForwardOps = 96570;

struct CheckpointHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline constexpr char kCheckpointMagic[8] = {'Q', 'A', 'W', 'Q', 'N', 'E', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("truncated checkpoint");
  return v;
}

}  // namespace detail

/// Binary checkpoint: magic, version, config hash, seed, dropout, layer
/// sizes, then per layer the row-major weights followed by the biases.
/// Values are stored as raw little-endian doubles and round-trip exactly.
inline void save_checkpoint(const std::string& path, const QNetwork& net, const CheckpointHeader& header) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_raw(os, kCheckpointVersion);
  detail::write_raw(os, header.config_hash);
  detail::write_raw(os, header.seed);
  detail::write_raw(os, net.dropout());
  detail::write_raw(os, static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) detail::write_raw(os, static_cast<std::uint32_t>(s));
  for (const auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) detail::write_raw(os, layer.weight(i, j));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) detail::write_raw(os, layer.bias[i]);
  }
  if (!os) throw ConfigError("failed writing checkpoint: " + path);
}

inline QNetwork load_checkpoint(const std::string& path, CheckpointHeader* header = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw ConfigError("not a checkpoint: " + path);
  if (detail::read_raw<std::uint32_t>(is) != kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
  CheckpointHeader h;
  h.config_hash = detail::read_raw<std::uint64_t>(is);
  h.seed = detail::read_raw<std::uint64_t>(is);
  const double dropout = detail::read_raw<double>(is);
  const auto count = detail::read_raw<std::uint32_t>(is);
  if (count < 2 || count > 64) throw ConfigError("corrupt checkpoint layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes) s = static_cast<int>(detail::read_raw<std::uint32_t>(is));
  QNetwork net(sizes, dropout);
  for (auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = detail::read_raw<double>(is);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = detail::read_raw<double>(is);
  }
  if (header) *header = h;
  return net;
}

}  // namespace qaware::dqn
