#include "dappr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dappr/error.hpp"
#include "dappr/rng.hpp"
#include "json.hpp"

namespace dappr {

namespace {

constexpr std::uint64_t kInitStream = 0x1a1b;
constexpr std::uint64_t kShuffleStream = 0x5f5f;

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

template <typename Fn>
void for_each_tensor(NetworkParams& a, const NetworkParams& b, Fn&& fn) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    fn(a.layers[l].weight, b.layers[l].weight, true);
    fn(a.layers[l].bias, b.layers[l].bias, false);
  }
}

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }
std::string to_string(LossKind kind) { return kind == LossKind::dappr ? "dappr" : "cross_entropy"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ArgumentError("unknown optimizer '" + name + "'");
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "dappr") return LossKind::dappr;
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  throw ArgumentError("unknown loss kind '" + name + "'");
}

void NetworkParams::validate() const {
  if (layers.empty()) throw ArgumentError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.rows() != layer.bias.size()) throw ArgumentError("bias length does not match layer output");
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      throw ArgumentError("layer dimensions do not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) throw ArgumentError("non-finite network parameter");
  }
}

Eigen::Index NetworkParams::input_dim() const { return layers.front().weight.cols(); }
Eigen::Index NetworkParams::output_dim() const { return layers.back().weight.rows(); }

std::vector<int> NetworkParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(input_dim()));
  for (const auto& layer : layers) sizes.push_back(static_cast<int>(layer.weight.rows()));
  return sizes;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams out;
  for (const auto& layer : layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                          Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return out;
}

void TrainConfig::validate() const {
  if (layer_sizes.size() < 2) throw ArgumentError("layer_sizes needs at least input and output sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw ArgumentError("layer sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (epochs < 0) throw ArgumentError("epochs must be non-negative");
  if (batch_size < 1) throw ArgumentError("batch size must be positive");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be non-negative");
  if (loss_kind == LossKind::dappr) {
    LossConfig check = loss_cfg;
    check.total_epochs = std::max(epochs, 1);
    check.validate();
  }
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_loss,val_accuracy,val_mean_alpha0\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_accuracy << ',' << r.val_mean_alpha0 << '\n';
  }
  return out.str();
}

NetworkParams init_network(const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, kInitStream));
  NetworkParams params;
  for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
    const int fan_in = cfg.layer_sizes[l];
    const int fan_out = cfg.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardResult forward(const NetworkParams& params, const Eigen::MatrixXd& x) {
  if (params.layers.empty()) throw ArgumentError("network has no layers");
  if (x.cols() != params.input_dim()) throw ArgumentError("input width does not match the first layer");
  ForwardResult out;
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd pre = h * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    out.cache.inputs.push_back(std::move(h));
    const bool last = l + 1 == params.layers.size();
    h = last ? pre : relu(pre);
    out.cache.pre_activations.push_back(std::move(pre));
  }
  out.logits = std::move(h);
  return out;
}

Eigen::MatrixXd predict_logits(const NetworkParams& params, const Eigen::MatrixXd& x) {
  return forward(params, x).logits;
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache, const Eigen::MatrixXd& grad_logits) {
  const std::size_t depth = params.layers.size();
  if (cache.inputs.size() != depth || cache.pre_activations.size() != depth) {
    throw ArgumentError("forward cache does not match the network");
  }
  if (grad_logits.rows() != cache.inputs.front().rows() || grad_logits.cols() != params.output_dim()) {
    throw ArgumentError("logit gradient shape does not match the forward pass");
  }
  NetworkParams grads = params.zeros_like();
  Eigen::MatrixXd upstream = grad_logits;
  for (std::size_t l = depth; l-- > 0;) {
    grads.layers[l].weight = upstream.transpose() * cache.inputs[l];
    grads.layers[l].bias = upstream.colwise().sum().transpose();
    if (l == 0) break;
    upstream = upstream * params.layers[l].weight;
    const auto& pre = cache.pre_activations[l - 1];
    upstream = (pre.array() > 0.0).select(upstream, 0.0);
  }
  return grads;
}

LossOutput compute_loss(LossKind kind, const Eigen::MatrixXd& logits, std::span<const int> labels,
                        const LossConfig& cfg, int epoch) {
  if (kind == LossKind::dappr) return dappr_loss(logits, labels, cfg, epoch);
  return cross_entropy_loss(logits, labels);
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double weight_decay)
    : kind_(kind), learning_rate_(learning_rate), weight_decay_(weight_decay) {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
}

void Optimizer::step(NetworkParams& params, const NetworkParams& grads) {
  NetworkParams g = grads;
  if (weight_decay_ > 0.0) {
    for (std::size_t l = 0; l < g.layers.size(); ++l) g.layers[l].weight += weight_decay_ * params.layers[l].weight;
  }
  if (kind_ == OptimizerKind::sgd) {
    for_each_tensor(params, g, [&](auto& p, const auto& d, bool) { p -= learning_rate_ * d; });
    return;
  }
  if (steps_ == 0) {
    first_moment_ = params.zeros_like();
    second_moment_ = params.zeros_like();
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(steps_));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](auto& p, auto& m, auto& v, const auto& d) {
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * d;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * d.cwiseProduct(d);
      p.array() -= learning_rate_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
    };
    update(params.layers[l].weight, first_moment_.layers[l].weight, second_moment_.layers[l].weight,
           g.layers[l].weight);
    update(params.layers[l].bias, first_moment_.layers[l].bias, second_moment_.layers[l].bias, g.layers[l].bias);
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(derive_seed(seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::vector<DirichletParams> predict_alpha(const NetworkParams& params, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd logits = predict_logits(params, x);
  std::vector<DirichletParams> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  std::vector<double> row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index k = 0; k < logits.cols(); ++k) row[static_cast<std::size_t>(k)] = logits(r, k);
    out.push_back(softplus_plus_one(row));
  }
  return out;
}

std::vector<int> predict_labels(const NetworkParams& params, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd logits = predict_logits(params, x);
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

double accuracy(const NetworkParams& params, const LabeledDataset& ds) {
  if (ds.size() == 0) return 0.0;
  const auto predicted = predict_labels(params, ds.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += predicted[i] == ds.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

TrainResult train(const TrainConfig& cfg, const LabeledDataset& train_set, const LabeledDataset& val_set) {
  cfg.validate();
  train_set.validate();
  val_set.validate();
  if (train_set.dim() != cfg.layer_sizes.front() || val_set.dim() != cfg.layer_sizes.front()) {
    throw ArgumentError("dataset width does not match the input layer");
  }
  if (cfg.layer_sizes.back() != train_set.num_classes) {
    throw ArgumentError("output layer size must equal the number of classes");
  }

  TrainResult result;
  result.params = init_network(cfg);
  if (cfg.epochs == 0) return result;

  LossConfig loss_cfg = cfg.loss_cfg;
  loss_cfg.total_epochs = cfg.epochs;
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);

  const std::size_t n = train_set.size();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  double best_val = -1.0;
  NetworkParams best_params = result.params;

  Eigen::MatrixXd batch_x;
  std::vector<int> batch_y;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      batch_x.resize(static_cast<Eigen::Index>(count), train_set.dim());
      batch_y.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i)) = train_set.features.row(static_cast<Eigen::Index>(order[start + i]));
        batch_y[i] = train_set.labels[order[start + i]];
      }
      const auto fwd = forward(result.params, batch_x);
      const auto loss = compute_loss(cfg.loss_kind, fwd.logits, batch_y, loss_cfg, epoch);
      loss_sum += loss.value * static_cast<double>(count);
      optimizer.step(result.params, backward(result.params, fwd.cache, loss.grad_logits));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.val_accuracy = accuracy(result.params, val_set);
    double alpha0_sum = 0.0;
    for (const auto& a : predict_alpha(result.params, val_set.features)) alpha0_sum += a.alpha0();
    record.val_mean_alpha0 = alpha0_sum / static_cast<double>(val_set.size());
    result.history.records.push_back(record);

    if (cfg.early_stopping && record.val_accuracy > best_val) {
      best_val = record.val_accuracy;
      best_params = result.params;
      result.selected_epoch = epoch;
    }
  }
  if (cfg.early_stopping) {
    result.params = std::move(best_params);
  } else {
    result.selected_epoch = cfg.epochs;
  }
  return result;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  ckpt.params.validate();
  nlohmann::ordered_json doc;
  doc["layer_sizes"] = ckpt.params.layer_sizes();
  doc["seed"] = ckpt.seed;
  doc["loss_kind"] = to_string(ckpt.loss_kind);
  auto layers = nlohmann::ordered_json::array();
  for (const auto& layer : ckpt.params.layers) {
    nlohmann::ordered_json entry;
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(layer.weight.cols()));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row[static_cast<std::size_t>(c)] = layer.weight(r, c);
      rows.push_back(row);
    }
    entry["weight"] = std::move(rows);
    entry["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(entry));
  }
  doc["weights"] = std::move(layers);
  return doc.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint ckpt;
  try {
    const auto doc = nlohmann::json::parse(text);
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.loss_kind = parse_loss_kind(doc.at("loss_kind").get<std::string>());
    const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
    const auto& layers = doc.at("weights");
    if (sizes.size() != layers.size() + 1) throw ArgumentError("layer_sizes does not match the weight list");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto rows = layers[l].at("weight").get<std::vector<std::vector<double>>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
      if (rows.size() != static_cast<std::size_t>(sizes[l + 1]) || bias.size() != rows.size()) {
        throw ArgumentError("checkpoint layer shape mismatch");
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(sizes[l])) throw ArgumentError("checkpoint layer shape mismatch");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        layer.bias(static_cast<Eigen::Index>(r)) = bias[r];
      }
      ckpt.params.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed checkpoint: ") + e.what());
  }
  ckpt.params.validate();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << checkpoint_to_json(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace dappr
