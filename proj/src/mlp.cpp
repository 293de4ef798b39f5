#include "dipa/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dipa/rng.hpp"

namespace dipa::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least two layer sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layers_.push_back({MatrixXd::Zero(sizes_[l + 1], sizes_[l]), VectorXd::Zero(sizes_[l + 1])});
  }
}

Mlp Mlp::initialized(std::vector<int> layer_sizes, std::uint64_t seed) {
  Mlp net(std::move(layer_sizes));
  RngStream rng = derive_stream(seed, {"mlp-init"});
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
  }
  return net;
}

VectorXd Mlp::forward(const VectorXd& x) const {
  if (x.size() != input_size())
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(input_size()));
  VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    VectorXd z = layers_[l].weight * a + layers_[l].bias;
    a = (l + 1 < layers_.size()) ? VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

MatrixXd Mlp::forward_batch(const MatrixXd& inputs) const {
  if (inputs.rows() != input_size())
    throw std::invalid_argument("Mlp::forward_batch: input rows " + std::to_string(inputs.rows()) +
                                ", expected " + std::to_string(input_size()));
  MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

VectorXd Mlp::flatten() const {
  VectorXd out(num_parameters());
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    out.segment(k, l.weight.size()) = Eigen::Map<const VectorXd>(l.weight.data(), l.weight.size());
    k += l.weight.size();
    out.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return out;
}

void Mlp::assign(const VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters())
    throw std::invalid_argument("Mlp::assign: parameter count mismatch");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    Eigen::Map<VectorXd>(l.weight.data(), l.weight.size()) = flat.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = flat.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

bool Mlp::is_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool Mlp::operator==(const Mlp& o) const {
  if (sizes_ != o.sizes_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].weight != o.layers_[l].weight || layers_[l].bias != o.layers_[l].bias)
      return false;
  return true;
}

VectorXd Gradient::flatten() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  VectorXd out(n);
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    out.segment(k, l.weight.size()) = Eigen::Map<const VectorXd>(l.weight.data(), l.weight.size());
    k += l.weight.size();
    out.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return out;
}

namespace {

void check_batch(const Mlp& net, const MatrixXd& inputs, const MatrixXd& targets) {
  if (inputs.cols() == 0) throw std::invalid_argument("empty batch");
  if (inputs.rows() != net.input_size() || targets.rows() != net.output_size() ||
      inputs.cols() != targets.cols())
    throw std::invalid_argument("batch shape mismatch: inputs " + std::to_string(inputs.rows()) +
                                "x" + std::to_string(inputs.cols()) + ", targets " +
                                std::to_string(targets.rows()) + "x" +
                                std::to_string(targets.cols()));
}

}  // namespace

double mse_loss(const Mlp& net, const MatrixXd& inputs, const MatrixXd& targets) {
  check_batch(net, inputs, targets);
  return (net.forward_batch(inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

Gradient backward(const Mlp& net, const MatrixXd& inputs, const MatrixXd& targets) {
  check_batch(net, inputs, targets);
  const auto& layers = net.layers();
  const std::size_t L = layers.size();

  // activations[0] = input, activations[l+1] = output of layer l
  std::vector<MatrixXd> activations;
  activations.reserve(L + 1);
  activations.push_back(inputs);
  for (std::size_t l = 0; l < L; ++l) {
    MatrixXd z = layers[l].weight * activations.back();
    z.colwise() += layers[l].bias;
    if (l + 1 < L) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }

  Gradient g;
  const double scale = 1.0 / static_cast<double>(targets.size());
  MatrixXd delta = activations.back() - targets;
  g.loss = delta.squaredNorm() * scale;
  delta *= 2.0 * scale;

  g.layers.resize(L);
  for (std::size_t i = L; i-- > 0;) {
    g.layers[i].weight = delta * activations[i].transpose();
    g.layers[i].bias = delta.rowwise().sum();
    if (i > 0) {
      MatrixXd back = layers[i].weight.transpose() * delta;
      // rectifier derivative, taken as 0 at the kink
      delta = back.cwiseProduct((activations[i].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void TrainSpec::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m, v;
  long long t = 0;
};

void adam_step(Mlp& net, const Gradient& g, AdamState& st, double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++st.t;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, g.layers[l].weight, st.m[l].weight, st.v[l].weight);
    update(layers[l].bias, g.layers[l].bias, st.m[l].bias, st.v[l].bias);
  }
}

}  // namespace

FitResult fit(const Mlp& init, const Dataset& data, const TrainSpec& spec) {
  spec.validate();
  const std::size_t n = data.size();
  if (n < 10) throw std::invalid_argument("fit: dataset needs at least 10 rows, got " + std::to_string(n));
  if (data.inputs.rows() != init.input_size() || data.targets.rows() != init.output_size() ||
      data.targets.cols() != data.inputs.cols())
    throw std::invalid_argument("fit: dataset shape does not match network");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream split_rng = derive_stream(spec.seed, {"fit", "split"});
  std::shuffle(order.begin(), order.end(), split_rng.engine());
  std::size_t n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * n));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  const MatrixXd val_in = data.inputs(Eigen::all, val_idx);
  const MatrixXd val_out = data.targets(Eigen::all, val_idx);

  Mlp net = init;
  AdamState adam;
  for (const auto& l : net.layers()) {
    adam.m.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()), VectorXd::Zero(l.bias.size())});
    adam.v.push_back(adam.m.back());
  }

  FitResult result{net, {}};
  TrainReport& rep = result.report;
  rep.train_rows = train_idx.size();
  rep.validation_rows = val_idx.size();
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  RngStream epoch_rng = derive_stream(spec.seed, {"fit", "epochs"});

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), epoch_rng.engine());
    double loss_sum = 0.0;
    std::size_t rows = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += spec.batch_size) {
      std::size_t end = std::min(train_idx.size(), start + spec.batch_size);
      std::vector<int> batch(train_idx.begin() + start, train_idx.begin() + end);
      Gradient g = backward(net, data.inputs(Eigen::all, batch), data.targets(Eigen::all, batch));
      if (!std::isfinite(g.loss)) {
        std::ostringstream msg;
        msg << "fit: non-finite training loss at epoch " << epoch << ", batch starting at row "
            << start << " (last finite epoch loss "
            << (rep.train_loss.empty() ? 0.0 : rep.train_loss.back()) << ")";
        throw std::runtime_error(msg.str());
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      rows += batch.size();
      adam_step(net, g, adam, spec.learning_rate);
    }
    const double train_loss = loss_sum / static_cast<double>(rows);
    const double val_loss = mse_loss(net, val_in, val_out);
    if (!std::isfinite(val_loss) || !net.is_finite()) {
      std::ostringstream msg;
      msg << "fit: non-finite validation loss at epoch " << epoch << " (train loss " << train_loss
          << ")";
      throw std::runtime_error(msg.str());
    }
    rep.train_loss.push_back(train_loss);
    rep.validation_loss.push_back(val_loss);
    rep.epochs_run = epoch;
    if (val_loss < best) {
      best = val_loss;
      since_best = 0;
      rep.best_epoch = epoch;
      result.params = net;
    } else {
      ++since_best;
    }
    rep.best_so_far.push_back(best);
    if (since_best >= spec.patience) break;
  }
  rep.best_validation_loss = best;
  return result;
}

Normalizer::Normalizer(VectorXd mean, VectorXd scale) : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw std::invalid_argument("Normalizer: size mismatch");
}

Normalizer Normalizer::fit(const MatrixXd& inputs) {
  if (inputs.cols() == 0) throw std::invalid_argument("Normalizer::fit: no rows");
  VectorXd mean = inputs.rowwise().mean();
  VectorXd scale(inputs.rows());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    double var = (inputs.row(r).array() - mean(r)).square().mean();
    double sd = std::sqrt(var);
    scale(r) = sd > 1e-12 ? sd : 1.0;
  }
  return Normalizer(std::move(mean), std::move(scale));
}

Normalizer Normalizer::identity(int dims) {
  return Normalizer(VectorXd::Zero(dims), VectorXd::Ones(dims));
}

VectorXd Normalizer::apply(const VectorXd& x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("Normalizer: dimension mismatch");
  return (x - mean_).cwiseQuotient(scale_);
}

MatrixXd Normalizer::apply_batch(const MatrixXd& inputs) const {
  if (inputs.rows() != mean_.size()) throw std::invalid_argument("Normalizer: dimension mismatch");
  MatrixXd out = inputs.colwise() - mean_;
  return scale_.cwiseInverse().asDiagonal() * out;
}

namespace {

using nlohmann::json;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::runtime_error("checkpoint: " + what + " is not an array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

json to_json(const Regressor& r) {
  json layers = json::array();
  for (const auto& l : r.net.layers()) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) rows.push_back(vec_json(l.weight.row(i).transpose()));
    layers.push_back({{"weight", rows}, {"bias", vec_json(l.bias)}});
  }
  return {{"layer_sizes", r.net.layer_sizes()},
          {"activation", "relu"},
          {"layers", layers},
          {"normalizer", {{"mean", vec_json(r.normalizer.mean())}, {"scale", vec_json(r.normalizer.scale())}}},
          {"metadata", r.metadata}};
}

Regressor regressor_from_json(const json& j) {
  Regressor r;
  std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
  r.net = Mlp(sizes);
  const json& layers = j.at("layers");
  if (layers.size() != r.net.layers().size()) throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = r.net.layers()[l];
    const json& rows = layers[l].at("weight");
    if (static_cast<Eigen::Index>(rows.size()) != dst.weight.rows())
      throw std::runtime_error("checkpoint: weight rows mismatch in layer " + std::to_string(l));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      VectorXd row = vec_from(rows[i], "weight row");
      if (row.size() != dst.weight.cols())
        throw std::runtime_error("checkpoint: weight cols mismatch in layer " + std::to_string(l));
      dst.weight.row(i) = row.transpose();
    }
    dst.bias = vec_from(layers[l].at("bias"), "bias");
    if (dst.bias.size() != dst.weight.rows()) throw std::runtime_error("checkpoint: bias size mismatch");
  }
  const json& norm = j.at("normalizer");
  r.normalizer = Normalizer(vec_from(norm.at("mean"), "mean"), vec_from(norm.at("scale"), "scale"));
  if (r.normalizer.mean().size() != r.net.input_size())
    throw std::runtime_error("checkpoint: normalizer size mismatch");
  if (j.contains("metadata")) r.metadata = j.at("metadata");
  return r;
}

void save_checkpoint(const Regressor& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f << to_json(r).dump() << '\n';
}

Regressor load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("missing checkpoint " + path);
  return regressor_from_json(json::parse(f));
}

}  // namespace dipa::nn
