#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dipa::nn {

// Affine layer: out = weight * in + bias.
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Fully-connected network, rectifier on hidden layers, identity output.
// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  // All-zero parameters.
  explicit Mlp(std::vector<int> layer_sizes);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static Mlp initialized(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  std::size_t num_parameters() const;
  // Layer by layer: weight (column-major) then bias.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  bool is_finite() const;
  bool operator==(const Mlp& o) const;

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

struct Gradient {
  double loss = 0.0;
  std::vector<DenseLayer> layers;  // same shapes as the network

  Eigen::VectorXd flatten() const;
};

// Mean squared error over every output of every sample:
//   L = 1/(N*out) * sum_n sum_j (y_nj - t_nj)^2
double mse_loss(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

// Loss and its gradient with respect to every parameter.
Gradient backward(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

struct Dataset {
  Eigen::MatrixXd inputs;   // in x N
  Eigen::MatrixXd targets;  // out x N
  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

struct TrainSpec {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 300;
  int patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based
  double best_validation_loss = 0.0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> best_so_far;  // running minimum of validation_loss
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
};

struct FitResult {
  Mlp params;
  TrainReport report;
};

// Mini-batch Adam with early stopping on a seeded train/validation split.
// Returns the parameters of the best validation epoch. Throws
// std::invalid_argument for fewer than 10 rows and std::runtime_error when the
// loss becomes non-finite.
FitResult fit(const Mlp& init, const Dataset& data, const TrainSpec& spec);

// Per-dimension standardisation; zero-variance dimensions pass through
// centred.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Eigen::VectorXd mean, Eigen::VectorXd scale);
  static Normalizer fit(const Eigen::MatrixXd& inputs);
  static Normalizer identity(int dims);

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply_batch(const Eigen::MatrixXd& inputs) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  bool operator==(const Normalizer& o) const { return mean_ == o.mean_ && scale_ == o.scale_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

// Normalizer followed by a network.
struct Regressor {
  Normalizer normalizer;
  Mlp net;
  nlohmann::json metadata = nlohmann::json::object();

  Eigen::VectorXd predict(const Eigen::VectorXd& raw) const {
    return net.forward(normalizer.apply(raw));
  }
  bool operator==(const Regressor& o) const {
    return normalizer == o.normalizer && net == o.net;
  }
};

nlohmann::json to_json(const Regressor& r);
Regressor regressor_from_json(const nlohmann::json& j);
void save_checkpoint(const Regressor& r, const std::string& path);
Regressor load_checkpoint(const std::string& path);

}  // namespace dipa::nn
