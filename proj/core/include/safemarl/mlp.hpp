#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace safemarl {

enum class Activation { relu, tanh, identity };

/// Fully connected network with manual backpropagation. All parameters live
/// in one flat vector (per layer: weight matrix column-major, then bias), so
/// optimisers, soft updates and checkpoints work on a single buffer.
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, Activation hidden, Activation head, double head_scale = 1.0);

  const std::vector<int>& dims() const { return dims_; }
  int input_size() const { return dims_.front(); }
  int output_size() const { return dims_.back(); }
  int layer_count() const { return static_cast<int>(dims_.size()) - 1; }
  Activation hidden_activation() const { return hidden_; }
  Activation head_activation() const { return head_; }
  double head_scale() const { return head_scale_; }

  Eigen::Index parameter_count() const { return params_.size(); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  /// Uniform(+-1/sqrt(fan_in)) for weights and biases.
  void initialize(std::mt19937_64& rng);
  /// Zeroes the output layer, making the network output constant zero for
  /// a tanh or identity head.
  void zero_head();

  bool same_architecture(const Mlp& other) const;

  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
    Eigen::MatrixXd output;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& inputs, Tape& tape) const;

  /// Given dL/d(output), adds dL/d(params) into `*grad_params` (resized and
  /// zeroed if its size is wrong) and returns dL/d(inputs). Pass nullptr
  /// when only the input gradient is needed.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                           Eigen::VectorXd* grad_params) const;

 private:
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(dims_[layer + 1]) * dims_[layer];
  }

  std::vector<int> dims_;
  std::vector<Eigen::Index> offsets_;
  Activation hidden_ = Activation::relu;
  Activation head_ = Activation::identity;
  double head_scale_ = 1.0;
  Eigen::VectorXd params_;
};

/// Adaptive moment estimation with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  /// Gradient *descent* step on `params`.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  long steps() const { return t_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

}  // namespace safemarl
