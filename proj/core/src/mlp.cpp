#include "safemarl/mlp.hpp"

#include <cmath>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

void activate(Activation act, double scale, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::relu: out = pre.cwiseMax(0.0); break;
    case Activation::tanh: out = scale * pre.array().tanh(); break;
    case Activation::identity: out = scale * pre; break;
  }
}

// grad wrt pre-activation, given grad wrt the activation output.
Eigen::MatrixXd activation_backward(Activation act, double scale, const Eigen::MatrixXd& pre,
                                    const Eigen::MatrixXd& grad) {
  switch (act) {
    case Activation::relu: return (pre.array() > 0.0).cast<double>() * grad.array();
    case Activation::tanh: {
      const Eigen::ArrayXXd t = pre.array().tanh();
      return (scale * (1.0 - t * t)) * grad.array();
    }
    case Activation::identity: return scale * grad;
  }
  return grad;
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, Activation hidden, Activation head, double head_scale)
    : dims_(std::move(dims)), hidden_(hidden), head_(head), head_scale_(head_scale) {
  if (dims_.size() < 2) throw InputError("Mlp: need at least input and output sizes");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] < 1 || dims_[l + 1] < 1) throw InputError("Mlp: layer sizes must be >= 1");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(dims_[l + 1]) * (dims_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(total);
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(int layer) {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int layer) {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}

void Mlp::initialize(std::mt19937_64& rng) {
  for (int l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto W = weight(l);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = u(rng);
    }
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = u(rng);
  }
}

void Mlp::zero_head() {
  weight(layer_count() - 1).setZero();
  bias(layer_count() - 1).setZero();
}

bool Mlp::same_architecture(const Mlp& other) const {
  return dims_ == other.dims_ && hidden_ == other.hidden_ && head_ == other.head_ &&
         head_scale_ == other.head_scale_;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  Tape tape;
  return forward(inputs, tape);
}

const Eigen::MatrixXd& Mlp::forward(const Eigen::MatrixXd& inputs, Tape& tape) const {
  if (inputs.rows() != input_size()) throw InputError("Mlp: input size mismatch");
  const int L = layer_count();
  tape.inputs.resize(L);
  tape.pre.resize(L);
  tape.inputs[0] = inputs;
  for (int l = 0; l < L; ++l) {
    tape.pre[l].noalias() = weight(l) * tape.inputs[l];
    tape.pre[l].colwise() += bias(l);
    const bool last = l + 1 == L;
    Eigen::MatrixXd& out = last ? tape.output : tape.inputs[l + 1];
    activate(last ? head_ : hidden_, last ? head_scale_ : 1.0, tape.pre[l], out);
  }
  return tape.output;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                              Eigen::VectorXd* grad_params) const {
  if (grad_params && grad_params->size() != params_.size()) {
    *grad_params = Eigen::VectorXd::Zero(params_.size());
  }
  const int L = layer_count();
  Eigen::MatrixXd grad = grad_output;
  for (int l = L - 1; l >= 0; --l) {
    const bool last = l + 1 == L;
    const Eigen::MatrixXd delta =
        activation_backward(last ? head_ : hidden_, last ? head_scale_ : 1.0, tape.pre[l], grad);
    if (grad_params) {
      Eigen::Map<Eigen::MatrixXd> gW(grad_params->data() + weight_offset(l), dims_[l + 1],
                                     dims_[l]);
      Eigen::Map<Eigen::VectorXd> gb(grad_params->data() + bias_offset(l), dims_[l + 1]);
      gW.noalias() += delta * tape.inputs[l].transpose();
      gb += delta.rowwise().sum();
    }
    grad.noalias() = weight(l).transpose() * delta;
  }
  return grad;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != params.size() || m_.size() != params.size()) {
    throw InputError("Adam: size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace safemarl
