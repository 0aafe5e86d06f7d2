#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lelp/matrix.hpp"

namespace lelp::nn {

struct HeadSplit {
  std::size_t classes = 1;
  std::size_t subclasses = 1;
  std::size_t units() const { return classes * subclasses; }
};

// Fully connected network: ReLU on hidden layers, linear final layer.
// head records how the output units group into (class, subclass) pairs,
// class-major: subclass s of class c sits at index c * subclasses + s.
struct MlpParams {
  std::vector<std::size_t> layer_dims;  // input, hidden..., output
  std::vector<Matrix> weights;          // weights[l]: layer_dims[l+1] x layer_dims[l]
  std::vector<Vector> biases;
  HeadSplit head;
  std::uint64_t init_seed = 0;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  // Width of the activations feeding the final layer.
  std::size_t embedding_dim() const {
    return layer_dims.size() >= 2 ? layer_dims[layer_dims.size() - 2] : layer_dims.back();
  }
  std::size_t parameter_count() const;
};

// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases.
MlpParams make_mlp(std::vector<std::size_t> dims, HeadSplit head, std::uint64_t seed);

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;  // pre-activations per layer
  std::vector<Matrix> act;  // post-activations per layer (last = logits)

  const Matrix& logits() const { return act.back(); }
  // Activations feeding the final layer; the input batch when the model is
  // a single linear layer.
  const Matrix& embedding() const { return act.size() >= 2 ? act[act.size() - 2] : input; }
};

ForwardTrace forward(const MlpParams& model, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

// Backpropagation from dL/dlogits. embedding_grad, when non-null, is an
// extra gradient on the activations feeding the final layer (used by
// embedding-distillation losses).
Gradients backward(const MlpParams& model, const ForwardTrace& trace,
                   const Matrix& logit_grad, const Matrix* embedding_grad = nullptr);

// Row-wise softmax of logits / temperature, max-subtracted. temperature > 0.
Matrix softmax_tempered(const Matrix& logits, double temperature);

struct LossValue {
  double value = 0.0;
  Matrix logit_grad;  // same shape as the logits the loss was taken against
};

// Mean over rows of sum_k p log(p/q) with 0 log 0 := 0. The gradient is
// taken against the logits that produced q via a plain softmax: (q - p)/n.
// Rows of p and q must each sum to 1 within 1e-6.
LossValue kl_divergence(const Matrix& p, const Matrix& q);

// Mean negative log softmax probability of the labeled class.
LossValue cross_entropy(const std::vector<int>& labels, const Matrix& logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long step = 0;
};

OptimizerState make_adam(const MlpParams& model, AdamConfig config = {});
void adam_step(OptimizerState& state, MlpParams& model, const Gradients& grads);

// Single-matrix Adam, for auxiliary parameters such as learnable projections.
struct MatrixAdam {
  AdamConfig config;
  Matrix m, v;
  long step = 0;
};

MatrixAdam make_matrix_adam(const Matrix& shape_like, AdamConfig config = {});
void adam_step(MatrixAdam& state, Matrix& param, const Matrix& grad);

using LogitLoss = std::function<LossValue(const Matrix& logits)>;

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8); numeric gradients by central differences with step 1e-5.
double gradient_check(const MlpParams& model, const LogitLoss& loss, const Matrix& batch);

// Shared configuration for the training loops in this library.
struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double alpha = 0.0;  // weight on the hard-label cross-entropy term
  double tau = 2.0;    // distillation temperature
  std::uint64_t seed = 0;
};

struct TrainResult {
  MlpParams model;
  std::vector<double> step_loss;           // one entry per optimizer step
  std::vector<double> epoch_train_loss;    // mean step loss per epoch
  std::vector<double> epoch_test_accuracy; // per epoch
  double final_accuracy = 0.0;
};

// Per-epoch batch order: a fresh Fisher-Yates permutation from a stream
// derived from (seed, epoch). The last partial batch is kept.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace lelp::nn
