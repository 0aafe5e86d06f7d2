#include "lelp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lelp/rng.hpp"

namespace lelp::nn {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].data.size() + biases[l].size();
  return n;
}

MlpParams make_mlp(std::vector<std::size_t> dims, HeadSplit head, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need input and output dims");
  if (dims.back() != head.units())
    throw std::invalid_argument("make_mlp: output dim must equal classes * subclasses");
  MlpParams m;
  m.layer_dims = std::move(dims);
  m.head = head;
  m.init_seed = seed;
  Rng rng(mix_seed(seed, "mlp_init"));
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const std::size_t fan_in = m.layer_dims[l];
    const std::size_t fan_out = m.layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& x : w.data) x = (2.0 * rng.uniform() - 1.0) * bound;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

ForwardTrace forward(const MlpParams& model, const Matrix& batch) {
  if (batch.cols != model.input_dim())
    throw std::invalid_argument("forward: batch width does not match input dim");
  ForwardTrace t;
  t.input = batch;
  const Matrix* in = &t.input;
  const std::size_t num_layers = model.num_layers();
  t.pre.reserve(num_layers);
  t.act.reserve(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    Matrix z = matmul_nt(*in, model.weights[l]);
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += model.biases[l][j];
    t.pre.push_back(z);
    if (l + 1 < num_layers)
      for (double& x : z.data) x = std::max(x, 0.0);
    t.act.push_back(std::move(z));
    in = &t.act.back();
  }
  return t;
}

Gradients backward(const MlpParams& model, const ForwardTrace& trace,
                   const Matrix& logit_grad, const Matrix* embedding_grad) {
  const std::size_t num_layers = model.num_layers();
  if (trace.act.size() != num_layers)
    throw std::invalid_argument("backward: trace does not match model");
  if (logit_grad.rows != trace.logits().rows || logit_grad.cols != trace.logits().cols)
    throw std::invalid_argument("backward: logit gradient shape mismatch");

  Gradients g;
  g.weights.resize(num_layers);
  g.biases.resize(num_layers);

  Matrix delta = logit_grad;  // gradient on pre[l] (final layer is linear)
  for (std::size_t l = num_layers; l-- > 0;) {
    const Matrix& layer_in = (l == 0) ? trace.input : trace.act[l - 1];
    g.weights[l] = matmul_tn(delta, layer_in);
    Vector& bg = g.biases[l];
    bg.assign(model.biases[l].size(), 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i)
      for (std::size_t j = 0; j < delta.cols; ++j) bg[j] += delta(i, j);
    if (l == 0) break;
    Matrix act_grad = matmul(delta, model.weights[l]);
    if (embedding_grad != nullptr && l == num_layers - 1) {
      if (embedding_grad->rows != act_grad.rows || embedding_grad->cols != act_grad.cols)
        throw std::invalid_argument("backward: embedding gradient shape mismatch");
      for (std::size_t i = 0; i < act_grad.data.size(); ++i)
        act_grad.data[i] += embedding_grad->data[i];
    }
    // Through the ReLU of layer l-1.
    for (std::size_t i = 0; i < act_grad.data.size(); ++i)
      if (trace.pre[l - 1].data[i] <= 0.0) act_grad.data[i] = 0.0;
    delta = std::move(act_grad);
  }
  return g;
}

Matrix softmax_tempered(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("softmax_tempered: temperature must be positive");
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.cols; ++j)
      m = std::max(m, logits(i, j) / temperature);
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const double e = std::exp(logits(i, j) / temperature - m);
      p(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= z;
  }
  return p;
}

namespace {

void check_rows_normalized(const Matrix& m, const char* who) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j);
    if (std::abs(s - 1.0) > 1e-6)
      throw std::invalid_argument(std::string(who) + ": row is not a probability vector");
  }
}

}  // namespace

LossValue kl_divergence(const Matrix& p, const Matrix& q) {
  if (p.rows != q.rows || p.cols != q.cols)
    throw std::invalid_argument("kl_divergence: shape mismatch");
  check_rows_normalized(p, "kl_divergence(p)");
  check_rows_normalized(q, "kl_divergence(q)");
  const double n = static_cast<double>(p.rows);
  LossValue out;
  out.logit_grad = Matrix(p.rows, p.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double pij = p(i, j);
      if (pij > 0.0) total += pij * std::log(pij / q(i, j));
      out.logit_grad(i, j) = (q(i, j) - pij) / n;
    }
  }
  out.value = total / n;
  return out;
}

LossValue cross_entropy(const std::vector<int>& labels, const Matrix& logits) {
  if (labels.size() != logits.rows)
    throw std::invalid_argument("cross_entropy: label count does not match batch");
  const std::size_t k = logits.cols;
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw std::invalid_argument("cross_entropy: label out of range");
  const Matrix probs = softmax_tempered(logits, 1.0);
  const double n = static_cast<double>(logits.rows);
  LossValue out;
  out.logit_grad = probs;
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    total -= std::log(probs(i, y));
    out.logit_grad(i, y) -= 1.0;
  }
  for (double& g : out.logit_grad.data) g /= n;
  out.value = total / n;
  return out;
}

OptimizerState make_adam(const MlpParams& model, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    s.m_weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
    s.v_weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
    s.m_biases.emplace_back(model.biases[l].size(), 0.0);
    s.v_biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return s;
}

namespace {

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 const AdamConfig& c, long step) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

void adam_step(OptimizerState& state, MlpParams& model, const Gradients& grads) {
  if (grads.weights.size() != model.num_layers())
    throw std::invalid_argument("adam_step: gradient layer count mismatch");
  ++state.step;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    adam_update(model.weights[l].data, grads.weights[l].data,
                state.m_weights[l].data, state.v_weights[l].data,
                state.config, state.step);
    adam_update(model.biases[l], grads.biases[l],
                state.m_biases[l], state.v_biases[l], state.config, state.step);
  }
}

MatrixAdam make_matrix_adam(const Matrix& shape_like, AdamConfig config) {
  MatrixAdam s;
  s.config = config;
  s.m = Matrix(shape_like.rows, shape_like.cols);
  s.v = Matrix(shape_like.rows, shape_like.cols);
  return s;
}

void adam_step(MatrixAdam& state, Matrix& param, const Matrix& grad) {
  if (grad.rows != param.rows || grad.cols != param.cols)
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  ++state.step;
  adam_update(param.data, grad.data, state.m.data, state.v.data, state.config, state.step);
}

double gradient_check(const MlpParams& model, const LogitLoss& loss, const Matrix& batch) {
  const ForwardTrace trace = forward(model, batch);
  const LossValue lv = loss(trace.logits());
  const Gradients analytic = backward(model, trace, lv.logit_grad);

  constexpr double h = 1e-5;
  MlpParams probe = model;
  auto loss_at = [&]() { return loss(forward(probe, batch).logits()).value; };

  double worst = 0.0;
  auto check_span = [&](std::span<double> params, std::span<const double> grads) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = loss_at();
      params[i] = saved - h;
      const double down = loss_at();
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  };
  for (std::size_t l = 0; l < probe.num_layers(); ++l) {
    check_span(probe.weights[l].data, analytic.weights[l].data);
    check_span(probe.biases[l], analytic.biases[l]);
  }
  return worst;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  Rng rng(mix_seed(seed, "epoch_shuffle", epoch));
  return shuffled_indices(n, rng);
}

}  // namespace lelp::nn
