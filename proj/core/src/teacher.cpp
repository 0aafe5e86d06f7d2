#include "lelp/teacher.hpp"

#include <algorithm>
#include <stdexcept>

namespace lelp {

TeacherBundle TeacherBundle::from_model(const nn::MlpParams& model, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("TeacherBundle: tau must be positive");
  if (model.num_layers() < 1) throw std::invalid_argument("TeacherBundle: empty model");
  TeacherBundle t;
  t.tau = tau;
  const std::size_t last = model.num_layers() - 1;
  t.feature_model.layer_dims.assign(model.layer_dims.begin(), model.layer_dims.end() - 1);
  t.feature_model.init_seed = model.init_seed;
  for (std::size_t l = 0; l < last; ++l) {
    t.feature_model.weights.push_back(model.weights[l]);
    t.feature_model.biases.push_back(model.biases[l]);
  }
  if (!t.feature_model.layer_dims.empty())
    t.feature_model.head = {t.feature_model.layer_dims.back(), 1};
  t.head_weights = transpose(model.weights[last]);
  t.head_biases = model.biases[last];
  return t;
}

Matrix TeacherBundle::embed(const Matrix& batch) const {
  if (feature_model.num_layers() == 0) return batch;
  Matrix a = batch;
  for (std::size_t l = 0; l < feature_model.num_layers(); ++l) {
    Matrix z = matmul_nt(a, feature_model.weights[l]);
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += feature_model.biases[l][j];
    for (double& x : z.data) x = std::max(x, 0.0);
    a = std::move(z);
  }
  return a;
}

Matrix TeacherBundle::class_logits(const Matrix& embeddings) const {
  if (embeddings.cols != head_weights.rows)
    throw std::invalid_argument("class_logits: embedding dim mismatch");
  Matrix z = matmul(embeddings, head_weights);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += head_biases[j];
  return z;
}

namespace data {

Matrix pseudo_label(const TeacherBundle& teacher, const LabeledDataset& pool) {
  const std::size_t want = teacher.feature_model.num_layers() > 0
                               ? teacher.feature_model.input_dim()
                               : teacher.embedding_dim();
  if (pool.size() == 0) return Matrix(0, teacher.num_classes());
  if (pool.dim() != want)
    throw std::invalid_argument("pseudo_label: pool feature dim does not match teacher input");
  const Matrix h = teacher.embed(pool.features);
  return nn::softmax_tempered(teacher.class_logits(h), teacher.tau);
}

}  // namespace data

}  // namespace lelp
