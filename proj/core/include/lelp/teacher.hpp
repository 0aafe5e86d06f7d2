#pragma once

#include "lelp/data.hpp"
#include "lelp/nn.hpp"

namespace lelp {

// Frozen teacher: feature extractor up to the embedding layer, the final
// classification layer stored separately as D x C weights plus biases, and
// the distillation temperature.
struct TeacherBundle {
  nn::MlpParams feature_model;  // output layer = last hidden of the full net
  Matrix head_weights;          // D x C
  Vector head_biases;           // C
  double tau = 2.0;

  std::size_t embedding_dim() const { return head_weights.rows; }
  std::size_t num_classes() const { return head_weights.cols; }

  // Split a trained classifier at its final layer.
  static TeacherBundle from_model(const nn::MlpParams& model, double tau);

  // Penultimate activations of the full network (ReLU applied, since every
  // feature layer was hidden in the original model). A headless feature
  // model (single-layer teacher) returns the input unchanged.
  Matrix embed(const Matrix& batch) const;

  // h W + b rows; identical to the full model's logits.
  Matrix class_logits(const Matrix& embeddings) const;
};

namespace data {

// Tau-tempered teacher class probabilities per pool row, the soft targets
// for semi-supervised distillation.
Matrix pseudo_label(const TeacherBundle& teacher, const LabeledDataset& pool);

}  // namespace data

}  // namespace lelp
