#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lelp/data.hpp"
#include "lelp/lelp.hpp"
#include "lelp/nn.hpp"
#include "lelp/teacher.hpp"

namespace lelp::baselines {

enum class DirectionMode { lelp, raw_pca, random, identity };

DirectionMode parse_direction_mode(const std::string& name);

// Cross-entropy on coarse labels; Adam; deterministic per config seed.
nn::TrainResult train_standard(nn::MlpParams student, const data::LabeledDataset& train,
                               const data::LabeledDataset& test, const nn::TrainConfig& config);

// tau^2 * mean KL(softmax(teacher/tau) || softmax(student/tau)); gradient
// w.r.t. student logits.
nn::LossValue vanilla_kd_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                              double tau);

// Temperature-scaled distillation against the teacher's class logits.
nn::TrainResult train_vanilla_kd(nn::MlpParams student, const TeacherBundle& teacher,
                                 const data::LabeledDataset& train,
                                 const data::LabeledDataset& test, const nn::TrainConfig& config);

// Distillation from precomputed teacher logits (semi-supervised pool path).
nn::TrainResult train_vanilla_kd_on_logits(nn::MlpParams student, const Matrix& inputs,
                                           const Matrix& teacher_logits,
                                           const data::LabeledDataset& test,
                                           const nn::TrainConfig& config);

struct EmbeddingLossValue {
  double value = 0.0;
  Matrix student_grad;     // d value / d student_emb
  Matrix projection_grad;  // d value / d projection
};

// Mean over rows of || teacher_emb_i - student_emb_i P^T ||_2 (unsquared,
// 1e-12 under the root for differentiability at zero residual). projection
// is D_T x D_S.
EmbeddingLossValue embedding_distill_loss(const Matrix& teacher_emb, const Matrix& student_emb,
                                          const Matrix& projection);

struct EmbedDistillConfig {
  nn::TrainConfig base;
  double lambda = 1.0;             // weight on the embedding term
  bool identity_projection = false;  // fix P = I when dims match
};

// Vanilla KD plus lambda * embedding loss; the projection is trained jointly
// with the student unless identity_projection is set.
nn::TrainResult train_embedding_distill(nn::MlpParams student, const TeacherBundle& teacher,
                                        const data::LabeledDataset& train,
                                        const data::LabeledDataset& test,
                                        const EmbedDistillConfig& config);

nn::TrainResult train_embedding_distill_on_embeddings(nn::MlpParams student,
                                                      const Matrix& inputs,
                                                      const Matrix& teacher_embeddings,
                                                      const TeacherBundle& teacher,
                                                      const data::LabeledDataset& test,
                                                      const EmbedDistillConfig& config);

// Cross-entropy on fine labels; evaluation maps the fine argmax to coarse
// through the dataset's fine_to_coarse table.
nn::TrainResult train_oracle(nn::MlpParams student, const data::LabeledDataset& train,
                             const data::LabeledDataset& test, const nn::TrainConfig& config);

struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<int> subclass;                        // per example, [0, k)
  std::vector<Matrix> centers;                      // per class: k x D
  std::vector<std::vector<double>> inertia_history; // per class, per Lloyd iteration
};

// Seeded k-means++ and Lloyd iterations (at most 100, or until the largest
// center shift drops below 1e-8) on each class's embeddings independently.
ClusterAssignment kmeans_per_class(const std::vector<Matrix>& embeddings_by_class, std::size_t k,
                                   std::uint64_t seed);

// Clusters the teacher embeddings of a labeled dataset class by class.
ClusterAssignment cluster_dataset(const TeacherBundle& teacher, const data::LabeledDataset& dataset,
                                  std::size_t k, std::uint64_t seed);

// Hard-label cross-entropy on (class, cluster) pseudo-subclasses; prediction
// via the summed-subclass rule.
nn::TrainResult train_cluster_student(nn::MlpParams student, const data::LabeledDataset& train,
                                      const data::LabeledDataset& test,
                                      const ClusterAssignment& assignment,
                                      const nn::TrainConfig& config);

// Direction ablations. lelp delegates to fit_projector; raw_pca keeps the
// unrotated, unnormalized top-s PCA directions; random draws s orthonormal
// directions per class; identity uses the D standard basis vectors (s == D).
SubclassProjector make_directions(DirectionMode mode, const TeacherBundle& teacher,
                                  const data::LabeledDataset& dataset, std::size_t s, double beta,
                                  std::uint64_t seed);

// Plain coarse argmax accuracy (heads with one subclass per class).
double evaluate_argmax(const nn::MlpParams& model, const data::LabeledDataset& dataset);

// Fine argmax mapped to coarse labels through fine_to_coarse.
double evaluate_fine_as_coarse(const nn::MlpParams& model, const data::LabeledDataset& dataset);

// Fine argmax accuracy against fine labels (oracle diagnostics).
double evaluate_fine(const nn::MlpParams& model, const data::LabeledDataset& dataset);

}  // namespace lelp::baselines
