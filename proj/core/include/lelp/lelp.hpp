#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lelp/data.hpp"
#include "lelp/nn.hpp"
#include "lelp/teacher.hpp"

namespace lelp {

// Per-class subclass directions and means extracted from teacher embeddings.
// Within a class the direction rows are pairwise orthogonal and share one
// Euclidean norm (all scaled by the same 1 / max std).
struct SubclassProjector {
  std::size_t classes = 0;     // C
  std::size_t subclasses = 0;  // S
  std::size_t dim = 0;         // D
  double beta = 0.5;
  std::uint64_t seed = 0;
  std::vector<Vector> means;       // per class: D
  std::vector<Matrix> directions;  // per class: S x D
};

// Subclass-direction extraction: embed each class through the teacher,
// optionally project onto the null space of the orthonormalized head
// weights, take the top-s PCA directions, rotate them by a seeded random
// orthogonal matrix, and scale all s directions by 1 / max_s std. The
// stored mean is the raw (pre-projection) class embedding mean.
SubclassProjector fit_projector(const TeacherBundle& teacher, const data::LabeledDataset& dataset,
                                std::size_t s, double beta, std::uint64_t seed,
                                bool use_nullspace = true);

// Teacher subclass probabilities for one embedding, class-major:
// p_{c,s} = softmax_C((h W + b)/tau)_c * softmax_S(v_{c,.}ᵀ(h - mu_c)/beta)_s.
Vector subsplit(std::span<const double> embedding, const SubclassProjector& proj,
                const Matrix& head_weights, const Vector& head_biases, double tau);

// Row-wise subsplit over a batch of embeddings.
Matrix subsplit_batch(const Matrix& embeddings, const SubclassProjector& proj,
                      const Matrix& head_weights, const Vector& head_biases, double tau);

// tau^2 * mean KL(teacher || student) where the student distribution is one
// joint tempered softmax over all C*S logits. Gradient w.r.t. student logits.
nn::LossValue lelp_loss(const Matrix& teacher_probs, const Matrix& student_logits, double tau);

// Softmax at temperature 1 over all C*S logits, sum each class's block of
// subclasses, argmax; ties break toward the lower class index.
int predict_class(std::span<const double> logits, std::size_t subclasses);

// Cross-entropy on coarse labels taken through the summed subclass
// probabilities at temperature 1; the alpha-weighted hard-label term for
// students with subclass heads.
nn::LossValue coarse_cross_entropy_over_subclasses(const std::vector<int>& labels,
                                                   const Matrix& logits,
                                                   std::size_t subclasses);

// Coarse accuracy under the summed-subclass prediction rule.
double evaluate_subclass_sum(const nn::MlpParams& model, const data::LabeledDataset& dataset);

// Knowledge distillation with subclasses: each batch takes teacher subsplit
// targets (teacher frozen), the LELP loss, plus alpha-weighted cross-entropy
// on summed-subclass class probabilities when alpha > 0, then an Adam step.
nn::TrainResult train_student_lelp(nn::MlpParams student, const TeacherBundle& teacher,
                                   const SubclassProjector& proj,
                                   const data::LabeledDataset& train,
                                   const data::LabeledDataset& test,
                                   const nn::TrainConfig& config);

// As above but distilling from precomputed embeddings (semi-supervised path:
// rows may outnumber labeled data; labels are not consulted when alpha = 0).
nn::TrainResult train_student_lelp_on_embeddings(nn::MlpParams student,
                                                 const Matrix& inputs,
                                                 const Matrix& teacher_embeddings,
                                                 const SubclassProjector& proj,
                                                 const TeacherBundle& teacher,
                                                 const std::vector<int>& coarse_labels,
                                                 const data::LabeledDataset& test,
                                                 const nn::TrainConfig& config);

// Versioned binary container (counts, beta, seed, then mean and direction
// blocks as little-endian doubles) plus a human-readable ".meta" sidecar.
void save_projector(const SubclassProjector& proj, const std::string& path);
SubclassProjector load_projector(const std::string& path);

}  // namespace lelp
