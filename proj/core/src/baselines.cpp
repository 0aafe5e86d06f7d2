#include "lelp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lelp/linalg.hpp"
#include "lelp/rng.hpp"

namespace lelp::baselines {

DirectionMode parse_direction_mode(const std::string& name) {
  if (name == "lelp") return DirectionMode::lelp;
  if (name == "raw_pca") return DirectionMode::raw_pca;
  if (name == "random") return DirectionMode::random;
  if (name == "identity") return DirectionMode::identity;
  throw std::invalid_argument("unknown direction mode '" + name + "'");
}

namespace {

using EvalFn = double (*)(const nn::MlpParams&, const data::LabeledDataset&);

// Shared hard-label loop: cross-entropy on the given targets, Adam steps,
// per-epoch evaluation. Batch order comes from epoch_permutation so every
// trainer with the same seed sees the same data order.
nn::TrainResult train_hard_label(nn::MlpParams student, const Matrix& inputs,
                                 const std::vector<int>& targets,
                                 const data::LabeledDataset& test, const nn::TrainConfig& config,
                                 EvalFn eval) {
  const std::size_t n = inputs.rows;
  nn::TrainResult result;
  nn::OptimizerState opt = nn::make_adam(student, {.lr = config.lr});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> perm = nn::epoch_permutation(n, config.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(perm.data() + start, len);
      const Matrix batch = gather_rows(inputs, rows);
      std::vector<int> batch_labels(len);
      for (std::size_t i = 0; i < len; ++i) batch_labels[i] = targets[rows[i]];
      const nn::ForwardTrace trace = nn::forward(student, batch);
      const nn::LossValue loss = nn::cross_entropy(batch_labels, trace.logits());
      const nn::Gradients grads = nn::backward(student, trace, loss.logit_grad);
      nn::adam_step(opt, student, grads);
      result.step_loss.push_back(loss.value);
      epoch_loss += loss.value;
      ++batches;
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches));
    result.epoch_test_accuracy.push_back(eval(student, test));
  }
  result.final_accuracy = eval(student, test);
  result.model = std::move(student);
  return result;
}

}  // namespace

double evaluate_argmax(const nn::MlpParams& model, const data::LabeledDataset& dataset) {
  const nn::ForwardTrace trace = nn::forward(model, dataset.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = trace.logits().row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (static_cast<int>(best) == dataset.coarse_labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double evaluate_fine(const nn::MlpParams& model, const data::LabeledDataset& dataset) {
  if (!dataset.has_fine())
    throw std::invalid_argument("evaluate_fine: dataset has no fine labels");
  const nn::ForwardTrace trace = nn::forward(model, dataset.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = trace.logits().row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (static_cast<int>(best) == dataset.fine_labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

double evaluate_fine_as_coarse(const nn::MlpParams& model, const data::LabeledDataset& dataset) {
  if (dataset.fine_to_coarse.empty())
    throw std::invalid_argument("evaluate_fine_as_coarse: dataset has no fine-to-coarse map");
  const nn::ForwardTrace trace = nn::forward(model, dataset.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = trace.logits().row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (dataset.fine_to_coarse[best] == dataset.coarse_labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

nn::TrainResult train_standard(nn::MlpParams student, const data::LabeledDataset& train,
                               const data::LabeledDataset& test, const nn::TrainConfig& config) {
  if (student.output_dim() != train.classes)
    throw std::invalid_argument("train_standard: student head must have one unit per class");
  return train_hard_label(std::move(student), train.features, train.coarse_labels, test, config,
                          &evaluate_argmax);
}

nn::TrainResult train_oracle(nn::MlpParams student, const data::LabeledDataset& train,
                             const data::LabeledDataset& test, const nn::TrainConfig& config) {
  if (!train.has_fine())
    throw std::invalid_argument("train_oracle: training data has no fine labels");
  if (student.output_dim() != train.fine_classes())
    throw std::invalid_argument("train_oracle: student head must match fine class count");
  return train_hard_label(std::move(student), train.features, train.fine_labels, test, config,
                          &evaluate_fine_as_coarse);
}

nn::TrainResult train_cluster_student(nn::MlpParams student, const data::LabeledDataset& train,
                                      const data::LabeledDataset& test,
                                      const ClusterAssignment& assignment,
                                      const nn::TrainConfig& config) {
  if (assignment.subclass.size() != train.size())
    throw std::invalid_argument("train_cluster_student: assignment does not cover the dataset");
  if (student.head.classes != train.classes || student.head.subclasses != assignment.k)
    throw std::invalid_argument("train_cluster_student: student head must be classes x clusters");
  std::vector<int> pseudo(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    pseudo[i] = train.coarse_labels[i] * static_cast<int>(assignment.k) + assignment.subclass[i];
  return train_hard_label(std::move(student), train.features, pseudo, test, config,
                          &evaluate_subclass_sum);
}

nn::LossValue vanilla_kd_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                              double tau) {
  if (teacher_logits.rows != student_logits.rows || teacher_logits.cols != student_logits.cols)
    throw std::invalid_argument("vanilla_kd_loss: shape mismatch");
  const Matrix p = nn::softmax_tempered(teacher_logits, tau);
  const Matrix q = nn::softmax_tempered(student_logits, tau);
  nn::LossValue kl = nn::kl_divergence(p, q);
  nn::LossValue out;
  out.value = tau * tau * kl.value;
  out.logit_grad = std::move(kl.logit_grad);
  for (double& g : out.logit_grad.data) g *= tau;
  return out;
}

nn::TrainResult train_vanilla_kd_on_logits(nn::MlpParams student, const Matrix& inputs,
                                           const Matrix& teacher_logits,
                                           const data::LabeledDataset& test,
                                           const nn::TrainConfig& config) {
  if (student.output_dim() != teacher_logits.cols)
    throw std::invalid_argument("train_vanilla_kd: student and teacher head widths differ");
  const std::size_t n = inputs.rows;
  nn::TrainResult result;
  nn::OptimizerState opt = nn::make_adam(student, {.lr = config.lr});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> perm = nn::epoch_permutation(n, config.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(perm.data() + start, len);
      const Matrix batch = gather_rows(inputs, rows);
      const Matrix target_logits = gather_rows(teacher_logits, rows);
      const nn::ForwardTrace trace = nn::forward(student, batch);
      const nn::LossValue loss = vanilla_kd_loss(target_logits, trace.logits(), config.tau);
      const nn::Gradients grads = nn::backward(student, trace, loss.logit_grad);
      nn::adam_step(opt, student, grads);
      result.step_loss.push_back(loss.value);
      epoch_loss += loss.value;
      ++batches;
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches));
    result.epoch_test_accuracy.push_back(evaluate_argmax(student, test));
  }
  result.final_accuracy = evaluate_argmax(student, test);
  result.model = std::move(student);
  return result;
}

nn::TrainResult train_vanilla_kd(nn::MlpParams student, const TeacherBundle& teacher,
                                 const data::LabeledDataset& train,
                                 const data::LabeledDataset& test, const nn::TrainConfig& config) {
  const Matrix teacher_logits = teacher.class_logits(teacher.embed(train.features));
  return train_vanilla_kd_on_logits(std::move(student), train.features, teacher_logits, test,
                                    config);
}

EmbeddingLossValue embedding_distill_loss(const Matrix& teacher_emb, const Matrix& student_emb,
                                          const Matrix& projection) {
  if (teacher_emb.rows != student_emb.rows)
    throw std::invalid_argument("embedding_distill_loss: batch sizes differ");
  if (projection.rows != teacher_emb.cols || projection.cols != student_emb.cols)
    throw std::invalid_argument("embedding_distill_loss: projection shape mismatch");
  constexpr double kEps = 1e-12;
  const std::size_t n = teacher_emb.rows;
  const double dn = static_cast<double>(n);

  // Residual r_i = t_i - P s_i, row form: student_emb P^T.
  const Matrix predicted = matmul_nt(student_emb, projection);
  EmbeddingLossValue out;
  out.student_grad = Matrix(student_emb.rows, student_emb.cols);
  out.projection_grad = Matrix(projection.rows, projection.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vector r(teacher_emb.cols);
    double sq = kEps;
    for (std::size_t j = 0; j < teacher_emb.cols; ++j) {
      r[j] = teacher_emb(i, j) - predicted(i, j);
      sq += r[j] * r[j];
    }
    const double len = std::sqrt(sq);
    total += len;
    const double scale = -1.0 / (dn * len);
    // d/ds_i = -P^T r / (n |r|)
    for (std::size_t a = 0; a < teacher_emb.cols; ++a) {
      const double ra = r[a] * scale;
      if (ra == 0.0) continue;
      for (std::size_t b = 0; b < student_emb.cols; ++b) {
        out.student_grad(i, b) += ra * projection(a, b);
        out.projection_grad(a, b) += ra * student_emb(i, b);
      }
    }
  }
  out.value = total / dn;
  return out;
}

nn::TrainResult train_embedding_distill_on_embeddings(nn::MlpParams student, const Matrix& inputs,
                                                      const Matrix& teacher_embeddings,
                                                      const TeacherBundle& teacher,
                                                      const data::LabeledDataset& test,
                                                      const EmbedDistillConfig& config) {
  const nn::TrainConfig& base = config.base;
  const std::size_t d_teacher = teacher_embeddings.cols;
  const std::size_t d_student = student.embedding_dim();
  const Matrix teacher_logits = teacher.class_logits(teacher_embeddings);
  if (student.output_dim() != teacher_logits.cols)
    throw std::invalid_argument("train_embedding_distill: student and teacher head widths differ");

  const bool fixed_identity = config.identity_projection;
  if (fixed_identity && d_teacher != d_student)
    throw std::invalid_argument(
        "train_embedding_distill: identity projection needs matching embedding dims");
  Matrix projection;
  if (fixed_identity) {
    projection = Matrix::identity(d_teacher);
  } else {
    projection = Matrix(d_teacher, d_student);
    Rng rng(mix_seed(base.seed, "embed_projection"));
    const double bound = std::sqrt(6.0 / static_cast<double>(d_teacher + d_student));
    for (double& x : projection.data) x = (2.0 * rng.uniform() - 1.0) * bound;
  }
  nn::MatrixAdam projection_opt = nn::make_matrix_adam(projection, {.lr = base.lr});

  const std::size_t n = inputs.rows;
  nn::TrainResult result;
  nn::OptimizerState opt = nn::make_adam(student, {.lr = base.lr});
  for (std::size_t epoch = 0; epoch < base.epochs; ++epoch) {
    const std::vector<std::size_t> perm = nn::epoch_permutation(n, base.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += base.batch_size) {
      const std::size_t len = std::min(base.batch_size, n - start);
      const std::span<const std::size_t> rows(perm.data() + start, len);
      const Matrix batch = gather_rows(inputs, rows);
      const Matrix t_emb = gather_rows(teacher_embeddings, rows);
      const Matrix t_logits = gather_rows(teacher_logits, rows);
      const nn::ForwardTrace trace = nn::forward(student, batch);
      const nn::LossValue kd = vanilla_kd_loss(t_logits, trace.logits(), base.tau);
      const EmbeddingLossValue emb = embedding_distill_loss(t_emb, trace.embedding(), projection);
      const double loss = kd.value + config.lambda * emb.value;
      Matrix embedding_grad = emb.student_grad;
      for (double& g : embedding_grad.data) g *= config.lambda;
      const nn::Gradients grads = nn::backward(student, trace, kd.logit_grad, &embedding_grad);
      nn::adam_step(opt, student, grads);
      if (!fixed_identity) {
        Matrix pgrad = emb.projection_grad;
        for (double& g : pgrad.data) g *= config.lambda;
        nn::adam_step(projection_opt, projection, pgrad);
      }
      result.step_loss.push_back(loss);
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches));
    result.epoch_test_accuracy.push_back(evaluate_argmax(student, test));
  }
  result.final_accuracy = evaluate_argmax(student, test);
  result.model = std::move(student);
  return result;
}

nn::TrainResult train_embedding_distill(nn::MlpParams student, const TeacherBundle& teacher,
                                        const data::LabeledDataset& train,
                                        const data::LabeledDataset& test,
                                        const EmbedDistillConfig& config) {
  const Matrix embeddings = teacher.embed(train.features);
  return train_embedding_distill_on_embeddings(std::move(student), train.features, embeddings,
                                               teacher, test, config);
}

namespace {

struct KMeansRun {
  Matrix centers;
  std::vector<int> assignment;
  std::vector<double> inertia_history;
};

std::size_t nearest_center(const Matrix& centers, std::span<const double> point) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows; ++c) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < centers.cols; ++j) {
      const double diff = point[j] - centers(c, j);
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

KMeansRun kmeans_single(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows;
  const std::size_t d = points.cols;
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");

  Rng rng(mix_seed(seed, "kmeanspp"));
  KMeansRun run;
  run.centers = Matrix(k, d);

  // k-means++ seeding.
  std::size_t first = rng.below(n);
  std::copy(points.row(first).begin(), points.row(first).end(), run.centers.row(0).begin());
  Vector d2(n, 0.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t cc = 0; cc < c; ++cc) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = points(i, j) - run.centers(cc, j);
          s += diff * diff;
        }
        best = std::min(best, s);
      }
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);  // all points coincide with existing centers
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), run.centers.row(c).begin());
  }

  run.assignment.assign(n, 0);
  constexpr double kShiftTol = 1e-8;
  for (int iter = 0; iter < 100; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(run.centers, points.row(i));
      run.assignment[i] = static_cast<int>(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = points(i, j) - run.centers(c, j);
        inertia += diff * diff;
      }
    }
    run.inertia_history.push_back(inertia);

    Matrix next(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.assignment[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) next(c, j) += points(i, j);
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Empty cluster keeps its previous center.
        std::copy(run.centers.row(c).begin(), run.centers.row(c).end(), next.row(c).begin());
      } else {
        for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(counts[c]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = next(c, j) - run.centers(c, j);
        s += diff * diff;
      }
      max_shift = std::max(max_shift, std::sqrt(s));
    }
    run.centers = std::move(next);
    if (max_shift < kShiftTol) break;
  }
  // Final assignment against the settled centers.
  for (std::size_t i = 0; i < n; ++i)
    run.assignment[i] = static_cast<int>(nearest_center(run.centers, points.row(i)));
  return run;
}

}  // namespace

ClusterAssignment kmeans_per_class(const std::vector<Matrix>& embeddings_by_class, std::size_t k,
                                   std::uint64_t seed) {
  ClusterAssignment out;
  out.k = k;
  for (std::size_t c = 0; c < embeddings_by_class.size(); ++c) {
    if (embeddings_by_class[c].rows < k)
      throw std::invalid_argument("kmeans_per_class: class " + std::to_string(c) +
                                  " has fewer examples than clusters");
    KMeansRun run = kmeans_single(embeddings_by_class[c], k, mix_seed(seed, "kmeans", c));
    out.centers.push_back(std::move(run.centers));
    out.inertia_history.push_back(std::move(run.inertia_history));
    out.subclass.insert(out.subclass.end(), run.assignment.begin(), run.assignment.end());
  }
  return out;
}

ClusterAssignment cluster_dataset(const TeacherBundle& teacher, const data::LabeledDataset& dataset,
                                  std::size_t k, std::uint64_t seed) {
  const Matrix embeddings = teacher.embed(dataset.features);
  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.coarse_labels[i])].push_back(i);
  std::vector<Matrix> grouped;
  grouped.reserve(dataset.classes);
  for (const auto& rows : by_class) grouped.push_back(gather_rows(embeddings, rows));
  ClusterAssignment grouped_result = kmeans_per_class(grouped, k, seed);

  // Scatter the class-grouped assignment back to dataset order.
  ClusterAssignment out;
  out.k = k;
  out.centers = std::move(grouped_result.centers);
  out.inertia_history = std::move(grouped_result.inertia_history);
  out.subclass.assign(dataset.size(), 0);
  std::size_t cursor = 0;
  for (const auto& rows : by_class)
    for (const std::size_t i : rows) out.subclass[i] = grouped_result.subclass[cursor++];
  return out;
}

SubclassProjector make_directions(DirectionMode mode, const TeacherBundle& teacher,
                                  const data::LabeledDataset& dataset, std::size_t s, double beta,
                                  std::uint64_t seed) {
  if (mode == DirectionMode::lelp)
    return fit_projector(teacher, dataset, s, beta, seed, /*use_nullspace=*/true);

  const std::size_t d = teacher.embedding_dim();
  if (mode == DirectionMode::identity && s != d)
    throw std::invalid_argument("make_directions: identity mode requires s == embedding dim");
  if (s < 1) throw std::invalid_argument("make_directions: s must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("make_directions: beta must be positive");

  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.coarse_labels[i])].push_back(i);
  for (std::size_t c = 0; c < dataset.classes; ++c)
    if (by_class[c].size() < s + 1)
      throw std::invalid_argument("make_directions: class " + std::to_string(c) +
                                  " has too few examples");

  const Matrix embeddings = teacher.embed(dataset.features);
  SubclassProjector proj;
  proj.classes = dataset.classes;
  proj.subclasses = s;
  proj.dim = d;
  proj.beta = beta;
  proj.seed = seed;
  proj.means.resize(dataset.classes);
  proj.directions.resize(dataset.classes);

  for (std::size_t c = 0; c < dataset.classes; ++c) {
    const Matrix h_class = gather_rows(embeddings, by_class[c]);
    proj.means[c] = column_mean(h_class);
    switch (mode) {
      case DirectionMode::raw_pca: {
        linalg::Pca pca = linalg::top_pca(h_class, s);
        proj.directions[c] = std::move(pca.dirs);
        break;
      }
      case DirectionMode::random: {
        Rng rng(mix_seed(seed, "random_dirs", c));
        Matrix g(d, s);
        Matrix q;
        do {
          for (double& x : g.data) x = rng.normal();
          q = linalg::orthonormalize_columns(g);
        } while (q.cols < s);
        proj.directions[c] = transpose(q);
        break;
      }
      case DirectionMode::identity:
        proj.directions[c] = Matrix::identity(d);
        break;
      case DirectionMode::lelp:
        break;  // handled above
    }
  }
  return proj;
}

}  // namespace lelp::baselines
