#include "lelp/lelp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "lelp/linalg.hpp"
#include "lelp/rng.hpp"

namespace lelp {

SubclassProjector fit_projector(const TeacherBundle& teacher, const data::LabeledDataset& dataset,
                                std::size_t s, double beta, std::uint64_t seed,
                                bool use_nullspace) {
  if (s < 1) throw std::invalid_argument("fit_projector: s must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("fit_projector: beta must be positive");
  const std::size_t c_count = dataset.classes;
  const std::size_t d = teacher.embedding_dim();
  if (use_nullspace && d < s + c_count)
    throw std::invalid_argument(
        "fit_projector: null-space mode needs embedding dim >= subclasses + classes");

  std::vector<std::vector<std::size_t>> by_class(c_count);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[static_cast<std::size_t>(dataset.coarse_labels[i])].push_back(i);
  for (std::size_t c = 0; c < c_count; ++c)
    if (by_class[c].size() < s + 1)
      throw std::invalid_argument("fit_projector: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) +
                                  " examples, needs at least s + 1 = " + std::to_string(s + 1));

  const Matrix all_embeddings = teacher.embed(dataset.features);
  Matrix head_basis;
  if (use_nullspace) head_basis = linalg::orthonormalize_columns(teacher.head_weights);

  SubclassProjector proj;
  proj.classes = c_count;
  proj.subclasses = s;
  proj.dim = d;
  proj.beta = beta;
  proj.seed = seed;
  proj.means.resize(c_count);
  proj.directions.resize(c_count);

  for (std::size_t c = 0; c < c_count; ++c) {
    const Matrix h_class = gather_rows(all_embeddings, by_class[c]);
    proj.means[c] = column_mean(h_class);
    const Matrix projected =
        use_nullspace ? linalg::nullspace_project(h_class, head_basis) : h_class;
    linalg::Pca pca;
    try {
      pca = linalg::top_pca(projected, s);
    } catch (const linalg::degenerate_data_error& e) {
      throw linalg::degenerate_data_error("fit_projector: class " + std::to_string(c) + ": " +
                                          e.what());
    }
    const Matrix rotation = linalg::random_orthogonal(s, mix_seed(seed, "rotation", c));
    Matrix dirs = matmul(rotation, pca.dirs);
    // Variance along each rotated direction, via the diagonalized covariance:
    // var(v_s) = sum_j rotation(s,j)^2 * eigenvalue_j.
    double max_std = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
      double var = 0.0;
      for (std::size_t j = 0; j < s; ++j)
        var += rotation(r, j) * rotation(r, j) * pca.stds[j] * pca.stds[j];
      max_std = std::max(max_std, std::sqrt(var));
    }
    if (max_std <= 0.0)
      throw linalg::degenerate_data_error("fit_projector: class " + std::to_string(c) +
                                          ": zero variance along every direction");
    for (double& x : dirs.data) x /= max_std;
    proj.directions[c] = std::move(dirs);
  }
  return proj;
}

Matrix subsplit_batch(const Matrix& embeddings, const SubclassProjector& proj,
                      const Matrix& head_weights, const Vector& head_biases, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("subsplit: tau must be positive");
  if (embeddings.cols != proj.dim)
    throw std::invalid_argument("subsplit: embedding dim does not match projector");
  if (head_weights.rows != proj.dim || head_weights.cols != proj.classes ||
      head_biases.size() != proj.classes)
    throw std::invalid_argument("subsplit: teacher head shape does not match projector");

  const std::size_t n = embeddings.rows;
  const std::size_t c_count = proj.classes;
  const std::size_t s_count = proj.subclasses;

  Matrix class_logits = matmul(embeddings, head_weights);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < c_count; ++c) class_logits(i, c) += head_biases[c];
  const Matrix class_probs = nn::softmax_tempered(class_logits, tau);

  Matrix out(n, c_count * s_count);
  Vector z(s_count);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = embeddings.row(i);
    for (std::size_t c = 0; c < c_count; ++c) {
      const Matrix& dirs = proj.directions[c];
      const Vector& mu = proj.means[c];
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < s_count; ++r) {
        double v = 0.0;
        for (std::size_t j = 0; j < proj.dim; ++j) v += dirs(r, j) * (h[j] - mu[j]);
        z[r] = v / proj.beta;
        zmax = std::max(zmax, z[r]);
      }
      double denom = 0.0;
      for (std::size_t r = 0; r < s_count; ++r) {
        z[r] = std::exp(z[r] - zmax);
        denom += z[r];
      }
      const double pc = class_probs(i, c);
      for (std::size_t r = 0; r < s_count; ++r)
        out(i, c * s_count + r) = pc * (z[r] / denom);
    }
  }
  return out;
}

Vector subsplit(std::span<const double> embedding, const SubclassProjector& proj,
                const Matrix& head_weights, const Vector& head_biases, double tau) {
  Matrix one(1, embedding.size());
  std::copy(embedding.begin(), embedding.end(), one.data.begin());
  Matrix probs = subsplit_batch(one, proj, head_weights, head_biases, tau);
  return std::move(probs.data);
}

nn::LossValue lelp_loss(const Matrix& teacher_probs, const Matrix& student_logits, double tau) {
  if (teacher_probs.rows != student_logits.rows || teacher_probs.cols != student_logits.cols)
    throw std::invalid_argument("lelp_loss: shape mismatch");
  const Matrix student_probs = nn::softmax_tempered(student_logits, tau);
  nn::LossValue kl = nn::kl_divergence(teacher_probs, student_probs);
  nn::LossValue out;
  out.value = tau * tau * kl.value;
  out.logit_grad = std::move(kl.logit_grad);
  // d/dz of tau^2 KL(p || softmax(z / tau)) = tau (q - p).
  for (double& g : out.logit_grad.data) g *= tau;
  return out;
}

int predict_class(std::span<const double> logits, std::size_t subclasses) {
  if (subclasses == 0 || logits.size() % subclasses != 0)
    throw std::invalid_argument("predict_class: logit count not divisible by subclasses");
  const std::size_t c_count = logits.size() / subclasses;
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double denom = 0.0;
  Vector sums(c_count, 0.0);
  for (std::size_t c = 0; c < c_count; ++c)
    for (std::size_t r = 0; r < subclasses; ++r) {
      const double e = std::exp(logits[c * subclasses + r] - m);
      sums[c] += e;
      denom += e;
    }
  std::size_t best = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    sums[c] /= denom;
    if (sums[c] > sums[best]) best = c;
  }
  return static_cast<int>(best);
}

double evaluate_subclass_sum(const nn::MlpParams& model, const data::LabeledDataset& dataset) {
  const nn::ForwardTrace trace = nn::forward(model, dataset.features);
  const std::size_t s = model.head.subclasses;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (predict_class(trace.logits().row(i), s) == dataset.coarse_labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

nn::LossValue coarse_cross_entropy_over_subclasses(const std::vector<int>& labels,
                                                   const Matrix& logits,
                                                   std::size_t subclasses) {
  if (labels.size() != logits.rows)
    throw std::invalid_argument("coarse_cross_entropy_over_subclasses: label count mismatch");
  if (subclasses == 0 || logits.cols % subclasses != 0)
    throw std::invalid_argument(
        "coarse_cross_entropy_over_subclasses: logit count not divisible by subclasses");
  const Matrix q = nn::softmax_tempered(logits, 1.0);
  const std::size_t n = logits.rows;
  nn::LossValue out;
  out.logit_grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    double py = 0.0;
    for (std::size_t r = 0; r < subclasses; ++r) py += q(i, y * subclasses + r);
    total -= std::log(py);
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const bool in_class = j / subclasses == y;
      out.logit_grad(i, j) = q(i, j) * (1.0 - (in_class ? 1.0 / py : 0.0));
    }
  }
  const double dn = static_cast<double>(n);
  out.value = total / dn;
  for (double& g : out.logit_grad.data) g /= dn;
  return out;
}

nn::TrainResult train_student_lelp_on_embeddings(nn::MlpParams student, const Matrix& inputs,
                                                 const Matrix& teacher_embeddings,
                                                 const SubclassProjector& proj,
                                                 const TeacherBundle& teacher,
                                                 const std::vector<int>& coarse_labels,
                                                 const data::LabeledDataset& test,
                                                 const nn::TrainConfig& config) {
  if (student.head.classes != proj.classes || student.head.subclasses != proj.subclasses)
    throw std::invalid_argument("train_student_lelp: student head does not match projector");
  if (config.alpha < 0.0 || config.alpha > 1.0)
    throw std::invalid_argument("train_student_lelp: alpha must lie in [0, 1]");
  if (config.alpha > 0.0 && coarse_labels.size() != inputs.rows)
    throw std::invalid_argument("train_student_lelp: alpha > 0 requires coarse labels");

  const Matrix targets =
      subsplit_batch(teacher_embeddings, proj, teacher.head_weights, teacher.head_biases,
                     config.tau);

  nn::TrainResult result;
  nn::OptimizerState opt = nn::make_adam(student, {.lr = config.lr});
  const std::size_t n = inputs.rows;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> perm = nn::epoch_permutation(n, config.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(perm.data() + start, len);
      const Matrix batch = gather_rows(inputs, rows);
      const Matrix batch_targets = gather_rows(targets, rows);
      const nn::ForwardTrace trace = nn::forward(student, batch);
      nn::LossValue loss = lelp_loss(batch_targets, trace.logits(), config.tau);
      if (config.alpha > 0.0) {
        std::vector<int> batch_labels(len);
        for (std::size_t i = 0; i < len; ++i) batch_labels[i] = coarse_labels[rows[i]];
        const nn::LossValue ce = coarse_cross_entropy_over_subclasses(
            batch_labels, trace.logits(), student.head.subclasses);
        loss.value = config.alpha * ce.value + (1.0 - config.alpha) * loss.value;
        for (std::size_t i = 0; i < loss.logit_grad.data.size(); ++i)
          loss.logit_grad.data[i] = config.alpha * ce.logit_grad.data[i] +
                                    (1.0 - config.alpha) * loss.logit_grad.data[i];
      }
      const nn::Gradients grads = nn::backward(student, trace, loss.logit_grad);
      nn::adam_step(opt, student, grads);
      result.step_loss.push_back(loss.value);
      epoch_loss += loss.value;
      ++batches;
    }
    result.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches));
    result.epoch_test_accuracy.push_back(evaluate_subclass_sum(student, test));
  }
  result.final_accuracy = evaluate_subclass_sum(student, test);
  result.model = std::move(student);
  return result;
}

nn::TrainResult train_student_lelp(nn::MlpParams student, const TeacherBundle& teacher,
                                   const SubclassProjector& proj,
                                   const data::LabeledDataset& train,
                                   const data::LabeledDataset& test,
                                   const nn::TrainConfig& config) {
  const Matrix embeddings = teacher.embed(train.features);
  return train_student_lelp_on_embeddings(std::move(student), train.features, embeddings, proj,
                                          teacher, train.coarse_labels, test, config);
}

namespace {

constexpr char kProjectorMagic[8] = {'L', 'E', 'L', 'P', 'P', 'R', 'J', '\0'};
constexpr std::uint32_t kProjectorVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "projector format assumes a little-endian host");

}  // namespace

void save_projector(const SubclassProjector& proj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_projector: cannot open " + path);
  auto write_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kProjectorMagic, sizeof kProjectorMagic);
  write_u32(kProjectorVersion);
  write_u32(static_cast<std::uint32_t>(proj.classes));
  write_u32(static_cast<std::uint32_t>(proj.subclasses));
  write_u32(static_cast<std::uint32_t>(proj.dim));
  out.write(reinterpret_cast<const char*>(&proj.beta), sizeof proj.beta);
  write_u64(proj.seed);
  for (std::size_t c = 0; c < proj.classes; ++c) {
    out.write(reinterpret_cast<const char*>(proj.means[c].data()),
              static_cast<std::streamsize>(proj.dim * sizeof(double)));
    out.write(reinterpret_cast<const char*>(proj.directions[c].data.data()),
              static_cast<std::streamsize>(proj.subclasses * proj.dim * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_projector: write failed for " + path);

  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("save_projector: cannot open " + path + ".meta");
  meta << "format: lelp-projector v" << kProjectorVersion << "\n";
  meta << "classes: " << proj.classes << "\n";
  meta << "subclasses: " << proj.subclasses << "\n";
  meta << "embedding_dim: " << proj.dim << "\n";
  meta << "beta: " << proj.beta << "\n";
  meta << "seed: " << proj.seed << "\n";
}

SubclassProjector load_projector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_projector: cannot open " + path);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kProjectorMagic, sizeof kProjectorMagic) != 0)
    throw std::runtime_error("load_projector: bad magic in " + path);
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  if (read_u32() != kProjectorVersion)
    throw std::runtime_error("load_projector: unsupported version in " + path);
  SubclassProjector proj;
  proj.classes = read_u32();
  proj.subclasses = read_u32();
  proj.dim = read_u32();
  in.read(reinterpret_cast<char*>(&proj.beta), sizeof proj.beta);
  proj.seed = read_u64();
  proj.means.resize(proj.classes);
  proj.directions.resize(proj.classes);
  for (std::size_t c = 0; c < proj.classes; ++c) {
    proj.means[c].assign(proj.dim, 0.0);
    in.read(reinterpret_cast<char*>(proj.means[c].data()),
            static_cast<std::streamsize>(proj.dim * sizeof(double)));
    proj.directions[c] = Matrix(proj.subclasses, proj.dim);
    in.read(reinterpret_cast<char*>(proj.directions[c].data.data()),
            static_cast<std::streamsize>(proj.subclasses * proj.dim * sizeof(double)));
  }
  if (!in) throw std::runtime_error("load_projector: truncated file " + path);
  return proj;
}

}  // namespace lelp
