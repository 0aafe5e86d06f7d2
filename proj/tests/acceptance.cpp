// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lelp/baselines.hpp"
#include "lelp/data.hpp"
#include "lelp/harness.hpp"
#include "lelp/lelp.hpp"
#include "lelp/linalg.hpp"
#include "lelp/nn.hpp"
#include "lelp/rng.hpp"
#include "lelp/teacher.hpp"
#include "oracles.hpp"

using lelp::Matrix;
using lelp::Rng;
using lelp::SubclassProjector;
using lelp::TeacherBundle;
using lelp::Vector;
namespace nn = lelp::nn;
namespace bl = lelp::baselines;
namespace data = lelp::data;
namespace la = lelp::linalg;
namespace harness = lelp::harness;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

void require(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    if (o.detail.tellp() > 0) o.detail << "; ";
    o.detail << what;
  }
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.normal();
  return m;
}

TeacherBundle identity_teacher(Matrix head_w, Vector head_b, double tau = 2.0) {
  TeacherBundle t;
  t.feature_model.layer_dims = {head_w.rows};
  t.head_weights = std::move(head_w);
  t.head_biases = std::move(head_b);
  t.tau = tau;
  return t;
}

// The default desk benchmark: the spec of [dataset] synth-bin plus the
// default hyperparameters (tau=2, beta=1/2, S=10, k=5, lambda=1, alpha=0,
// lr 1e-3, 100 student epochs, batch 64).
harness::ExperimentConfig synth_bin_config() {
  std::istringstream in(R"(
[experiment]
name = synth-bin
seeds = 1 2 3 4 5
seed = 7

[dataset]
kind = synthetic
classes = 2
subclusters = 5
dim = 16
noise_std = 1.0
center_scale = 6.0
train_size = 8000
test_size = 2000
seed = 1

[teacher]
hidden = 64 64
epochs = 40
lr = 1e-3
batch = 64
tau = 2.0

[student]
hidden = 3
epochs = 100
lr = 1e-3
batch = 64

[method standard]

[method vanilla]
tau = 2.0

[method embed]
tau = 2.0
lambda = 1.0

[method kmeans]
tau = 2.0
clusters = 5

[method lelp]
tau = 2.0
beta = 0.5
subclasses = 10

[method oracle]
)");
  return harness::parse_config(in, "synth-bin");
}

double method_mean(const harness::RunReport& report, const std::string& name) {
  for (const harness::MethodReport& m : report.methods)
    if (m.spec.name == name && m.mean_accuracy.has_value()) return *m.mean_accuracy;
  throw std::runtime_error("method '" + name + "' missing or failed in report");
}

// --------------------------------------------------------------------------

Outcome criterion1_s1_collapse() {
  Outcome o;
  data::SyntheticSpec spec;
  spec.classes = 2;
  spec.subclusters_per_class = 2;
  spec.dim = 8;
  spec.train_size = 1000;
  spec.test_size = 300;
  spec.seed = 5;
  data::SyntheticData d = data::generate_synthetic(spec);
  const data::Standardizer st = data::fit_standardizer(d.train.features);
  data::apply_standardizer(st, d.train.features);
  data::apply_standardizer(st, d.test.features);

  nn::TrainConfig teacher_tc;
  teacher_tc.epochs = 15;
  teacher_tc.seed = 11;
  const nn::TrainResult teacher_run =
      bl::train_standard(nn::make_mlp({8, 32, 32, 2}, {2, 1}, 11), d.train, d.test, teacher_tc);
  const TeacherBundle teacher = TeacherBundle::from_model(teacher_run.model, 2.0);
  const SubclassProjector proj = lelp::fit_projector(teacher, d.train, 1, 0.5, 13, true);

  nn::TrainConfig tc;
  tc.epochs = 10;
  tc.seed = 17;
  tc.tau = 2.0;
  const nn::TrainResult lelp_run = lelp::train_student_lelp(
      nn::make_mlp({8, 8, 2}, {2, 1}, 17), teacher, proj, d.train, d.test, tc);
  const nn::TrainResult kd_run = bl::train_vanilla_kd(
      nn::make_mlp({8, 8, 2}, {2, 1}, 17), teacher, d.train, d.test, tc);

  require(o, lelp_run.step_loss.size() == kd_run.step_loss.size(), "step counts differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < kd_run.step_loss.size(); ++i)
    worst = std::max(worst, std::abs(lelp_run.step_loss[i] - kd_run.step_loss[i]));
  require(o, worst < 1e-10, "per-step loss gap " + std::to_string(worst));
  require(o, lelp_run.final_accuracy == kd_run.final_accuracy, "final accuracy differs");
  o.detail << "max step gap " << worst;
  return o;
}

Outcome criterion2_marginal_law() {
  Outcome o;
  Rng rng(29);
  double worst_marginal = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 3 + rng.below(6);
    const std::size_t c_count = 2 + rng.below(4);
    const std::size_t s = 1 + rng.below(5);
    const double tau = 0.125 * static_cast<double>(1 + rng.below(64));
    const double beta = 0.0625 * static_cast<double>(1 + rng.below(64));
    const Matrix head = random_matrix(d, c_count, 1000 + trial);
    Vector bias(c_count);
    for (double& b : bias) b = rng.normal();
    SubclassProjector proj;
    proj.classes = c_count;
    proj.subclasses = s;
    proj.dim = d;
    proj.beta = beta;
    for (std::size_t c = 0; c < c_count; ++c) {
      Vector mu(d);
      for (double& m : mu) m = rng.normal();
      proj.means.push_back(std::move(mu));
      proj.directions.push_back(random_matrix(s, d, 5000 + trial * 11 + c));
    }
    const Matrix h = random_matrix(1, d, 9000 + trial);
    const Matrix probs = lelp::subsplit_batch(h, proj, head, bias, tau);
    Matrix logits = lelp::matmul(h, head);
    for (std::size_t c = 0; c < c_count; ++c) logits(0, c) += bias[c];
    const Matrix class_probs = nn::softmax_tempered(logits, tau);
    double total = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) {
      double marginal = 0.0;
      for (std::size_t r = 0; r < s; ++r) marginal += probs(0, c * s + r);
      worst_marginal = std::max(worst_marginal, std::abs(marginal - class_probs(0, c)));
      total += marginal;
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  require(o, worst_marginal < 1e-12, "marginal gap " + std::to_string(worst_marginal));
  require(o, worst_sum < 1e-12, "row-sum gap " + std::to_string(worst_sum));
  o.detail << "1000 draws, worst marginal " << worst_marginal << ", worst row sum " << worst_sum;
  return o;
}

Outcome criterion3_projector_geometry() {
  Outcome o;
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c_count = 2 + rng.below(2);
    const std::size_t s = 2 + rng.below(3);
    const std::size_t d = s + c_count + 4 + rng.below(6);
    data::SyntheticSpec spec;
    spec.classes = c_count;
    spec.subclusters_per_class = 1 + rng.below(3);
    spec.dim = d;
    spec.train_size = 60 * c_count;
    spec.test_size = 8;
    spec.seed = 4000 + static_cast<std::uint64_t>(trial);
    const data::SyntheticData dat = data::generate_synthetic(spec);
    const Matrix head_w = random_matrix(d, c_count, 6000 + trial);
    Vector bias(c_count, 0.0);
    const TeacherBundle teacher = identity_teacher(head_w, bias);
    const SubclassProjector proj =
        lelp::fit_projector(teacher, dat.train, s, 0.5, 7000 + trial, true);
    const Matrix head_basis = la::orthonormalize_columns(head_w);

    for (std::size_t c = 0; c < c_count; ++c) {
      const Matrix& dirs = proj.directions[c];
      for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t r2 = r + 1; r2 < s; ++r2) {
          const double cosine = lelp::dot(dirs.row(r), dirs.row(r2)) /
                                (lelp::norm(dirs.row(r)) * lelp::norm(dirs.row(r2)));
          require(o, std::abs(cosine) < 1e-8, "orthogonality breach");
        }
        require(o,
                std::abs(lelp::norm(dirs.row(r)) - lelp::norm(dirs.row(0))) <=
                    1e-8 * lelp::norm(dirs.row(0)),
                "norm mismatch");
        for (std::size_t j = 0; j < c_count; ++j) {
          double ip = 0.0, wn = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            ip += dirs(r, k) * head_w(k, j);
            wn += head_w(k, j) * head_w(k, j);
          }
          require(o, std::abs(ip) <= 1e-6 * lelp::norm(dirs.row(r)) * std::sqrt(wn),
                  "head-column orthogonality breach");
        }
      }
      // Span preservation through rotation + scaling.
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < dat.train.size(); ++i)
        if (dat.train.coarse_labels[i] == static_cast<int>(c)) rows.push_back(i);
      const Matrix h_class = lelp::gather_rows(dat.train.features, rows);
      const la::Pca pca = la::top_pca(la::nullspace_project(h_class, head_basis), s);
      require(o, oracle::span_residual(pca.dirs, dirs) < 1e-8, "rotation changed the span");
    }
    if (!o.pass) break;
  }
  if (o.pass) o.detail << "50 randomized projectors clean";
  return o;
}

Outcome criterion4_kernels_vs_oracles() {
  Outcome o;
  // top_pca against the classical Jacobi oracle, 20 random <= 8-dim cases.
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(7);
    const std::size_t n = d + 2 + rng.below(12);
    const Matrix h = random_matrix(n, d, 100 + trial);
    const std::size_t s = std::min(n - 1, d);
    const la::Pca pca = la::top_pca(h, s);
    Vector mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += h(i, j) / static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          cov(a, b) += (h(i, a) - mean[a]) * (h(i, b) - mean[b]) / static_cast<double>(n);
    const oracle::JacobiResult ref = oracle::jacobi_eigen(cov);
    for (std::size_t r = 0; r < s; ++r) {
      require(o,
              std::abs(pca.stds[r] - std::sqrt(std::max(ref.values[r], 0.0))) <
                  1e-8 * std::max(1.0, pca.stds[r]),
              "pca std differs from Jacobi oracle");
      double cosine = 0.0;
      for (std::size_t j = 0; j < d; ++j) cosine += pca.dirs(r, j) * ref.vectors[r][j];
      require(o, std::abs(std::abs(cosine) - 1.0) < 1e-8, "pca direction differs from oracle");
    }
  }
  // Column-space reconstruction through orthonormalize_columns.
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 4 + rng.below(6);
    const std::size_t c = 1 + rng.below(d - 1);
    const Matrix w = random_matrix(d, c, 300 + trial);
    const Matrix q = la::orthonormalize_columns(w);
    for (std::size_t j = 0; j < c; ++j) {
      Vector col(d), recon(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) col[i] = w(i, j);
      for (std::size_t k = 0; k < q.cols; ++k) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < d; ++i) coeff += q(i, k) * col[i];
        for (std::size_t i = 0; i < d; ++i) recon[i] += coeff * q(i, k);
      }
      double err = 0.0;
      for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(recon[i] - col[i]));
      require(o, err < 1e-8, "column-space reconstruction failed");
    }
  }
  // Losses against long-double scalar oracles.
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    Rng gen(500 + trial);
    std::vector<long double> zp(k), zq(k);
    Matrix mp(1, k), mq(1, k);
    for (std::size_t j = 0; j < k; ++j) {
      zp[j] = gen.normal();
      zq[j] = gen.normal();
      mp(0, j) = static_cast<double>(zp[j]);
      mq(0, j) = static_cast<double>(zq[j]);
    }
    const auto sp = oracle::scalar_softmax(zp, 1.0L);
    const auto sq = oracle::scalar_softmax(zq, 1.0L);
    const Matrix p = nn::softmax_tempered(mp, 1.0);
    const Matrix q = nn::softmax_tempered(mq, 1.0);
    require(o,
            std::abs(nn::kl_divergence(p, q).value -
                     static_cast<double>(oracle::scalar_kl(sp, sq))) < 1e-10,
            "kl oracle mismatch");
    const int label = static_cast<int>(gen.below(k));
    require(o,
            std::abs(nn::cross_entropy({label}, mq).value -
                     static_cast<double>(oracle::scalar_cross_entropy(label, zq))) < 1e-10,
            "cross-entropy oracle mismatch");
    // lelp_loss = tau^2 KL of tempered distributions.
    const double tau = 0.5 + 0.25 * static_cast<double>(rng.below(10));
    const auto spt = oracle::scalar_softmax(zp, static_cast<long double>(tau));
    const auto sqt = oracle::scalar_softmax(zq, static_cast<long double>(tau));
    Matrix teacher_probs(1, k);
    for (std::size_t j = 0; j < k; ++j) teacher_probs(0, j) = static_cast<double>(spt[j]);
    const double expected = tau * tau * static_cast<double>(oracle::scalar_kl(spt, sqt));
    require(o, std::abs(lelp::lelp_loss(teacher_probs, mq, tau).value - expected) < 1e-10,
            "lelp loss oracle mismatch");
    require(o, std::abs(bl::vanilla_kd_loss(mp, mq, tau).value - expected) < 1e-10,
            "vanilla kd oracle mismatch");
  }
  // Embedding loss against a long-double evaluation.
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2, dt = 3, ds = 2;
    const Matrix te = random_matrix(n, dt, 800 + trial);
    const Matrix se = random_matrix(n, ds, 900 + trial);
    const Matrix pj = random_matrix(dt, ds, 950 + trial);
    long double expected = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      long double sq = 1e-12L;
      for (std::size_t a = 0; a < dt; ++a) {
        long double r = te(i, a);
        for (std::size_t b = 0; b < ds; ++b) r -= static_cast<long double>(pj(a, b)) * se(i, b);
        sq += r * r;
      }
      expected += std::sqrt(sq);
    }
    expected /= n;
    require(o,
            std::abs(bl::embedding_distill_loss(te, se, pj).value -
                     static_cast<double>(expected)) < 1e-10,
            "embedding loss oracle mismatch");
  }
  if (o.pass) o.detail << "pca/orthonormalize/losses all match oracles";
  return o;
}

Outcome criterion5_gradient_checks() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 61);
    const std::size_t in = 2 + rng.below(3);
    const std::size_t hidden = 3 + rng.below(3);
    const std::size_t c_count = 2;
    const std::size_t s = 1 + rng.below(3);
    Matrix x = random_matrix(3, in, seed + 71);
    for (double& v : x.data) v += 0.05;  // keep ReLU inputs off the kinks
    auto jitter_biases = [&seed](nn::MlpParams& m, std::uint64_t salt) {
      Rng brng(seed * 131 + salt);
      for (auto& b : m.biases)
        for (double& v : b) v = 0.2 * brng.normal() + 0.05;
    };

    // Cross-entropy path.
    {
      nn::MlpParams m = nn::make_mlp({in, hidden, c_count}, {c_count, 1}, seed + 81);
      jitter_biases(m, 1);
      const std::vector<int> labels = {0, 1, 1};
      worst = std::max(worst, nn::gradient_check(
                                  m, [&](const Matrix& z) { return nn::cross_entropy(labels, z); },
                                  x));
    }
    // Vanilla KD path.
    {
      nn::MlpParams m = nn::make_mlp({in, hidden, c_count}, {c_count, 1}, seed + 91);
      jitter_biases(m, 2);
      const Matrix teacher_logits = random_matrix(3, c_count, seed + 101);
      const double tau = 2.0;
      worst = std::max(
          worst, nn::gradient_check(
                     m, [&](const Matrix& z) { return bl::vanilla_kd_loss(teacher_logits, z, tau); },
                     x));
    }
    // LELP path.
    {
      const std::size_t out = c_count * s;
      nn::MlpParams m = nn::make_mlp({in, hidden, out}, {c_count, s}, seed + 111);
      jitter_biases(m, 3);
      const Matrix target_logits = random_matrix(3, out, seed + 121);
      const Matrix teacher_probs = nn::softmax_tempered(target_logits, 2.0);
      worst = std::max(worst,
                       nn::gradient_check(
                           m, [&](const Matrix& z) { return lelp::lelp_loss(teacher_probs, z, 2.0); },
                           x));
    }
    // Embedding distillation path, including the learnable projection: full
    // finite differences against backward() with the embedding gradient.
    {
      nn::MlpParams m = nn::make_mlp({in, hidden, c_count}, {c_count, 1}, seed + 131);
      jitter_biases(m, 4);
      const Matrix teacher_emb = random_matrix(3, 4, seed + 141);
      Matrix projection = random_matrix(4, hidden, seed + 151);
      const Matrix teacher_logits = random_matrix(3, c_count, seed + 161);
      const double lambda = 0.7, tau = 2.0;
      auto total_loss = [&](const nn::MlpParams& model, const Matrix& proj_m) {
        const nn::ForwardTrace t = nn::forward(model, x);
        return bl::vanilla_kd_loss(teacher_logits, t.logits(), tau).value +
               lambda * bl::embedding_distill_loss(teacher_emb, t.embedding(), proj_m).value;
      };
      const nn::ForwardTrace t = nn::forward(m, x);
      const nn::LossValue kd = bl::vanilla_kd_loss(teacher_logits, t.logits(), tau);
      const bl::EmbeddingLossValue emb =
          bl::embedding_distill_loss(teacher_emb, t.embedding(), projection);
      Matrix emb_grad = emb.student_grad;
      for (double& g : emb_grad.data) g *= lambda;
      const nn::Gradients grads = nn::backward(m, t, kd.logit_grad, &emb_grad);
      const double h = 1e-5;
      auto check_param = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + h;
        const double up = total_loss(m, projection);
        slot = saved - h;
        const double down = total_loss(m, projection);
        slot = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(analytic - numeric) /
                                    std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
      };
      for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (std::size_t i = 0; i < m.weights[l].data.size(); ++i)
          check_param(m.weights[l].data[i], grads.weights[l].data[i]);
        for (std::size_t i = 0; i < m.biases[l].size(); ++i)
          check_param(m.biases[l][i], grads.biases[l][i]);
      }
      for (std::size_t i = 0; i < projection.data.size(); ++i)
        check_param(projection.data[i], lambda * emb.projection_grad.data[i]);
    }
  }
  require(o, worst < 1e-4, "worst relative gradient error " + std::to_string(worst));
  o.detail << "worst relative error " << worst << " over 20 seeds";
  return o;
}

harness::RunReport g_synth_report;  // shared by criteria 6, 8, 10
bool g_synth_ready = false;

const harness::RunReport& synth_report() {
  if (!g_synth_ready) {
    g_synth_report = harness::run_experiment(synth_bin_config());
    g_synth_ready = true;
  }
  return g_synth_report;
}

Outcome criterion6_direction_of_effect() {
  Outcome o;
  const harness::RunReport& report = synth_report();
  const double standard = method_mean(report, "standard");
  const double vanilla = method_mean(report, "vanilla");
  const double lelp_acc = method_mean(report, "lelp");
  const double oracle_acc = method_mean(report, "oracle");
  o.detail << "oracle " << oracle_acc << ", lelp " << lelp_acc << ", vanilla " << vanilla
           << ", standard " << standard;
  require(o, oracle_acc >= lelp_acc, "oracle < lelp");
  require(o, lelp_acc >= vanilla, "lelp < vanilla");
  require(o, vanilla >= standard, "vanilla < standard");
  require(o, oracle_acc - standard >= 0.02, "oracle - standard < 2 points");
  return o;
}

Outcome criterion7_ablation_random_projections() {
  Outcome o;
  harness::ExperimentConfig cfg = synth_bin_config();
  cfg.methods.clear();
  harness::MethodSpec lelp_m;
  lelp_m.name = "lelp";
  lelp_m.type = "lelp";
  lelp_m.subclasses = 10;
  lelp_m.beta = 0.5;
  lelp_m.tau = 2.0;
  harness::MethodSpec rand_m = lelp_m;
  rand_m.name = "lelp_random";
  rand_m.mode = "random";
  cfg.methods = {lelp_m, rand_m};
  const harness::RunReport report = harness::run_experiment(cfg);
  const double lelp_acc = method_mean(report, "lelp");
  const double rand_acc = method_mean(report, "lelp_random");
  o.detail << "lelp " << lelp_acc << ", random " << rand_acc;
  require(o, lelp_acc >= rand_acc, "lelp mean below random projections");
  return o;
}

Outcome criterion8_data_efficiency() {
  Outcome o;
  const double standard_full = method_mean(synth_report(), "standard");
  const double lelp_full = method_mean(synth_report(), "lelp");
  harness::ExperimentConfig cfg = synth_bin_config();
  const std::vector<harness::RunReport> sweep = harness::data_efficiency_sweep(cfg, {0.25});
  const double lelp_quarter = method_mean(sweep.front(), "lelp");
  double lelp_quarter_std = 0.0;
  for (const harness::MethodReport& m : sweep.front().methods)
    if (m.spec.name == "lelp" && m.std_accuracy.has_value()) lelp_quarter_std = *m.std_accuracy;
  o.detail << "lelp@25% " << lelp_quarter << ", standard@100% " << standard_full;
  require(o, lelp_quarter >= standard_full - 0.005,
          "lelp at 25% data fell more than 0.5 points below standard at full data");
  // Monotone trend: the full-data mean stays within one std of the 25% mean.
  require(o, lelp_full >= lelp_quarter - lelp_quarter_std,
          "lelp accuracy decreased from 25% to 100% data beyond one std");
  return o;
}

Outcome criterion9_semi_supervised() {
  Outcome o;
  harness::ExperimentConfig cfg = synth_bin_config();
  cfg.labeled_count = cfg.dataset.synthetic.train_size / 10;  // 10% labels
  cfg.methods.clear();
  harness::MethodSpec vanilla;
  vanilla.name = "vanilla";
  vanilla.type = "vanilla";
  harness::MethodSpec lelp_m;
  lelp_m.name = "lelp";
  lelp_m.type = "lelp";
  lelp_m.subclasses = 10;
  lelp_m.beta = 0.5;
  cfg.methods = {vanilla, lelp_m};
  const harness::RunReport report = harness::semi_supervised_run(cfg);
  const double lelp_acc = method_mean(report, "lelp");
  const double vanilla_acc = method_mean(report, "vanilla");
  o.detail << "teacher " << report.teacher_accuracy << ", lelp " << lelp_acc << ", vanilla "
           << vanilla_acc;
  require(o, lelp_acc >= vanilla_acc, "semi-supervised lelp mean below vanilla");
  return o;
}

Outcome criterion10_determinism() {
  Outcome o;
  auto strip = [](const harness::RunReport& r) {
    nlohmann::json j = nlohmann::json::parse(harness::render_json(r));
    for (auto& method : j.at("methods"))
      for (auto& run : method.at("runs")) run.erase("wall_time_sec");
    return j.dump();
  };
  const std::string first = strip(synth_report());
  const std::string second = strip(harness::run_experiment(synth_bin_config()));
  require(o, first == second, "reports differ between identical invocations");
  o.detail << "reports byte-identical excluding wall-time fields";
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* label;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria = {
      {1, "S=1 collapse: LELP training equals vanilla KD", criterion1_s1_collapse},
      {2, "subsplit marginal law over 1000 random draws", criterion2_marginal_law},
      {3, "projector geometry suite, 50 randomized fits", criterion3_projector_geometry},
      {4, "numerical kernels vs brute-force oracles", criterion4_kernels_vs_oracles},
      {5, "gradient checks on every loss path", criterion5_gradient_checks},
      {6, "direction-of-effect ordering on synth-bin", criterion6_direction_of_effect},
      {7, "LELP directions beat random projections", criterion7_ablation_random_projections},
      {8, "LELP at 25% data vs standard at 100%", criterion8_data_efficiency},
      {9, "semi-supervised LELP vs vanilla at 10% labels", criterion9_semi_supervised},
      {10, "byte-identical reports across invocations", criterion10_determinism},
  };

  int failures = 0;
  for (const Entry& entry : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail << "exception: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s - %s (%.1fs) %s\n", entry.id,
                outcome.pass ? "PASS" : "FAIL", entry.label, secs,
                outcome.detail.str().empty() ? "" : ("[" + outcome.detail.str() + "]").c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
