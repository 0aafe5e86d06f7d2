#include "lelp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lelp/baselines.hpp"
#include "lelp/checkpoint.hpp"
#include "lelp/lelp.hpp"
#include "lelp/rng.hpp"
#include "lelp/teacher.hpp"

namespace lelp::harness {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string token;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!token.empty()) out.push_back(token);
      token.clear();
    } else {
      token.push_back(c);
    }
  }
  if (!token.empty()) out.push_back(token);
  return out;
}

[[noreturn]] void config_error(const std::string& origin, std::size_t line,
                               const std::string& what) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + what);
}

struct ConfigEntry {
  std::string key, value;
  std::size_t line;
};

struct ConfigSection {
  std::string header;  // e.g. "dataset" or "method lelp"
  std::size_t line;
  std::vector<ConfigEntry> entries;
};

std::vector<ConfigSection> read_sections(std::istream& in, const std::string& origin) {
  std::vector<ConfigSection> sections;
  sections.push_back({"", 0, {}});  // entries before any header
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto comment = raw.find_first_of("#;");
    std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(origin, line_no, "unterminated section header");
      sections.push_back({trim(line.substr(1, line.size() - 2)), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(origin, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_error(origin, line_no, "empty key");
    sections.back().entries.push_back({key, value, line_no});
  }
  return sections;
}

double to_double(const ConfigEntry& e, const std::string& origin) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_error(origin, e.line, "expected a number for '" + e.key + "'");
  }
}

std::size_t to_count(const ConfigEntry& e, const std::string& origin) {
  const double v = to_double(e, origin);
  if (v < 0 || v != std::floor(v))
    config_error(origin, e.line, "expected a nonnegative integer for '" + e.key + "'");
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const ConfigEntry& e, const std::string& origin) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_error(origin, e.line, "expected an integer for '" + e.key + "'");
  }
}

bool to_bool(const ConfigEntry& e, const std::string& origin) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  config_error(origin, e.line, "expected true/false for '" + e.key + "'");
}

std::vector<std::size_t> to_count_list(const ConfigEntry& e, const std::string& origin) {
  std::vector<std::size_t> out;
  for (const std::string& tok : split_list(e.value)) {
    ConfigEntry item{e.key, tok, e.line};
    out.push_back(to_count(item, origin));
  }
  if (out.empty()) config_error(origin, e.line, "empty list for '" + e.key + "'");
  return out;
}

void apply_model_entry(ModelConfig& model, const ConfigEntry& e, const std::string& origin) {
  if (e.key == "hidden") {
    // "none" (or an empty value) means a linear model with no hidden layers.
    if (e.value.empty() || e.value == "none") {
      model.hidden.clear();
    } else {
      model.hidden = to_count_list(e, origin);
    }
  } else if (e.key == "epochs") {
    model.epochs = to_count(e, origin);
  } else if (e.key == "lr") {
    model.lr = to_double(e, origin);
  } else if (e.key == "batch") {
    model.batch_size = to_count(e, origin);
  } else {
    config_error(origin, e.line, "unknown key '" + e.key + "'");
  }
}

const std::vector<std::string> kMethodTypes = {"standard", "vanilla", "embed",
                                               "oracle",   "kmeans",  "lelp"};

void validate_method(const MethodSpec& m, const std::string& origin, std::size_t line) {
  if (std::find(kMethodTypes.begin(), kMethodTypes.end(), m.type) == kMethodTypes.end())
    config_error(origin, line, "unknown method type '" + m.type + "'");
  if (!(m.tau > 0.0)) config_error(origin, line, "tau must be positive");
  if (!(m.beta > 0.0)) config_error(origin, line, "beta must be positive");
  if (m.alpha < 0.0 || m.alpha > 1.0) config_error(origin, line, "alpha must lie in [0, 1]");
  if (m.subclasses < 1) config_error(origin, line, "subclasses must be >= 1");
  if (m.clusters < 1) config_error(origin, line, "clusters must be >= 1");
  baselines::parse_direction_mode(m.mode);  // throws on unknown mode
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  for (const ConfigSection& section : read_sections(in, origin)) {
    if (section.header.empty() || section.header == "experiment") {
      for (const ConfigEntry& e : section.entries) {
        if (e.key == "name") {
          cfg.name = e.value;
        } else if (e.key == "seeds") {
          cfg.seeds.clear();
          for (const std::string& tok : split_list(e.value))
            cfg.seeds.push_back(to_u64({e.key, tok, e.line}, origin));
          if (cfg.seeds.empty()) config_error(origin, e.line, "need at least one seed");
        } else if (e.key == "seed") {
          cfg.global_seed = to_u64(e, origin);
        } else if (e.key == "out") {
          cfg.out_dir = e.value;
        } else if (e.key == "threads") {
          cfg.threads = to_count(e, origin);
        } else {
          config_error(origin, e.line, "unknown key '" + e.key + "'");
        }
      }
    } else if (section.header == "dataset") {
      for (const ConfigEntry& e : section.entries) {
        auto& synth = cfg.dataset.synthetic;
        if (e.key == "kind") {
          if (e.value != "synthetic" && e.value != "csv")
            config_error(origin, e.line, "dataset kind must be synthetic or csv");
          cfg.dataset.kind = e.value;
        } else if (e.key == "classes") {
          synth.classes = to_count(e, origin);
        } else if (e.key == "subclusters") {
          synth.subclusters_per_class = to_count(e, origin);
        } else if (e.key == "dim") {
          synth.dim = to_count(e, origin);
        } else if (e.key == "center_scale") {
          synth.center_scale = to_double(e, origin);
        } else if (e.key == "noise_std") {
          synth.noise_std = to_double(e, origin);
        } else if (e.key == "train_size") {
          synth.train_size = to_count(e, origin);
        } else if (e.key == "test_size") {
          synth.test_size = to_count(e, origin);
        } else if (e.key == "seed") {
          synth.seed = to_u64(e, origin);
        } else if (e.key == "standardize") {
          cfg.dataset.standardize = to_bool(e, origin);
        } else if (e.key == "train_csv") {
          cfg.dataset.train_csv = e.value;
        } else if (e.key == "test_csv") {
          cfg.dataset.test_csv = e.value;
        } else {
          config_error(origin, e.line, "unknown key '" + e.key + "'");
        }
      }
    } else if (section.header == "teacher") {
      for (const ConfigEntry& e : section.entries) {
        if (e.key == "tau") {
          cfg.teacher_tau = to_double(e, origin);
        } else {
          apply_model_entry(cfg.teacher, e, origin);
        }
      }
    } else if (section.header == "student") {
      for (const ConfigEntry& e : section.entries) apply_model_entry(cfg.student, e, origin);
    } else if (section.header == "semi") {
      for (const ConfigEntry& e : section.entries) {
        if (e.key == "labeled_count") {
          cfg.labeled_count = to_count(e, origin);
        } else if (e.key == "enabled") {
          cfg.semi_enabled = to_bool(e, origin);
        } else {
          config_error(origin, e.line, "unknown key '" + e.key + "'");
        }
      }
    } else if (section.header == "sweep") {
      for (const ConfigEntry& e : section.entries) {
        if (e.key == "fractions") {
          cfg.fractions.clear();
          for (const std::string& tok : split_list(e.value))
            cfg.fractions.push_back(to_double({e.key, tok, e.line}, origin));
        } else {
          config_error(origin, e.line, "unknown key '" + e.key + "'");
        }
      }
    } else if (section.header.rfind("method", 0) == 0) {
      const std::string label = trim(section.header.substr(6));
      if (label.empty()) config_error(origin, section.line, "method section needs a name");
      MethodSpec m;
      m.name = label;
      m.type = label;  // default: the section name is the type
      for (const ConfigEntry& e : section.entries) {
        if (e.key == "type") {
          m.type = e.value;
        } else if (e.key == "tau") {
          m.tau = to_double(e, origin);
        } else if (e.key == "beta") {
          m.beta = to_double(e, origin);
        } else if (e.key == "lambda") {
          m.lambda = to_double(e, origin);
        } else if (e.key == "alpha") {
          m.alpha = to_double(e, origin);
        } else if (e.key == "subclasses") {
          m.subclasses = to_count(e, origin);
        } else if (e.key == "clusters") {
          m.clusters = to_count(e, origin);
        } else if (e.key == "mode") {
          m.mode = e.value;
        } else if (e.key == "nullspace") {
          m.nullspace = to_bool(e, origin);
        } else if (e.key == "identity_projection") {
          m.identity_projection = to_bool(e, origin);
        } else {
          config_error(origin, e.line, "unknown key '" + e.key + "'");
        }
      }
      validate_method(m, origin, section.line);
      for (const MethodSpec& other : cfg.methods)
        if (other.name == m.name)
          config_error(origin, section.line, "duplicate method name '" + m.name + "'");
      cfg.methods.push_back(std::move(m));
    } else {
      config_error(origin, section.line, "unknown section [" + section.header + "]");
    }
  }
  if (cfg.dataset.kind == "csv" && (cfg.dataset.train_csv.empty() || cfg.dataset.test_csv.empty()))
    throw std::runtime_error(origin + ": csv dataset needs train_csv and test_csv");
  if (cfg.methods.empty())
    throw std::runtime_error(origin + ": no [method ...] sections");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config(in, path);
}

// ---------------------------------------------------------------------------
// Experiment execution

namespace {

struct PreparedData {
  data::LabeledDataset train;
  data::LabeledDataset test;
};

PreparedData prepare_dataset(const DatasetConfig& cfg) {
  PreparedData out;
  if (cfg.kind == "synthetic") {
    data::SyntheticData d = data::generate_synthetic(cfg.synthetic);
    out.train = std::move(d.train);
    out.test = std::move(d.test);
  } else {
    out.train = data::load_csv(cfg.train_csv);
    out.test = data::load_csv(cfg.test_csv);
    const std::size_t classes = std::max(out.train.classes, out.test.classes);
    out.train.classes = classes;
    out.test.classes = classes;
    if (out.train.has_fine() && out.test.fine_to_coarse.empty())
      out.test.fine_to_coarse = out.train.fine_to_coarse;
  }
  if (cfg.standardize) {
    const data::Standardizer s = data::fit_standardizer(out.train.features);
    data::apply_standardizer(s, out.train.features);
    data::apply_standardizer(s, out.test.features);
  }
  return out;
}

struct TeacherArtifacts {
  nn::MlpParams model;
  TeacherBundle bundle;
  double accuracy = 0.0;
};

TeacherArtifacts train_teacher(const ExperimentConfig& cfg, const data::LabeledDataset& train,
                               const data::LabeledDataset& test) {
  const std::uint64_t seed = mix_seed(cfg.global_seed, "teacher");
  std::vector<std::size_t> dims;
  dims.push_back(train.dim());
  dims.insert(dims.end(), cfg.teacher.hidden.begin(), cfg.teacher.hidden.end());
  dims.push_back(train.classes);
  nn::MlpParams init = nn::make_mlp(dims, {train.classes, 1}, seed);
  nn::TrainConfig tc;
  tc.epochs = cfg.teacher.epochs;
  tc.batch_size = cfg.teacher.batch_size;
  tc.lr = cfg.teacher.lr;
  tc.seed = seed;
  nn::TrainResult r = baselines::train_standard(std::move(init), train, test, tc);
  TeacherArtifacts out;
  out.accuracy = r.final_accuracy;
  out.bundle = TeacherBundle::from_model(r.model, cfg.teacher_tau);
  out.model = std::move(r.model);
  return out;
}

// Everything one method needs to build its per-seed runner.
struct MethodContext {
  const ExperimentConfig& config;
  const data::LabeledDataset& fit_data;  // labeled data: projector, clusters, CE labels
  const data::LabeledDataset& test;
  const TeacherBundle& teacher;
  const Matrix& distill_inputs;      // may include unlabeled pool rows
  const Matrix& distill_embeddings;  // teacher embeddings of distill_inputs
  const Matrix& distill_logits;      // teacher class logits of distill_inputs
  const std::vector<int>* distill_labels;  // null when pool rows carry no labels
};

std::vector<std::size_t> student_dims(const ExperimentConfig& cfg, std::size_t input_dim,
                                      std::size_t output_dim) {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), cfg.student.hidden.begin(), cfg.student.hidden.end());
  dims.push_back(output_dim);
  return dims;
}

nn::TrainConfig student_train_config(const ExperimentConfig& cfg, const MethodSpec& m,
                                     std::uint64_t run_seed) {
  nn::TrainConfig tc;
  tc.epochs = cfg.student.epochs;
  tc.batch_size = cfg.student.batch_size;
  tc.lr = cfg.student.lr;
  tc.alpha = m.alpha;
  tc.tau = m.tau;
  tc.seed = run_seed;
  return tc;
}

using Runner = std::function<nn::TrainResult(std::uint64_t run_seed)>;

// Builds the per-seed closure for one method; throws when the shared
// preprocessing (projector fit, clustering) fails.
Runner prepare_method(const MethodSpec& m, const MethodContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  const data::LabeledDataset& fit = ctx.fit_data;
  const data::LabeledDataset& test = ctx.test;
  const std::size_t d = fit.dim();
  const std::size_t classes = fit.classes;

  if (m.type == "standard") {
    return [&cfg, &fit, &test, m, d, classes](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, classes), {classes, 1}, run_seed);
      return baselines::train_standard(std::move(student), fit, test,
                                       student_train_config(cfg, m, run_seed));
    };
  }
  if (m.type == "vanilla") {
    return [&cfg, &ctx, &test, m, d, classes](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, classes), {classes, 1}, run_seed);
      return baselines::train_vanilla_kd_on_logits(std::move(student), ctx.distill_inputs,
                                                   ctx.distill_logits, test,
                                                   student_train_config(cfg, m, run_seed));
    };
  }
  if (m.type == "embed") {
    return [&cfg, &ctx, &test, m, d, classes](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, classes), {classes, 1}, run_seed);
      baselines::EmbedDistillConfig ec;
      ec.base = student_train_config(cfg, m, run_seed);
      ec.lambda = m.lambda;
      ec.identity_projection = m.identity_projection;
      return baselines::train_embedding_distill_on_embeddings(
          std::move(student), ctx.distill_inputs, ctx.distill_embeddings, ctx.teacher, test, ec);
    };
  }
  if (m.type == "oracle") {
    if (!fit.has_fine())
      throw std::runtime_error("oracle method needs fine labels in the training data");
    const std::size_t fine = fit.fine_classes();
    return [&cfg, &fit, &test, m, d, fine](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, fine), {fine, 1}, run_seed);
      return baselines::train_oracle(std::move(student), fit, test,
                                     student_train_config(cfg, m, run_seed));
    };
  }
  if (m.type == "kmeans") {
    auto assignment = std::make_shared<baselines::ClusterAssignment>(baselines::cluster_dataset(
        ctx.teacher, fit, m.clusters, mix_seed(mix_seed(cfg.global_seed, m.name), "clusters")));
    return [&cfg, &fit, &test, m, classes, d, assignment](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, classes * m.clusters),
                                           {classes, m.clusters}, run_seed);
      return baselines::train_cluster_student(std::move(student), fit, test, *assignment,
                                              student_train_config(cfg, m, run_seed));
    };
  }
  if (m.type == "lelp") {
    const std::uint64_t proj_seed = mix_seed(mix_seed(cfg.global_seed, m.name), "projector");
    const baselines::DirectionMode mode = baselines::parse_direction_mode(m.mode);
    SubclassProjector proj;
    if (mode == baselines::DirectionMode::lelp) {
      proj = fit_projector(ctx.teacher, fit, m.subclasses, m.beta, proj_seed, m.nullspace);
    } else {
      proj = baselines::make_directions(mode, ctx.teacher, fit, m.subclasses, m.beta, proj_seed);
    }
    auto shared_proj = std::make_shared<SubclassProjector>(std::move(proj));
    return [&cfg, &ctx, &test, m, d, classes, shared_proj](std::uint64_t run_seed) {
      nn::MlpParams student = nn::make_mlp(student_dims(cfg, d, classes * m.subclasses),
                                           {classes, m.subclasses}, run_seed);
      nn::TrainConfig tc = student_train_config(cfg, m, run_seed);
      if (tc.alpha > 0.0 && ctx.distill_labels == nullptr)
        throw std::runtime_error("alpha > 0 needs labels on the distillation set");
      static const std::vector<int> kNoLabels;
      const std::vector<int>& labels =
          ctx.distill_labels != nullptr ? *ctx.distill_labels : kNoLabels;
      return train_student_lelp_on_embeddings(std::move(student), ctx.distill_inputs,
                                              ctx.distill_embeddings, *shared_proj, ctx.teacher,
                                              labels, test, tc);
    };
  }
  throw std::runtime_error("unknown method type '" + m.type + "'");
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<std::size_t>(hw == 0 ? 1 : hw, 4);
}

std::vector<MethodReport> run_methods(const MethodContext& ctx) {
  const ExperimentConfig& cfg = ctx.config;
  std::vector<MethodReport> reports(cfg.methods.size());

  struct Job {
    std::size_t method;
    std::size_t seed_index;
    Runner* runner;
  };
  std::vector<std::unique_ptr<Runner>> runners(cfg.methods.size());
  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    MethodReport& report = reports[mi];
    report.spec = cfg.methods[mi];
    report.runs.resize(cfg.seeds.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      report.runs[si].seed = cfg.seeds[si];
      report.runs[si].derived_seed = mix_seed(cfg.global_seed, cfg.methods[mi].name, cfg.seeds[si]);
    }
    try {
      runners[mi] = std::make_unique<Runner>(prepare_method(cfg.methods[mi], ctx));
    } catch (const std::exception& e) {
      report.status = std::string("failed: ") + e.what();
      for (RunRecord& r : report.runs) r.status = report.status;
      continue;
    }
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si)
      jobs.push_back({mi, si, runners[mi].get()});
  }

  auto execute = [&](const Job& job) {
    RunRecord& record = reports[job.method].runs[job.seed_index];
    const auto start = std::chrono::steady_clock::now();
    try {
      nn::TrainResult result = (*job.runner)(record.derived_seed);
      record.final_accuracy = result.final_accuracy;
      record.train_loss = std::move(result.epoch_train_loss);
      record.test_accuracy = std::move(result.epoch_test_accuracy);
    } catch (const std::exception& e) {
      record.status = std::string("failed: ") + e.what();
    }
    record.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t threads = std::min(resolve_threads(cfg.threads), std::max<std::size_t>(jobs.size(), 1));
  if (threads <= 1) {
    for (const Job& job : jobs) execute(job);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) execute(jobs[i]);
    };
    std::vector<std::future<void>> futures;
    for (std::size_t t = 0; t < threads; ++t)
      futures.push_back(std::async(std::launch::async, worker));
    for (auto& f : futures) f.get();
  }

  for (MethodReport& report : reports) {
    if (report.status != "ok") continue;
    std::vector<double> acc;
    for (const RunRecord& r : report.runs)
      if (r.status == "ok") acc.push_back(r.final_accuracy);
    if (acc.empty()) {
      report.status = "failed: no successful runs";
      continue;
    }
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    report.mean_accuracy = mean;
    report.std_accuracy = population_std(acc);
  }
  return reports;
}

RunReport assemble_report(const ExperimentConfig& cfg, const TeacherArtifacts& teacher,
                          std::vector<MethodReport> methods, const std::string& kind) {
  RunReport report;
  report.kind = kind;
  report.experiment = cfg.name;
  report.global_seed = cfg.global_seed;
  report.dataset = cfg.dataset;
  report.teacher = cfg.teacher;
  report.teacher_tau = cfg.teacher_tau;
  report.teacher_accuracy = teacher.accuracy;
  report.student = cfg.student;
  report.methods = std::move(methods);
  return report;
}

void write_run_outputs(const ExperimentConfig& cfg, const TeacherArtifacts& teacher,
                       const RunReport& report) {
  if (cfg.out_dir.empty()) return;
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  std::ofstream json_out(dir / "report.json");
  json_out << render_json(report) << '\n';
  nn::save_model(teacher.model, (dir / "teacher.bin").string());
  if (cfg.dataset.kind == "synthetic")
    data::write_manifest(cfg.dataset.synthetic, (dir / "dataset_manifest.txt").string());
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  for (const MethodSpec& m : cfg.methods) validate_method(m, cfg.name, 0);
  if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: need at least one seed");

  PreparedData dataset = prepare_dataset(cfg.dataset);
  TeacherArtifacts teacher = train_teacher(cfg, dataset.train, dataset.test);

  const Matrix embeddings = teacher.bundle.embed(dataset.train.features);
  const Matrix logits = teacher.bundle.class_logits(embeddings);
  MethodContext ctx{cfg,        dataset.train, dataset.test,          teacher.bundle,
                    dataset.train.features, embeddings, logits, &dataset.train.coarse_labels};
  RunReport report = assemble_report(cfg, teacher, run_methods(ctx), "run");
  write_run_outputs(cfg, teacher, report);
  return report;
}

std::vector<RunReport> data_efficiency_sweep(const ExperimentConfig& cfg,
                                             const std::vector<double>& fractions) {
  if (fractions.empty()) throw std::invalid_argument("data_efficiency_sweep: no fractions");
  for (double f : fractions)
    if (!(f > 0.0) || f > 1.0)
      throw std::invalid_argument("data_efficiency_sweep: fractions must lie in (0, 1]");

  ExperimentConfig sweep_cfg = cfg;
  sweep_cfg.methods.clear();
  for (const MethodSpec& m : cfg.methods)
    if (m.type == "vanilla" || m.type == "lelp") sweep_cfg.methods.push_back(m);
  if (sweep_cfg.methods.empty())
    throw std::invalid_argument("data_efficiency_sweep: config has no vanilla or lelp methods");

  PreparedData dataset = prepare_dataset(cfg.dataset);
  TeacherArtifacts teacher = train_teacher(cfg, dataset.train, dataset.test);

  std::vector<RunReport> reports;
  for (double fraction : fractions) {
    const auto count =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.train.size())));
    if (count < dataset.train.classes)
      throw std::invalid_argument("data_efficiency_sweep: fraction yields fewer examples than classes");
    data::LabeledDataset distill = data::subsample_stratified(
        dataset.train, count, mix_seed(cfg.global_seed, "fraction_sample"));
    const Matrix embeddings = teacher.bundle.embed(distill.features);
    const Matrix logits = teacher.bundle.class_logits(embeddings);
    MethodContext ctx{sweep_cfg, distill,    dataset.test, teacher.bundle,
                      distill.features, embeddings, logits, &distill.coarse_labels};
    RunReport report = assemble_report(sweep_cfg, teacher, run_methods(ctx), "sweep-fraction");
    report.fraction = fraction;
    reports.push_back(std::move(report));
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    for (const RunReport& report : reports) {
      char frac[32];
      std::snprintf(frac, sizeof frac, "%g", report.fraction);
      const std::filesystem::path dir =
          std::filesystem::path(cfg.out_dir) / (std::string("fraction_") + frac);
      std::filesystem::create_directories(dir);
      std::ofstream out(dir / "report.json");
      out << render_json(report) << '\n';
    }
  }
  return reports;
}

RunReport semi_supervised_run(const ExperimentConfig& cfg) {
  if (cfg.labeled_count == 0)
    throw std::invalid_argument("semi_supervised_run: labeled_count must be set");

  PreparedData dataset = prepare_dataset(cfg.dataset);
  data::SemiSplitResult split =
      data::semi_split(dataset.train, cfg.labeled_count, mix_seed(cfg.global_seed, "semi_split"));
  TeacherArtifacts teacher = train_teacher(cfg, split.labeled, dataset.test);

  // Distillation set: labeled rows first, then the pool, both in original order.
  Matrix inputs(split.labeled.size() + split.pool.size(), dataset.train.dim());
  for (std::size_t i = 0; i < split.labeled.size(); ++i)
    std::copy(split.labeled.features.row(i).begin(), split.labeled.features.row(i).end(),
              inputs.row(i).begin());
  for (std::size_t i = 0; i < split.pool.size(); ++i)
    std::copy(split.pool.features.row(i).begin(), split.pool.features.row(i).end(),
              inputs.row(split.labeled.size() + i).begin());

  const Matrix embeddings = teacher.bundle.embed(inputs);
  const Matrix logits = teacher.bundle.class_logits(embeddings);
  MethodContext ctx{cfg,    split.labeled, dataset.test, teacher.bundle,
                    inputs, embeddings,    logits,       nullptr};
  RunReport report = assemble_report(cfg, teacher, run_methods(ctx), "semi");
  report.labeled_count = cfg.labeled_count;
  write_run_outputs(cfg, teacher, report);
  return report;
}

// ---------------------------------------------------------------------------
// Reports

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "table") return ReportFormat::table;
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  throw std::invalid_argument("unknown report format '" + name + "' (use table, json, or csv)");
}

namespace {

json model_to_json(const ModelConfig& m) {
  return json{{"hidden", m.hidden}, {"epochs", m.epochs}, {"lr", m.lr}, {"batch", m.batch_size}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  m.epochs = j.at("epochs").get<std::size_t>();
  m.lr = j.at("lr").get<double>();
  m.batch_size = j.at("batch").get<std::size_t>();
  return m;
}

json dataset_to_json(const DatasetConfig& d) {
  json j{{"kind", d.kind}, {"standardize", d.standardize}};
  if (d.kind == "synthetic") {
    j["classes"] = d.synthetic.classes;
    j["subclusters"] = d.synthetic.subclusters_per_class;
    j["dim"] = d.synthetic.dim;
    j["center_scale"] = d.synthetic.center_scale;
    j["noise_std"] = d.synthetic.noise_std;
    j["train_size"] = d.synthetic.train_size;
    j["test_size"] = d.synthetic.test_size;
    j["seed"] = d.synthetic.seed;
  } else {
    j["train_csv"] = d.train_csv;
    j["test_csv"] = d.test_csv;
  }
  return j;
}

DatasetConfig dataset_from_json(const json& j) {
  DatasetConfig d;
  d.kind = j.at("kind").get<std::string>();
  d.standardize = j.at("standardize").get<bool>();
  if (d.kind == "synthetic") {
    d.synthetic.classes = j.at("classes").get<std::size_t>();
    d.synthetic.subclusters_per_class = j.at("subclusters").get<std::size_t>();
    d.synthetic.dim = j.at("dim").get<std::size_t>();
    d.synthetic.center_scale = j.at("center_scale").get<double>();
    d.synthetic.noise_std = j.at("noise_std").get<double>();
    d.synthetic.train_size = j.at("train_size").get<std::size_t>();
    d.synthetic.test_size = j.at("test_size").get<std::size_t>();
    d.synthetic.seed = j.at("seed").get<std::uint64_t>();
  } else {
    d.train_csv = j.at("train_csv").get<std::string>();
    d.test_csv = j.at("test_csv").get<std::string>();
  }
  return d;
}

}  // namespace

std::string render_json(const RunReport& report) {
  json j;
  j["schema_version"] = report.schema_version;
  j["kind"] = report.kind;
  j["experiment"] = report.experiment;
  j["global_seed"] = report.global_seed;
  j["fraction"] = report.fraction;
  j["labeled_count"] = report.labeled_count;
  j["dataset"] = dataset_to_json(report.dataset);
  j["teacher"] = model_to_json(report.teacher);
  j["teacher"]["tau"] = report.teacher_tau;
  j["teacher"]["accuracy"] = report.teacher_accuracy;
  j["student"] = model_to_json(report.student);
  j["methods"] = json::array();
  for (const MethodReport& m : report.methods) {
    json jm;
    jm["name"] = m.spec.name;
    jm["type"] = m.spec.type;
    jm["params"] = json{{"tau", m.spec.tau},
                        {"beta", m.spec.beta},
                        {"lambda", m.spec.lambda},
                        {"alpha", m.spec.alpha},
                        {"subclasses", m.spec.subclasses},
                        {"clusters", m.spec.clusters},
                        {"mode", m.spec.mode},
                        {"nullspace", m.spec.nullspace},
                        {"identity_projection", m.spec.identity_projection}};
    jm["status"] = m.status;
    jm["mean_accuracy"] = m.mean_accuracy.has_value() ? json(*m.mean_accuracy) : json(nullptr);
    jm["std_accuracy"] = m.std_accuracy.has_value() ? json(*m.std_accuracy) : json(nullptr);
    jm["runs"] = json::array();
    for (const RunRecord& r : m.runs) {
      json jr;
      jr["seed"] = r.seed;
      jr["derived_seed"] = r.derived_seed;
      jr["status"] = r.status;
      jr["final_accuracy"] = r.final_accuracy;
      jr["wall_time_sec"] = r.wall_time_sec;
      jr["train_loss"] = r.train_loss;
      jr["test_accuracy"] = r.test_accuracy;
      jm["runs"].push_back(std::move(jr));
    }
    j["methods"].push_back(std::move(jm));
  }
  return j.dump(2);
}

RunReport parse_report_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path);
  json j = json::parse(in);
  RunReport report;
  report.schema_version = j.at("schema_version").get<int>();
  report.kind = j.at("kind").get<std::string>();
  report.experiment = j.at("experiment").get<std::string>();
  report.global_seed = j.at("global_seed").get<std::uint64_t>();
  report.fraction = j.at("fraction").get<double>();
  report.labeled_count = j.at("labeled_count").get<std::size_t>();
  report.dataset = dataset_from_json(j.at("dataset"));
  report.teacher = model_from_json(j.at("teacher"));
  report.teacher_tau = j.at("teacher").at("tau").get<double>();
  report.teacher_accuracy = j.at("teacher").at("accuracy").get<double>();
  report.student = model_from_json(j.at("student"));
  for (const json& jm : j.at("methods")) {
    MethodReport m;
    m.spec.name = jm.at("name").get<std::string>();
    m.spec.type = jm.at("type").get<std::string>();
    const json& p = jm.at("params");
    m.spec.tau = p.at("tau").get<double>();
    m.spec.beta = p.at("beta").get<double>();
    m.spec.lambda = p.at("lambda").get<double>();
    m.spec.alpha = p.at("alpha").get<double>();
    m.spec.subclasses = p.at("subclasses").get<std::size_t>();
    m.spec.clusters = p.at("clusters").get<std::size_t>();
    m.spec.mode = p.at("mode").get<std::string>();
    m.spec.nullspace = p.at("nullspace").get<bool>();
    m.spec.identity_projection = p.at("identity_projection").get<bool>();
    m.status = jm.at("status").get<std::string>();
    if (!jm.at("mean_accuracy").is_null()) m.mean_accuracy = jm.at("mean_accuracy").get<double>();
    if (!jm.at("std_accuracy").is_null()) m.std_accuracy = jm.at("std_accuracy").get<double>();
    for (const json& jr : jm.at("runs")) {
      RunRecord r;
      r.seed = jr.at("seed").get<std::uint64_t>();
      r.derived_seed = jr.at("derived_seed").get<std::uint64_t>();
      r.status = jr.at("status").get<std::string>();
      r.final_accuracy = jr.at("final_accuracy").get<double>();
      r.wall_time_sec = jr.at("wall_time_sec").get<double>();
      r.train_loss = jr.at("train_loss").get<std::vector<double>>();
      r.test_accuracy = jr.at("test_accuracy").get<std::vector<double>>();
      m.runs.push_back(std::move(r));
    }
    report.methods.push_back(std::move(m));
  }
  return report;
}

namespace {

std::string format_pct(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", accuracy * 100.0);
  return buf;
}

std::string method_params_summary(const MethodSpec& m) {
  std::ostringstream os;
  os << "tau=" << m.tau;
  if (m.type == "lelp") {
    os << " beta=" << m.beta << " S=" << m.subclasses << " mode=" << m.mode
       << " nullspace=" << (m.nullspace ? "on" : "off");
  } else if (m.type == "kmeans") {
    os << " k=" << m.clusters;
  } else if (m.type == "embed") {
    os << " lambda=" << m.lambda;
  }
  if (m.alpha != 0.0) os << " alpha=" << m.alpha;
  return os.str();
}

}  // namespace

std::string render_table(const RunReport& report) {
  std::ostringstream os;
  os << "experiment: " << report.experiment << " (" << report.kind << ")\n";
  const DatasetConfig& d = report.dataset;
  if (d.kind == "synthetic") {
    os << "dataset: synthetic C=" << d.synthetic.classes << " K=" << d.synthetic.subclusters_per_class
       << " d=" << d.synthetic.dim << " train=" << d.synthetic.train_size
       << " test=" << d.synthetic.test_size << " seed=" << d.synthetic.seed << "\n";
  } else {
    os << "dataset: csv " << d.train_csv << " / " << d.test_csv << "\n";
  }
  if (report.kind == "sweep-fraction") os << "fraction: " << report.fraction << "\n";
  if (report.kind == "semi") os << "labeled_count: " << report.labeled_count << "\n";
  os << "teacher accuracy: " << format_pct(report.teacher_accuracy) << "\n\n";

  std::size_t name_w = 6;
  for (const MethodReport& m : report.methods) name_w = std::max(name_w, m.spec.name.size());
  os << std::string(name_w, ' ') << "  mean +- std     per-seed\n";
  for (const MethodReport& m : report.methods) {
    os << m.spec.name << std::string(name_w - m.spec.name.size(), ' ') << "  ";
    if (m.status != "ok") {
      os << m.status << "\n";
      continue;
    }
    std::string cell = format_pct(*m.mean_accuracy) + " +- " + format_pct(*m.std_accuracy);
    os << cell;
    if (cell.size() < 15) os << std::string(15 - cell.size(), ' ');
    os << ' ';
    for (const RunRecord& r : m.runs)
      os << ' ' << (r.status == "ok" ? format_pct(r.final_accuracy) : "fail");
    os << "   [" << method_params_summary(m.spec) << "]\n";
  }
  return os.str();
}

std::string render_csv_summary(const RunReport& report) {
  std::ostringstream os;
  os << "method,type,seed,derived_seed,status,final_accuracy,wall_time_sec\n";
  char buf[64];
  for (const MethodReport& m : report.methods) {
    for (const RunRecord& r : m.runs) {
      std::snprintf(buf, sizeof buf, "%.17g", r.final_accuracy);
      os << m.spec.name << ',' << m.spec.type << ',' << r.seed << ',' << r.derived_seed << ','
         << (r.status == "ok" ? "ok" : "failed") << ',' << buf << ',';
      std::snprintf(buf, sizeof buf, "%.6g", r.wall_time_sec);
      os << buf << '\n';
    }
  }
  return os.str();
}

std::string render_csv_curves(const RunReport& report) {
  std::ostringstream os;
  os << "method,seed,epoch,train_loss,test_accuracy\n";
  char buf[64];
  for (const MethodReport& m : report.methods) {
    for (const RunRecord& r : m.runs) {
      for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
        os << m.spec.name << ',' << r.seed << ',' << e << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.train_loss[e]);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g",
                      e < r.test_accuracy.size() ? r.test_accuracy[e] : 0.0);
        os << buf << '\n';
      }
    }
  }
  return os.str();
}

void emit_report(const RunReport& report, const std::string& out_dir, ReportFormat format) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("emit_report: cannot open " + p.string());
    out << text;
    if (!out) throw std::runtime_error("emit_report: write failed for " + p.string());
  };
  switch (format) {
    case ReportFormat::table:
      write(dir / "report.txt", render_table(report));
      break;
    case ReportFormat::json:
      write(dir / "report.json", render_json(report) + "\n");
      break;
    case ReportFormat::csv:
      write(dir / "report.csv", render_csv_summary(report));
      write(dir / "curves.csv", render_csv_curves(report));
      break;
  }
}

}  // namespace lelp::harness
