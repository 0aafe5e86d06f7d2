#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lelp/data.hpp"
#include "lelp/nn.hpp"

namespace lelp::harness {

// One comparison method with its hyperparameters. Fields not used by the
// method's type keep their defaults and are still recorded in reports.
struct MethodSpec {
  std::string name;            // section label, unique per experiment
  std::string type;            // standard | vanilla | embed | oracle | kmeans | lelp
  double tau = 2.0;            // distillation temperature
  double beta = 0.5;           // subclass temperature (lelp)
  double lambda = 1.0;         // embedding-loss coefficient (embed)
  double alpha = 0.0;          // hard-label cross-entropy weight
  std::size_t subclasses = 10; // S (lelp)
  std::size_t clusters = 5;    // k (kmeans)
  std::string mode = "lelp";   // lelp | raw_pca | random | identity
  bool nullspace = true;       // lelp null-space projection step
  bool identity_projection = false;  // embed: fix P = I when dims match
};

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | csv
  data::SyntheticSpec synthetic;
  std::string train_csv;
  std::string test_csv;
  bool standardize = true;
};

struct ModelConfig {
  std::vector<std::size_t> hidden;
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch_size = 64;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  ModelConfig teacher{.hidden = {64, 64}, .epochs = 40};
  double teacher_tau = 2.0;
  ModelConfig student{.hidden = {3}, .epochs = 100};
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::uint64_t global_seed = 0;
  std::size_t threads = 0;  // 0 = auto
  std::size_t labeled_count = 0;
  bool semi_enabled = false;
  std::vector<double> fractions = {0.25, 0.5, 1.0};
  std::string out_dir;
};

// Key/value config with [section] headers; '#' and ';' start comments.
// Methods come from [method <name>] sections, in file order.
ExperimentConfig parse_config(std::istream& in, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

struct RunRecord {
  std::uint64_t seed = 0;          // listed seed value
  std::uint64_t derived_seed = 0;  // hash(global seed, method name, seed)
  std::string status = "ok";
  double final_accuracy = 0.0;
  double wall_time_sec = 0.0;
  std::vector<double> train_loss;     // per epoch
  std::vector<double> test_accuracy;  // per epoch
};

struct MethodReport {
  MethodSpec spec;
  std::string status = "ok";
  std::optional<double> mean_accuracy;
  std::optional<double> std_accuracy;  // population std over ok runs
  std::vector<RunRecord> runs;
};

struct RunReport {
  int schema_version = 1;
  std::string kind = "run";  // run | sweep-fraction | semi
  std::string experiment;
  std::uint64_t global_seed = 0;
  double fraction = 1.0;
  std::size_t labeled_count = 0;
  DatasetConfig dataset;
  ModelConfig teacher;
  double teacher_tau = 2.0;
  double teacher_accuracy = 0.0;
  ModelConfig student;
  std::vector<MethodReport> methods;
};

// Trains the teacher once, then one student per (method, seed); writes
// report.json, the dataset manifest, and the teacher checkpoint to
// config.out_dir when set. Projector or clustering failures mark that
// method failed and the rest continue.
RunReport run_experiment(const ExperimentConfig& config);

// Vanilla-KD and LELP methods re-run on seeded stratified subsamples of the
// distillation set, one report per fraction. The teacher always trains on
// the full training set.
std::vector<RunReport> data_efficiency_sweep(const ExperimentConfig& config,
                                             const std::vector<double>& fractions);

// Teacher trains on a stratified labeled subset; distillation methods train
// on the labeled rows plus the teacher-pseudo-labeled pool, label-dependent
// methods on the labeled rows only.
RunReport semi_supervised_run(const ExperimentConfig& config);

enum class ReportFormat { table, json, csv };
ReportFormat parse_report_format(const std::string& name);

std::string render_table(const RunReport& report);
std::string render_json(const RunReport& report);
std::string render_csv_summary(const RunReport& report);
std::string render_csv_curves(const RunReport& report);

RunReport parse_report_json_file(const std::string& path);

// Writes the requested rendering(s) into out_dir: report.txt, report.json,
// or report.csv + curves.csv.
void emit_report(const RunReport& report, const std::string& out_dir, ReportFormat format);

// Population standard deviation (divide by n), matching the mean +- std
// convention in the reports.
double population_std(const std::vector<double>& values);

}  // namespace lelp::harness
