#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lelp/harness.hpp"

namespace {

using lelp::harness::ExperimentConfig;
using lelp::harness::ReportFormat;
using lelp::harness::RunReport;

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             bool seed_set, std::uint64_t seed_override) {
  ExperimentConfig cfg = lelp::harness::parse_config_file(path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_set) cfg.global_seed = seed_override;
  if (cfg.out_dir.empty())
    cfg.out_dir = (std::filesystem::path("runs") / cfg.name).string();
  return cfg;
}

void print_report(const RunReport& report) {
  std::cout << lelp::harness::render_table(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LELP knowledge-distillation experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config file")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides the config)");
    cmd->add_option("--seed", seed, "global seed (overrides the config)")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* run_cmd = app.add_subcommand("run", "train the teacher and every method over all seeds");
  add_common(run_cmd);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-data", "vanilla KD and LELP over distillation-set fractions");
  add_common(sweep_cmd);
  std::vector<double> fractions;
  sweep_cmd->add_option("--fractions", fractions, "fractions of the distillation set in (0, 1]")
      ->delimiter(',');

  CLI::App* semi_cmd =
      app.add_subcommand("semi", "semi-supervised run: teacher on a labeled subset, "
                                 "students on labeled + pseudo-labeled data");
  add_common(semi_cmd);
  std::size_t labeled_count = 0;
  semi_cmd->add_option("--labeled", labeled_count, "labeled example count (overrides the config)");

  CLI::App* report_cmd = app.add_subcommand("report", "re-render a run directory's report");
  std::string run_dir;
  std::string format_name = "table";
  report_cmd->add_option("run_dir", run_dir, "directory containing report.json")->required();
  report_cmd->add_option("--format", format_name, "table, json, or csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run_cmd)) {
      ExperimentConfig cfg = load_config(config_path, out_dir, seed_set, seed);
      RunReport report = lelp::harness::run_experiment(cfg);
      lelp::harness::emit_report(report, cfg.out_dir, ReportFormat::table);
      lelp::harness::emit_report(report, cfg.out_dir, ReportFormat::csv);
      print_report(report);
      std::cout << "report written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sweep_cmd)) {
      ExperimentConfig cfg = load_config(config_path, out_dir, seed_set, seed);
      if (fractions.empty()) fractions = cfg.fractions;
      const std::vector<RunReport> reports =
          lelp::harness::data_efficiency_sweep(cfg, fractions);
      for (const RunReport& report : reports) print_report(report);
      std::cout << "reports written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(semi_cmd)) {
      ExperimentConfig cfg = load_config(config_path, out_dir, seed_set, seed);
      if (labeled_count > 0) cfg.labeled_count = labeled_count;
      RunReport report = lelp::harness::semi_supervised_run(cfg);
      lelp::harness::emit_report(report, cfg.out_dir, ReportFormat::table);
      lelp::harness::emit_report(report, cfg.out_dir, ReportFormat::csv);
      print_report(report);
      std::cout << "report written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(report_cmd)) {
      const ReportFormat format = lelp::harness::parse_report_format(format_name);
      const std::string path = (std::filesystem::path(run_dir) / "report.json").string();
      RunReport report = lelp::harness::parse_report_json_file(path);
      switch (format) {
        case ReportFormat::table:
          print_report(report);
          break;
        case ReportFormat::json:
          std::cout << lelp::harness::render_json(report) << "\n";
          break;
        case ReportFormat::csv:
          std::cout << lelp::harness::render_csv_summary(report);
          break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
