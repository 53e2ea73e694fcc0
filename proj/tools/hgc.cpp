// Command-line front end: run / sweep / stage / inspect.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hgc/pipeline.hpp"

namespace {

hgc::JobConfig load_config_or_die(const std::string& config_path,
                                  const std::optional<std::uint64_t>& seed_override) {
  if (config_path.empty()) throw hgc::Error("--config is required");
  hgc::JobConfig cfg = hgc::load_job_config(config_path);
  if (seed_override) cfg.run.seed = *seed_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superpixel-graph convolutional classifier for hyperspectral images"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  bool force = false;
  bool timing = false;
  app.add_option("--config", config_path, "run configuration (JSON or key=value)");
  app.add_option("--seed", seed_override, "override the config seed");
  app.add_option("--out-dir", out_dir, "artifact directory");
  app.add_flag("--force", force, "skip stale-artifact checks");
  app.add_flag("--time", timing, "print per-stage wall clock");

  auto* cmd_run = app.add_subcommand("run", "execute the full pipeline");
  cmd_run->fallthrough();
  auto* cmd_sweep = app.add_subcommand("sweep", "run a parameter grid");
  cmd_sweep->fallthrough();
  std::string sweep_spec_path;
  cmd_sweep->add_option("spec", sweep_spec_path, "sweep spec JSON")->required();
  auto* cmd_stage = app.add_subcommand("stage", "run a single stage");
  cmd_stage->fallthrough();
  std::string stage_name;
  std::string partition_import;
  cmd_stage->add_option("name", stage_name, "pca|segment|graph|partition|train|predict|eval")
      ->required();
  cmd_stage->add_option("--partition-file", partition_import,
                        "import an externally computed partition (partition stage only)");
  auto* cmd_inspect = app.add_subcommand("inspect", "summarize an artifact file");
  cmd_inspect->fallthrough();
  std::string inspect_path;
  cmd_inspect->add_option("artifact", inspect_path, "artifact path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_inspect->parsed()) {
      std::cout << hgc::inspect_artifact(inspect_path);
      return 0;
    }
    if (cmd_run->parsed()) {
      hgc::Pipeline pipeline(load_config_or_die(config_path, seed_override), out_dir, force,
                             timing);
      pipeline.run_all();
      std::cout << hgc::read_text_file(pipeline.artifact("metrics.txt"));
      return 0;
    }
    if (cmd_stage->parsed()) {
      hgc::Pipeline pipeline(load_config_or_die(config_path, seed_override), out_dir, force,
                             timing);
      pipeline.run_stage(stage_name, partition_import);
      return 0;
    }
    if (cmd_sweep->parsed()) {
      const hgc::JobConfig cfg = load_config_or_die(config_path, seed_override);
      const hgc::SweepSpec spec = hgc::load_sweep_spec(sweep_spec_path, cfg.run);
      const auto rows = hgc::run_sweep(cfg, spec);
      std::filesystem::create_directories(out_dir);
      const auto out = [&out_dir](const std::string& name) {
        return (std::filesystem::path(out_dir) / name).string();
      };
      hgc::write_file_atomic(out("sweep_results.json"),
                             hgc::sweep_rows_to_json(rows).dump(2) + "\n");
      const std::string table = hgc::sweep_rows_to_table(rows);
      hgc::write_file_atomic(out("sweep_table.txt"), table);
      std::cout << table;
      return 0;
    }
  } catch (const hgc::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
