#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csel/pipeline.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  bool dry_run = false;
  std::optional<uint64_t> seed;
  std::string out_dir;
};

csel::PipelineConfig resolve_config(const CliArgs& args) {
  csel::PipelineConfig config = csel::load_config(args.config_path);
  for (const auto& assignment : args.overrides)
    csel::apply_override(config, assignment);
  if (args.seed) {
    config.seed = *args.seed;
    config.seed_overridden = true;
  }
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  config.validate();
  return config;
}

void print_plan(const csel::PipelineConfig& config,
                const std::vector<csel::Stage>& stages) {
  for (csel::Stage stage : stages) {
    const csel::StageIo io = csel::stage_io(stage, config);
    std::cout << csel::stage_name(stage) << "\n";
    for (const auto& p : io.inputs)
      std::cout << "  reads  " << p.generic_string() << "\n";
    for (const auto& p : io.outputs)
      std::cout << "  writes " << p.generic_string() << "\n";
  }
}

void add_common_options(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config file")
      ->required();
  cmd->add_option("--override", args.overrides,
                  "config override as key=value (repeatable)");
  cmd->add_flag("--dry-run", args.dry_run,
                "print the plan without touching any file");
  cmd->add_option("--seed", args.seed,
                  "replace every seed, including the synthetic spec's");
  cmd->add_option("--out-dir", args.out_dir, "replace the configured out_dir");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive data selection pipeline"};
  app.require_subcommand(1);
  CliArgs args;

  struct Registered {
    CLI::App* cmd;
    std::optional<csel::Stage> stage;  // nullopt = run-all
  };
  std::vector<Registered> commands;
  const std::pair<const char*, const char*> stage_help[] = {
      {"synth", "generate the synthetic corpus, oracle and features"},
      {"quantize", "fit the k-means codebook and emit ID token manifests"},
      {"bpe-train", "learn the BPE merge table from the pool manifest"},
      {"tokenize", "apply the BPE model to pool and domain manifests"},
      {"lm-train", "train the general n-gram model"},
      {"lm-adapt", "train the domain model and interpolate"},
      {"score", "compute per-audio contrastive scores"},
      {"select", "rank by ascending eta and apply the budget"},
      {"eval", "sweep budgets and compare strategies"},
  };
  for (const auto& [name, help] : stage_help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common_options(cmd, args);
    commands.push_back({cmd, csel::stage_from_name(name)});
  }
  CLI::App* run_all_cmd =
      app.add_subcommand("run-all", "run every stage in dependency order");
  add_common_options(run_all_cmd, args);
  commands.push_back({run_all_cmd, std::nullopt});

  CLI11_PARSE(app, argc, argv);

  try {
    const csel::PipelineConfig config = resolve_config(args);
    for (const auto& reg : commands) {
      if (!reg.cmd->parsed()) continue;
      if (!reg.stage) {
        if (args.dry_run) {
          print_plan(config, csel::plan_stages(config));
        } else {
          csel::run_all(config);
        }
      } else if (args.dry_run) {
        print_plan(config, {*reg.stage});
      } else {
        csel::run_stage(*reg.stage, config);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
