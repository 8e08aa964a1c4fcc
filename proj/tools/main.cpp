// rvgen: synthesize, train on, generate and evaluate range-view scenes.
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rvgen/commands.hpp"
#include "rvgen/config.hpp"
#include "rvgen/errors.hpp"

namespace {

struct ErrorInfo {
  const char* type;
  int exit_code;
};

ErrorInfo classify(const std::exception& e) {
  if (dynamic_cast<const rvgen::InsufficientDataError*>(&e))
    return {"insufficient_data", 2};
  if (dynamic_cast<const rvgen::UsageError*>(&e)) return {"usage_error", 2};
  if (dynamic_cast<const rvgen::IoError*>(&e)) return {"io_error", 1};
  if (dynamic_cast<const rvgen::NumericalDomainError*>(&e))
    return {"numerical_domain_error", 1};
  if (dynamic_cast<const rvgen::DomainError*>(&e)) return {"domain_error", 1};
  return {"internal_error", 1};
}

void report_error(const std::exception& e, const char* type, bool as_json) {
  if (as_json) {
    nlohmann::ordered_json j;
    j["error"] = {{"type", type}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "rvgen: error: " << e.what() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"range-view scene generation and evaluation toolkit"};
  app.require_subcommand(1);
  // Let --config/--set/--json appear after the subcommand name too.
  app.fallthrough();

  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;
  bool json_errors = false;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--set", overrides,
                 "override a config value, e.g. --set sampler.nfe=64");
  app.add_flag("--json", json_errors, "report errors as JSON on stderr");

  std::filesystem::path synth_out;
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--out", synth_out, "output directory")->required();

  std::filesystem::path train_corpus, train_model, train_log;
  CLI::App* train = app.add_subcommand("train", "train the denoiser");
  train->add_option("--corpus", train_corpus, "directory of .rvs scenes")
      ->required();
  train->add_option("--model", train_model, "checkpoint output path")
      ->required();
  train->add_option("--log", train_log, "JSONL loss log output path")
      ->required();

  std::optional<std::filesystem::path> gen_model, gen_oracle;
  std::filesystem::path gen_out;
  int gen_count = 4;
  CLI::App* gen = app.add_subcommand("generate", "sample scenes");
  gen->add_option("--model", gen_model, "toy denoiser checkpoint");
  gen->add_option("--oracle-scene", gen_oracle,
                  "labeled .rvs scene for the memorizing oracle");
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--out", gen_out, "output directory")->required();

  std::filesystem::path eval_real, eval_gen, eval_report;
  CLI::App* eval = app.add_subcommand("evaluate",
                                      "compare two labeled scene sets");
  eval->add_option("--real", eval_real, "reference scene directory")
      ->required();
  eval->add_option("--gen", eval_gen, "generated scene directory")->required();
  eval->add_option("--report", eval_report, "metric report JSON output")
      ->required();

  bool reverse = false;
  std::optional<std::filesystem::path> proj_bin, proj_labels, proj_rvs,
      proj_out_bin, proj_out_labels;
  CLI::App* project = app.add_subcommand(
      "project", "point cloud -> range view (or back with --reverse)");
  project->add_flag("--reverse", reverse, "range view -> point cloud");
  project->add_option("--bin", proj_bin, "input .bin point cloud");
  project->add_option("--labels", proj_labels, "input .label file");
  project->add_option("--rvs", proj_rvs,
                      "forward: output .rvs; reverse: input .rvs");
  project->add_option("--out-bin", proj_out_bin, "reverse: output .bin");
  project->add_option("--out-labels", proj_out_labels,
                      "reverse: output .label");

  std::filesystem::path report_path;
  CLI::App* report = app.add_subcommand("report",
                                        "print a metric report as text");
  report->add_option("--report", report_path, "metric report JSON")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    rvgen::RunConfig config = rvgen::load_config(config_file, overrides);

    if (synth->parsed()) {
      rvgen::cmd_synth(config, synth_out);
      std::cout << "wrote " << config.synth_count << " scenes to "
                << synth_out.string() << "\n";
    } else if (train->parsed()) {
      rvgen::cmd_train(config, train_corpus, train_model, train_log);
      std::cout << "trained " << config.train.steps << " steps; checkpoint "
                << train_model.string() << "\n";
    } else if (gen->parsed()) {
      rvgen::cmd_generate(config, gen_model, gen_oracle, gen_count, gen_out);
      std::cout << "sampled " << gen_count << " scenes into "
                << gen_out.string() << "\n";
    } else if (eval->parsed()) {
      rvgen::cmd_evaluate(config, eval_real, eval_gen, eval_report);
      std::cout << rvgen::cmd_report(eval_report);
    } else if (project->parsed()) {
      if (reverse) {
        if (!proj_rvs || !proj_out_bin)
          throw rvgen::UsageError(
              "project --reverse needs --rvs and --out-bin");
        if (proj_bin || proj_labels)
          throw rvgen::UsageError(
              "project --reverse takes --rvs/--out-bin/--out-labels only");
        rvgen::cmd_project_reverse(config, *proj_rvs, *proj_out_bin,
                                   proj_out_labels);
        std::cout << "wrote " << proj_out_bin->string() << "\n";
      } else {
        if (!proj_bin || !proj_rvs)
          throw rvgen::UsageError("project needs --bin and --rvs");
        if (proj_out_bin || proj_out_labels)
          throw rvgen::UsageError(
              "--out-bin/--out-labels only apply with --reverse");
        std::size_t dropped =
            rvgen::cmd_project(config, *proj_bin, proj_labels, *proj_rvs);
        std::cout << "wrote " << proj_rvs->string() << " (" << dropped
                  << " points dropped)\n";
      }
    } else if (report->parsed()) {
      std::cout << rvgen::cmd_report(report_path);
    }
  } catch (const std::exception& e) {
    ErrorInfo info = classify(e);
    report_error(e, info.type, json_errors);
    return info.exit_code;
  }
  return 0;
}
