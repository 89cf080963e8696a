// Command-line front end: synth | preprocess | train | evaluate | predict.

#include <CLI11.hpp>
#include <iostream>

#include "eegdl/commands.hpp"
#include "eegdl/config.hpp"
#include "eegdl/error.hpp"

namespace {

eegdl::RunConfig load_config(const std::string& config_path, std::uint64_t seed_override,
                             const std::string& mode_override) {
  eegdl::RunConfig config = eegdl::parse_config_file(config_path);
  if (seed_override != 0) {
    config.seeds = eegdl::SeedBlock{};
    config.seeds.global = seed_override;
    config.seeds.resolve();
  }
  if (!mode_override.empty())
    config.pipeline.mode = eegdl::dsp::parse_pipeline_mode(mode_override);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG sequence classification toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_override = 0;
  std::string mode_override;
  std::string out_dir = "out";
  std::string manifest_path, dataset_path, checkpoint_path, recording_path;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "configuration file (INI)");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed_override, "override the global seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  add_common(synth, true);

  auto* preprocess = app.add_subcommand("preprocess", "run the preprocessing pipeline");
  add_common(preprocess, true);
  preprocess->add_option("--manifest", manifest_path, "manifest CSV")->required();
  preprocess->add_option("--mode", mode_override, "paper_faithful or leak_safe");

  auto* train = app.add_subcommand("train", "cross-validated training");
  add_common(train, true);
  train->add_option("--dataset", dataset_path, "persisted dataset (.eegt)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  add_common(evaluate, false);
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  evaluate->add_option("--dataset", dataset_path, "persisted dataset (.eegt)")->required();

  auto* predict = app.add_subcommand("predict", "classify one raw recording CSV");
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  predict->add_option("--input", recording_path, "recording CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      eegdl::cmd::cmd_synth(load_config(config_path, seed_override, ""), out_dir, std::cout);
    } else if (preprocess->parsed()) {
      eegdl::cmd::cmd_preprocess(load_config(config_path, seed_override, mode_override),
                                 manifest_path, out_dir, std::cout);
    } else if (train->parsed()) {
      eegdl::cmd::cmd_train(load_config(config_path, seed_override, ""), dataset_path,
                            out_dir, std::cout);
    } else if (evaluate->parsed()) {
      eegdl::cmd::cmd_evaluate(checkpoint_path, dataset_path, out_dir, std::cout);
    } else if (predict->parsed()) {
      eegdl::cmd::cmd_predict(checkpoint_path, recording_path, std::cout);
    }
  } catch (const eegdl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(eegdl::ErrorKind::runtime);
  }
  return 0;
}
