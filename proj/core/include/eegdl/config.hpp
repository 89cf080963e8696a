#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "eegdl/dataio.hpp"
#include "eegdl/dsp.hpp"
#include "eegdl/nn.hpp"
#include "eegdl/train.hpp"

namespace eegdl {

/// Named sub-seeds, each derived from the global seed by stable hashing
/// unless explicitly configured.
struct SeedBlock {
  std::uint64_t global = 42;
  std::uint64_t synth = 0;
  std::uint64_t balance = 0;
  std::uint64_t augment = 0;
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t dropout = 0;
  std::uint64_t folds = 0;

  /// Fill any unset (zero) sub-seed from the global seed.
  void resolve();
};

struct RunConfig {
  dataio::SynthSpec synth;
  dsp::PipelineConfig pipeline;
  nn::ArchConfig arch;
  train::TrainConfig training;
  train::FinalModelPolicy final_model = train::FinalModelPolicy::retrain_full;
  SeedBlock seeds;

  train::TrainSeeds train_seeds() const {
    return {seeds.init, seeds.shuffle, seeds.dropout, seeds.folds};
  }
};

/// Parse an INI-style config ([section] headers, key = value lines, '#'
/// comments). Unknown sections or keys are rejected.
RunConfig parse_config_file(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

/// Serialize with every default expanded; written into output directories so
/// each run is reproducible from its artifacts.
std::string render_config(const RunConfig& config);

}  // namespace eegdl
