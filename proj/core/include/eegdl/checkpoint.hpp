#pragma once

#include <filesystem>
#include <string>

#include "eegdl/dsp.hpp"
#include "eegdl/nn.hpp"

namespace eegdl {

/// Everything inference needs besides the weights: how to filter,
/// standardize, and window an incoming recording.
struct InferencePipeline {
  double sample_rate_hz = dataio::kDefaultSampleRateHz;
  dsp::FilterSpec filter;
  bool standardize_enabled = true;
  dsp::StatsSource stats_source = dsp::StatsSource::per_recording;
  dsp::ChannelStats global_stats;  // only with training_set stats
  std::size_t window_len = 64;
  std::size_t stride = 32;
};

struct Checkpoint {
  nn::ModelParams<float> params;
  InferencePipeline pipeline;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Loads and validates every parameter against the stored architecture;
/// a shape disagreement reports the offending layer.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct PersistedDataset {
  dsp::SplitDataset split;
  std::string report_keyvalue;
  dsp::ChannelStats stats;  // pooled training stats, when computed
  std::size_t window_len = 0;
  std::size_t n_channels = 0;
};

void save_split_dataset(const dsp::SplitDataset& split, const dsp::PipelineReport& report,
                        const dsp::ChannelStats& stats,
                        const std::filesystem::path& path);
PersistedDataset load_split_dataset(const std::filesystem::path& path);

}  // namespace eegdl
