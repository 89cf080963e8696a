#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eegdl/dataio.hpp"
#include "eegdl/tensor.hpp"

namespace eegdl::dsp {

using dataio::ClassLabel;
using dataio::EegRecording;

struct FilterSpec {
  double f_low_hz = 1.0;
  double f_high_hz = 30.0;
  int order = 4;  // band-pass order; even, >= 2
  bool zero_phase = true;
};

/// Digital IIR transfer function coefficients (b over a, a[0] == 1).
struct IirCoeffs {
  std::vector<double> b;
  std::vector<double> a;
};

/// Butterworth band-pass design via analog prototype + bilinear transform.
IirCoeffs design_butterworth_bandpass(const FilterSpec& spec, double sample_rate_hz);

/// Single forward pass (direct form II transposed), zero initial state unless
/// `zi_scale` supplies the step-response steady state scaled by x[0].
std::vector<double> iir_filter(const IirCoeffs& c, const std::vector<double>& x,
                               const std::vector<double>* zi = nullptr,
                               double zi_scale = 0.0);

/// Forward-backward filtering with odd-reflection padding; zero phase.
std::vector<double> filtfilt(const IirCoeffs& c, const std::vector<double>& x);

/// Per-channel band-pass; zero_phase selects filtfilt.
EegRecording bandpass_filter(const EegRecording& rec, const FilterSpec& spec);

enum class StatsSource { per_recording, training_set };

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

ChannelStats compute_channel_stats(const std::vector<EegRecording>& recs);
EegRecording apply_standardize(const EegRecording& rec, const ChannelStats& stats);

/// Transform every channel to zero mean / unit variance. With per_recording
/// each recording uses its own statistics; with training_set the pooled stats
/// of all inputs are used and returned for reuse at inference.
std::pair<std::vector<EegRecording>, ChannelStats> standardize(
    const std::vector<EegRecording>& recs, StatsSource source);

struct WindowOrigin {
  std::string subject_id;
  std::string run_id;
  std::size_t window_index = 0;
};

struct WindowSample {
  Tensor<float> data;  // T x channels
  ClassLabel label = ClassLabel::truth;
  WindowOrigin origin;
  bool augmented = false;
};

/// Overlapping segmentation: window j covers rows [j*stride, j*stride+T-1],
/// j = 0..floor((n-T)/stride). Recordings shorter than T yield no windows.
std::vector<WindowSample> window_segments(const EegRecording& rec,
                                          std::size_t window_len = 64,
                                          std::size_t stride = 32);

/// Random undersampling of the majority class down to min(N1, N2); minority
/// untouched, survivor order preserved.
std::vector<WindowSample> balance_undersample(const std::vector<WindowSample>& samples,
                                              std::uint64_t seed);

/// One synthetic copy per input with zero-mean Gaussian noise of std
/// noise_factor * (per-channel std within the window); copies appended after
/// the originals and flagged augmented.
std::vector<WindowSample> augment_gaussian(const std::vector<WindowSample>& samples,
                                           double noise_factor, std::uint64_t seed);

struct SplitDataset {
  std::vector<WindowSample> train;
  std::vector<WindowSample> test;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};

SplitDataset split_train_test(const std::vector<WindowSample>& samples,
                              double test_fraction, std::uint64_t seed,
                              bool stratified = true);

enum class PipelineMode { leak_safe, paper_faithful };

const char* pipeline_mode_name(PipelineMode m);
PipelineMode parse_pipeline_mode(const std::string& s);

struct PipelineConfig {
  double sample_rate_hz = dataio::kDefaultSampleRateHz;
  FilterSpec filter;
  bool standardize_enabled = true;
  StatsSource stats_source = StatsSource::per_recording;
  std::size_t window_len = 64;
  std::size_t stride = 32;
  double noise_factor = 0.02;
  double test_fraction = 0.2;
  bool stratified = true;
  PipelineMode mode = PipelineMode::leak_safe;
  std::uint64_t balance_seed = 1;
  std::uint64_t augment_seed = 2;
  std::uint64_t split_seed = 3;
};

struct StageCounts {
  std::size_t truth = 0;
  std::size_t lie = 0;
  std::size_t total() const { return truth + lie; }
};

struct PipelineReport {
  std::vector<std::pair<std::string, StageCounts>> stages;
  std::size_t short_recordings_skipped = 0;

  void add(const std::string& name, StageCounts c) { stages.emplace_back(name, c); }
  std::string to_text() const;
  std::string to_keyvalue() const;
};

/// Full preprocessing chain. paper_faithful follows the published order
/// (filter, window, balance, augment, then split over pooled windows);
/// leak_safe splits by recording first and balances/augments the train side
/// only, so no test window shares a recording with train and no synthetic
/// copy lands in test.
SplitDataset run_pipeline(const std::vector<EegRecording>& recs,
                          const PipelineConfig& config, PipelineReport* report,
                          ChannelStats* stats_out = nullptr);

}  // namespace eegdl::dsp
