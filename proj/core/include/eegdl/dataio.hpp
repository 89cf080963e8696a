#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegdl/tensor.hpp"

namespace eegdl::dataio {

enum class ClassLabel : int { truth = 0, lie = 1 };

inline const char* label_name(ClassLabel l) {
  return l == ClassLabel::truth ? "truth" : "lie";
}
inline int label_index(ClassLabel l) { return static_cast<int>(l); }

/// The 13 usable channels of the Emotiv EPOC+ headset (AF3 excluded).
const std::vector<std::string>& default_channels();

constexpr double kDefaultSampleRateHz = 128.0;

struct EegRecording {
  std::string subject_id;
  std::string run_id;
  ClassLabel label = ClassLabel::truth;
  std::vector<std::string> channel_names;
  Tensor<double> samples;  // n x channels, microvolts
  double sample_rate_hz = kDefaultSampleRateHz;

  std::size_t n_samples() const { return samples.dim(0); }
  std::size_t n_channels() const { return samples.dim(1); }
};

struct ManifestEntry {
  std::string subject_id;
  std::string run_id;
  std::filesystem::path data_path;
  ClassLabel label = ClassLabel::truth;
};

enum class ManifestSource { bag_of_lies, synthetic };

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  ManifestSource source = ManifestSource::bag_of_lies;
};

/// Load one per-run CSV, keeping only the requested channels in the requested
/// order. Metadata columns are dropped; rows are not cleaned here.
EegRecording load_recording(const std::filesystem::path& path,
                            const std::vector<std::string>& channel_names,
                            ClassLabel label, double sample_rate_hz);

/// Drop rows containing any non-finite value; order preserved.
EegRecording clean_rows(const EegRecording& rec);

/// Parse a manifest CSV with columns subject_id,run_id,path,label (label 0/1).
/// Relative paths resolve against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Load + clean every manifest entry; output sorted by (subject_id, run_id).
std::vector<EegRecording> aggregate_sessions(
    const DatasetManifest& manifest,
    const std::vector<std::string>& channel_names = default_channels(),
    double sample_rate_hz = kDefaultSampleRateHz);

struct SynthSpec {
  int n_recordings = 10;
  double duration_s = 4.0;
  double sample_rate_hz = kDefaultSampleRateHz;
  double truth_band_hz = 10.0;  // class-dependent oscillation frequency
  double lie_band_hz = 20.0;
  double noise_std = 0.5;
};

/// Deterministic synthetic recordings: per-class sinusoid with per-channel
/// random phase plus white Gaussian noise, labels balanced within one.
std::vector<EegRecording> synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Persist synthetic recordings as per-run CSVs plus a manifest CSV.
DatasetManifest write_synth_dataset(const std::vector<EegRecording>& recs,
                                    const std::filesystem::path& out_dir);

}  // namespace eegdl::dataio
