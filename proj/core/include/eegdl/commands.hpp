#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "eegdl/checkpoint.hpp"
#include "eegdl/config.hpp"
#include "eegdl/eval.hpp"

namespace eegdl::cmd {

/// Generate a synthetic dataset: per-run CSVs plus a manifest CSV.
void cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir,
               std::ostream& log);

/// Run the preprocessing pipeline over a manifest and persist the split
/// dataset (out_dir/dataset.eegt) together with the stage report and the
/// resolved configuration.
void cmd_preprocess(const RunConfig& config, const std::filesystem::path& manifest_path,
                    const std::filesystem::path& out_dir, std::ostream& log);

/// K-fold cross validation plus final-model selection; writes
/// out_dir/checkpoint.eegt, per-fold history CSVs, and a summary.
void cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path,
               const std::filesystem::path& out_dir, std::ostream& log);

/// Evaluate a checkpoint on the persisted test split; writes report files.
eval::EvalReport cmd_evaluate(const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& dataset_path,
                              const std::filesystem::path& out_dir, std::ostream& log);

struct PredictResult {
  std::vector<std::array<double, 2>> window_probs;  // [p_truth, p_lie] per window
  dataio::ClassLabel majority = dataio::ClassLabel::truth;
  std::size_t votes_truth = 0;
  std::size_t votes_lie = 0;
};

/// Full inference pipeline on a single raw recording CSV; per-window
/// probabilities plus the majority-vote recording label (ties go to truth —
/// the recording-level vote is an extension over per-window scoring).
PredictResult cmd_predict(const std::filesystem::path& checkpoint_path,
                          const std::filesystem::path& recording_csv, std::ostream& log);

}  // namespace eegdl::cmd
