#include "eegdl/commands.hpp"

#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "eegdl/error.hpp"

namespace eegdl::cmd {

namespace {

namespace fs = std::filesystem;

/// Exclusive lock on an output directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : lock_path_(dir / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(lock_path_))
      throw runtime_error("Locked", dir.string() +
                                        " is in use by another invocation (stale lock? "
                                        "remove " +
                                        lock_path_.string() + ")");
    std::ofstream f(lock_path_);
    if (!f) throw data_error("IoError", "cannot create lock " + lock_path_.string());
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path lock_path_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw data_error("IoError", "cannot write " + path.string());
  f << content;
}

void echo_config(const RunConfig& config, const fs::path& out_dir) {
  write_file(out_dir / "resolved_config.ini", render_config(config));
}

InferencePipeline inference_pipeline(const RunConfig& config,
                                     const dsp::ChannelStats& stats) {
  InferencePipeline p;
  p.sample_rate_hz = config.pipeline.sample_rate_hz;
  p.filter = config.pipeline.filter;
  p.standardize_enabled = config.pipeline.standardize_enabled;
  p.stats_source = config.pipeline.stats_source;
  p.global_stats = stats;
  p.window_len = config.pipeline.window_len;
  p.stride = config.pipeline.stride;
  return p;
}

}  // namespace

void cmd_synth(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  DirLock lock(out_dir);
  echo_config(config, out_dir);
  auto recs = dataio::synth_generate(config.synth, config.seeds.synth);
  dataio::write_synth_dataset(recs, out_dir);
  dsp::StageCounts counts;
  for (const auto& r : recs)
    (r.label == dataio::ClassLabel::truth ? counts.truth : counts.lie)++;
  log << "synth: wrote " << recs.size() << " recordings (" << counts.truth << " truth, "
      << counts.lie << " lie) to " << out_dir.string() << "\n";
}

void cmd_preprocess(const RunConfig& config, const fs::path& manifest_path,
                    const fs::path& out_dir, std::ostream& log) {
  if (!fs::exists(manifest_path))
    throw config_error("MissingInput", "manifest not found: " + manifest_path.string());
  dataio::DatasetManifest manifest = dataio::read_manifest(manifest_path);
  DirLock lock(out_dir);
  echo_config(config, out_dir);
  auto recs = dataio::aggregate_sessions(manifest, dataio::default_channels(),
                                         config.pipeline.sample_rate_hz);
  dsp::PipelineReport report;
  dsp::ChannelStats stats;
  dsp::SplitDataset split = dsp::run_pipeline(recs, config.pipeline, &report, &stats);
  save_split_dataset(split, report, stats, out_dir / "dataset.eegt");
  write_file(out_dir / "pipeline_report.txt", report.to_text());
  write_file(out_dir / "pipeline_report.kv", report.to_keyvalue());
  log << report.to_text();
  log << "preprocess: wrote " << (out_dir / "dataset.eegt").string() << "\n";
}

void cmd_train(const RunConfig& config, const fs::path& dataset_path,
               const fs::path& out_dir, std::ostream& log) {
  PersistedDataset ds = load_split_dataset(dataset_path);
  if (ds.split.train.empty()) throw data_error("EmptyInput", "dataset has no train split");
  DirLock lock(out_dir);
  echo_config(config, out_dir);

  nn::ArchConfig arch = config.arch;
  arch.input_channels = ds.n_channels;
  arch.window_len = ds.window_len;
  nn::validate_arch(arch);

  train::TrainSeeds seeds = config.train_seeds();
  auto folds = train::kfold_cv<float>(ds.split.train, arch, config.training, seeds, &log);
  for (std::size_t f = 0; f < folds.size(); ++f)
    write_file(out_dir / ("fold" + std::to_string(f + 1) + "_history.csv"),
               folds[f].history.to_csv());

  train::TrainHistory final_history;
  nn::ModelParams<float> params =
      train::select_final_model(ds.split.train, folds, arch, config.training, seeds,
                                config.final_model, &final_history, &log);
  write_file(out_dir / "final_history.csv", final_history.to_csv());

  Checkpoint ckpt{std::move(params), inference_pipeline(config, ds.stats)};
  save_checkpoint(ckpt, out_dir / "checkpoint.eegt");

  std::ostringstream summary;
  summary << "folds: " << folds.size() << "\n";
  for (std::size_t f = 0; f < folds.size(); ++f)
    summary << "fold" << (f + 1) << ".best_epoch = " << folds[f].history.best_epoch
            << "\nfold" << (f + 1) << ".best_val_loss = " << folds[f].best_val_loss << "\n";
  summary << "final.best_epoch = " << final_history.best_epoch << "\n";
  summary << "final.stopped_epoch = " << final_history.stopped_epoch << "\n";
  write_file(out_dir / "summary.txt", summary.str());
  log << "train: wrote " << (out_dir / "checkpoint.eegt").string() << "\n";
}

eval::EvalReport cmd_evaluate(const fs::path& checkpoint_path, const fs::path& dataset_path,
                              const fs::path& out_dir, std::ostream& log) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  PersistedDataset ds = load_split_dataset(dataset_path);
  if (ds.split.test.empty()) throw data_error("EmptyInput", "dataset has no test split");
  if (ds.n_channels != ckpt.params.arch.input_channels ||
      ds.window_len != ckpt.params.arch.window_len)
    throw data_error("ShapeCorruption",
                     "dataset windows " + std::to_string(ds.window_len) + "x" +
                         std::to_string(ds.n_channels) + " do not match checkpoint arch " +
                         std::to_string(ckpt.params.arch.window_len) + "x" +
                         std::to_string(ckpt.params.arch.input_channels));
  DirLock lock(out_dir);
  eval::ConfusionMatrix cm;
  eval::EvalReport report =
      eval::evaluate_model(ckpt.params, ds.split.test, /*batch_size=*/64, &cm);
  train::TrainHistory empty_history;
  eval::export_report(report, cm, empty_history, out_dir);
  log << eval::report_text(report);
  return report;
}

PredictResult cmd_predict(const fs::path& checkpoint_path, const fs::path& recording_csv,
                          std::ostream& log) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const InferencePipeline& pipe = ckpt.pipeline;
  if (ckpt.params.arch.input_channels != dataio::default_channels().size())
    throw data_error("ShapeCorruption",
                     "predict expects the standard 13-channel layout in the checkpoint");

  dataio::EegRecording rec =
      dataio::clean_rows(dataio::load_recording(recording_csv, dataio::default_channels(),
                                                dataio::ClassLabel::truth,
                                                pipe.sample_rate_hz));
  rec = dsp::bandpass_filter(rec, pipe.filter);
  if (pipe.standardize_enabled) {
    if (pipe.stats_source == dsp::StatsSource::training_set && !pipe.global_stats.mean.empty())
      rec = dsp::apply_standardize(rec, pipe.global_stats);
    else
      rec = dsp::apply_standardize(rec, dsp::compute_channel_stats({rec}));
  }
  auto windows = dsp::window_segments(rec, pipe.window_len, pipe.stride);
  if (windows.empty())
    throw data_error("NoWindows", recording_csv.string() + ": recording shorter than one window (" +
                                      std::to_string(pipe.window_len) + " samples)");

  PredictResult result;
  const std::size_t batch_size = 64;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, windows.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [batch, labels] = train::make_batch<float>(windows, idx);
    Tape<float> tape;
    nn::BoundModel<float> bound = nn::bind_params(tape, ckpt.params);
    Var probs_var = nn::model_forward(tape, bound, batch, /*training=*/false, 0);
    const Tensor<float>& probs = tape.value(probs_var);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      result.window_probs.push_back(
          {static_cast<double>(probs(i, 0)), static_cast<double>(probs(i, 1))});
      if (probs(i, 1) > probs(i, 0))
        result.votes_lie++;
      else
        result.votes_truth++;  // ties go to truth
    }
  }
  result.majority = result.votes_lie > result.votes_truth ? dataio::ClassLabel::lie
                                                          : dataio::ClassLabel::truth;
  log << "windows: " << result.window_probs.size() << "\n";
  for (std::size_t j = 0; j < result.window_probs.size(); ++j)
    log << "window " << j << ": p_truth=" << result.window_probs[j][0]
        << " p_lie=" << result.window_probs[j][1] << "\n";
  log << "majority vote (recording-level extension): "
      << dataio::label_name(result.majority) << " (" << result.votes_truth << " truth / "
      << result.votes_lie << " lie)\n";
  return result;
}

}  // namespace eegdl::cmd
