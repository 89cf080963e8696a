#include <doctest.h>

#include <fstream>
#include <sstream>

#include "eegdl/checkpoint.hpp"
#include "eegdl/commands.hpp"
#include "eegdl/config.hpp"
#include "eegdl/error.hpp"
#include "support.hpp"

using eegdl::Error;
using eegdl::ErrorKind;
using eegdl::RunConfig;
using test_support::TempDir;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

/// Small but complete run: 8 recordings of 2 s, shallow model, 2 folds.
RunConfig tiny_config() {
  return eegdl::parse_config_text(R"(
[synth]
n_recordings = 8
duration_s = 2.0
noise_std = 0.4

[dsp]
test_fraction = 0.25

[nn]
gru_hidden = 6
dense_hidden = 4
dropout_rate = 0

[train]
max_epochs = 3
batch_size = 16
k_folds = 2
patience = 5

[seeds]
global = 7
)");
}

}  // namespace

TEST_CASE("config parsing: defaults, derived seeds, and rejection of bad input") {
  RunConfig def = eegdl::parse_config_text("");
  CHECK(def.pipeline.window_len == 64);
  CHECK(def.pipeline.stride == 32);
  CHECK(def.arch.gru_hidden == std::vector<std::size_t>{128, 64, 32});
  CHECK(def.arch.head_input_width == 64);
  CHECK(def.training.k_folds == 5);
  // every sub-seed is filled in deterministically from the global seed
  CHECK(def.seeds.global == 42);
  CHECK(def.seeds.shuffle != 0);
  CHECK(def.seeds.shuffle == eegdl::parse_config_text("").seeds.shuffle);
  CHECK(def.seeds.shuffle != def.seeds.dropout);

  RunConfig cfg = tiny_config();
  CHECK(cfg.synth.n_recordings == 8);
  CHECK(cfg.pipeline.test_fraction == 0.25);
  CHECK(cfg.arch.gru_hidden == std::vector<std::size_t>{6});
  // head width follows the last bi-directional layer unless set explicitly
  CHECK(cfg.arch.head_input_width == 12);
  CHECK(cfg.seeds.global == 7);
  CHECK(cfg.seeds.shuffle != def.seeds.shuffle);

  RunConfig explicit_seed = eegdl::parse_config_text("[seeds]\nshuffle = 123\n");
  CHECK(explicit_seed.seeds.shuffle == 123);

  CHECK_THROWS_WITH_AS(eegdl::parse_config_text("[nn]\nwidth = 3\n"),
                       doctest::Contains("unknown configuration key 'nn.width'"), Error);
  CHECK_THROWS_WITH_AS(eegdl::parse_config_text("\n\nbogus_line\n"),
                       doctest::Contains(":3"), Error);
  CHECK_THROWS_WITH_AS(eegdl::parse_config_text("[train]\nlr = fast\n"),
                       doctest::Contains("BadValue"), Error);
  CHECK_THROWS_WITH_AS(eegdl::parse_config_text("[broken\nx = 1\n"),
                       doctest::Contains("malformed section header"), Error);
  CHECK_THROWS_WITH_AS(eegdl::parse_config_text("[dsp]\nstats_source = global\n"),
                       doctest::Contains("stats_source"), Error);
}

TEST_CASE("render_config output re-parses to the same configuration") {
  RunConfig cfg = tiny_config();
  std::string rendered = eegdl::render_config(cfg);
  RunConfig back = eegdl::parse_config_text(rendered);
  CHECK(eegdl::render_config(back) == rendered);
  CHECK(back.seeds.shuffle == cfg.seeds.shuffle);
  CHECK(back.arch.gru_hidden == cfg.arch.gru_hidden);
  CHECK(back.training.adam.lr == cfg.training.adam.lr);
}

TEST_CASE("error type carries kind, code, and formatted message") {
  Error e = eegdl::data_error("ParseError", "bad cell");
  CHECK(e.kind() == ErrorKind::data);
  CHECK(e.code() == "ParseError");
  CHECK(std::string(e.what()) == "ParseError: bad cell");
  CHECK(static_cast<int>(eegdl::config_error("X", "m").kind()) == 2);
  CHECK(static_cast<int>(eegdl::runtime_error("X", "m").kind()) == 4);
}

TEST_CASE("synth command writes a loadable dataset and is reproducible") {
  RunConfig cfg = tiny_config();
  TempDir tmp;
  auto dir_a = tmp.path() / "a";
  auto dir_b = tmp.path() / "b";
  std::ostringstream log;
  eegdl::cmd::cmd_synth(cfg, dir_a, log);
  CHECK(log.str().find("8 recordings") != std::string::npos);
  CHECK(fs::exists(dir_a / "manifest.csv"));
  CHECK(fs::exists(dir_a / "S001_R1.csv"));
  CHECK(fs::exists(dir_a / "resolved_config.ini"));
  CHECK_FALSE(fs::exists(dir_a / ".lock"));  // released on completion

  eegdl::cmd::cmd_synth(cfg, dir_b, log);
  CHECK(read_bytes(dir_a / "manifest.csv") == read_bytes(dir_b / "manifest.csv"));
  CHECK(read_bytes(dir_a / "S001_R1.csv") == read_bytes(dir_b / "S001_R1.csv"));

  // an existing lock file blocks the command
  auto locked = tmp.path() / "locked";
  fs::create_directories(locked);
  std::ofstream(locked / ".lock") << "";
  CHECK_THROWS_WITH_AS(eegdl::cmd::cmd_synth(cfg, locked, log), doctest::Contains("Locked"),
                       Error);

  RunConfig bad = cfg;
  bad.synth.n_recordings = 0;
  CHECK_THROWS_WITH_AS(eegdl::cmd::cmd_synth(bad, tmp.path() / "bad", log),
                       doctest::Contains("InvalidSpec"), Error);
}

TEST_CASE("preprocess command: artifacts, modes, and missing-manifest handling") {
  RunConfig cfg = tiny_config();
  TempDir tmp;
  std::ostringstream log;
  auto raw = tmp.path() / "raw";
  eegdl::cmd::cmd_synth(cfg, raw, log);

  auto pre = tmp.path() / "pre";
  eegdl::cmd::cmd_preprocess(cfg, raw / "manifest.csv", pre, log);
  CHECK(fs::exists(pre / "dataset.eegt"));
  CHECK(fs::exists(pre / "pipeline_report.txt"));
  CHECK(fs::exists(pre / "pipeline_report.kv"));
  eegdl::PersistedDataset ds = eegdl::load_split_dataset(pre / "dataset.eegt");
  CHECK(ds.window_len == 64);
  CHECK(ds.n_channels == 13);
  CHECK(ds.split.train.size() > 0);
  CHECK(ds.split.test.size() > 0);

  // the two pipeline modes leave distinct fingerprints in the stage report
  RunConfig pooled = cfg;
  pooled.pipeline.mode = eegdl::dsp::PipelineMode::paper_faithful;
  auto pre2 = tmp.path() / "pre2";
  eegdl::cmd::cmd_preprocess(pooled, raw / "manifest.csv", pre2, log);
  std::string kv_leak = read_bytes(pre / "pipeline_report.kv");
  std::string kv_pooled = read_bytes(pre2 / "pipeline_report.kv");
  CHECK(kv_pooled.find("augmented") != std::string::npos);
  CHECK(kv_leak != kv_pooled);

  // a missing manifest is a configuration error (exit code 2), not a data error
  try {
    eegdl::cmd::cmd_preprocess(cfg, tmp.path() / "nope" / "manifest.csv",
                               tmp.path() / "out", log);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(e.code() == "MissingInput");
  }
}

TEST_CASE("train, evaluate, and predict commands run end to end deterministically") {
  RunConfig cfg = tiny_config();
  TempDir tmp;
  std::ostringstream log;
  auto raw = tmp.path() / "raw";
  auto pre = tmp.path() / "pre";
  eegdl::cmd::cmd_synth(cfg, raw, log);
  eegdl::cmd::cmd_preprocess(cfg, raw / "manifest.csv", pre, log);

  auto run1 = tmp.path() / "run1";
  eegdl::cmd::cmd_train(cfg, pre / "dataset.eegt", run1, log);
  CHECK(fs::exists(run1 / "checkpoint.eegt"));
  CHECK(fs::exists(run1 / "fold1_history.csv"));
  CHECK(fs::exists(run1 / "fold2_history.csv"));
  CHECK(fs::exists(run1 / "final_history.csv"));
  CHECK(fs::exists(run1 / "summary.txt"));
  CHECK(read_bytes(run1 / "summary.txt").find("folds: 2") != std::string::npos);

  eegdl::Checkpoint ckpt = eegdl::load_checkpoint(run1 / "checkpoint.eegt");
  CHECK(ckpt.params.arch.gru_hidden == std::vector<std::size_t>{6});
  CHECK(ckpt.params.arch.input_channels == 13);
  CHECK(ckpt.pipeline.window_len == 64);

  // bit-for-bit repeatability of the whole training command
  auto run2 = tmp.path() / "run2";
  eegdl::cmd::cmd_train(cfg, pre / "dataset.eegt", run2, log);
  CHECK(read_bytes(run1 / "checkpoint.eegt") == read_bytes(run2 / "checkpoint.eegt"));
  CHECK(read_bytes(run1 / "fold1_history.csv") == read_bytes(run2 / "fold1_history.csv"));
  CHECK(read_bytes(run1 / "final_history.csv") == read_bytes(run2 / "final_history.csv"));

  auto eval_dir = tmp.path() / "eval";
  eegdl::eval::EvalReport report =
      eegdl::cmd::cmd_evaluate(run1 / "checkpoint.eegt", pre / "dataset.eegt", eval_dir, log);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  REQUIRE(report.test_loss.has_value());
  CHECK(fs::exists(eval_dir / "report.txt"));
  CHECK(fs::exists(eval_dir / "metrics.kv"));
  CHECK(fs::exists(eval_dir / "confusion.csv"));
  eegdl::eval::EvalReport parsed =
      eegdl::eval::parse_report_keyvalue(read_bytes(eval_dir / "metrics.kv"));
  CHECK(parsed.accuracy == report.accuracy);

  // a checkpoint whose window geometry disagrees with the dataset is rejected
  eegdl::Checkpoint mismatched = ckpt;
  mismatched.pipeline.window_len = 32;
  mismatched.params.arch.window_len = 32;
  auto bad_ckpt = tmp.path() / "bad.eegt";
  eegdl::save_checkpoint(mismatched, bad_ckpt);
  CHECK_THROWS_WITH_AS(eegdl::cmd::cmd_evaluate(bad_ckpt, pre / "dataset.eegt",
                                                tmp.path() / "eval_bad", log),
                       doctest::Contains("ShapeCorruption"), Error);

  // predict: 2 s at 128 Hz with stride 32 gives (256-64)/32+1 = 7 windows
  std::ostringstream plog;
  eegdl::cmd::PredictResult pr =
      eegdl::cmd::cmd_predict(run1 / "checkpoint.eegt", raw / "S001_R1.csv", plog);
  CHECK(pr.window_probs.size() == 7);
  CHECK(pr.votes_truth + pr.votes_lie == 7);
  for (const auto& p : pr.window_probs)
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(plog.str().find("majority vote") != std::string::npos);

  eegdl::cmd::PredictResult pr2 =
      eegdl::cmd::cmd_predict(run1 / "checkpoint.eegt", raw / "S001_R1.csv", plog);
  CHECK(pr2.window_probs == pr.window_probs);
  CHECK(pr2.majority == pr.majority);

  // a recording shorter than one window (but long enough to filter) cannot
  // be scored
  auto short_csv = tmp.path() / "short.csv";
  {
    std::ofstream f(short_csv);
    f << "F3,FC5,F7,T7,P7,O1,O2,P8,T8,F8,AF4,FC6,F4\n";
    for (int i = 0; i < 40; ++i) {
      for (int c = 0; c < 13; ++c) f << (c ? "," : "") << (0.1 * i + 0.01 * c);
      f << "\n";
    }
  }
  CHECK_THROWS_WITH_AS(eegdl::cmd::cmd_predict(run1 / "checkpoint.eegt", short_csv, plog),
                       doctest::Contains("NoWindows"), Error);
}
