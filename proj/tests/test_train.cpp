#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "eegdl/train.hpp"
#include "support.hpp"

using namespace eegdl::train;
using eegdl::Error;
using eegdl::Tensor;
using eegdl::dataio::ClassLabel;
using eegdl::dsp::WindowSample;
using eegdl::nn::ArchConfig;
using eegdl::nn::ModelParams;

namespace {

ModelParams<double> scalar_params(std::initializer_list<double> values) {
  ModelParams<double> p;
  int i = 0;
  for (double v : values)
    p.tensors.emplace_back("p" + std::to_string(i++), Tensor<double>({1}, {v}));
  return p;
}

/// Class-separable toy windows: truth centers at +1, lie at -1, plus noise.
std::vector<WindowSample> toy_windows(std::size_t n_truth, std::size_t n_lie,
                                      std::size_t t_len, std::size_t channels,
                                      std::uint64_t seed, double noise = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  std::vector<WindowSample> out;
  for (std::size_t i = 0; i < n_truth + n_lie; ++i) {
    WindowSample w;
    w.label = i < n_truth ? ClassLabel::truth : ClassLabel::lie;
    double center = w.label == ClassLabel::truth ? 1.0 : -1.0;
    w.data = Tensor<float>({t_len, channels});
    for (auto& v : w.data.data()) v = static_cast<float>(center + g(rng));
    w.origin = {"S" + std::to_string(i), "R1", 0};
    out.push_back(std::move(w));
  }
  return out;
}

ArchConfig tiny_arch(std::size_t channels, std::size_t t_len) {
  ArchConfig arch;
  arch.input_channels = channels;
  arch.window_len = t_len;
  arch.gru_hidden = {4, 2};
  arch.dense_hidden = {4};
  arch.head_input_width = 4;
  arch.dropout_rate = 0.0;
  return arch;
}

}  // namespace

TEST_CASE("adam first step equals minus the learning rate") {
  ModelParams<double> p = scalar_params({0.0});
  AdamState<double> s = AdamState<double>::init(p);
  adam_step(p, {Tensor<double>({1}, {1.0})}, s);
  // m-hat = 1, v-hat = 1 at t=1, so the update is -lr / (1 + eps)
  CHECK(p.tensors[0].second.at(0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(s.t == 1);
}

TEST_CASE("adam zero gradient with zero moments is a no-op") {
  ModelParams<double> p = scalar_params({0.7});
  AdamState<double> s = AdamState<double>::init(p);
  adam_step(p, {Tensor<double>({1}, {0.0})}, s);
  CHECK(p.tensors[0].second.at(0) == 0.7);
}

TEST_CASE("adam treats identical gradients identically and only |g| sign matters at t=1") {
  ModelParams<double> p = scalar_params({0.0, 0.0, 0.0});
  AdamState<double> s = AdamState<double>::init(p);
  adam_step(p,
            {Tensor<double>({1}, {3.7}), Tensor<double>({1}, {3.7}),
             Tensor<double>({1}, {0.2})},
            s);
  double a = p.tensors[0].second.at(0);
  double b = p.tensors[1].second.at(0);
  double c = p.tensors[2].second.at(0);
  CHECK(a == b);
  // bias-corrected m-hat / sqrt(v-hat) is sign(g) for any constant g
  CHECK(a == doctest::Approx(c).epsilon(1e-6));
  CHECK(a < 0);
}

TEST_CASE("adam rejects mismatched gradient lists") {
  ModelParams<double> p = scalar_params({0.0});
  AdamState<double> s = AdamState<double>::init(p);
  CHECK_THROWS_AS(adam_step(p, {}, s), Error);
  CHECK_THROWS_AS(adam_step(p, {Tensor<double>({2}, {0.0, 0.0})}, s), Error);
}

TEST_CASE("make_batch packs windows and labels") {
  auto ws = toy_windows(2, 2, 3, 2, 1);
  auto [batch, labels] = make_batch<float>(ws, {0, 3});
  CHECK(batch.shape() == std::vector<std::size_t>{2, 3, 2});
  CHECK(labels == std::vector<int>{0, 1});
  CHECK(batch.data()[0] == ws[0].data.at(0));
  CHECK(batch.data()[6] == ws[3].data.at(0));
}

TEST_CASE("argmax resolves exact ties to the lower index") {
  Tensor<float> probs({1, 2}, {0.5f, 0.5f});
  CHECK(argmax_row(probs, 0) == 0);
  Tensor<float> lie({1, 2}, {0.4f, 0.6f});
  CHECK(argmax_row(lie, 0) == 1);
}

TEST_CASE("train_epoch batch arithmetic: 130 samples at batch 64") {
  auto ws = toy_windows(65, 65, 4, 2, 2);
  ArchConfig arch = tiny_arch(2, 4);
  ModelParams<float> params = eegdl::nn::build_model<float>(arch, 1);
  AdamState<float> state = AdamState<float>::init(params);
  TrainConfig config;
  EpochMetrics m = train_epoch(params, ws, state, config, 1, 2);
  CHECK(m.n_batches == 3);  // 64 + 64 + 2
}

TEST_CASE("9280 samples at batch 64 run 145 batches per epoch") {
  auto ws = toy_windows(4640, 4640, 2, 1, 3);
  ArchConfig arch = tiny_arch(1, 2);
  arch.gru_hidden = {2};
  arch.dense_hidden = {2};
  arch.head_input_width = 4;
  ModelParams<float> params = eegdl::nn::build_model<float>(arch, 1);
  AdamState<float> state = AdamState<float>::init(params);
  TrainConfig config;
  EpochMetrics m = train_epoch(params, ws, state, config, 1, 2);
  CHECK(m.n_batches == 145);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  auto ws = toy_windows(20, 20, 4, 2, 4);
  ArchConfig arch = tiny_arch(2, 4);
  ModelParams<float> params = eegdl::nn::build_model<float>(arch, 5);
  ModelParams<float> before = params;
  TrainConfig config;
  config.adam.lr = 0.0;
  AdamState<float> state = AdamState<float>::init(params, config.adam);
  EpochMetrics m = train_epoch(params, ws, state, config, 1, 2);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    CHECK(params.tensors[i].second.data() == before.tensors[i].second.data());
  SplitMetrics eval = evaluate_split(before, ws, config.batch_size);
  CHECK(m.loss == doctest::Approx(eval.loss).epsilon(1e-6));
  CHECK(m.accuracy == doctest::Approx(eval.accuracy));
}

TEST_CASE("early stopping scripted sequences") {
  auto history_of = [](std::initializer_list<double> losses) {
    TrainHistory h;
    int epoch = 0;
    for (double l : losses) h.epochs.push_back({++epoch, 0, 0, l, 0, 1});
    return h;
  };
  CHECK(early_stopping_check(history_of({1.0}), 2) == StopDecision::continue_training);
  CHECK(early_stopping_check(history_of({1.0, 0.9, 0.8, 0.7}), 2) ==
        StopDecision::continue_training);
  CHECK(early_stopping_check(history_of({1.0, 0.9, 0.95}), 2) ==
        StopDecision::continue_training);
  CHECK(early_stopping_check(history_of({1.0, 0.9, 0.95, 0.96}), 2) == StopDecision::stop);
  CHECK(early_stopping_check(history_of({1.0, 0.9, 0.95, 0.96}), 10) ==
        StopDecision::continue_training);
  CHECK_THROWS_AS(early_stopping_check(TrainHistory{}, 2), Error);
}

TEST_CASE("fit restores the best validation weights") {
  auto train_set = toy_windows(30, 30, 4, 2, 6);
  auto val_set = toy_windows(10, 10, 4, 2, 7);
  ArchConfig arch = tiny_arch(2, 4);
  ModelParams<float> params = eegdl::nn::build_model<float>(arch, 8);
  TrainConfig config;
  config.max_epochs = 8;
  config.patience = 3;
  config.batch_size = 16;
  TrainSeeds seeds{8, 9, 10, 11};
  TrainHistory history = fit(params, train_set, val_set, config, seeds);
  REQUIRE(!history.epochs.empty());
  double best = history.epochs.front().val_loss;
  for (const auto& e : history.epochs) best = std::min(best, e.val_loss);
  CHECK(history.epochs[history.best_epoch - 1].val_loss == doctest::Approx(best));
  SplitMetrics restored = evaluate_split(params, val_set, config.batch_size);
  CHECK(restored.loss == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("fold assignment: sizes, disjoint cover, determinism") {
  auto even = toy_windows(50, 50, 1, 1, 12);
  std::vector<int> folds = assign_folds(even, 5, 77);
  std::vector<std::size_t> sizes(5, 0);
  for (int f : folds) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    sizes[static_cast<std::size_t>(f)]++;
  }
  for (std::size_t s : sizes) CHECK(s == 20);

  auto odd = toy_windows(51, 50, 1, 1, 12);
  folds = assign_folds(odd, 5, 77);
  sizes.assign(5, 0);
  for (int f : folds) sizes[static_cast<std::size_t>(f)]++;
  std::multiset<std::size_t> got(sizes.begin(), sizes.end());
  CHECK(got == std::multiset<std::size_t>{20, 20, 20, 20, 21});

  CHECK(assign_folds(even, 5, 77) == assign_folds(even, 5, 77));
  CHECK(assign_folds(even, 5, 77) != assign_folds(even, 5, 78));

  auto scarce = toy_windows(3, 50, 1, 1, 12);
  CHECK_THROWS_WITH_AS(assign_folds(scarce, 5, 1), doctest::Contains("TooFewSamples"),
                       Error);
}

TEST_CASE("fold assignment is stratified") {
  auto ws = toy_windows(40, 20, 1, 1, 13);
  std::vector<int> folds = assign_folds(ws, 4, 5);
  for (int f = 0; f < 4; ++f) {
    std::size_t truths = 0, lies = 0;
    for (std::size_t i = 0; i < ws.size(); ++i)
      if (folds[i] == f) (ws[i].label == ClassLabel::truth ? truths : lies)++;
    CHECK(truths == 10);
    CHECK(lies == 5);
  }
}

TEST_CASE("cross validation trains one model per fold and learns the toy task") {
  auto ws = toy_windows(40, 40, 4, 2, 14);
  ArchConfig arch = tiny_arch(2, 4);
  TrainConfig config;
  config.max_epochs = 6;
  config.k_folds = 4;
  config.patience = 6;
  config.batch_size = 16;
  TrainSeeds seeds{21, 22, 23, 24};
  auto folds = kfold_cv<float>(ws, arch, config, seeds);
  REQUIRE(folds.size() == 4);
  for (const auto& f : folds) {
    CHECK(!f.history.epochs.empty());
    CHECK(f.best_val_loss ==
          f.history.epochs[static_cast<std::size_t>(f.history.best_epoch) - 1].val_loss);
  }
  ModelParams<float> final_params = select_final_model(
      ws, folds, arch, config, seeds, FinalModelPolicy::retrain_full);
  SplitMetrics m = evaluate_split(final_params, ws, config.batch_size);
  CHECK(m.accuracy > 0.9);  // the toy task is trivially separable

  // best_fold policy returns the fold with the lowest best validation loss
  TrainHistory hist;
  ModelParams<float> best = select_final_model(ws, folds, arch, config, seeds,
                                               FinalModelPolicy::best_fold, &hist);
  std::size_t want = 0;
  for (std::size_t i = 1; i < folds.size(); ++i)
    if (folds[i].best_val_loss < folds[want].best_val_loss) want = i;
  for (std::size_t i = 0; i < best.tensors.size(); ++i)
    CHECK(best.tensors[i].second.data() == folds[want].params.tensors[i].second.data());
  CHECK(hist.best_epoch == folds[want].history.best_epoch);
}

TEST_CASE("training history CSV layout") {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.75, 0.6, 0.7, 3});
  std::string csv = h.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "epoch,train_loss,train_acc,val_loss,val_acc");
  CHECK(csv.find("1,0.5,0.75,0.6,0.7") != std::string::npos);
  CHECK(TrainHistory{}.to_csv() == "epoch,train_loss,train_acc,val_loss,val_acc\n");
}
