#pragma once

#include <array>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eegdl/dataio.hpp"
#include "eegdl/dsp.hpp"
#include "eegdl/nn.hpp"
#include "eegdl/tape.hpp"
#include "eegdl/train.hpp"

namespace eegdl::eval {

using dataio::ClassLabel;

/// counts[actual][predicted] over (truth, lie).
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{{{0, 0}, {0, 0}}};

  std::size_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  std::string to_csv() const;
};

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
  bool degenerate = false;  // a zero-denominator rate was reported as 0
};

struct EvalReport {
  std::array<ClassMetrics, 2> per_class;  // [truth, lie]
  double accuracy = 0;
  ClassMetrics macro_avg;
  ClassMetrics weighted_avg;
  std::optional<double> test_loss;
};

ConfusionMatrix confusion(const std::vector<ClassLabel>& predictions,
                          const std::vector<ClassLabel>& actuals);

/// Per-class precision/recall/F1/support, accuracy, macro and weighted
/// averages. Zero denominators yield 0 with the degenerate flag set.
EvalReport metrics(const ConfusionMatrix& cm);

std::string report_text(const EvalReport& report);
std::string report_keyvalue(const EvalReport& report);
EvalReport parse_report_keyvalue(const std::string& text);

void export_report(const EvalReport& report, const ConfusionMatrix& cm,
                   const train::TrainHistory& history,
                   const std::filesystem::path& out_dir);

/// Run the model over a split and assemble the report; argmax decides the
/// class, exact ties go to truth (index 0).
template <typename T>
EvalReport evaluate_model(const nn::ModelParams<T>& params,
                          const std::vector<dsp::WindowSample>& samples,
                          std::size_t batch_size, ConfusionMatrix* cm_out = nullptr) {
  if (samples.empty()) throw data_error("EmptyInput", "cannot evaluate an empty split");
  std::vector<ClassLabel> preds, actuals;
  preds.reserve(samples.size());
  actuals.reserve(samples.size());
  double loss_sum = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, samples.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [batch, labels] = train::make_batch<T>(samples, idx);
    Tape<T> tape;
    nn::BoundModel<T> bound = nn::bind_params(tape, params);
    Var logits = nn::model_logits(tape, bound, batch, /*training=*/false, 0);
    Tensor<T> probs = Tape<T>::softmax_value(tape.value(logits));
    Var loss = tape.softmax_cross_entropy(logits, nn::one_hot<T>(labels));
    loss_sum += static_cast<double>(tape.value(loss).at(0)) * static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      preds.push_back(static_cast<ClassLabel>(train::argmax_row(probs, i)));
      actuals.push_back(static_cast<ClassLabel>(labels[i]));
    }
  }
  ConfusionMatrix cm = confusion(preds, actuals);
  if (cm_out) *cm_out = cm;
  EvalReport report = metrics(cm);
  report.test_loss = loss_sum / samples.size();
  return report;
}

}  // namespace eegdl::eval
