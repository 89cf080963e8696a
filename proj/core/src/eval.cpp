#include "eegdl/eval.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "eegdl/error.hpp"

namespace eegdl::eval {

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "actual\\predicted,truth,lie\n";
  os << "truth," << counts[0][0] << "," << counts[0][1] << "\n";
  os << "lie," << counts[1][0] << "," << counts[1][1] << "\n";
  return os.str();
}

ConfusionMatrix confusion(const std::vector<ClassLabel>& predictions,
                          const std::vector<ClassLabel>& actuals) {
  if (predictions.size() != actuals.size() || predictions.empty())
    throw data_error("LengthMismatch", "predictions and actuals must have equal nonzero length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    cm.counts[dataio::label_index(actuals[i])][dataio::label_index(predictions[i])]++;
  return cm;
}

namespace {

double safe_ratio(double num, double den, bool* degenerate) {
  if (den == 0) {
    *degenerate = true;
    return 0.0;
  }
  return num / den;
}

}  // namespace

EvalReport metrics(const ConfusionMatrix& cm) {
  std::size_t total = cm.total();
  if (total == 0) throw data_error("EmptyInput", "empty confusion matrix");
  EvalReport r;
  for (int k = 0; k < 2; ++k) {
    double tp = static_cast<double>(cm.counts[k][k]);
    double fp = static_cast<double>(cm.counts[1 - k][k]);
    double fn = static_cast<double>(cm.counts[k][1 - k]);
    ClassMetrics& m = r.per_class[k];
    m.support = cm.counts[k][0] + cm.counts[k][1];
    m.precision = safe_ratio(tp, tp + fp, &m.degenerate);
    m.recall = safe_ratio(tp, tp + fn, &m.degenerate);
    m.f1 = safe_ratio(2 * m.precision * m.recall, m.precision + m.recall, &m.degenerate);
  }
  r.accuracy = static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / total;

  r.macro_avg.support = total;
  r.macro_avg.precision = (r.per_class[0].precision + r.per_class[1].precision) / 2;
  r.macro_avg.recall = (r.per_class[0].recall + r.per_class[1].recall) / 2;
  r.macro_avg.f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2;

  r.weighted_avg.support = total;
  double w0 = static_cast<double>(r.per_class[0].support) / total;
  double w1 = static_cast<double>(r.per_class[1].support) / total;
  r.weighted_avg.precision = w0 * r.per_class[0].precision + w1 * r.per_class[1].precision;
  r.weighted_avg.recall = w0 * r.per_class[0].recall + w1 * r.per_class[1].recall;
  r.weighted_avg.f1 = w0 * r.per_class[0].f1 + w1 * r.per_class[1].f1;
  return r;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream os;
  char buf[160];
  os << "              precision    recall  f1-score   support\n\n";
  const char* names[2] = {"Truth", "Lie"};
  for (int k = 0; k < 2; ++k) {
    const ClassMetrics& m = report.per_class[k];
    std::snprintf(buf, sizeof buf, "%12s %10.2f %9.2f %9.2f %9zu\n", names[k], m.precision,
                  m.recall, m.f1, m.support);
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "%12s %10s %9s %9.2f %9zu\n", "Accuracy", "", "",
                report.accuracy, report.macro_avg.support);
  os << buf;
  std::snprintf(buf, sizeof buf, "%12s %10.2f %9.2f %9.2f %9zu\n", "Macro avg",
                report.macro_avg.precision, report.macro_avg.recall, report.macro_avg.f1,
                report.macro_avg.support);
  os << buf;
  std::snprintf(buf, sizeof buf, "%12s %10.2f %9.2f %9.2f %9zu\n", "Weighted avg",
                report.weighted_avg.precision, report.weighted_avg.recall,
                report.weighted_avg.f1, report.weighted_avg.support);
  os << buf;
  if (report.test_loss) {
    std::snprintf(buf, sizeof buf, "\nTest loss: %.4f\n", *report.test_loss);
    os << buf;
  }
  return os.str();
}

namespace {

void emit_class(std::ostringstream& os, const std::string& prefix, const ClassMetrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", m.precision);
  os << prefix << ".precision = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", m.recall);
  os << prefix << ".recall = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", m.f1);
  os << prefix << ".f1 = " << buf << "\n";
  os << prefix << ".support = " << m.support << "\n";
  os << prefix << ".degenerate = " << (m.degenerate ? 1 : 0) << "\n";
}

}  // namespace

std::string report_keyvalue(const EvalReport& report) {
  std::ostringstream os;
  emit_class(os, "truth", report.per_class[0]);
  emit_class(os, "lie", report.per_class[1]);
  emit_class(os, "macro_avg", report.macro_avg);
  emit_class(os, "weighted_avg", report.weighted_avg);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", report.accuracy);
  os << "accuracy = " << buf << "\n";
  if (report.test_loss) {
    std::snprintf(buf, sizeof buf, "%.17g", *report.test_loss);
    os << "test_loss = " << buf << "\n";
  }
  return os.str();
}

EvalReport parse_report_keyvalue(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
    };
    trim(key);
    trim(val);
    kv[key] = val;
  }
  auto get_class = [&](const std::string& prefix) {
    ClassMetrics m;
    m.precision = std::stod(kv.at(prefix + ".precision"));
    m.recall = std::stod(kv.at(prefix + ".recall"));
    m.f1 = std::stod(kv.at(prefix + ".f1"));
    m.support = std::stoull(kv.at(prefix + ".support"));
    m.degenerate = kv.at(prefix + ".degenerate") == "1";
    return m;
  };
  EvalReport r;
  r.per_class[0] = get_class("truth");
  r.per_class[1] = get_class("lie");
  r.macro_avg = get_class("macro_avg");
  r.weighted_avg = get_class("weighted_avg");
  r.accuracy = std::stod(kv.at("accuracy"));
  if (kv.count("test_loss")) r.test_loss = std::stod(kv.at("test_loss"));
  return r;
}

void export_report(const EvalReport& report, const ConfusionMatrix& cm,
                   const train::TrainHistory& history,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream f(out_dir / name);
    if (!f) throw data_error("IoError", "cannot write " + (out_dir / name).string());
    f << content;
  };
  write("report.txt", report_text(report));
  write("metrics.kv", report_keyvalue(report));
  write("confusion.csv", cm.to_csv());
  write("history.csv", history.to_csv());
}

}  // namespace eegdl::eval
