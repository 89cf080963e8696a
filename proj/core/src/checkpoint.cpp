#include "eegdl/checkpoint.hpp"

#include <sstream>

#include "eegdl/array_store.hpp"

namespace eegdl {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

Tensor<double> stats_tensor(const std::vector<double>& v) {
  return Tensor<double>({v.size()}, std::vector<double>(v));
}

void put_pipeline(ArrayStore& store, const InferencePipeline& p) {
  store.put_meta("pipeline.sample_rate_hz", std::to_string(p.sample_rate_hz));
  store.put_meta("pipeline.f_low_hz", std::to_string(p.filter.f_low_hz));
  store.put_meta("pipeline.f_high_hz", std::to_string(p.filter.f_high_hz));
  store.put_meta("pipeline.filter_order", std::to_string(p.filter.order));
  store.put_meta("pipeline.zero_phase", p.filter.zero_phase ? "1" : "0");
  store.put_meta("pipeline.standardize", p.standardize_enabled ? "1" : "0");
  store.put_meta("pipeline.stats_source",
                 p.stats_source == dsp::StatsSource::per_recording ? "per_recording"
                                                                   : "training_set");
  store.put_meta("pipeline.window_len", std::to_string(p.window_len));
  store.put_meta("pipeline.stride", std::to_string(p.stride));
  if (!p.global_stats.mean.empty()) {
    store.put("stats.mean", stats_tensor(p.global_stats.mean));
    store.put("stats.stddev", stats_tensor(p.global_stats.stddev));
  }
}

InferencePipeline get_pipeline(const ArrayStore& store) {
  InferencePipeline p;
  p.sample_rate_hz = std::stod(store.require_meta("pipeline.sample_rate_hz"));
  p.filter.f_low_hz = std::stod(store.require_meta("pipeline.f_low_hz"));
  p.filter.f_high_hz = std::stod(store.require_meta("pipeline.f_high_hz"));
  p.filter.order = std::stoi(store.require_meta("pipeline.filter_order"));
  p.filter.zero_phase = store.require_meta("pipeline.zero_phase") == "1";
  p.standardize_enabled = store.require_meta("pipeline.standardize") == "1";
  p.stats_source = store.require_meta("pipeline.stats_source") == "per_recording"
                       ? dsp::StatsSource::per_recording
                       : dsp::StatsSource::training_set;
  p.window_len = std::stoull(store.require_meta("pipeline.window_len"));
  p.stride = std::stoull(store.require_meta("pipeline.stride"));
  if (store.has("stats.mean")) {
    auto mean = store.get<double>("stats.mean");
    auto sd = store.get<double>("stats.stddev");
    p.global_stats.mean.assign(mean.data().begin(), mean.data().end());
    p.global_stats.stddev.assign(sd.data().begin(), sd.data().end());
  }
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const nn::ArchConfig& arch = ckpt.params.arch;
  ArrayStore store;
  store.put_meta("kind", "checkpoint");
  store.put_meta("arch.input_channels", std::to_string(arch.input_channels));
  store.put_meta("arch.window_len", std::to_string(arch.window_len));
  store.put_meta("arch.gru_hidden", join_sizes(arch.gru_hidden));
  store.put_meta("arch.dense_hidden", join_sizes(arch.dense_hidden));
  store.put_meta("arch.n_classes", std::to_string(arch.n_classes));
  store.put_meta("arch.head_input_width", std::to_string(arch.head_input_width));
  store.put_meta("arch.dropout_rate", std::to_string(arch.dropout_rate));
  put_pipeline(store, ckpt.pipeline);
  for (const auto& [name, t] : ckpt.params.tensors) store.put("param." + name, t);
  store.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  ArrayStore store = ArrayStore::load(path);
  if (store.get_meta("kind").value_or("") != "checkpoint")
    throw data_error("FormatVersionMismatch", path.string() + ": not a checkpoint file");

  nn::ArchConfig arch;
  arch.input_channels = std::stoull(store.require_meta("arch.input_channels"));
  arch.window_len = std::stoull(store.require_meta("arch.window_len"));
  arch.gru_hidden = parse_sizes(store.require_meta("arch.gru_hidden"));
  arch.dense_hidden = parse_sizes(store.require_meta("arch.dense_hidden"));
  arch.n_classes = std::stoull(store.require_meta("arch.n_classes"));
  arch.head_input_width = std::stoull(store.require_meta("arch.head_input_width"));
  arch.dropout_rate = std::stod(store.require_meta("arch.dropout_rate"));
  nn::validate_arch(arch);

  Checkpoint ckpt;
  ckpt.params.arch = arch;
  for (const nn::ParamSpec& spec : nn::param_layout(arch)) {
    if (!store.has("param." + spec.name))
      throw data_error("ShapeCorruption",
                       path.string() + ": missing parameter '" + spec.name + "'");
    Tensor<float> t = store.get<float>("param." + spec.name);
    if (t.shape() != spec.shape)
      throw data_error("ShapeCorruption", path.string() + ": parameter '" + spec.name +
                                              "' has shape " + t.shape_str() +
                                              ", architecture expects " +
                                              Tensor<float>(spec.shape).shape_str());
    ckpt.params.tensors.emplace_back(spec.name, std::move(t));
  }
  ckpt.pipeline = get_pipeline(store);
  return ckpt;
}

namespace {

void put_samples(ArrayStore& store, const std::string& prefix,
                 const std::vector<dsp::WindowSample>& ws) {
  std::size_t n = ws.size();
  std::size_t rows = n ? ws[0].data.dim(0) : 0;
  std::size_t cols = n ? ws[0].data.dim(1) : 0;
  Tensor<float> data({n, rows, cols});
  Tensor<float> labels({n});
  Tensor<float> augmented({n});
  std::ostringstream origins;
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(ws[i].data.data().begin(), ws[i].data.data().end(),
              data.data().begin() + static_cast<std::ptrdiff_t>(i * rows * cols));
    labels.at(i) = static_cast<float>(dataio::label_index(ws[i].label));
    augmented.at(i) = ws[i].augmented ? 1.0f : 0.0f;
    origins << ws[i].origin.subject_id << "," << ws[i].origin.run_id << ","
            << ws[i].origin.window_index << "\n";
  }
  store.put(prefix + ".data", data);
  store.put(prefix + ".labels", labels);
  store.put(prefix + ".augmented", augmented);
  store.put_meta(prefix + ".origins", origins.str());
}

std::vector<dsp::WindowSample> get_samples(const ArrayStore& store,
                                           const std::string& prefix) {
  Tensor<float> data = store.get<float>(prefix + ".data");
  Tensor<float> labels = store.get<float>(prefix + ".labels");
  Tensor<float> augmented = store.get<float>(prefix + ".augmented");
  std::size_t n = data.dim(0), rows = data.dim(1), cols = data.dim(2);
  if (labels.size() != n || augmented.size() != n)
    throw data_error("ShapeCorruption", "sample count disagreement in dataset file");
  std::istringstream origins(store.require_meta(prefix + ".origins"));
  std::vector<dsp::WindowSample> out(n);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    out[i].data = Tensor<float>({rows, cols});
    std::copy(data.data().begin() + static_cast<std::ptrdiff_t>(i * rows * cols),
              data.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * rows * cols),
              out[i].data.data().begin());
    out[i].label = labels.at(i) == 0.0f ? dataio::ClassLabel::truth : dataio::ClassLabel::lie;
    out[i].augmented = augmented.at(i) != 0.0f;
    if (std::getline(origins, line)) {
      auto c1 = line.find(',');
      auto c2 = line.rfind(',');
      if (c1 != std::string::npos && c2 != std::string::npos && c2 > c1) {
        out[i].origin.subject_id = line.substr(0, c1);
        out[i].origin.run_id = line.substr(c1 + 1, c2 - c1 - 1);
        out[i].origin.window_index = std::stoull(line.substr(c2 + 1));
      }
    }
  }
  return out;
}

}  // namespace

void save_split_dataset(const dsp::SplitDataset& split, const dsp::PipelineReport& report,
                        const dsp::ChannelStats& stats,
                        const std::filesystem::path& path) {
  ArrayStore store;
  store.put_meta("kind", "dataset");
  store.put_meta("split.seed", std::to_string(split.seed));
  store.put_meta("split.test_fraction", std::to_string(split.test_fraction));
  store.put_meta("report", report.to_keyvalue());
  if (!stats.mean.empty()) {
    store.put("stats.mean", stats_tensor(stats.mean));
    store.put("stats.stddev", stats_tensor(stats.stddev));
  }
  put_samples(store, "train", split.train);
  put_samples(store, "test", split.test);
  store.save(path);
}

PersistedDataset load_split_dataset(const std::filesystem::path& path) {
  ArrayStore store = ArrayStore::load(path);
  if (store.get_meta("kind").value_or("") != "dataset")
    throw data_error("FormatVersionMismatch", path.string() + ": not a dataset file");
  PersistedDataset ds;
  ds.split.seed = std::stoull(store.require_meta("split.seed"));
  ds.split.test_fraction = std::stod(store.require_meta("split.test_fraction"));
  ds.report_keyvalue = store.require_meta("report");
  if (store.has("stats.mean")) {
    auto mean = store.get<double>("stats.mean");
    auto sd = store.get<double>("stats.stddev");
    ds.stats.mean.assign(mean.data().begin(), mean.data().end());
    ds.stats.stddev.assign(sd.data().begin(), sd.data().end());
  }
  ds.split.train = get_samples(store, "train");
  ds.split.test = get_samples(store, "test");
  const auto& ref = !ds.split.train.empty() ? ds.split.train : ds.split.test;
  if (!ref.empty()) {
    ds.window_len = ref[0].data.dim(0);
    ds.n_channels = ref[0].data.dim(1);
  }
  return ds;
}

}  // namespace eegdl
