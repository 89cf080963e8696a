#include "eegdl/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eegdl/error.hpp"
#include "eegdl/rng.hpp"

namespace eegdl {

void SeedBlock::resolve() {
  auto fill = [&](std::uint64_t& s, const char* name) {
    if (s == 0) s = derive_seed(global, name);
  };
  fill(synth, "synth");
  fill(balance, "balance");
  fill(augment, "augment");
  fill(split, "split");
  fill(init, "init");
  fill(shuffle, "shuffle");
  fill(dropout, "dropout");
  fill(folds, "folds");
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(std::stoull(tok));
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw config_error("BadValue", key + ": expected a boolean, got '" + v + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  bool head_width_set = false;

  using Setter = std::function<void(const std::string&)>;
  std::map<std::string, Setter> setters;
  auto u64 = [](std::uint64_t& ref) {
    return [&ref](const std::string& v) { ref = std::stoull(v); };
  };
  auto sz = [](std::size_t& ref) {
    return [&ref](const std::string& v) { ref = std::stoull(v); };
  };
  auto num = [](double& ref) {
    return [&ref](const std::string& v) { ref = std::stod(v); };
  };
  auto integer = [](int& ref) {
    return [&ref](const std::string& v) { ref = std::stoi(v); };
  };

  setters["dataio.sample_rate_hz"] = [&](const std::string& v) {
    cfg.synth.sample_rate_hz = cfg.pipeline.sample_rate_hz = std::stod(v);
  };
  setters["synth.n_recordings"] = integer(cfg.synth.n_recordings);
  setters["synth.duration_s"] = num(cfg.synth.duration_s);
  setters["synth.truth_band_hz"] = num(cfg.synth.truth_band_hz);
  setters["synth.lie_band_hz"] = num(cfg.synth.lie_band_hz);
  setters["synth.noise_std"] = num(cfg.synth.noise_std);

  setters["dsp.f_low_hz"] = num(cfg.pipeline.filter.f_low_hz);
  setters["dsp.f_high_hz"] = num(cfg.pipeline.filter.f_high_hz);
  setters["dsp.filter_order"] = integer(cfg.pipeline.filter.order);
  setters["dsp.zero_phase"] = [&](const std::string& v) {
    cfg.pipeline.filter.zero_phase = parse_bool(v, "dsp.zero_phase");
  };
  setters["dsp.standardize"] = [&](const std::string& v) {
    cfg.pipeline.standardize_enabled = parse_bool(v, "dsp.standardize");
  };
  setters["dsp.stats_source"] = [&](const std::string& v) {
    if (v == "per_recording")
      cfg.pipeline.stats_source = dsp::StatsSource::per_recording;
    else if (v == "training_set")
      cfg.pipeline.stats_source = dsp::StatsSource::training_set;
    else
      throw config_error("BadValue", "dsp.stats_source: '" + v + "'");
  };
  setters["dsp.window_len"] = [&](const std::string& v) {
    cfg.pipeline.window_len = std::stoull(v);
    cfg.arch.window_len = cfg.pipeline.window_len;
  };
  setters["dsp.stride"] = sz(cfg.pipeline.stride);
  setters["dsp.noise_factor"] = num(cfg.pipeline.noise_factor);
  setters["dsp.test_fraction"] = num(cfg.pipeline.test_fraction);
  setters["dsp.stratified"] = [&](const std::string& v) {
    cfg.pipeline.stratified = parse_bool(v, "dsp.stratified");
  };
  setters["dsp.mode"] = [&](const std::string& v) {
    cfg.pipeline.mode = dsp::parse_pipeline_mode(v);
  };

  setters["nn.gru_hidden"] = [&](const std::string& v) {
    cfg.arch.gru_hidden = parse_size_list(v);
  };
  setters["nn.dense_hidden"] = [&](const std::string& v) {
    cfg.arch.dense_hidden = parse_size_list(v);
  };
  setters["nn.dropout_rate"] = num(cfg.arch.dropout_rate);
  setters["nn.n_classes"] = sz(cfg.arch.n_classes);
  setters["nn.head_input_width"] = [&](const std::string& v) {
    cfg.arch.head_input_width = std::stoull(v);
    head_width_set = true;
  };
  setters["nn.input_channels"] = sz(cfg.arch.input_channels);

  setters["train.max_epochs"] = integer(cfg.training.max_epochs);
  setters["train.batch_size"] = sz(cfg.training.batch_size);
  setters["train.k_folds"] = integer(cfg.training.k_folds);
  setters["train.patience"] = integer(cfg.training.patience);
  setters["train.min_delta"] = num(cfg.training.min_delta);
  setters["train.lr"] = num(cfg.training.adam.lr);
  setters["train.beta1"] = num(cfg.training.adam.beta1);
  setters["train.beta2"] = num(cfg.training.adam.beta2);
  setters["train.eps"] = num(cfg.training.adam.eps);
  setters["train.final_model"] = [&](const std::string& v) {
    if (v == "retrain_full")
      cfg.final_model = train::FinalModelPolicy::retrain_full;
    else if (v == "best_fold")
      cfg.final_model = train::FinalModelPolicy::best_fold;
    else
      throw config_error("BadValue", "train.final_model: '" + v + "'");
  };

  setters["seeds.global"] = u64(cfg.seeds.global);
  setters["seeds.synth"] = u64(cfg.seeds.synth);
  setters["seeds.balance"] = u64(cfg.seeds.balance);
  setters["seeds.augment"] = u64(cfg.seeds.augment);
  setters["seeds.split"] = u64(cfg.seeds.split);
  setters["seeds.init"] = u64(cfg.seeds.init);
  setters["seeds.shuffle"] = u64(cfg.seeds.shuffle);
  setters["seeds.dropout"] = u64(cfg.seeds.dropout);
  setters["seeds.folds"] = u64(cfg.seeds.folds);

  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("ParseError", origin + ":" + std::to_string(line_no) +
                                             ": malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("ParseError",
                         origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(val);
    std::string full = section.empty() ? key : section + "." + key;
    auto it = setters.find(full);
    if (it == setters.end())
      throw config_error("UnknownKey", origin + ":" + std::to_string(line_no) +
                                           ": unknown configuration key '" + full + "'");
    try {
      it->second(val);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error("BadValue", origin + ":" + std::to_string(line_no) + ": bad value '" +
                                         val + "' for " + full);
    }
  }

  if (!head_width_set && !cfg.arch.gru_hidden.empty())
    cfg.arch.head_input_width = 2 * cfg.arch.gru_hidden.back();
  cfg.seeds.resolve();
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("IoError", "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto sizes = [](const std::vector<std::size_t>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  os << "[dataio]\n";
  os << "sample_rate_hz = " << num(cfg.pipeline.sample_rate_hz) << "\n";
  os << "\n[synth]\n";
  os << "n_recordings = " << cfg.synth.n_recordings << "\n";
  os << "duration_s = " << num(cfg.synth.duration_s) << "\n";
  os << "truth_band_hz = " << num(cfg.synth.truth_band_hz) << "\n";
  os << "lie_band_hz = " << num(cfg.synth.lie_band_hz) << "\n";
  os << "noise_std = " << num(cfg.synth.noise_std) << "\n";
  os << "\n[dsp]\n";
  os << "f_low_hz = " << num(cfg.pipeline.filter.f_low_hz) << "\n";
  os << "f_high_hz = " << num(cfg.pipeline.filter.f_high_hz) << "\n";
  os << "filter_order = " << cfg.pipeline.filter.order << "\n";
  os << "zero_phase = " << (cfg.pipeline.filter.zero_phase ? 1 : 0) << "\n";
  os << "standardize = " << (cfg.pipeline.standardize_enabled ? 1 : 0) << "\n";
  os << "stats_source = "
     << (cfg.pipeline.stats_source == dsp::StatsSource::per_recording ? "per_recording"
                                                                      : "training_set")
     << "\n";
  os << "window_len = " << cfg.pipeline.window_len << "\n";
  os << "stride = " << cfg.pipeline.stride << "\n";
  os << "noise_factor = " << num(cfg.pipeline.noise_factor) << "\n";
  os << "test_fraction = " << num(cfg.pipeline.test_fraction) << "\n";
  os << "stratified = " << (cfg.pipeline.stratified ? 1 : 0) << "\n";
  os << "mode = " << dsp::pipeline_mode_name(cfg.pipeline.mode) << "\n";
  os << "\n[nn]\n";
  os << "input_channels = " << cfg.arch.input_channels << "\n";
  os << "gru_hidden = " << sizes(cfg.arch.gru_hidden) << "\n";
  os << "dense_hidden = " << sizes(cfg.arch.dense_hidden) << "\n";
  os << "n_classes = " << cfg.arch.n_classes << "\n";
  os << "head_input_width = " << cfg.arch.head_input_width << "\n";
  os << "dropout_rate = " << num(cfg.arch.dropout_rate) << "\n";
  os << "\n[train]\n";
  os << "max_epochs = " << cfg.training.max_epochs << "\n";
  os << "batch_size = " << cfg.training.batch_size << "\n";
  os << "k_folds = " << cfg.training.k_folds << "\n";
  os << "patience = " << cfg.training.patience << "\n";
  os << "min_delta = " << num(cfg.training.min_delta) << "\n";
  os << "lr = " << num(cfg.training.adam.lr) << "\n";
  os << "beta1 = " << num(cfg.training.adam.beta1) << "\n";
  os << "beta2 = " << num(cfg.training.adam.beta2) << "\n";
  os << "eps = " << num(cfg.training.adam.eps) << "\n";
  os << "final_model = "
     << (cfg.final_model == train::FinalModelPolicy::retrain_full ? "retrain_full"
                                                                  : "best_fold")
     << "\n";
  os << "\n[seeds]\n";
  os << "global = " << cfg.seeds.global << "\n";
  os << "synth = " << cfg.seeds.synth << "\n";
  os << "balance = " << cfg.seeds.balance << "\n";
  os << "augment = " << cfg.seeds.augment << "\n";
  os << "split = " << cfg.seeds.split << "\n";
  os << "init = " << cfg.seeds.init << "\n";
  os << "shuffle = " << cfg.seeds.shuffle << "\n";
  os << "dropout = " << cfg.seeds.dropout << "\n";
  os << "folds = " << cfg.seeds.folds << "\n";
  return os.str();
}

}  // namespace eegdl
