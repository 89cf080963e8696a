#include "eegdl/dsp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <sstream>

#include "eegdl/error.hpp"
#include "eegdl/rng.hpp"

namespace eegdl::dsp {

namespace {

using cd = std::complex<double>;

void validate_filter_spec(const FilterSpec& spec, double fs) {
  if (fs <= 0) throw config_error("InvalidFilterSpec", "sample rate must be positive");
  if (spec.order < 2 || spec.order % 2 != 0)
    throw config_error("InvalidFilterSpec", "filter order must be even and >= 2");
  if (!(0 < spec.f_low_hz && spec.f_low_hz < spec.f_high_hz && spec.f_high_hz < fs / 2))
    throw config_error("InvalidFilterSpec",
                       "need 0 < f_low < f_high < sample_rate/2, got [" +
                           std::to_string(spec.f_low_hz) + ", " +
                           std::to_string(spec.f_high_hz) + "] at fs " + std::to_string(fs));
}

// Polynomial coefficients (descending powers) from complex roots; roots come
// in conjugate pairs or are real, so imaginary parts cancel.
std::vector<double> poly_from_roots(const std::vector<cd>& roots) {
  std::vector<cd> coeff{1.0};
  for (const cd& r : roots) {
    std::vector<cd> next(coeff.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      next[i] += coeff[i];
      next[i + 1] -= coeff[i] * r;
    }
    coeff = std::move(next);
  }
  std::vector<double> out(coeff.size());
  for (std::size_t i = 0; i < coeff.size(); ++i) out[i] = coeff[i].real();
  return out;
}

}  // namespace

IirCoeffs design_butterworth_bandpass(const FilterSpec& spec, double fs) {
  validate_filter_spec(spec, fs);
  int n = spec.order / 2;  // analog low-pass prototype order

  // Prototype poles on the unit circle, left half-plane.
  std::vector<cd> poles;
  for (int k = 0; k < n; ++k) {
    double theta = M_PI * (2.0 * k + n + 1.0) / (2.0 * n);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }

  // Pre-warped band edges for the bilinear transform.
  double w1 = 2.0 * fs * std::tan(M_PI * spec.f_low_hz / fs);
  double w2 = 2.0 * fs * std::tan(M_PI * spec.f_high_hz / fs);
  double bw = w2 - w1;
  double w0 = std::sqrt(w1 * w2);

  // Low-pass -> band-pass: each pole splits into two; n zeros at s = 0.
  std::vector<cd> bp_poles;
  for (const cd& p : poles) {
    cd ph = p * (bw / 2.0);
    cd disc = std::sqrt(ph * ph - w0 * w0);
    bp_poles.push_back(ph + disc);
    bp_poles.push_back(ph - disc);
  }
  double gain = std::pow(bw, n);

  // Bilinear transform z = (2fs + s) / (2fs - s).
  double fs2 = 2.0 * fs;
  std::vector<cd> z_poles, z_zeros;
  cd num(1.0, 0.0), den(1.0, 0.0);
  for (const cd& p : bp_poles) {
    z_poles.push_back((fs2 + p) / (fs2 - p));
    den *= (fs2 - p);
  }
  for (int k = 0; k < n; ++k) {
    z_zeros.emplace_back(1.0, 0.0);  // analog zeros at s = 0 map to z = 1
    num *= fs2;
  }
  for (int k = 0; k < n; ++k) z_zeros.emplace_back(-1.0, 0.0);  // degree fill
  gain *= (num / den).real();

  IirCoeffs c;
  c.b = poly_from_roots(z_zeros);
  for (double& v : c.b) v *= gain;
  c.a = poly_from_roots(z_poles);
  return c;
}

std::vector<double> iir_filter(const IirCoeffs& c, const std::vector<double>& x,
                               const std::vector<double>* zi, double zi_scale) {
  std::size_t nt = std::max(c.a.size(), c.b.size());
  std::vector<double> b = c.b, a = c.a;
  b.resize(nt, 0.0);
  a.resize(nt, 0.0);
  std::vector<double> z(nt - 1, 0.0);
  if (zi)
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (*zi)[i] * zi_scale;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double xi = x[i];
    double yi = b[0] * xi + z[0];
    for (std::size_t j = 0; j + 1 < nt - 1; ++j)
      z[j] = b[j + 1] * xi + z[j + 1] - a[j + 1] * yi;
    z[nt - 2] = b[nt - 1] * xi - a[nt - 1] * yi;
    y[i] = yi;
  }
  return y;
}

namespace {

// Step-response steady state of the filter (scipy lfilter_zi equivalent).
std::vector<double> lfilter_zi(const IirCoeffs& c) {
  std::size_t nt = std::max(c.a.size(), c.b.size());
  std::vector<double> b = c.b, a = c.a;
  b.resize(nt, 0.0);
  a.resize(nt, 0.0);
  std::size_t m = nt - 1;
  Eigen::MatrixXd IminusA = Eigen::MatrixXd::Identity(m, m);
  // companion(a) transposed: first column -a[1:], superdiagonal of ones.
  for (std::size_t i = 0; i < m; ++i) IminusA(i, 0) += a[i + 1];
  for (std::size_t i = 0; i + 1 < m; ++i) IminusA(i, i + 1) -= 1.0;
  Eigen::VectorXd B(m);
  for (std::size_t i = 0; i < m; ++i) B(i) = b[i + 1] - a[i + 1] * b[0];
  Eigen::VectorXd zi = IminusA.colPivHouseholderQr().solve(B);
  return std::vector<double>(zi.data(), zi.data() + m);
}

}  // namespace

std::vector<double> filtfilt(const IirCoeffs& c, const std::vector<double>& x) {
  std::size_t nt = std::max(c.a.size(), c.b.size());
  std::size_t padlen = 3 * (nt - 1);
  if (x.size() <= padlen)
    throw data_error("NumericalInstability",
                     "signal too short for zero-phase filtering (need > " +
                         std::to_string(padlen) + " samples)");

  // Odd reflection about the end points.
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 2; i <= padlen + 1; ++i)
    ext.push_back(2.0 * x.back() - x[x.size() - i]);

  std::vector<double> zi = lfilter_zi(c);
  std::vector<double> y = iir_filter(c, ext, &zi, ext.front());
  std::reverse(y.begin(), y.end());
  y = iir_filter(c, y, &zi, y.front());
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + padlen, y.end() - padlen);
}

EegRecording bandpass_filter(const EegRecording& rec, const FilterSpec& spec) {
  IirCoeffs c = design_butterworth_bandpass(spec, rec.sample_rate_hz);
  EegRecording out = rec;
  std::size_t n = rec.samples.dim(0);
  std::vector<double> ch(n);
  for (std::size_t col = 0; col < rec.samples.dim(1); ++col) {
    for (std::size_t r = 0; r < n; ++r) ch[r] = rec.samples(r, col);
    std::vector<double> y = spec.zero_phase ? filtfilt(c, ch) : iir_filter(c, ch);
    for (std::size_t r = 0; r < n; ++r) {
      if (!std::isfinite(y[r]))
        throw data_error("NumericalInstability",
                         "non-finite filter output on channel " + rec.channel_names[col]);
      out.samples(r, col) = y[r];
    }
  }
  return out;
}

ChannelStats compute_channel_stats(const std::vector<EegRecording>& recs) {
  if (recs.empty()) throw data_error("EmptyInput", "no recordings for statistics");
  std::size_t nch = recs.front().n_channels();
  std::vector<double> sum(nch, 0.0), sumsq(nch, 0.0);
  std::size_t n = 0;
  for (const auto& rec : recs) {
    for (std::size_t r = 0; r < rec.samples.dim(0); ++r)
      for (std::size_t c = 0; c < nch; ++c) {
        sum[c] += rec.samples(r, c);
        sumsq[c] += rec.samples(r, c) * rec.samples(r, c);
      }
    n += rec.samples.dim(0);
  }
  ChannelStats stats;
  stats.mean.resize(nch);
  stats.stddev.resize(nch);
  for (std::size_t c = 0; c < nch; ++c) {
    stats.mean[c] = sum[c] / n;
    double var = sumsq[c] / n - stats.mean[c] * stats.mean[c];
    stats.stddev[c] = std::sqrt(std::max(var, 0.0));
    if (stats.stddev[c] == 0.0)
      throw data_error("ZeroVariance", "flat channel at index " + std::to_string(c));
  }
  return stats;
}

EegRecording apply_standardize(const EegRecording& rec, const ChannelStats& stats) {
  EegRecording out = rec;
  for (std::size_t r = 0; r < rec.samples.dim(0); ++r)
    for (std::size_t c = 0; c < rec.samples.dim(1); ++c)
      out.samples(r, c) = (rec.samples(r, c) - stats.mean[c]) / stats.stddev[c];
  return out;
}

std::pair<std::vector<EegRecording>, ChannelStats> standardize(
    const std::vector<EegRecording>& recs, StatsSource source) {
  std::vector<EegRecording> out;
  out.reserve(recs.size());
  if (source == StatsSource::per_recording) {
    for (const auto& rec : recs)
      out.push_back(apply_standardize(rec, compute_channel_stats({rec})));
    return {std::move(out), ChannelStats{}};
  }
  ChannelStats stats = compute_channel_stats(recs);
  for (const auto& rec : recs) out.push_back(apply_standardize(rec, stats));
  return {std::move(out), std::move(stats)};
}

std::vector<WindowSample> window_segments(const EegRecording& rec,
                                          std::size_t window_len, std::size_t stride) {
  if (window_len < 1 || stride < 1 || stride > window_len)
    throw config_error("BadParams", "need 1 <= stride <= window_len");
  std::vector<WindowSample> out;
  std::size_t n = rec.samples.dim(0);
  if (n < window_len) return out;  // caller logs the skip
  std::size_t count = (n - window_len) / stride + 1;
  std::size_t nch = rec.samples.dim(1);
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    WindowSample w;
    w.data = Tensor<float>({window_len, nch});
    std::size_t start = j * stride;
    for (std::size_t r = 0; r < window_len; ++r)
      for (std::size_t c = 0; c < nch; ++c)
        w.data(r, c) = static_cast<float>(rec.samples(start + r, c));
    w.label = rec.label;
    w.origin = {rec.subject_id, rec.run_id, j};
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WindowSample> balance_undersample(const std::vector<WindowSample>& samples,
                                              std::uint64_t seed) {
  std::vector<std::size_t> truth_idx, lie_idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (samples[i].label == ClassLabel::truth ? truth_idx : lie_idx).push_back(i);
  if (truth_idx.empty() || lie_idx.empty())
    throw data_error("MissingClass", "both classes must be present to balance");

  auto& majority = truth_idx.size() >= lie_idx.size() ? truth_idx : lie_idx;
  std::size_t target = std::min(truth_idx.size(), lie_idx.size());
  std::vector<std::size_t> shuffled = majority;
  Rng rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<bool> drop(samples.size(), false);
  for (std::size_t i = target; i < shuffled.size(); ++i) drop[shuffled[i]] = true;

  std::vector<WindowSample> out;
  out.reserve(2 * target);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!drop[i]) out.push_back(samples[i]);
  return out;
}

std::vector<WindowSample> augment_gaussian(const std::vector<WindowSample>& samples,
                                           double noise_factor, std::uint64_t seed) {
  if (noise_factor < 0)
    throw config_error("BadParams", "noise_factor must be non-negative");
  std::vector<WindowSample> out = samples;
  out.reserve(2 * samples.size());
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& s : samples) {
    std::size_t rows = s.data.dim(0), cols = s.data.dim(1);
    std::vector<double> sigma(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double mean = 0, sq = 0;
      for (std::size_t r = 0; r < rows; ++r) mean += s.data(r, c);
      mean /= rows;
      for (std::size_t r = 0; r < rows; ++r) {
        double d = s.data(r, c) - mean;
        sq += d * d;
      }
      sigma[c] = std::sqrt(sq / rows);
    }
    WindowSample copy = s;
    copy.augmented = true;
    if (noise_factor > 0)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          copy.data(r, c) =
              s.data(r, c) + static_cast<float>(noise_factor * sigma[c] * gauss(rng));
    out.push_back(std::move(copy));
  }
  return out;
}

namespace {

std::vector<std::size_t> pick_test_indices(const std::vector<std::size_t>& idx,
                                           double fraction, Rng& rng) {
  std::vector<std::size_t> shuffled = idx;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::size_t n_test = static_cast<std::size_t>(std::llround(idx.size() * fraction));
  n_test = std::max<std::size_t>(1, std::min(n_test, idx.size() - 1));
  return std::vector<std::size_t>(shuffled.begin(), shuffled.begin() + n_test);
}

}  // namespace

SplitDataset split_train_test(const std::vector<WindowSample>& samples,
                              double test_fraction, std::uint64_t seed, bool stratified) {
  if (!(test_fraction > 0 && test_fraction < 1))
    throw config_error("BadParams", "test_fraction must be in (0,1)");
  Rng rng(seed);
  std::vector<bool> is_test(samples.size(), false);
  if (stratified) {
    std::vector<std::size_t> truth_idx, lie_idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
      (samples[i].label == ClassLabel::truth ? truth_idx : lie_idx).push_back(i);
    for (auto* idx : {&truth_idx, &lie_idx}) {
      if (idx->empty()) continue;
      if (idx->size() < 2)
        throw data_error("TooFewSamples", "a class stratum would be empty on one side");
      for (std::size_t i : pick_test_indices(*idx, test_fraction, rng)) is_test[i] = true;
    }
    if (truth_idx.empty() && lie_idx.empty())
      throw data_error("TooFewSamples", "no samples to split");
  } else {
    if (samples.size() < 2) throw data_error("TooFewSamples", "need at least 2 samples");
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i : pick_test_indices(all, test_fraction, rng)) is_test[i] = true;
  }
  SplitDataset split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (is_test[i] ? split.test : split.train).push_back(samples[i]);
  return split;
}

const char* pipeline_mode_name(PipelineMode m) {
  return m == PipelineMode::leak_safe ? "leak_safe" : "paper_faithful";
}

PipelineMode parse_pipeline_mode(const std::string& s) {
  if (s == "leak_safe") return PipelineMode::leak_safe;
  if (s == "paper_faithful") return PipelineMode::paper_faithful;
  throw config_error("BadParams", "unknown pipeline mode '" + s + "'");
}

namespace {

StageCounts count_windows(const std::vector<WindowSample>& ws) {
  StageCounts c;
  for (const auto& w : ws) (w.label == ClassLabel::truth ? c.truth : c.lie)++;
  return c;
}

StageCounts count_recordings(const std::vector<EegRecording>& recs) {
  StageCounts c;
  for (const auto& r : recs) (r.label == ClassLabel::truth ? c.truth : c.lie)++;
  return c;
}

}  // namespace

std::string PipelineReport::to_text() const {
  std::ostringstream os;
  os << "pipeline report\n";
  for (const auto& [name, c] : stages)
    os << "  " << name << ": truth=" << c.truth << " lie=" << c.lie
       << " total=" << c.total() << "\n";
  if (short_recordings_skipped)
    os << "  warning: " << short_recordings_skipped
       << " recording(s) shorter than one window were skipped\n";
  return os.str();
}

std::string PipelineReport::to_keyvalue() const {
  std::ostringstream os;
  for (const auto& [name, c] : stages)
    os << name << ".truth = " << c.truth << "\n"
       << name << ".lie = " << c.lie << "\n";
  os << "short_recordings_skipped = " << short_recordings_skipped << "\n";
  return os.str();
}

SplitDataset run_pipeline(const std::vector<EegRecording>& recs,
                          const PipelineConfig& config, PipelineReport* report,
                          ChannelStats* stats_out) {
  if (recs.empty()) throw data_error("EmptyInput", "no recordings given to the pipeline");
  PipelineReport local;
  PipelineReport& rep = report ? *report : local;
  rep.add("loaded", count_recordings(recs));

  std::vector<EegRecording> filtered;
  filtered.reserve(recs.size());
  for (const auto& rec : recs) filtered.push_back(bandpass_filter(rec, config.filter));
  rep.add("filtered", count_recordings(filtered));

  ChannelStats stats;
  if (config.standardize_enabled) {
    auto [standardized, st] = standardize(filtered, config.stats_source);
    filtered = std::move(standardized);
    stats = std::move(st);
  }
  if (stats_out) *stats_out = stats;

  auto window_all = [&](const std::vector<EegRecording>& rs) {
    std::vector<WindowSample> ws;
    for (const auto& r : rs) {
      auto w = window_segments(r, config.window_len, config.stride);
      if (w.empty()) rep.short_recordings_skipped++;
      ws.insert(ws.end(), std::make_move_iterator(w.begin()),
                std::make_move_iterator(w.end()));
    }
    return ws;
  };

  SplitDataset split;
  split.seed = config.split_seed;
  split.test_fraction = config.test_fraction;

  if (config.mode == PipelineMode::paper_faithful) {
    std::vector<WindowSample> ws = window_all(filtered);
    rep.add("windowed", count_windows(ws));
    ws = balance_undersample(ws, config.balance_seed);
    rep.add("balanced", count_windows(ws));
    ws = augment_gaussian(ws, config.noise_factor, config.augment_seed);
    rep.add("augmented", count_windows(ws));
    split = split_train_test(ws, config.test_fraction, config.split_seed, config.stratified);
  } else {
    // leak_safe: assign whole recordings to train/test before any window of
    // them exists on both sides; test stays unbalanced and unaugmented.
    std::vector<std::size_t> truth_idx, lie_idx;
    for (std::size_t i = 0; i < filtered.size(); ++i)
      (filtered[i].label == ClassLabel::truth ? truth_idx : lie_idx).push_back(i);
    if (truth_idx.size() < 2 || lie_idx.size() < 2)
      throw data_error("TooFewSamples", "leak_safe split needs >= 2 recordings per class");
    Rng rng(config.split_seed);
    std::vector<bool> is_test(filtered.size(), false);
    for (auto* idx : {&truth_idx, &lie_idx})
      for (std::size_t i : pick_test_indices(*idx, config.test_fraction, rng))
        is_test[i] = true;

    std::vector<EegRecording> train_recs, test_recs;
    for (std::size_t i = 0; i < filtered.size(); ++i)
      (is_test[i] ? test_recs : train_recs).push_back(std::move(filtered[i]));

    std::vector<WindowSample> train_ws = window_all(train_recs);
    std::vector<WindowSample> test_ws = window_all(test_recs);
    StageCounts windowed = count_windows(train_ws);
    StageCounts test_counts = count_windows(test_ws);
    windowed.truth += test_counts.truth;
    windowed.lie += test_counts.lie;
    rep.add("windowed", windowed);
    train_ws = balance_undersample(train_ws, config.balance_seed);
    rep.add("balanced", count_windows(train_ws));
    train_ws = augment_gaussian(train_ws, config.noise_factor, config.augment_seed);
    rep.add("augmented", count_windows(train_ws));
    split.train = std::move(train_ws);
    split.test = std::move(test_ws);
  }
  rep.add("split_train", count_windows(split.train));
  rep.add("split_test", count_windows(split.test));
  return split;
}

}  // namespace eegdl::dsp
