#include "eegdl/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eegdl/error.hpp"
#include "eegdl/rng.hpp"

namespace eegdl::dataio {

const std::vector<std::string>& default_channels() {
  static const std::vector<std::string> names = {"F3", "FC5", "F7", "T7",  "P7",
                                                 "O1", "O2",  "P8", "T8",  "F8",
                                                 "AF4", "FC6", "F4"};
  return names;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& file) {
  if (s == "nan" || s == "NaN" || s == "NAN")
    return std::numeric_limits<double>::quiet_NaN();
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw data_error("ParseError", file + ": non-numeric cell '" + s + "' at data row " +
                                       std::to_string(row));
  return v;
}

}  // namespace

EegRecording load_recording(const std::filesystem::path& path,
                            const std::vector<std::string>& channel_names,
                            ClassLabel label, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw data_error("IoError", "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw data_error("EmptyFile", path.string() + ": no header row");
  std::vector<std::string> header = split_csv_line(line);

  std::vector<std::size_t> col_index;
  col_index.reserve(channel_names.size());
  for (const auto& ch : channel_names) {
    auto it = std::find(header.begin(), header.end(), ch);
    if (it == header.end())
      throw data_error("MissingChannel", path.string() + ": channel '" + ch + "' not in header");
    col_index.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<double> values;
  std::size_t n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw data_error("ParseError", path.string() + ": row " + std::to_string(n_rows + 1) +
                                         " has " + std::to_string(cells.size()) +
                                         " cells, header has " + std::to_string(header.size()));
    for (std::size_t c : col_index) values.push_back(parse_cell(cells[c], n_rows + 1, path.string()));
    ++n_rows;
  }
  if (n_rows == 0) throw data_error("EmptyFile", path.string() + ": no data rows");

  EegRecording rec;
  rec.label = label;
  rec.channel_names = channel_names;
  rec.sample_rate_hz = sample_rate_hz;
  rec.samples = Tensor<double>({n_rows, channel_names.size()}, std::move(values));
  return rec;
}

EegRecording clean_rows(const EegRecording& rec) {
  const auto& s = rec.samples;
  std::vector<double> kept;
  kept.reserve(s.size());
  std::size_t n_kept = 0;
  for (std::size_t r = 0; r < s.dim(0); ++r) {
    bool finite = true;
    for (std::size_t c = 0; c < s.dim(1); ++c)
      if (!std::isfinite(s(r, c))) {
        finite = false;
        break;
      }
    if (!finite) continue;
    for (std::size_t c = 0; c < s.dim(1); ++c) kept.push_back(s(r, c));
    ++n_kept;
  }
  if (n_kept == 0)
    throw data_error("AllRowsCorrupt", rec.subject_id + "/" + rec.run_id +
                                           ": every row has missing or non-finite values");
  EegRecording out = rec;
  out.samples = Tensor<double>({n_kept, s.dim(1)}, std::move(kept));
  return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("IoError", "cannot open manifest " + path.string());
  std::filesystem::path base = path.parent_path();

  DatasetManifest manifest;
  std::string line;
  if (!std::getline(in, line))
    throw data_error("EmptyFile", path.string() + ": empty manifest");
  std::vector<std::string> header = split_csv_line(line);
  const std::vector<std::string> expected = {"subject_id", "run_id", "path", "label"};
  if (header != expected)
    throw data_error("ParseError",
                     path.string() + ": manifest header must be subject_id,run_id,path,label");

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 4)
      throw data_error("ParseError", path.string() + ": manifest row " + std::to_string(row) +
                                         " needs 4 fields");
    ManifestEntry e;
    e.subject_id = cells[0];
    e.run_id = cells[1];
    e.data_path = std::filesystem::path(cells[2]).is_absolute()
                      ? std::filesystem::path(cells[2])
                      : base / cells[2];
    if (cells[3] == "0")
      e.label = ClassLabel::truth;
    else if (cells[3] == "1")
      e.label = ClassLabel::lie;
    else
      throw data_error("ParseError",
                       path.string() + ": label must be 0 or 1, got '" + cells[3] + "'");
    manifest.entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    for (std::size_t j = i + 1; j < manifest.entries.size(); ++j)
      if (manifest.entries[i].subject_id == manifest.entries[j].subject_id &&
          manifest.entries[i].run_id == manifest.entries[j].run_id)
        throw data_error("ParseError", path.string() + ": duplicate (subject_id, run_id) pair " +
                                           manifest.entries[i].subject_id + "/" +
                                           manifest.entries[i].run_id);
  return manifest;
}

std::vector<EegRecording> aggregate_sessions(const DatasetManifest& manifest,
                                             const std::vector<std::string>& channel_names,
                                             double sample_rate_hz) {
  if (manifest.entries.empty())
    throw data_error("EmptyManifest", "manifest has no entries");
  std::vector<ManifestEntry> entries = manifest.entries;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.subject_id, a.run_id) < std::tie(b.subject_id, b.run_id);
  });
  std::vector<EegRecording> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    try {
      EegRecording rec = clean_rows(
          load_recording(e.data_path, channel_names, e.label, sample_rate_hz));
      rec.subject_id = e.subject_id;
      rec.run_id = e.run_id;
      out.push_back(std::move(rec));
    } catch (const Error& err) {
      throw Error(err.kind(), err.code(),
                  "entry (" + e.subject_id + ", " + e.run_id + "): " + err.what());
    }
  }
  return out;
}

std::vector<EegRecording> synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_recordings < 2)
    throw config_error("InvalidSpec", "n_recordings must be >= 2 so both classes appear");
  if (spec.duration_s <= 0)
    throw config_error("InvalidSpec", "duration_s must be positive");
  if (spec.sample_rate_hz <= 0)
    throw config_error("InvalidSpec", "sample_rate_hz must be positive");
  double nyquist = spec.sample_rate_hz / 2.0;
  if (spec.truth_band_hz <= 0 || spec.truth_band_hz >= nyquist ||
      spec.lie_band_hz <= 0 || spec.lie_band_hz >= nyquist)
    throw config_error("InvalidSpec", "class bands must lie in (0, sample_rate/2)");

  const auto& channels = default_channels();
  std::size_t n = static_cast<std::size_t>(spec.duration_s * spec.sample_rate_hz);
  std::vector<EegRecording> recs;
  recs.reserve(static_cast<std::size_t>(spec.n_recordings));

  for (int i = 0; i < spec.n_recordings; ++i) {
    ClassLabel label = (i % 2 == 0) ? ClassLabel::truth : ClassLabel::lie;
    double freq = label == ClassLabel::truth ? spec.truth_band_hz : spec.lie_band_hz;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::normal_distribution<double> noise(0.0, spec.noise_std);

    Tensor<double> samples({n, channels.size()});
    for (std::size_t c = 0; c < channels.size(); ++c) {
      double ph = phase(rng);
      for (std::size_t t = 0; t < n; ++t) {
        double time = static_cast<double>(t) / spec.sample_rate_hz;
        samples(t, c) = std::sin(2.0 * M_PI * freq * time + ph) + noise(rng);
      }
    }
    EegRecording rec;
    char sid[16], rid[16];
    std::snprintf(sid, sizeof sid, "S%03d", i / 2 + 1);
    std::snprintf(rid, sizeof rid, "R%d", i % 2 + 1);
    rec.subject_id = sid;
    rec.run_id = rid;
    rec.label = label;
    rec.channel_names = channels;
    rec.sample_rate_hz = spec.sample_rate_hz;
    rec.samples = std::move(samples);
    recs.push_back(std::move(rec));
  }
  return recs;
}

DatasetManifest write_synth_dataset(const std::vector<EegRecording>& recs,
                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.source = ManifestSource::synthetic;

  std::ofstream mf(out_dir / "manifest.csv");
  if (!mf) throw data_error("IoError", "cannot write manifest in " + out_dir.string());
  mf << "subject_id,run_id,path,label\n";

  for (const auto& rec : recs) {
    std::string fname = rec.subject_id + "_" + rec.run_id + ".csv";
    std::ofstream f(out_dir / fname);
    if (!f) throw data_error("IoError", "cannot write " + fname);
    for (std::size_t c = 0; c < rec.channel_names.size(); ++c)
      f << (c ? "," : "") << rec.channel_names[c];
    f << "\n";
    char buf[32];
    for (std::size_t r = 0; r < rec.samples.dim(0); ++r) {
      for (std::size_t c = 0; c < rec.samples.dim(1); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", rec.samples(r, c));
        f << (c ? "," : "") << buf;
      }
      f << "\n";
    }
    mf << rec.subject_id << "," << rec.run_id << "," << fname << ","
       << label_index(rec.label) << "\n";
    manifest.entries.push_back(
        {rec.subject_id, rec.run_id, out_dir / fname, rec.label});
  }
  return manifest;
}

}  // namespace eegdl::dataio
