#pragma once

// Labeled univariate time-series datasets: UCR-style text I/O, synthetic
// three-class waveform generation, z-normalization and stratified
// subsampling. Datasets are immutable after construction and safe to read
// from concurrent workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsadv/rng.hpp"
#include "tsadv/text.hpp"

namespace tsadv {

enum class Split { train, test };

struct LabeledSeries {
  std::vector<double> values;  // length T, all finite
  int label = 0;               // in [0, K)
};

struct Dataset {
  std::string name;
  std::vector<LabeledSeries> samples;
  int num_classes = 0;    // K
  int series_length = 0;  // T
  Split split = Split::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

enum class Delimiter { comma, tab, auto_detect };

inline char delimiter_char(Delimiter d) { return d == Delimiter::tab ? '\t' : ','; }

inline void validate_dataset(const Dataset& ds) {
  if (ds.num_classes < 2) throw std::runtime_error("dataset '" + ds.name + "': needs at least 2 classes");
  if (ds.series_length < 1) throw std::runtime_error("dataset '" + ds.name + "': series length must be positive");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (static_cast<int>(s.values.size()) != ds.series_length)
      throw std::runtime_error("dataset '" + ds.name + "': sample " + std::to_string(i) + " has wrong length");
    if (s.label < 0 || s.label >= ds.num_classes)
      throw std::runtime_error("dataset '" + ds.name + "': sample " + std::to_string(i) + " has label out of range");
    for (double v : s.values)
      if (!std::isfinite(v))
        throw std::runtime_error("dataset '" + ds.name + "': sample " + std::to_string(i) + " contains non-finite value");
  }
}

// ---------------------------------------------------------------------------
// z-normalization (population standard deviation, 1/N)
// ---------------------------------------------------------------------------

inline std::vector<double> znormalize(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("znormalize: empty series");
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / n);
  std::vector<double> out(v.size());
  if (sd < 1e-8) return out;  // constant series -> all zeros
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

inline Dataset znormalize_dataset(Dataset ds) {
  for (auto& s : ds.samples) s.values = znormalize(s.values);
  return ds;
}

// ---------------------------------------------------------------------------
// UCR text format: one sample per line, `label<delim>v1<delim>...<delim>vT`
// ---------------------------------------------------------------------------

// Raw labels are remapped to contiguous [0, K-1] in ascending order of the
// distinct raw values.
inline Dataset load_ucr_file(const std::filesystem::path& path,
                             Delimiter delimiter = Delimiter::auto_detect,
                             Split dataset_split = Split::train) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());

  struct RawRow {
    double label;
    std::vector<double> values;
  };
  std::vector<RawRow> rows;
  char delim = 0;
  int series_length = -1;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (delim == 0) {
      if (delimiter == Delimiter::auto_detect)
        delim = line.find('\t') != std::string::npos ? '\t' : ',';
      else
        delim = delimiter_char(delimiter);
    }

    const auto tokens = split(line, delim);
    if (tokens.size() < 2)
      throw std::runtime_error(path.string() + ": format error at line " + std::to_string(line_no) +
                               ": expected label and at least one value");

    RawRow row;
    if (!parse_double(tokens[0], row.label))
      throw std::runtime_error(path.string() + ": parse error at line " + std::to_string(line_no) +
                               ": bad label token '" + std::string(tokens[0]) + "'");
    row.values.reserve(tokens.size() - 1);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      double v = 0.0;
      if (!parse_double(tokens[i], v))
        throw std::runtime_error(path.string() + ": parse error at line " + std::to_string(line_no) +
                                 ": bad value token '" + std::string(tokens[i]) + "'");
      row.values.push_back(v);
    }

    if (series_length < 0) {
      series_length = static_cast<int>(row.values.size());
    } else if (static_cast<int>(row.values.size()) != series_length) {
      throw std::runtime_error(path.string() + ": format error at line " + std::to_string(line_no) + ": row has " +
                               std::to_string(row.values.size()) + " values, expected " +
                               std::to_string(series_length));
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw std::runtime_error(path.string() + ": dataset error: file contains no samples");

  std::map<double, int> label_map;
  for (const auto& r : rows) label_map.emplace(r.label, 0);
  if (label_map.size() < 2)
    throw std::runtime_error(path.string() + ": dataset error: fewer than 2 distinct labels");
  int next = 0;
  for (auto& [raw, idx] : label_map) idx = next++;

  Dataset ds;
  ds.name = path.stem().string();
  ds.num_classes = static_cast<int>(label_map.size());
  ds.series_length = series_length;
  ds.split = dataset_split;
  ds.samples.reserve(rows.size());
  for (auto& r : rows) ds.samples.push_back({std::move(r.values), label_map.at(r.label)});
  validate_dataset(ds);
  return ds;
}

inline void save_ucr_file(const Dataset& ds, const std::filesystem::path& path,
                          Delimiter delimiter = Delimiter::comma) {
  if (delimiter == Delimiter::auto_detect) delimiter = Delimiter::comma;
  const char delim = delimiter_char(delimiter);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  for (const auto& s : ds.samples) {
    out << s.label;
    for (double v : s.values) out << delim << format_g17(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic 3-class waveform task (sine / square / sawtooth)
// ---------------------------------------------------------------------------

enum class WaveShape { sine, square, sawtooth };

struct SynthSpec {
  int series_length = 64;
  int samples_per_class = 100;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  // Class shapes are fixed: class c gets class_shapes[c].
  static constexpr WaveShape class_shapes[3] = {WaveShape::sine, WaveShape::square, WaveShape::sawtooth};
  static constexpr int num_classes = 3;
  static constexpr double cycles = 3.0;  // periods across the series
};

inline double synth_waveform(WaveShape shape, double theta) {
  constexpr double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  switch (shape) {
    case WaveShape::sine:
      return std::sin(theta);
    case WaveShape::square:
      return std::sin(theta) >= 0.0 ? 1.0 : -1.0;
    case WaveShape::sawtooth: {
      const double cycles = theta / two_pi;
      return 2.0 * (cycles - std::floor(cycles)) - 1.0;
    }
  }
  return 0.0;
}

namespace detail {

// Per sample: one uniform draw for the phase, then T normal draws for noise
// (drawn even when noise_sigma == 0 so the stream layout is constant).
inline Dataset synth_split(const SynthSpec& spec, std::uint64_t stream_seed, Split split) {
  constexpr double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  Rng rng(stream_seed);
  Dataset ds;
  ds.name = "synthetic";
  ds.num_classes = SynthSpec::num_classes;
  ds.series_length = spec.series_length;
  ds.split = split;
  const int T = spec.series_length;
  for (int c = 0; c < SynthSpec::num_classes; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      const double phase = rng.uniform(0.0, two_pi);
      std::vector<double> v(T);
      for (int t = 0; t < T; ++t) {
        const double theta = two_pi * SynthSpec::cycles * static_cast<double>(t) / T + phase;
        v[t] = synth_waveform(SynthSpec::class_shapes[c], theta) + spec.noise_sigma * rng.normal();
      }
      ds.samples.push_back({znormalize(v), c});
    }
  }
  return ds;
}

}  // namespace detail

inline void validate_spec(const SynthSpec& spec) {
  if (spec.series_length < 8) throw std::invalid_argument("SynthSpec: series_length must be >= 8");
  if (spec.samples_per_class < 1) throw std::invalid_argument("SynthSpec: samples_per_class must be positive");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("SynthSpec: noise_sigma must be >= 0");
}

// Train and test are drawn from disjoint RNG streams derived from the seed.
inline std::pair<Dataset, Dataset> generate_synthetic(const SynthSpec& spec) {
  validate_spec(spec);
  Dataset train = detail::synth_split(spec, derive_seed(spec.seed, 0x7261696eull /* "rain" */), Split::train);
  Dataset test = detail::synth_split(spec, derive_seed(spec.seed, 0x74657374ull /* "test" */), Split::test);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Stratified subsampling
// ---------------------------------------------------------------------------

// Picks ceil(fraction * M) samples without replacement, stratified per class
// (largest-remainder allocation). fraction == 1 returns the dataset as-is.
inline Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("subsample: fraction must be in (0, 1]");
  if (ds.empty()) throw std::invalid_argument("subsample: empty dataset");
  if (fraction == 1.0) return ds;

  const std::size_t m = ds.size();
  const std::size_t total = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9)));

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < m; ++i) by_class[ds.samples[i].label].push_back(i);

  // Largest-remainder allocation of `total` across classes.
  std::vector<std::size_t> want(ds.num_classes, 0);
  std::vector<double> frac(ds.num_classes, 0.0);
  std::size_t allocated = 0;
  for (int c = 0; c < ds.num_classes; ++c) {
    const double q = fraction * static_cast<double>(by_class[c].size());
    want[c] = static_cast<std::size_t>(std::floor(q + 1e-9));
    want[c] = std::min(want[c], by_class[c].size());
    frac[c] = q - static_cast<double>(want[c]);
    allocated += want[c];
  }
  while (allocated < total) {
    int best = -1;
    for (int c = 0; c < ds.num_classes; ++c) {
      if (want[c] >= by_class[c].size()) continue;
      if (best < 0 || frac[c] > frac[best]) best = c;
    }
    if (best < 0) break;  // every class exhausted
    ++want[best];
    frac[best] -= 1.0;
    ++allocated;
  }

  Rng rng(derive_seed(seed, 0x73756273ull /* "subs" */));
  std::vector<std::size_t> chosen;
  chosen.reserve(allocated);
  for (int c = 0; c < ds.num_classes; ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  if (chosen.empty()) throw std::runtime_error("subsample: selection is empty");

  Dataset out;
  out.name = ds.name;
  out.num_classes = ds.num_classes;
  out.series_length = ds.series_length;
  out.split = ds.split;
  out.samples.reserve(chosen.size());
  for (std::size_t i : chosen) out.samples.push_back(ds.samples[i]);
  return out;
}

}  // namespace tsadv
