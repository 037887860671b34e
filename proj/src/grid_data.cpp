// Copyright 2026 The fishcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fishcast/grid_data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "fishcast/errors.hpp"

namespace fishcast {

static_assert(std::endian::native == std::endian::little, "BTG1 I/O assumes a little-endian host");

LandMask::LandMask(GridShape shape, std::vector<std::uint8_t> land)
    : shape_(shape), land_(std::move(land)) {
  if (land_.size() != shape_.cells()) throw ShapeError("land mask size does not match grid");
  sea_count_ = static_cast<std::size_t>(std::count(land_.begin(), land_.end(), std::uint8_t{0}));
}

TemperatureGridSeries::TemperatureGridSeries(std::size_t days, GridShape shape,
                                             std::vector<double> values, Date start_date,
                                             GeoBounds bounds)
    : days_(days), shape_(shape), values_(std::move(values)), start_date_(start_date),
      bounds_(bounds) {
  if (days_ == 0 || shape_.rows == 0 || shape_.cols == 0) {
    throw FormatError("grid series needs T, H, W >= 1");
  }
  const std::size_t cells = shape_.cells();
  if (values_.size() != days_ * cells) throw ShapeError("grid series value count mismatch");

  std::vector<std::uint8_t> land(cells);
  for (std::size_t c = 0; c < cells; ++c) land[c] = is_non_value(values_[c]) ? 1 : 0;
  for (std::size_t t = 1; t < days_; ++t) {
    const double* frame = values_.data() + t * cells;
    for (std::size_t c = 0; c < cells; ++c) {
      if ((land[c] != 0) != is_non_value(frame[c])) {
        throw InconsistentMaskError("cell " + std::to_string(c) + " changes land status at day " +
                                    std::to_string(t));
      }
    }
  }
  for (double v : values_) {
    if (std::isinf(v)) throw FormatError("infinite temperature value");
  }
  mask_ = LandMask(shape_, std::move(land));
}

std::size_t TemperatureGridSeries::index_of(Date d) const {
  const auto offset = (d - start_date_).count();
  if (offset < 0 || static_cast<std::size_t>(offset) >= days_) {
    throw std::out_of_range("date " + format_iso_date(d) + " outside series span");
  }
  return static_cast<std::size_t>(offset);
}

bool TemperatureGridSeries::operator==(const TemperatureGridSeries& other) const {
  if (days_ != other.days_ || !(shape_ == other.shape_) || start_date_ != other.start_date_ ||
      !(bounds_ == other.bounds_) || !(mask_ == other.mask_)) {
    return false;
  }
  // Bitwise so that NaN land cells compare equal.
  return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// BTG1

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'T', 'G', '1'};

template <typename V>
void put(std::ostream& out, V value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V get(std::istream& in, const char* what) {
  V value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(V))) {
    throw FormatError(std::string("truncated BTG1 header at ") + what);
  }
  return value;
}

}  // namespace

TemperatureGridSeries read_grid_series(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw FormatError("bad BTG1 magic in " + path.string());
  const auto days = get<std::uint32_t>(in, "T");
  const auto rows = get<std::uint32_t>(in, "H");
  const auto cols = get<std::uint32_t>(in, "W");
  const auto start = get<std::uint32_t>(in, "start_date");
  GeoBounds bounds;
  bounds.lat_min = get<double>(in, "lat_min");
  bounds.lat_max = get<double>(in, "lat_max");
  bounds.lon_min = get<double>(in, "lon_min");
  bounds.lon_max = get<double>(in, "lon_max");
  if (days == 0 || rows == 0 || cols == 0) throw FormatError("BTG1 dimensions must be >= 1");

  const std::size_t count = std::size_t{days} * rows * cols;
  std::vector<float> raw(count);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw FormatError("truncated BTG1 payload in " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in " + path.string());

  std::vector<double> values(raw.begin(), raw.end());
  return TemperatureGridSeries(days, GridShape{rows, cols}, std::move(values),
                               date_from_epoch_day(start), bounds);
}

void write_grid_series(const TemperatureGridSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), 4);
  put(out, static_cast<std::uint32_t>(series.days()));
  put(out, static_cast<std::uint32_t>(series.shape().rows));
  put(out, static_cast<std::uint32_t>(series.shape().cols));
  put(out, static_cast<std::uint32_t>(epoch_day(series.start_date())));
  put(out, series.bounds().lat_min);
  put(out, series.bounds().lat_max);
  put(out, series.bounds().lon_min);
  put(out, series.bounds().lon_max);

  std::vector<float> raw(series.values().size());
  std::transform(series.values().begin(), series.values().end(), raw.begin(), [](double v) {
    return is_non_value(v) ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(v);
  });
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Splits and statistics

SplitIndex chronological_split(const TemperatureGridSeries& series, Date val_start, Date test_start) {
  const auto to_index = [&](Date d) -> std::size_t {
    const auto offset = (d - series.start_date()).count();
    if (offset < 0 || static_cast<std::size_t>(offset) > series.days()) {
      throw std::invalid_argument("split boundary " + format_iso_date(d) + " outside series span");
    }
    return static_cast<std::size_t>(offset);
  };
  const std::size_t b1 = to_index(val_start);
  const std::size_t b2 = to_index(test_start);
  if (b2 < b1) throw std::invalid_argument("test boundary precedes validation boundary");
  if (b1 == 0) throw InsufficientDataError("empty training range");
  return SplitIndex{{0, b1}, {b1, b2}, {b2, series.days()}};
}

SplitIndex chronological_split(const TemperatureGridSeries& series, double val_fraction_start,
                               double test_fraction_start) {
  if (!(val_fraction_start >= 0.0 && val_fraction_start <= 1.0) ||
      !(test_fraction_start >= 0.0 && test_fraction_start <= 1.0)) {
    throw std::invalid_argument("split fractions must lie in [0, 1]");
  }
  if (test_fraction_start < val_fraction_start) {
    throw std::invalid_argument("test boundary precedes validation boundary");
  }
  const auto n = static_cast<double>(series.days());
  const auto b1 = static_cast<std::size_t>(std::floor(val_fraction_start * n));
  const auto b2 = static_cast<std::size_t>(std::floor(test_fraction_start * n));
  if (b1 == 0) throw InsufficientDataError("empty training range");
  return SplitIndex{{0, b1}, {b1, b2}, {b2, series.days()}};
}

NormStats compute_norm_stats(const TemperatureGridSeries& series, const SplitIndex& split) {
  if (split.train.empty() || split.train.end > series.days()) {
    throw std::invalid_argument("training range empty or outside the series");
  }
  const LandMask& mask = series.land_mask();
  if (mask.sea_count() == 0) throw DegenerateDataError("no sea cells");

  // Two passes: mean first, then centred sum of squares.
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = split.train.begin; t < split.train.end; ++t) {
    const auto frame = series.frame(t);
    for (std::size_t c = 0; c < frame.size(); ++c) {
      if (!mask.is_land(c)) {
        sum += frame[c];
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t t = split.train.begin; t < split.train.end; ++t) {
    const auto frame = series.frame(t);
    for (std::size_t c = 0; c < frame.size(); ++c) {
      if (!mask.is_land(c)) ss += (frame[c] - mean) * (frame[c] - mean);
    }
  }
  const double std = std::sqrt(ss / static_cast<double>(n));
  if (!(std > 1e-9)) throw DegenerateDataError("temperature field is constant over the training range");
  return NormStats{mean, std, kLandFill};
}

NormalizedStack normalize(const TemperatureGridSeries& series, const NormStats& stats) {
  if (!(stats.std > 0.0)) throw std::invalid_argument("normalization std must be positive");
  NormalizedStack out{series.days(), series.shape(), series.start_date(), {}};
  out.values.resize(series.values().size());
  const LandMask& mask = series.land_mask();
  const std::size_t cells = series.shape().cells();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = mask.is_land(i % cells) ? stats.land_fill
                                            : (series.values()[i] - stats.mean) / stats.std;
  }
  return out;
}

std::vector<double> denormalize(std::span<const double> frames, const NormStats& stats,
                                const LandMask& mask) {
  const std::size_t cells = mask.shape().cells();
  if (cells == 0 || frames.size() % cells != 0) throw ShapeError("frames do not match mask shape");
  std::vector<double> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out[i] = mask.is_land(i % cells) ? kNonValue : frames[i] * stats.std + stats.mean;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequences

std::vector<std::size_t> window_starts(IndexRange range, std::size_t h, std::size_t p) {
  if (h == 0 || p == 0) throw std::invalid_argument("h and p must be >= 1");
  const std::size_t l = h + p;
  std::vector<std::size_t> starts;
  if (range.size() <= l) return starts;
  const std::size_t count = range.size() - l;
  starts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) starts.push_back(range.begin + i);
  return starts;
}

GridSequence make_sequence(const NormalizedStack& frames, std::size_t start, std::size_t h,
                           std::size_t p) {
  if (start + h + p > frames.days) throw InsufficientDataError("window exceeds frame stack");
  const std::size_t cells = frames.shape.cells();
  GridSequence seq{h, p, frames.shape, frames.start_date + std::chrono::days{start}, {}, {}};
  const auto first = frames.values.begin() + static_cast<std::ptrdiff_t>(start * cells);
  seq.history.assign(first, first + static_cast<std::ptrdiff_t>(h * cells));
  seq.target.assign(first + static_cast<std::ptrdiff_t>(h * cells),
                    first + static_cast<std::ptrdiff_t>((h + p) * cells));
  return seq;
}

std::vector<GridSequence> build_sequences(const NormalizedStack& frames, std::size_t h,
                                          std::size_t p, IndexRange range) {
  if (range.end > frames.days) throw std::invalid_argument("range exceeds frame stack");
  std::vector<GridSequence> out;
  for (std::size_t start : window_starts(range, h, p)) out.push_back(make_sequence(frames, start, h, p));
  return out;
}

std::vector<GridSequence> build_sequences(const NormalizedStack& frames, std::size_t h,
                                          std::size_t p) {
  if (frames.days <= h + p) {
    throw InsufficientDataError("need more than h + p = " + std::to_string(h + p) + " frames, got " +
                                std::to_string(frames.days));
  }
  return build_sequences(frames, h, p, IndexRange{0, frames.days});
}

// ---------------------------------------------------------------------------
// Synthetic series

namespace {

struct Field {
  std::size_t rows, cols;
  std::vector<double> v;

  double& at(std::ptrdiff_t r, std::ptrdiff_t c) {
    const auto R = static_cast<std::ptrdiff_t>(rows), C = static_cast<std::ptrdiff_t>(cols);
    return v[static_cast<std::size_t>(((r % R) + R) % R * C + ((c % C) + C) % C)];
  }
};

// Periodic 3x3 box blur.
void box_blur(Field& f) {
  Field out{f.rows, f.cols, std::vector<double>(f.v.size())};
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      double s = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          s += f.at(static_cast<std::ptrdiff_t>(r) + dr, static_cast<std::ptrdiff_t>(c) + dc);
      out.v[r * f.cols + c] = s / 9.0;
    }
  }
  f = std::move(out);
}

// Semi-Lagrangian shift by (dr, dc) with bilinear sampling, periodic edges.
Field advect(Field& f, double dr, double dc) {
  Field out{f.rows, f.cols, std::vector<double>(f.v.size())};
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      const double sr = static_cast<double>(r) - dr;
      const double sc = static_cast<double>(c) - dc;
      const double fr = std::floor(sr), fc = std::floor(sc);
      const double wr = sr - fr, wc = sc - fc;
      const auto r0 = static_cast<std::ptrdiff_t>(fr), c0 = static_cast<std::ptrdiff_t>(fc);
      out.v[r * f.cols + c] = (1 - wr) * (1 - wc) * f.at(r0, c0) + (1 - wr) * wc * f.at(r0, c0 + 1) +
                              wr * (1 - wc) * f.at(r0 + 1, c0) + wr * wc * f.at(r0 + 1, c0 + 1);
    }
  }
  return out;
}

void diffuse(Field& f, double rate) {
  Field out{f.rows, f.cols, f.v};
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      const auto ri = static_cast<std::ptrdiff_t>(r), ci = static_cast<std::ptrdiff_t>(c);
      const double lap = f.at(ri - 1, ci) + f.at(ri + 1, ci) + f.at(ri, ci - 1) + f.at(ri, ci + 1) -
                         4.0 * f.at(ri, ci);
      out.v[r * f.cols + c] += rate * lap;
    }
  }
  f = std::move(out);
}

Field smooth_noise(std::size_t rows, std::size_t cols, int passes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Field f{rows, cols, std::vector<double>(rows * cols)};
  for (double& x : f.v) x = normal(rng);
  for (int i = 0; i < passes; ++i) box_blur(f);
  // Rescale to unit variance using the realised sample std.
  double ss = 0.0;
  for (double x : f.v) ss += x * x;
  const double std = std::sqrt(ss / static_cast<double>(f.v.size()));
  if (std > 0.0)
    for (double& x : f.v) x /= std;
  return f;
}

std::vector<std::uint8_t> make_coastline(std::size_t rows, std::size_t cols, double radius_fraction,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int side = static_cast<int>(rng() % 4);
  const double along = 0.25 + 0.5 * unit(rng);
  const double phase1 = 2.0 * std::numbers::pi * unit(rng);
  const double phase2 = 2.0 * std::numbers::pi * unit(rng);
  const auto R = static_cast<double>(rows - 1), C = static_cast<double>(cols - 1);
  double ar = 0.0, ac = 0.0;
  switch (side) {
    case 0: ar = 0.0; ac = std::round(along * C); break;
    case 1: ar = R; ac = std::round(along * C); break;
    case 2: ar = std::round(along * R); ac = 0.0; break;
    default: ar = std::round(along * R); ac = C; break;
  }
  const double radius = radius_fraction * static_cast<double>(std::min(rows, cols));
  std::vector<std::uint8_t> land(rows * cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double dr = static_cast<double>(r) - ar, dc = static_cast<double>(c) - ac;
      const double dist = std::hypot(dr, dc);
      const double theta = std::atan2(dr, dc);
      const double reach = radius * (1.0 + 0.25 * std::sin(3.0 * theta + phase1) +
                                     0.15 * std::sin(5.0 * theta + phase2));
      if (dist <= reach) land[r * cols + c] = 1;
    }
  }
  return land;
}

}  // namespace

TemperatureGridSeries synth_series(const SynthConfig& config, std::uint64_t seed) {
  if (config.rows < 8 || config.cols < 8 || config.days < 32) {
    throw std::invalid_argument("synth_series needs at least 8x8 cells and 32 days");
  }
  std::mt19937_64 rng(seed);
  const std::size_t rows = config.rows, cols = config.cols, cells = rows * cols;
  const auto land = make_coastline(rows, cols, config.land_radius_fraction, rng);

  const double innovation = config.anomaly_std * std::sqrt(1.0 - config.ar_coeff * config.ar_coeff);
  const auto step = [&](Field& a) {
    Field next = advect(a, config.drift_rows, config.drift_cols);
    diffuse(next, config.diffusion);
    const Field noise = smooth_noise(rows, cols, config.noise_smoothing_passes, rng);
    for (std::size_t i = 0; i < cells; ++i) next.v[i] = config.ar_coeff * next.v[i] + innovation * noise.v[i];
    a = std::move(next);
  };

  Field anomaly = smooth_noise(rows, cols, config.noise_smoothing_passes, rng);
  for (double& x : anomaly.v) x *= config.anomaly_std;
  for (int i = 0; i < 100; ++i) step(anomaly);  // spin-up

  std::vector<double> values(config.days * cells);
  const double day_offset = static_cast<double>(day_of_year(config.start_date) - 1);
  for (std::size_t t = 0; t < config.days; ++t) {
    const double season = config.seasonal_amplitude *
                          std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + day_offset +
                                                             config.seasonal_phase_days) / 365.25);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t cell = r * cols + c;
        double v = kNonValue;
        if (!land[cell]) {
          const double spatial = config.gradient_rows * (static_cast<double>(r) / static_cast<double>(rows - 1) - 0.5) +
                                 config.gradient_cols * (static_cast<double>(c) / static_cast<double>(cols - 1) - 0.5);
          v = static_cast<double>(static_cast<float>(config.mean_temp + season + spatial + anomaly.v[cell]));
        }
        values[t * cells + cell] = v;
      }
    }
    step(anomaly);
  }
  return TemperatureGridSeries(config.days, GridShape{rows, cols}, std::move(values), config.start_date,
                               config.bounds);
}

}  // namespace fishcast
