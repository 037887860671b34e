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

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "fishcast/calendar.hpp"

namespace fishcast {

// Marker stored in land cells of raw (°C) grids.
inline constexpr double kNonValue = std::numeric_limits<double>::quiet_NaN();
inline bool is_non_value(double v) { return std::isnan(v); }

// Value given to land cells once a stack has been normalized.
inline constexpr double kLandFill = -5.0;

struct GridShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t cells() const { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

struct GeoBounds {
  double lat_min = 50.07;
  double lat_max = 55.33;
  double lon_min = 0.22;
  double lon_max = 8.56;

  bool operator==(const GeoBounds&) const = default;
};

// Static coastline: true = land.
class LandMask {
 public:
  LandMask() = default;
  LandMask(GridShape shape, std::vector<std::uint8_t> land);

  GridShape shape() const { return shape_; }
  bool is_land(std::size_t cell) const { return land_[cell] != 0; }
  bool is_land(std::size_t row, std::size_t col) const { return is_land(row * shape_.cols + col); }
  std::size_t sea_count() const { return sea_count_; }
  std::span<const std::uint8_t> cells() const { return land_; }

  bool operator==(const LandMask& other) const {
    return shape_ == other.shape_ && land_ == other.land_;
  }

 private:
  GridShape shape_;
  std::vector<std::uint8_t> land_;
  std::size_t sea_count_ = 0;
};

// T consecutive daily temperature fields (°C), t-major then row-major. The
// constructor derives the land mask from frame 0 and rejects any cell whose
// non-value status changes over time.
class TemperatureGridSeries {
 public:
  TemperatureGridSeries() = default;
  TemperatureGridSeries(std::size_t days, GridShape shape, std::vector<double> values,
                        Date start_date, GeoBounds bounds = {});

  std::size_t days() const { return days_; }
  GridShape shape() const { return shape_; }
  const LandMask& land_mask() const { return mask_; }
  Date start_date() const { return start_date_; }
  Date date_at(std::size_t t) const { return start_date_ + std::chrono::days{t}; }
  const GeoBounds& bounds() const { return bounds_; }

  // Index of `d` on the time axis; throws std::out_of_range outside the span.
  std::size_t index_of(Date d) const;

  std::span<const double> frame(std::size_t t) const {
    return {values_.data() + t * shape_.cells(), shape_.cells()};
  }
  double at(std::size_t t, std::size_t row, std::size_t col) const {
    return values_[(t * shape_.rows + row) * shape_.cols + col];
  }
  std::span<const double> values() const { return values_; }

  bool operator==(const TemperatureGridSeries& other) const;

 private:
  std::size_t days_ = 0;
  GridShape shape_;
  std::vector<double> values_;
  LandMask mask_;
  Date start_date_{};
  GeoBounds bounds_;
};

// BTG1 binary grid file. Values are stored as float32, so a series survives a
// write/read round trip bit-exactly only when its values are float-representable
// (synth_series and read_grid_series guarantee that).
TemperatureGridSeries read_grid_series(const std::filesystem::path& path);
void write_grid_series(const TemperatureGridSeries& series, const std::filesystem::path& path);

// Half-open interval on the series time axis.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return size() == 0; }
  bool contains(std::size_t t) const { return t >= begin && t < end; }
  bool operator==(const IndexRange&) const = default;
};

struct SplitIndex {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

// Boundaries split the axis into train [0, b1), val [b1, b2), test [b2, T).
SplitIndex chronological_split(const TemperatureGridSeries& series, Date val_start, Date test_start);
SplitIndex chronological_split(const TemperatureGridSeries& series, double val_fraction_start,
                               double test_fraction_start);

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
  double land_fill = kLandFill;

  bool operator==(const NormStats&) const = default;
};

// Population statistics over sea cells of training-range frames.
NormStats compute_norm_stats(const TemperatureGridSeries& series, const SplitIndex& split);

struct NormalizedStack {
  std::size_t days = 0;
  GridShape shape;
  Date start_date{};
  std::vector<double> values;

  std::span<const double> frame(std::size_t t) const {
    return {values.data() + t * shape.cells(), shape.cells()};
  }
};

NormalizedStack normalize(const TemperatureGridSeries& series, const NormStats& stats);

// Inverse of normalize for any number of frames; land cells become non-values.
std::vector<double> denormalize(std::span<const double> frames, const NormStats& stats,
                                const LandMask& mask);

// One training sample: h history frames followed by p target frames.
struct GridSequence {
  std::size_t h = 0;
  std::size_t p = 0;
  GridShape shape;
  Date first_date{};
  std::vector<double> history;  // h × rows × cols
  std::vector<double> target;   // p × rows × cols

  std::span<const double> history_frame(std::size_t i) const {
    return {history.data() + i * shape.cells(), shape.cells()};
  }
  std::span<const double> target_frame(std::size_t i) const {
    return {target.data() + i * shape.cells(), shape.cells()};
  }
};

// Window start indices inside `range`, following n_sequence = len - (h + p).
// Returns an empty list when the range is too short; windows never cross the
// range boundary.
std::vector<std::size_t> window_starts(IndexRange range, std::size_t h, std::size_t p);

// Every window of the full stack. Throws InsufficientDataError when
// days <= h + p.
std::vector<GridSequence> build_sequences(const NormalizedStack& frames, std::size_t h,
                                          std::size_t p);
// Windows lying entirely inside `range`.
std::vector<GridSequence> build_sequences(const NormalizedStack& frames, std::size_t h,
                                          std::size_t p, IndexRange range);

GridSequence make_sequence(const NormalizedStack& frames, std::size_t start, std::size_t h,
                           std::size_t p);

struct SynthConfig {
  std::size_t days = 1200;
  std::size_t rows = 16;
  std::size_t cols = 16;
  Date start_date = Date{std::chrono::year{2006} / 1 / 1};
  GeoBounds bounds;

  double mean_temp = 11.0;          // °C
  double seasonal_amplitude = 4.0;  // °C
  double seasonal_phase_days = -110.0;
  double gradient_rows = 1.5;       // °C across the grid, north-south
  double gradient_cols = 1.0;       // °C across the grid, east-west
  double anomaly_std = 1.0;         // stationary std of the advected noise, °C
  double ar_coeff = 0.97;           // per-day persistence of the anomaly
  double drift_rows = 0.3;          // cells per day
  double drift_cols = 0.5;
  double diffusion = 0.05;
  int noise_smoothing_passes = 3;
  double land_radius_fraction = 0.3;
};

// Deterministic synthetic series: seasonal cycle + spatial gradient + AR(1)
// anomaly advected by a constant drift, with a land blob touching one border.
TemperatureGridSeries synth_series(const SynthConfig& config, std::uint64_t seed);

}  // namespace fishcast
