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

// Histogram gradient-boosted trees for binary presence classification.
//
// Each boosting round fits one tree to the log-loss gradients g = p - y and
// hessians h = p(1 - p). Features are bucketed once into at most 255 quantile
// bins; trees grow leaf-wise (best-first), always splitting the leaf whose
// best split has the largest gain
//
//   G_L²/H_L + G_R²/H_R - G_P²/H_P
//
// until the leaf budget is spent or no split has positive gain. Leaf values
// are Newton steps -G/H; predictions add learning_rate × leaf value.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fishcast/calendar.hpp"
#include "fishcast/grid_data.hpp"

namespace fishcast {

enum class Species { kSole, kPlaice };

std::string species_code(Species s);        // "SOL" / "PLE"
Species parse_species(std::string_view code);  // throws std::invalid_argument

struct FishingRecord {
  Date date{};
  std::size_t cell_row = 0;
  std::size_t cell_col = 0;
  Species species = Species::kSole;
  bool present = false;

  bool operator==(const FishingRecord&) const = default;
};

// Seven features: grid column (longitude index), grid row (latitude index),
// bottom temperature, sin/cos of the day-of-year phase and sin/cos of the
// month phase.
struct FeatureVector {
  double lon_index = 0.0;
  double lat_index = 0.0;
  double temperature = 0.0;
  double day_sin = 0.0;
  double day_cos = 0.0;
  double month_sin = 0.0;
  double month_cos = 0.0;
};

enum class FeatureSet { kWithTemperature, kWithoutTemperature };

std::size_t feature_count(FeatureSet set);

// Throws DegenerateDataError for a non-value temperature (land cell) and
// std::out_of_range for cell indices outside the grid.
FeatureVector encode_features(const FishingRecord& record, double temperature, GridShape grid);
void append_features(const FeatureVector& f, FeatureSet set, std::vector<double>& out);

// Dense row-major feature table.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

// Temperature of every record's cell on its date, °C.
std::vector<double> lookup_temperatures(std::span<const FishingRecord> records, const TemperatureGridSeries& series);

// temperatures[i] is used for records[i]; ignored for kWithoutTemperature.
FeatureMatrix build_feature_matrix(std::span<const FishingRecord> records, std::span<const double> temperatures,
                                   GridShape grid, FeatureSet set);

std::vector<std::uint8_t> labels_of(std::span<const FishingRecord> records);

struct GbmConfig {
  std::size_t num_leaves = 23;
  double learning_rate = 0.1;
  std::size_t n_trees = 200;
  std::size_t min_leaf_count = 20;
  double min_leaf_hessian = 1e-3;
  std::size_t max_bins = 255;
  std::size_t max_depth = 0;  // 0 = unlimited
};

// Splits must beat this gain to be taken.
inline constexpr double kMinSplitGain = 1e-10;

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold (or missing) goes left
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // raw Newton value, before shrinkage
  double gain = 0.0;        // split gain of internal nodes

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_count() const;
  std::size_t depth() const;
  // Index of the leaf node reached by `row`.
  std::size_t leaf_index(std::span<const double> row) const;
  double value(std::span<const double> row) const { return nodes[leaf_index(row)].leaf_value; }

  bool operator==(const Tree&) const = default;
};

struct GbmEnsemble {
  double base_score = 0.0;  // log-odds
  double learning_rate = 0.1;
  std::size_t num_leaves = 23;
  std::size_t num_features = 7;
  std::vector<Tree> trees;

  double margin(std::span<const double> row) const;
  double predict_proba(std::span<const double> row) const;
  std::vector<double> predict_proba(const FeatureMatrix& features) const;
  FeatureSet feature_set() const;

  bool operator==(const GbmEnsemble&) const = default;
};

// Per-feature bin upper bounds. A value falls in the first bin whose bound is
// >= the value; the last bound is +inf. With no more distinct values than
// bins, each distinct value gets its own bin and bounds sit at midpoints.
struct FeatureBins {
  std::vector<double> upper_bounds;

  std::size_t bin_of(double value) const;
  std::size_t size() const { return upper_bounds.size(); }
};

FeatureBins make_bins(std::span<const double> column, std::size_t max_bins);

struct GbmTrainLog {
  std::vector<double> log_loss;  // training log-loss before round 1, then after each round
};

// Throws DegenerateDataError when only one label class is present.
GbmEnsemble train_gbm(const FeatureMatrix& features, std::span<const std::uint8_t> labels, const GbmConfig& config,
                      GbmTrainLog* log = nullptr);

// Builds a single tree for fixed gradients/hessians. Exposed for tests.
Tree grow_tree(const FeatureMatrix& features, std::span<const double> gradients, std::span<const double> hessians,
               const GbmConfig& config);

double mean_log_loss(std::span<const double> probs, std::span<const std::uint8_t> labels);

// Presence probability for every sea cell of a temperature grid (°C); land
// cells come back as non-values.
std::vector<double> predict_map(const GbmEnsemble& model, Date date, std::span<const double> temperature,
                                const LandMask& mask);

// Default offsets, integer steps from -2 to +7 °C.
std::vector<double> default_offsets();

// (offset, mean sea-cell probability) for grid + offset.
std::vector<std::pair<double, double>> sensitivity_sweep(const GbmEnsemble& model, Date date,
                                                         std::span<const double> temperature, const LandMask& mask,
                                                         std::span<const double> offsets);

// Text model format, exact round trip.
std::string serialize_ensemble(const GbmEnsemble& model);
GbmEnsemble parse_ensemble(const std::string& text);
void save_ensemble(const GbmEnsemble& model, const std::filesystem::path& path);
GbmEnsemble load_ensemble(const std::filesystem::path& path);

// Presence logit: intercept + slope·(T - T0) + seasonal·cos(2π·doy/365.25)
//                 + spatial·(2·col/(W-1) - 1)
struct SpeciesResponse {
  Species species = Species::kSole;
  double temperature_slope = 1.2;   // per °C
  double reference_temperature = std::numeric_limits<double>::quiet_NaN();  // NaN: series sea mean
  double intercept = 0.0;
  double seasonal_amplitude = 0.5;
  double spatial_amplitude = 0.5;
  std::size_t records = 20000;
  IndexRange days{};  // empty: whole series

  static SpeciesResponse sole();    // strong temperature response
  static SpeciesResponse plaice();  // weak temperature response
};

std::vector<FishingRecord> synth_fisheries(const TemperatureGridSeries& series, const SpeciesResponse& response,
                                           std::uint64_t seed);

// CSV with header date,cell_row,cell_col,species,present.
std::string fisheries_csv(std::span<const FishingRecord> records);
std::vector<FishingRecord> parse_fisheries_csv(const std::string& text);
void write_fisheries_csv(std::span<const FishingRecord> records, const std::filesystem::path& path);
std::vector<FishingRecord> read_fisheries_csv(const std::filesystem::path& path);

}  // namespace fishcast
