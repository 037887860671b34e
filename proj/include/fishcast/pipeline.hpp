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

// End-to-end orchestration: temperature forecast -> presence prediction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fishcast/forecaster.hpp"
#include "fishcast/gbm.hpp"
#include "fishcast/grid_data.hpp"
#include "fishcast/metrics.hpp"

namespace fishcast {

// Parsed from `key = value` lines; see README for the key list. Relative
// paths are resolved against output_dir.
struct PipelineConfig {
  std::filesystem::path output_dir = "out";
  std::filesystem::path series = "series.btg";
  std::filesystem::path fisheries = "fisheries.csv";
  std::filesystem::path checkpoint = "forecaster.fck";
  std::filesystem::path gbm_model = "gbm";  // prefix: gbm_SOL.txt, gbm_SOL_notemp.txt, ...
  std::filesystem::path forecast_report = "forecast_errors.csv";  // baseline goes to <stem>_baseline.csv
  std::filesystem::path gbm_report = "gbm_eval.csv";

  // Split boundaries: dates win over fractions when given.
  double val_fraction = 0.7;
  double test_fraction = 0.85;
  std::optional<Date> val_start;
  std::optional<Date> test_start;
  std::vector<std::size_t> horizons{1, 2, 3, 4};

  bool synth = true;
  SynthConfig synth_config;
  std::uint64_t synth_seed = 7;
  std::uint64_t fisheries_seed = 11;
  std::size_t records_per_species = 20000;

  TrainConfig train;  // network shape, Adam and schedule
  GbmConfig gbm;

  std::vector<double> sensitivity_offsets = default_offsets();
  std::optional<Date> heatmap_date;  // default: first test day

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path gbm_path(Species s, FeatureSet set) const;
  // Canonical `key = value` text, one line per key in fixed order.
  std::string canonical() const;
  // FNV-1a 64 of canonical().
  std::uint64_t hash() const;
};

// Throws FormatError naming the offending line.
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Applies one `key=value` override on top of an existing config.
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

// Window of history indices feeding the k-step chained forecast for target
// day index d: [d - k - h + 1, d - k]. Throws InsufficientDataError when it
// would start before day 0.
IndexRange chained_history(std::size_t target, std::size_t k, std::size_t h);

// Forecasts the grid for `target` (°C) from the history window ending k days
// earlier and returns predicted frame k.
std::vector<double> chained_forecast(const TemperatureGridSeries& series, const ForecastModel& model, Date target,
                                     std::size_t k);

// For every target day index and horizon, the chained prediction. Each
// distinct history window is forecast once. Result indexed [k-1][i].
std::vector<std::vector<std::vector<double>>> chained_forecasts(const TemperatureGridSeries& series,
                                                                const ForecastModel& model,
                                                                std::span<const std::size_t> targets,
                                                                std::span<const std::size_t> horizons);

struct HorizonReport {
  Species species = Species::kSole;
  std::size_t rows = 0;
  double f1_true_temperature = 0.0;
  double f1_without_temperature = 0.0;
  std::vector<std::size_t> horizons;
  std::vector<double> f1_predicted;  // aligned with horizons
};

struct PresenceModels {
  GbmEnsemble with_temperature;
  GbmEnsemble without_temperature;
};

// Test records: day index in the test range and admitting every horizon.
std::vector<FishingRecord> evaluation_rows(std::span<const FishingRecord> records,
                                           const TemperatureGridSeries& series, IndexRange test,
                                           std::size_t history, std::size_t max_horizon);

// Scores one species. Throws InsufficientDataError for an empty row set.
HorizonReport evaluate_horizons(const TemperatureGridSeries& series, const ForecastModel& forecaster,
                                const PresenceModels& models, std::span<const FishingRecord> rows,
                                Species species, std::span<const std::size_t> horizons);

std::string horizon_report_csv(std::span<const HorizonReport> reports);

enum class HeatmapKind { kProbability, kTemperature, kError };

// Writes <stem>.pgm (P2, land = 0, scale in a comment), <stem>.csv (grid
// values, land as nan) and <stem>_mask.csv (1 = land).
void emit_heatmap(std::span<const double> grid, const LandMask& mask, const std::filesystem::path& stem,
                  HeatmapKind kind);
std::string heatmap_pgm(std::span<const double> grid, const LandMask& mask, HeatmapKind kind);

// Forecaster and last-day estimator on every full window inside `range`.
struct ForecastEvaluation {
  ErrorReport model;
  ErrorReport baseline;
  std::vector<double> rmse_last_horizon;  // per cell, land = non-value
  std::size_t sequences = 0;
};
ForecastEvaluation evaluate_forecaster(const TemperatureGridSeries& series, const ForecastModel& model,
                                       IndexRange range);

// Records of one species whose day index lies in `days`.
std::vector<FishingRecord> select_records(std::span<const FishingRecord> records, const TemperatureGridSeries& series,
                                          Species species, IndexRange days);
GbmEnsemble train_presence_model(const TemperatureGridSeries& series, std::span<const FishingRecord> rows,
                                 FeatureSet set, const GbmConfig& config, GbmTrainLog* log = nullptr);
double presence_f1(const GbmEnsemble& model, const TemperatureGridSeries& series, std::span<const FishingRecord> rows);

// "-2..7" (integer steps) or a comma list.
std::vector<double> parse_offsets(const std::string& text);
std::string sensitivity_csv(std::span<const std::pair<double, double>> sweep);

// Stages. Each reads its inputs from and writes its outputs to the paths in
// the config; failures are rethrown as StageError.
void stage_synth(const PipelineConfig& config, bool with_fisheries);
void stage_train_forecast(const PipelineConfig& config);
void stage_eval_forecast(const PipelineConfig& config);
void stage_train_gbm(const PipelineConfig& config);
void stage_eval_gbm(const PipelineConfig& config);
void stage_predict_pipeline(const PipelineConfig& config);
void stage_sensitivity(const PipelineConfig& config);

// Runs all stages in order and writes manifest.txt. With resume, stages
// already recorded in a manifest of the same config hash are skipped.
void run_all(const PipelineConfig& config, bool resume);

// Loads split boundaries of a series per config.
SplitIndex config_split(const PipelineConfig& config, const TemperatureGridSeries& series);

}  // namespace fishcast
