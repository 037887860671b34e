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

#include "fishcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fishcast/calendar.hpp"
#include "fishcast/errors.hpp"
#include "fishcast/metrics.hpp"
#include "fishcast/report_format.hpp"

namespace fishcast {

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = value.find(',', begin);
    out.push_back(trim(std::string_view(value).substr(begin, end == std::string::npos ? end : end - begin)));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return out;
}

std::size_t to_size(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(std::stoull(v));
}

double to_real(const std::string& v) {
  const double x = parse_real(v);
  if (!std::isfinite(x)) throw std::invalid_argument("expected a finite number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::optional<Date> to_optional_date(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return parse_iso_date(v);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

std::string size_list(const std::vector<std::size_t>& v) {
  return join(v, [](std::size_t x) { return std::to_string(x); });
}

std::string opt_date(const std::optional<Date>& d) { return d ? format_iso_date(*d) : std::string(); }

}  // namespace

void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& v) {
  auto& net = c.train.network;
  auto& sc = c.synth_config;
  if (key == "output_dir") c.output_dir = v;
  else if (key == "series") c.series = v;
  else if (key == "fisheries") c.fisheries = v;
  else if (key == "checkpoint") c.checkpoint = v;
  else if (key == "gbm_model") c.gbm_model = v;
  else if (key == "forecast_report") c.forecast_report = v;
  else if (key == "gbm_report") c.gbm_report = v;
  else if (key == "val_fraction") c.val_fraction = to_real(v);
  else if (key == "test_fraction") c.test_fraction = to_real(v);
  else if (key == "val_start") c.val_start = to_optional_date(v);
  else if (key == "test_start") c.test_start = to_optional_date(v);
  else if (key == "horizons") {
    c.horizons.clear();
    for (const auto& item : split_list(v)) c.horizons.push_back(to_size(item));
  } else if (key == "synth") c.synth = to_bool(v);
  else if (key == "synth_days") sc.days = to_size(v);
  else if (key == "synth_rows") sc.rows = to_size(v);
  else if (key == "synth_cols") sc.cols = to_size(v);
  else if (key == "synth_start") sc.start_date = parse_iso_date(v);
  else if (key == "synth_seed") c.synth_seed = to_size(v);
  else if (key == "fisheries_seed") c.fisheries_seed = to_size(v);
  else if (key == "records_per_species") c.records_per_species = to_size(v);
  else if (key == "history") net.history = to_size(v);
  else if (key == "horizon") net.horizon = to_size(v);
  else if (key == "layers") {
    net.layer_channels.clear();
    for (const auto& item : split_list(v)) net.layer_channels.push_back(to_size(item));
    if (net.layer_channels.size() < 2) throw std::invalid_argument("need at least two layers around the GHU");
  } else if (key == "ghu_channels") net.ghu_channels = to_size(v);
  else if (key == "kernel") net.kernel = to_size(v);
  else if (key == "residual") net.residual = to_bool(v);
  else if (key == "epochs") c.train.epochs = to_size(v);
  else if (key == "patience") c.train.patience = to_size(v);
  else if (key == "batch_size") c.train.batch_size = to_size(v);
  else if (key == "learning_rate") c.train.adam.learning_rate = to_real(v);
  else if (key == "max_batches_per_epoch") c.train.max_batches_per_epoch = to_size(v);
  else if (key == "max_val_sequences") c.train.max_val_sequences = to_size(v);
  else if (key == "forecast_seed") c.train.seed = to_size(v);
  else if (key == "gbm_trees") c.gbm.n_trees = to_size(v);
  else if (key == "gbm_leaves") c.gbm.num_leaves = to_size(v);
  else if (key == "gbm_learning_rate") c.gbm.learning_rate = to_real(v);
  else if (key == "gbm_min_leaf") c.gbm.min_leaf_count = to_size(v);
  else if (key == "gbm_max_bins") c.gbm.max_bins = to_size(v);
  else if (key == "gbm_max_depth") c.gbm.max_depth = to_size(v);
  else if (key == "sensitivity_offsets") c.sensitivity_offsets = parse_offsets(v);
  else if (key == "heatmap_date") c.heatmap_date = to_optional_date(v);
  else throw std::invalid_argument("unknown key '" + key + "'");
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    try {
      apply_config_entry(config, key, trim(std::string_view(body).substr(eq + 1)));
    } catch (const std::exception& e) {
      throw FormatError("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
  }
  return config;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return parse_pipeline_config(read_text_file(path));
}

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : output_dir / p;
}

std::filesystem::path PipelineConfig::gbm_path(Species s, FeatureSet set) const {
  std::string name = resolve(gbm_model).string() + "_" + species_code(s);
  if (set == FeatureSet::kWithoutTemperature) name += "_notemp";
  return name + ".txt";
}

std::string PipelineConfig::canonical() const {
  const auto& net = train.network;
  std::ostringstream o;
  o << "output_dir = " << output_dir.string() << "\n"
    << "series = " << series.string() << "\n"
    << "fisheries = " << fisheries.string() << "\n"
    << "checkpoint = " << checkpoint.string() << "\n"
    << "gbm_model = " << gbm_model.string() << "\n"
    << "forecast_report = " << forecast_report.string() << "\n"
    << "gbm_report = " << gbm_report.string() << "\n"
    << "val_fraction = " << format_real(val_fraction) << "\n"
    << "test_fraction = " << format_real(test_fraction) << "\n"
    << "val_start = " << opt_date(val_start) << "\n"
    << "test_start = " << opt_date(test_start) << "\n"
    << "horizons = " << size_list(horizons) << "\n"
    << "synth = " << (synth ? "true" : "false") << "\n"
    << "synth_days = " << synth_config.days << "\n"
    << "synth_rows = " << synth_config.rows << "\n"
    << "synth_cols = " << synth_config.cols << "\n"
    << "synth_start = " << format_iso_date(synth_config.start_date) << "\n"
    << "synth_seed = " << synth_seed << "\n"
    << "fisheries_seed = " << fisheries_seed << "\n"
    << "records_per_species = " << records_per_species << "\n"
    << "history = " << net.history << "\n"
    << "horizon = " << net.horizon << "\n"
    << "layers = " << size_list(net.layer_channels) << "\n"
    << "ghu_channels = " << net.ghu_channels << "\n"
    << "kernel = " << net.kernel << "\n"
    << "residual = " << (net.residual ? "true" : "false") << "\n"
    << "epochs = " << train.epochs << "\n"
    << "patience = " << train.patience << "\n"
    << "batch_size = " << train.batch_size << "\n"
    << "learning_rate = " << format_real(train.adam.learning_rate) << "\n"
    << "max_batches_per_epoch = " << train.max_batches_per_epoch << "\n"
    << "max_val_sequences = " << train.max_val_sequences << "\n"
    << "forecast_seed = " << train.seed << "\n"
    << "gbm_trees = " << gbm.n_trees << "\n"
    << "gbm_leaves = " << gbm.num_leaves << "\n"
    << "gbm_learning_rate = " << format_real(gbm.learning_rate) << "\n"
    << "gbm_min_leaf = " << gbm.min_leaf_count << "\n"
    << "gbm_max_bins = " << gbm.max_bins << "\n"
    << "gbm_max_depth = " << gbm.max_depth << "\n"
    << "sensitivity_offsets = " << join(sensitivity_offsets, [](double x) { return format_real(x); }) << "\n"
    << "heatmap_date = " << opt_date(heatmap_date) << "\n";
  return o.str();
}

std::uint64_t PipelineConfig::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

SplitIndex config_split(const PipelineConfig& config, const TemperatureGridSeries& series) {
  if (config.val_start || config.test_start) {
    if (!config.val_start || !config.test_start) throw std::invalid_argument("val_start and test_start go together");
    return chronological_split(series, *config.val_start, *config.test_start);
  }
  return chronological_split(series, config.val_fraction, config.test_fraction);
}

// ---------------------------------------------------------------------------
// Chained forecasting

IndexRange chained_history(std::size_t target, std::size_t k, std::size_t h) {
  if (k == 0 || h == 0) throw std::invalid_argument("horizon and history must be >= 1");
  if (target < k + h - 1) {
    throw InsufficientDataError("day index " + std::to_string(target) + " has no " + std::to_string(h) +
                                "-day history ending " + std::to_string(k) + " days earlier");
  }
  const IndexRange window{target - k - h + 1, target - k + 1};
  if (window.end > target) throw std::logic_error("chained history reaches the target day");
  return window;
}

std::vector<std::vector<std::vector<double>>> chained_forecasts(const TemperatureGridSeries& series,
                                                                const ForecastModel& model,
                                                                std::span<const std::size_t> targets,
                                                                std::span<const std::size_t> horizons) {
  const std::size_t h = model.history(), p = model.horizon();
  if (series.shape() != model.grid) throw ShapeError("series grid does not match the forecaster");
  for (std::size_t k : horizons) {
    if (k < 1 || k > p) throw std::invalid_argument("horizon " + std::to_string(k) + " outside 1.." + std::to_string(p));
  }
  for (std::size_t d : targets) {
    if (d >= series.days()) throw std::out_of_range("target day outside the series");
  }

  // Every distinct history window is forecast once.
  std::vector<std::size_t> ends;
  for (std::size_t k : horizons)
    for (std::size_t d : targets) ends.push_back(chained_history(d, k, h).end - 1);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

  const std::size_t cells = series.shape().cells();
  std::vector<std::vector<double>> histories;
  histories.reserve(ends.size());
  for (std::size_t e : ends) {
    const auto all = series.values();
    histories.emplace_back(all.begin() + static_cast<std::ptrdiff_t>((e + 1 - h) * cells),
                           all.begin() + static_cast<std::ptrdiff_t>((e + 1) * cells));
  }
  const auto predictions = forecast_batch(model, histories);

  std::vector<std::vector<std::vector<double>>> out(horizons.size());
  for (std::size_t ki = 0; ki < horizons.size(); ++ki) {
    const std::size_t k = horizons[ki];
    out[ki].reserve(targets.size());
    for (std::size_t d : targets) {
      const IndexRange window = chained_history(d, k, h);
      if (window.end > d) throw std::logic_error("look-ahead in chained forecast");
      const auto pos = static_cast<std::size_t>(std::lower_bound(ends.begin(), ends.end(), window.end - 1) - ends.begin());
      const auto& frames = predictions[pos];
      out[ki].emplace_back(frames.begin() + static_cast<std::ptrdiff_t>((k - 1) * cells),
                           frames.begin() + static_cast<std::ptrdiff_t>(k * cells));
    }
  }
  return out;
}

std::vector<double> chained_forecast(const TemperatureGridSeries& series, const ForecastModel& model, Date target,
                                     std::size_t k) {
  const std::size_t d = series.index_of(target);
  const std::size_t targets[] = {d};
  const std::size_t horizons[] = {k};
  return std::move(chained_forecasts(series, model, targets, horizons)[0][0]);
}

// ---------------------------------------------------------------------------
// Horizon evaluation

std::vector<FishingRecord> evaluation_rows(std::span<const FishingRecord> records,
                                           const TemperatureGridSeries& series, IndexRange test,
                                           std::size_t history, std::size_t max_horizon) {
  std::vector<FishingRecord> out;
  const std::size_t first_admissible = history + max_horizon - 1;
  for (const auto& r : records) {
    if (r.date < series.start_date()) continue;
    const auto t = static_cast<std::size_t>((r.date - series.start_date()).count());
    if (test.contains(t) && t >= first_admissible && t < series.days()) out.push_back(r);
  }
  return out;
}

HorizonReport evaluate_horizons(const TemperatureGridSeries& series, const ForecastModel& forecaster,
                                const PresenceModels& models, std::span<const FishingRecord> rows,
                                Species species, std::span<const std::size_t> horizons) {
  std::vector<FishingRecord> subset;
  for (const auto& r : rows)
    if (r.species == species) subset.push_back(r);
  if (subset.empty()) throw InsufficientDataError("no test rows for species " + species_code(species));

  HorizonReport report;
  report.species = species;
  report.rows = subset.size();
  report.horizons.assign(horizons.begin(), horizons.end());
  const GridShape grid = series.shape();
  const auto labels = labels_of(subset);

  const auto true_temps = lookup_temperatures(subset, series);
  report.f1_true_temperature = f1_score(
      models.with_temperature.predict_proba(build_feature_matrix(subset, true_temps, grid, FeatureSet::kWithTemperature)),
      labels);
  report.f1_without_temperature = f1_score(
      models.without_temperature.predict_proba(build_feature_matrix(subset, {}, grid, FeatureSet::kWithoutTemperature)),
      labels);

  std::vector<std::size_t> days;
  for (const auto& r : subset) days.push_back(series.index_of(r.date));
  std::vector<std::size_t> targets = days;
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  const auto predicted = chained_forecasts(series, forecaster, targets, horizons);

  for (std::size_t ki = 0; ki < horizons.size(); ++ki) {
    std::vector<double> temps(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(targets.begin(), targets.end(), days[i]) - targets.begin());
      temps[i] = predicted[ki][pos][subset[i].cell_row * grid.cols + subset[i].cell_col];
    }
    report.f1_predicted.push_back(f1_score(
        models.with_temperature.predict_proba(build_feature_matrix(subset, temps, grid, FeatureSet::kWithTemperature)),
        labels));
  }
  return report;
}

std::string horizon_report_csv(std::span<const HorizonReport> reports) {
  std::string out = "species,horizon,rows,f1_predicted,f1_true_temperature,f1_without_temperature\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.horizons.size(); ++i) {
      out += species_code(r.species) + "," + std::to_string(r.horizons[i]) + "," + std::to_string(r.rows) + "," +
             format_real(r.f1_predicted[i]) + "," + format_real(r.f1_true_temperature) + "," +
             format_real(r.f1_without_temperature) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmaps

namespace {

const char* kind_name(HeatmapKind kind) {
  switch (kind) {
    case HeatmapKind::kProbability: return "probability";
    case HeatmapKind::kTemperature: return "temperature";
    case HeatmapKind::kError: return "error";
  }
  return "?";
}

std::vector<double> heatmap_values(std::span<const double> grid, const LandMask& mask, HeatmapKind kind) {
  if (grid.size() != mask.shape().cells()) throw ShapeError("heatmap grid does not match mask");
  std::vector<double> out(grid.begin(), grid.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask.is_land(i)) out[i] = kNonValue;
    else if (kind == HeatmapKind::kProbability && !std::isnan(out[i])) out[i] = std::clamp(out[i], 0.0, 1.0);
  }
  return out;
}

}  // namespace

std::string heatmap_pgm(std::span<const double> grid, const LandMask& mask, HeatmapKind kind) {
  const auto values = heatmap_values(grid, mask, kind);
  double lo = 0.0, hi = 1.0;
  if (kind != HeatmapKind::kProbability) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : values)
      if (!std::isnan(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (!(lo <= hi)) lo = hi = 0.0;
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const GridShape shape = mask.shape();
  std::string out = "P2\n# fishcast " + std::string(kind_name(kind)) + " heatmap\n# scale: 1 = " + format_real(lo) +
                    ", 255 = " + format_real(hi) + ", 0 = land\n" + std::to_string(shape.cols) + " " +
                    std::to_string(shape.rows) + "\n255\n";
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t c = 0; c < shape.cols; ++c) {
      const double v = values[r * shape.cols + c];
      long level = 0;
      if (!std::isnan(v)) level = 1 + std::lround(std::clamp((v - lo) / span, 0.0, 1.0) * 254.0);
      if (c) out += ' ';
      out += std::to_string(level);
    }
    out += '\n';
  }
  return out;
}

void emit_heatmap(std::span<const double> grid, const LandMask& mask, const std::filesystem::path& stem,
                  HeatmapKind kind) {
  const auto values = heatmap_values(grid, mask, kind);
  const GridShape shape = mask.shape();
  std::string mask_csv;
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t c = 0; c < shape.cols; ++c) {
      if (c) mask_csv += ',';
      mask_csv += mask.is_land(r * shape.cols + c) ? '1' : '0';
    }
    mask_csv += '\n';
  }
  write_text_file(stem.string() + ".pgm", heatmap_pgm(grid, mask, kind));
  write_text_file(stem.string() + ".csv", grid_csv(values, shape));
  write_text_file(stem.string() + "_mask.csv", mask_csv);
}

// ---------------------------------------------------------------------------
// Stages

namespace {

template <typename F>
void run_stage(const std::string& name, F&& body) {
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::filesystem::path require_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw IoError("missing input file " + p.string());
  return p;
}

TemperatureGridSeries load_series(const PipelineConfig& c) { return read_grid_series(require_file(c.resolve(c.series))); }

ForecastModel load_forecaster(const PipelineConfig& c) { return load_checkpoint(require_file(c.resolve(c.checkpoint))); }

std::vector<FishingRecord> load_records(const PipelineConfig& c) {
  return read_fisheries_csv(require_file(c.resolve(c.fisheries)));
}

PresenceModels load_models(const PipelineConfig& c, Species s) {
  return PresenceModels{load_ensemble(require_file(c.gbm_path(s, FeatureSet::kWithTemperature))),
                        load_ensemble(require_file(c.gbm_path(s, FeatureSet::kWithoutTemperature)))};
}

constexpr Species kAllSpecies[] = {Species::kSole, Species::kPlaice};

std::size_t heatmap_day(const PipelineConfig& c, const TemperatureGridSeries& series) {
  if (c.heatmap_date) return series.index_of(*c.heatmap_date);
  return config_split(c, series).test.begin;
}

void ensure_output_dir(const PipelineConfig& c) { std::filesystem::create_directories(c.output_dir); }

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

}  // namespace

void stage_synth(const PipelineConfig& c, bool with_fisheries) {
  run_stage("synth", [&] {
    const auto series = synth_series(c.synth_config, c.synth_seed);
    ensure_parent(c.resolve(c.series));
    write_grid_series(series, c.resolve(c.series));
    if (!with_fisheries) return;
    std::vector<FishingRecord> records;
    std::uint64_t seed = c.fisheries_seed;
    for (Species s : kAllSpecies) {
      SpeciesResponse response = s == Species::kSole ? SpeciesResponse::sole() : SpeciesResponse::plaice();
      response.records = c.records_per_species;
      const auto part = synth_fisheries(series, response, seed++);
      records.insert(records.end(), part.begin(), part.end());
    }
    ensure_parent(c.resolve(c.fisheries));
    write_fisheries_csv(records, c.resolve(c.fisheries));
  });
}

ForecastEvaluation evaluate_forecaster(const TemperatureGridSeries& series, const ForecastModel& model,
                                       IndexRange range) {
  if (series.shape() != model.grid) throw ShapeError("series grid does not match the forecaster");
  const std::size_t h = model.history(), p = model.horizon(), cells = series.shape().cells();
  const auto starts = window_starts(range, h, p);
  if (starts.empty()) throw InsufficientDataError("range holds no full forecast window");
  const auto all = series.values();

  std::vector<std::vector<double>> histories;
  histories.reserve(starts.size());
  for (std::size_t s : starts) {
    histories.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(s * cells),
                           all.begin() + static_cast<std::ptrdiff_t>((s + h) * cells));
  }
  const auto preds = forecast_batch(model, histories);

  const LandMask& mask = series.land_mask();
  HorizonErrorAccumulator model_acc(p, mask), base_acc(p, mask);
  PerCellErrorAccumulator last(mask);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::span<const double> truth(all.data() + (starts[i] + h) * cells, p * cells);
    model_acc.add(preds[i], truth);
    base_acc.add(last_day_estimator(histories[i], cells, p), truth);
    last.add(std::span<const double>(preds[i]).subspan((p - 1) * cells, cells), truth.subspan((p - 1) * cells, cells));
  }
  return ForecastEvaluation{ErrorReport::from(model_acc), ErrorReport::from(base_acc), last.rmse(), starts.size()};
}

std::vector<FishingRecord> select_records(std::span<const FishingRecord> records, const TemperatureGridSeries& series,
                                          Species species, IndexRange days) {
  std::vector<FishingRecord> out;
  for (const auto& r : records) {
    if (r.species != species) continue;
    if (r.date < series.start_date()) continue;
    const auto t = static_cast<std::size_t>((r.date - series.start_date()).count());
    if (t < series.days() && days.contains(t)) out.push_back(r);
  }
  return out;
}

GbmEnsemble train_presence_model(const TemperatureGridSeries& series, std::span<const FishingRecord> rows,
                                 FeatureSet set, const GbmConfig& config, GbmTrainLog* log) {
  if (rows.empty()) throw InsufficientDataError("no training records");
  const auto temps = lookup_temperatures(rows, series);
  return train_gbm(build_feature_matrix(rows, temps, series.shape(), set), labels_of(rows), config, log);
}

double presence_f1(const GbmEnsemble& model, const TemperatureGridSeries& series, std::span<const FishingRecord> rows) {
  if (rows.empty()) throw InsufficientDataError("no evaluation records");
  const auto temps = lookup_temperatures(rows, series);
  return f1_score(model.predict_proba(build_feature_matrix(rows, temps, series.shape(), model.feature_set())),
                  labels_of(rows));
}

std::vector<double> parse_offsets(const std::string& text) {
  std::vector<double> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const double lo = to_real(trim(text.substr(0, dots)));
    const double hi = to_real(trim(text.substr(dots + 2)));
    if (lo != std::floor(lo) || hi != std::floor(hi) || lo > hi) {
      throw std::invalid_argument("offset range must be 'a..b' with integers a <= b");
    }
    for (double v = lo; v <= hi; v += 1.0) out.push_back(v);
    return out;
  }
  for (const auto& item : split_list(text)) out.push_back(to_real(item));
  return out;
}

std::string sensitivity_csv(std::span<const std::pair<double, double>> sweep) {
  std::string out = "offset,mean_probability\n";
  for (const auto& [offset, mean] : sweep) out += format_real(offset) + "," + format_real(mean) + "\n";
  return out;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
  auto out = p;
  out.replace_filename(p.stem().string() + suffix);
  return out;
}

}  // namespace

void stage_train_forecast(const PipelineConfig& c) {
  run_stage("train-forecast", [&] {
    const auto series = load_series(c);
    const auto split = config_split(c, series);
    const auto norm = compute_norm_stats(series, split);
    const auto stack = normalize(series, norm);
    const std::size_t h = c.train.network.history, p = c.train.network.horizon;
    const auto train = build_sequences(stack, h, p, split.train);
    const auto val = build_sequences(stack, h, p, split.val);
    if (train.empty() || val.empty()) throw InsufficientDataError("train or validation range holds no full window");
    const auto result = train_forecaster(train, val, norm, c.train);
    const auto ckpt = c.resolve(c.checkpoint);
    ensure_parent(ckpt);
    save_checkpoint(result.model, ckpt);
    std::string log = "epoch,train_loss,val_loss\n";
    for (const auto& e : result.history) {
      log += std::to_string(e.epoch) + "," + format_real(e.train_loss) + "," + format_real(e.val_loss) + "\n";
    }
    write_text_file(with_suffix(ckpt, "_training.csv"), log);
  });
}

void stage_eval_forecast(const PipelineConfig& c) {
  run_stage("eval-forecast", [&] {
    const auto series = load_series(c);
    const auto model = load_forecaster(c);
    const auto eval = evaluate_forecaster(series, model, config_split(c, series).test);
    const auto report = c.resolve(c.forecast_report);
    ensure_parent(report);
    write_error_report_csv(eval.model, report);
    write_error_report_csv(eval.baseline, with_suffix(report, "_baseline.csv"));
    emit_heatmap(eval.rmse_last_horizon, series.land_mask(),
                 with_suffix(report, "_rmse_h" + std::to_string(model.horizon())), HeatmapKind::kError);
  });
}

void stage_train_gbm(const PipelineConfig& c) {
  run_stage("train-gbm", [&] {
    const auto series = load_series(c);
    const auto records = load_records(c);
    const IndexRange fit_days{0, config_split(c, series).test.begin};
    std::string log = "species,features,rows,trees,final_log_loss\n";
    for (Species s : kAllSpecies) {
      const auto rows = select_records(records, series, s, fit_days);
      if (rows.empty()) throw InsufficientDataError("no training rows for species " + species_code(s));
      for (FeatureSet set : {FeatureSet::kWithTemperature, FeatureSet::kWithoutTemperature}) {
        GbmTrainLog train_log;
        const auto model = train_presence_model(series, rows, set, c.gbm, &train_log);
        const auto path = c.gbm_path(s, set);
        ensure_parent(path);
        save_ensemble(model, path);
        log += species_code(s) + "," + std::to_string(feature_count(set)) + "," + std::to_string(rows.size()) + "," +
               std::to_string(model.trees.size()) + "," + format_real(train_log.log_loss.back()) + "\n";
      }
    }
    write_text_file(with_suffix(c.gbm_path(Species::kSole, FeatureSet::kWithTemperature), "_training.csv"), log);
  });
}

void stage_eval_gbm(const PipelineConfig& c) {
  run_stage("eval-gbm", [&] {
    const auto series = load_series(c);
    const auto records = load_records(c);
    const auto test = config_split(c, series).test;
    std::string out = "species,features,rows,f1\n";
    for (Species s : kAllSpecies) {
      const auto rows = select_records(records, series, s, test);
      if (rows.empty()) throw InsufficientDataError("no test rows for species " + species_code(s));
      const auto models = load_models(c, s);
      for (const GbmEnsemble* m : {&models.with_temperature, &models.without_temperature}) {
        out += species_code(s) + "," + std::to_string(m->num_features) + "," + std::to_string(rows.size()) + "," +
               format_real(presence_f1(*m, series, rows)) + "\n";
      }
    }
    const auto report = c.resolve(c.gbm_report);
    ensure_parent(report);
    write_text_file(report, out);
  });
}

void stage_predict_pipeline(const PipelineConfig& c) {
  run_stage("predict-pipeline", [&] {
    const auto series = load_series(c);
    const auto records = load_records(c);
    const auto forecaster = load_forecaster(c);
    const auto split = config_split(c, series);
    if (c.horizons.empty()) throw std::invalid_argument("no horizons requested");
    const std::size_t max_k = *std::max_element(c.horizons.begin(), c.horizons.end());
    const auto rows = evaluation_rows(records, series, split.test, forecaster.history(), max_k);

    std::vector<HorizonReport> reports;
    for (Species s : kAllSpecies) {
      reports.push_back(evaluate_horizons(series, forecaster, load_models(c, s), rows, s, c.horizons));
    }
    write_text_file(c.resolve("horizon_report.csv"), horizon_report_csv(reports));

    const std::size_t day = heatmap_day(c, series);
    const Date date = series.date_at(day);
    const LandMask& mask = series.land_mask();
    const std::size_t targets[] = {day};
    const auto predicted = chained_forecasts(series, forecaster, targets, c.horizons);
    emit_heatmap(series.frame(day), mask, c.resolve("temperature_true"), HeatmapKind::kTemperature);
    for (std::size_t ki = 0; ki < c.horizons.size(); ++ki) {
      emit_heatmap(predicted[ki][0], mask, c.resolve("temperature_h" + std::to_string(c.horizons[ki])),
                   HeatmapKind::kTemperature);
    }
    for (Species s : kAllSpecies) {
      const auto model = load_ensemble(require_file(c.gbm_path(s, FeatureSet::kWithTemperature)));
      const std::string code = species_code(s);
      emit_heatmap(predict_map(model, date, series.frame(day), mask), mask, c.resolve("probability_" + code + "_true"),
                   HeatmapKind::kProbability);
      for (std::size_t ki = 0; ki < c.horizons.size(); ++ki) {
        emit_heatmap(predict_map(model, date, predicted[ki][0], mask), mask,
                     c.resolve("probability_" + code + "_h" + std::to_string(c.horizons[ki])), HeatmapKind::kProbability);
      }
    }
  });
}

void stage_sensitivity(const PipelineConfig& c) {
  run_stage("sensitivity", [&] {
    const auto series = load_series(c);
    const std::size_t day = heatmap_day(c, series);
    for (Species s : kAllSpecies) {
      const auto model = load_ensemble(require_file(c.gbm_path(s, FeatureSet::kWithTemperature)));
      const auto sweep =
          sensitivity_sweep(model, series.date_at(day), series.frame(day), series.land_mask(), c.sensitivity_offsets);
      write_text_file(c.resolve("sensitivity_" + species_code(s) + ".csv"), sensitivity_csv(sweep));
    }
  });
}

// ---------------------------------------------------------------------------
// run-all

namespace {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::string manifest_text(const PipelineConfig& c, const std::vector<std::string>& done) {
  std::string out = "fishcast-manifest 1\nconfig_hash " + hex64(c.hash()) + "\nsynth_seed " +
                    std::to_string(c.synth_seed) + "\nfisheries_seed " + std::to_string(c.fisheries_seed) +
                    "\nforecast_seed " + std::to_string(c.train.seed) + "\n";
  for (const auto& s : done) out += "stage " + s + " done\n";
  return out;
}

std::vector<std::string> completed_stages(const PipelineConfig& c, const std::filesystem::path& manifest) {
  std::vector<std::string> done;
  if (!std::filesystem::exists(manifest)) return done;
  std::istringstream in(read_text_file(manifest));
  std::string line;
  bool same_config = false;
  while (std::getline(in, line)) {
    if (line == "config_hash " + hex64(c.hash())) same_config = true;
    if (line.rfind("stage ", 0) == 0 && line.size() > 11 && line.substr(line.size() - 5) == " done") {
      done.push_back(line.substr(6, line.size() - 11));
    }
  }
  return same_config ? done : std::vector<std::string>{};
}

}  // namespace

void run_all(const PipelineConfig& config, bool resume) {
  run_stage("run-all", [&] { ensure_output_dir(config); });
  const auto manifest = config.resolve("manifest.txt");
  std::vector<std::string> done = resume ? completed_stages(config, manifest) : std::vector<std::string>{};
  run_stage("run-all", [&] { write_text_file(config.resolve("config.txt"), config.canonical()); });

  const std::vector<std::pair<std::string, std::function<void()>>> stages = {
      {"synth", [&] { stage_synth(config, true); }},
      {"train-forecast", [&] { stage_train_forecast(config); }},
      {"eval-forecast", [&] { stage_eval_forecast(config); }},
      {"train-gbm", [&] { stage_train_gbm(config); }},
      {"eval-gbm", [&] { stage_eval_gbm(config); }},
      {"predict-pipeline", [&] { stage_predict_pipeline(config); }},
      {"sensitivity", [&] { stage_sensitivity(config); }},
  };
  std::vector<std::string> completed;
  for (const auto& [name, body] : stages) {
    if (name == "synth" && !config.synth) continue;
    if (std::find(done.begin(), done.end(), name) == done.end()) body();
    completed.push_back(name);
    run_stage("run-all", [&] { write_text_file(manifest, manifest_text(config, completed)); });
  }
}

}  // namespace fishcast
