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

// fishcast command line: one subcommand per pipeline stage plus run-all.
//
// Every subcommand reads an optional config file (-c) and `--set key=value`
// overrides; the per-command flags below override the matching config keys.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fishcast/calendar.hpp"
#include "fishcast/errors.hpp"
#include "fishcast/pipeline.hpp"
#include "fishcast/report_format.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> overrides;

  // synth
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> days, rows, cols;
  std::string fisheries_out;
  // file flags
  std::string data, ckpt, report, fisheries, model, model_prefix, species, date, offsets;
  bool no_temperature = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "Config file of key = value lines")->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory (overrides output_dir)");
  cmd->add_option("--set", o.overrides, "Extra key=value entry, repeatable");
}

std::string absolute(const std::string& p) { return fs::absolute(p).string(); }

fishcast::PipelineConfig base_config(const Options& o) {
  fishcast::PipelineConfig config =
      o.config_path.empty() ? fishcast::PipelineConfig{} : fishcast::load_pipeline_config(o.config_path);
  for (const auto& entry : o.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw fishcast::FormatError("--set expects key=value, got '" + entry + "'");
    try {
      fishcast::apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    } catch (const std::exception& e) {
      throw fishcast::FormatError("--set " + entry + ": " + e.what());
    }
  }
  if (!o.output_dir.empty()) config.output_dir = o.output_dir;
  // Paths given as flags are relative to the working directory.
  if (!o.data.empty()) config.series = absolute(o.data);
  if (!o.fisheries.empty()) config.fisheries = absolute(o.fisheries);
  if (!o.ckpt.empty()) config.checkpoint = absolute(o.ckpt);
  if (!o.model_prefix.empty()) config.gbm_model = absolute(o.model_prefix);
  return config;
}

void synth(const Options& o) {
  auto c = base_config(o);
  if (!o.out.empty()) c.series = absolute(o.out);
  if (o.seed) c.synth_seed = *o.seed;
  if (o.days) c.synth_config.days = *o.days;
  if (o.rows) c.synth_config.rows = *o.rows;
  if (o.cols) c.synth_config.cols = *o.cols;
  if (!o.fisheries_out.empty()) c.fisheries = absolute(o.fisheries_out);
  fishcast::stage_synth(c, !o.fisheries_out.empty());
}

void train_forecast(const Options& o) {
  auto c = base_config(o);
  if (!o.out.empty()) c.checkpoint = absolute(o.out);
  fishcast::stage_train_forecast(c);
}

void eval_forecast(const Options& o) {
  auto c = base_config(o);
  if (!o.report.empty()) c.forecast_report = absolute(o.report);
  fishcast::stage_eval_forecast(c);
}

void train_gbm(const Options& o) {
  auto c = base_config(o);
  if (o.species.empty()) {
    if (!o.out.empty()) c.gbm_model = absolute(o.out);
    fishcast::stage_train_gbm(c);
    return;
  }
  if (o.out.empty()) throw std::invalid_argument("--species needs --out");
  const auto species = fishcast::parse_species(o.species);
  const auto series = fishcast::read_grid_series(c.resolve(c.series));
  const auto records = fishcast::read_fisheries_csv(c.resolve(c.fisheries));
  const fishcast::IndexRange fit_days{0, fishcast::config_split(c, series).test.begin};
  const auto rows = fishcast::select_records(records, series, species, fit_days);
  const auto set = o.no_temperature ? fishcast::FeatureSet::kWithoutTemperature : fishcast::FeatureSet::kWithTemperature;
  fishcast::save_ensemble(fishcast::train_presence_model(series, rows, set, c.gbm), absolute(o.out));
}

void eval_gbm(const Options& o) {
  auto c = base_config(o);
  if (!o.report.empty()) c.gbm_report = absolute(o.report);
  fishcast::stage_eval_gbm(c);
}

void sensitivity(const Options& o) {
  auto c = base_config(o);
  if (!o.offsets.empty()) c.sensitivity_offsets = fishcast::parse_offsets(o.offsets);
  if (!o.date.empty()) c.heatmap_date = fishcast::parse_iso_date(o.date);
  if (o.model.empty()) {
    fishcast::stage_sensitivity(c);
    return;
  }
  if (o.report.empty()) throw std::invalid_argument("--model needs --report");
  const auto model = fishcast::load_ensemble(absolute(o.model));
  const auto series = fishcast::read_grid_series(c.resolve(c.series));
  const std::size_t day =
      c.heatmap_date ? series.index_of(*c.heatmap_date) : fishcast::config_split(c, series).test.begin;
  const auto sweep =
      fishcast::sensitivity_sweep(model, series.date_at(day), series.frame(day), series.land_mask(), c.sensitivity_offsets);
  fishcast::write_text_file(absolute(o.report), fishcast::sensitivity_csv(sweep));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fishcast: bottom-temperature forecasting and fish-presence prediction"};
  app.require_subcommand(1);
  Options o;

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic grid series (and fisheries records)");
  synth_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  add_common(synth_cmd, o);
  synth_cmd->add_option("--out", o.out, "Output BTG1 file");
  synth_cmd->add_option("--seed", o.seed, "Generator seed");
  synth_cmd->add_option("--t", o.days, "Number of days");
  synth_cmd->add_option("--h", o.rows, "Grid rows");
  synth_cmd->add_option("--w", o.cols, "Grid columns");
  synth_cmd->add_option("--fisheries", o.fisheries_out, "Also write synthetic SOL/PLE records to this CSV");

  auto* train_fc = app.add_subcommand("train-forecast", "Train the temperature forecaster");
  add_common(train_fc, o);
  train_fc->add_option("--data", o.data, "BTG1 grid series");
  train_fc->add_option("--out", o.out, "Checkpoint to write");

  auto* eval_fc = app.add_subcommand("eval-forecast", "Per-horizon test errors of forecaster and last-day baseline");
  add_common(eval_fc, o);
  eval_fc->add_option("--data", o.data, "BTG1 grid series");
  eval_fc->add_option("--ckpt", o.ckpt, "Forecaster checkpoint");
  eval_fc->add_option("--report", o.report, "Error report CSV (baseline goes to <stem>_baseline.csv)");

  auto* train_gb = app.add_subcommand("train-gbm", "Train presence models");
  add_common(train_gb, o);
  train_gb->add_option("--fisheries", o.fisheries, "Fisheries CSV");
  train_gb->add_option("--grids", o.data, "BTG1 grid series");
  train_gb->add_option("--species", o.species, "SOL or PLE; omit to train all four models");
  train_gb->add_option("--out", o.out, "Model file (with --species) or model prefix");
  train_gb->add_flag("--no-temperature", o.no_temperature, "Train the 6-feature model");

  auto* eval_gb = app.add_subcommand("eval-gbm", "Test-set F1 of the presence models");
  add_common(eval_gb, o);
  eval_gb->add_option("--fisheries", o.fisheries, "Fisheries CSV");
  eval_gb->add_option("--grids", o.data, "BTG1 grid series");
  eval_gb->add_option("--models", o.model_prefix, "Model prefix");
  eval_gb->add_option("--report", o.report, "F1 report CSV");

  auto* predict = app.add_subcommand("predict-pipeline", "Chained forecast -> presence F1 per horizon, heatmaps");
  add_common(predict, o);
  predict->add_option("--fisheries", o.fisheries, "Fisheries CSV");
  predict->add_option("--grids", o.data, "BTG1 grid series");
  predict->add_option("--ckpt", o.ckpt, "Forecaster checkpoint");
  predict->add_option("--models", o.model_prefix, "Model prefix");

  auto* sens = app.add_subcommand("sensitivity", "Mean presence probability under temperature offsets");
  add_common(sens, o);
  sens->add_option("--model", o.model, "Model file; omit to sweep every species model");
  sens->add_option("--grids", o.data, "BTG1 grid series");
  sens->add_option("--date", o.date, "Day to perturb (YYYY-MM-DD); default first test day");
  sens->add_option("--offsets", o.offsets, "a..b or a comma list, °C (write --offsets=-2..7)");
  sens->add_option("--report", o.report, "Sweep CSV (with --model)");

  auto* all = app.add_subcommand("run-all", "Run every stage and write a manifest");
  add_common(all, o);
  all->add_flag("--resume", o.resume, "Skip stages completed under the same config");

  CLI11_PARSE(app, argc, argv);

  const std::pair<CLI::App*, std::function<void()>> actions[] = {
      {synth_cmd, [&] { synth(o); }},
      {train_fc, [&] { train_forecast(o); }},
      {eval_fc, [&] { eval_forecast(o); }},
      {train_gb, [&] { train_gbm(o); }},
      {eval_gb, [&] { eval_gbm(o); }},
      {predict, [&] { fishcast::stage_predict_pipeline(base_config(o)); }},
      {sens, [&] { sensitivity(o); }},
      {all, [&] { fishcast::run_all(base_config(o), o.resume); }},
  };
  for (const auto& [cmd, action] : actions) {
    if (!cmd->parsed()) continue;
    try {
      action();
    } catch (const fishcast::StageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: [" << cmd->get_name() << "] " << e.what() << "\n";
      return 2;
    }
  }
  return 0;
}
