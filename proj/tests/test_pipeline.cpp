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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "fishcast/errors.hpp"
#include "fishcast/pipeline.hpp"
#include "fishcast/report_format.hpp"
#include "test_util.hpp"

using namespace fishcast;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# tiny end-to-end run
synth_days = 200
synth_rows = 8
synth_cols = 8
layers = 4,4
ghu_channels = 4
kernel = 3
epochs = 1
max_batches_per_epoch = 3
max_val_sequences = 8
records_per_species = 2000
gbm_trees = 20
)";

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  return out;
}

ForecastModel untrained_model(const TemperatureGridSeries& series, std::size_t h, std::size_t p) {
  NetworkConfig nc;
  nc.layer_channels = {3, 3};
  nc.ghu_channels = 3;
  nc.kernel = 3;
  nc.history = h;
  nc.horizon = p;
  nc.residual = true;
  ForecastModel m;
  m.network = NetworkParams<float>::init(nc, 1);
  m.norm = NormStats{11.0, 2.0};
  m.grid = series.shape();
  return m;
}

SynthConfig small_synth() {
  SynthConfig c;
  c.days = 60;
  c.rows = 8;
  c.cols = 9;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_pipeline_config(std::string(kTinyConfig) +
                                         "output_dir = /tmp/x\nval_start = 2006-03-01\nhorizons = 1,3\n"
                                         "residual = true\nlearning_rate = 0.005   # inline comment\n"
                                         "sensitivity_offsets = -1..2\n");
  CHECK(cfg.output_dir == "/tmp/x");
  CHECK(cfg.synth_config.days == 200);
  CHECK(cfg.train.network.layer_channels == std::vector<std::size_t>{4, 4});
  CHECK(cfg.train.network.kernel == 3);
  CHECK(cfg.train.network.residual);
  CHECK(cfg.train.adam.learning_rate == 0.005);
  CHECK(cfg.gbm.n_trees == 20);
  CHECK(cfg.horizons == std::vector<std::size_t>{1, 3});
  CHECK(cfg.val_start == Date{std::chrono::year{2006} / 3 / 1});
  CHECK(cfg.sensitivity_offsets == std::vector<double>{-1, 0, 1, 2});
  CHECK(cfg.resolve("a.csv") == fs::path("/tmp/x/a.csv"));
  CHECK(cfg.resolve("/abs/b.csv") == fs::path("/abs/b.csv"));
  CHECK(cfg.gbm_path(Species::kSole, FeatureSet::kWithTemperature) == fs::path("/tmp/x/gbm_SOL.txt"));
  CHECK(cfg.gbm_path(Species::kPlaice, FeatureSet::kWithoutTemperature) == fs::path("/tmp/x/gbm_PLE_notemp.txt"));

  SUBCASE("canonical text parses back to the same config") {
    const auto again = parse_pipeline_config(cfg.canonical());
    CHECK(again.canonical() == cfg.canonical());
    CHECK(again.hash() == cfg.hash());
    auto changed = cfg;
    changed.gbm.n_trees = 21;
    CHECK(changed.hash() != cfg.hash());
  }
  SUBCASE("errors name the line") {
    const auto fails_with = [](const std::string& text, const std::string& needle) {
      try {
        parse_pipeline_config(text);
      } catch (const FormatError& e) {
        INFO(e.what());
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
        return;
      }
      FAIL("no FormatError for: " << text);
    };
    fails_with("epochs = 3\nnot_a_key = 1\n", "line 2");
    fails_with("epochs = three\n", "epochs");
    fails_with("just text\n", "line 1");
    fails_with("val_start = 2006-02-30\n", "val_start");
    fails_with("layers = 4\n", "layers");
    fails_with("residual = maybe\n", "residual");
  }
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/fishcast.cfg"), IoError);
  PipelineConfig over;
  apply_config_entry(over, "epochs", "7");
  CHECK(over.train.epochs == 7);
}

TEST_CASE("offset parsing") {
  CHECK(parse_offsets("-2..7") == default_offsets());
  CHECK(parse_offsets("0.5,1,-1.5") == std::vector<double>{0.5, 1, -1.5});
  CHECK_THROWS(parse_offsets("3..1"));
  CHECK_THROWS(parse_offsets("a,b"));
  CHECK(sensitivity_csv(std::vector<std::pair<double, double>>{{-1, 0.25}, {0, 0.5}}) ==
        "offset,mean_probability\n-1,0.25\n0,0.5\n");
}

TEST_CASE("chained history windows") {
  // h = 4: target 10, k = 1 uses days 6..9; k = 4 uses 3..6.
  CHECK(chained_history(10, 1, 4) == IndexRange{6, 10});
  CHECK(chained_history(10, 4, 4) == IndexRange{3, 7});
  CHECK(chained_history(7, 4, 4) == IndexRange{0, 4});
  CHECK_THROWS_AS(chained_history(6, 4, 4), InsufficientDataError);
  CHECK_THROWS_AS(chained_history(2, 1, 4), InsufficientDataError);
  for (std::size_t d = 8; d < 40; ++d)
    for (std::size_t k = 1; k <= 4; ++k)
      for (std::size_t h = 1; h <= 5; ++h) {
        if (d < k + h - 1) continue;
        const auto r = chained_history(d, k, h);
        CHECK(r.size() == h);
        CHECK(r.end == d - k + 1);
        CHECK(r.end <= d);  // never reaches the target day
      }
}

TEST_CASE("chained forecasts") {
  const auto series = synth_series(small_synth(), 4);
  const auto model = untrained_model(series, 3, 4);
  const std::size_t cells = series.shape().cells();
  const std::vector<std::size_t> horizons{1, 2, 3, 4};

  SUBCASE("equal to a direct forecast of the right window") {
    for (std::size_t d : {6u, 20u, 59u})
      for (std::size_t k : horizons) {
        const auto r = chained_history(d, k, 3);
        std::vector<std::vector<double>> hist;
        for (std::size_t t = r.begin; t < r.end; ++t) hist.emplace_back(series.frame(t).begin(), series.frame(t).end());
        const auto direct = forecast(model, hist)[k - 1];
        const auto chained = chained_forecast(series, model, series.date_at(d), k);
        REQUIRE(chained.size() == cells);
        for (std::size_t c = 0; c < cells; ++c) {
          if (std::isnan(direct[c])) {
            CHECK(std::isnan(chained[c]));
          } else {
            CHECK(chained[c] == direct[c]);
          }
        }
      }
  }
  SUBCASE("batched form equals the single form") {
    const std::vector<std::size_t> targets{10, 11, 30, 45};
    const auto all = chained_forecasts(series, model, targets, horizons);
    REQUIRE(all.size() == 4);
    for (std::size_t ki = 0; ki < 4; ++ki)
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto one = chained_forecast(series, model, series.date_at(targets[i]), horizons[ki]);
        for (std::size_t c = 0; c < cells; ++c)
          if (!series.land_mask().is_land(c)) CHECK(all[ki][i][c] == doctest::Approx(one[c]).epsilon(1e-9));
      }
  }
  SUBCASE("no look-ahead: frames after the window do not matter") {
    const std::size_t d = 30;
    for (std::size_t k : horizons) {
      const auto base = chained_forecast(series, model, series.date_at(d), k);
      std::vector<double> values(series.values().begin(), series.values().end());
      for (std::size_t t = d - k + 1; t < series.days(); ++t)
        for (std::size_t c = 0; c < cells; ++c)
          if (!series.land_mask().is_land(c)) values[t * cells + c] += 5.0;
      const TemperatureGridSeries altered(series.days(), series.shape(), values, series.start_date());
      const auto again = chained_forecast(altered, model, series.date_at(d), k);
      for (std::size_t c = 0; c < cells; ++c)
        if (!series.land_mask().is_land(c)) CHECK(again[c] == base[c]);
    }
  }
  CHECK_THROWS_AS(chained_forecast(series, model, series.date_at(4), 3), InsufficientDataError);
}

TEST_CASE("heatmaps") {
  const LandMask mask(GridShape{2, 3}, {0, 0, 1, 0, 0, 0});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> probs{0.0, 1.5, nan, -0.2, 0.5, 1.0};
  const auto pgm = heatmap_pgm(probs, mask, HeatmapKind::kProbability);
  std::istringstream in(pgm);
  std::string magic, line;
  std::getline(in, magic);
  CHECK(magic == "P2");
  std::vector<std::string> comments;
  while (in.peek() == '#') {
    std::getline(in, line);
    comments.push_back(line);
  }
  REQUIRE_FALSE(comments.empty());
  CHECK(pgm.find("# scale: 1 = 0, 255 = 1, 0 = land") != std::string::npos);
  std::size_t w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(maxval == 255);
  std::vector<int> levels(6);
  for (auto& l : levels) in >> l;
  CHECK(levels == std::vector<int>{1, 255, 0, 1, 128, 255});

  test::TempDir dir("heat");
  emit_heatmap(probs, mask, dir / "p", HeatmapKind::kProbability);
  CHECK(read_text_file(dir / "p.pgm") == pgm);
  GridShape shape;
  const auto back = parse_grid_csv(read_text_file(dir / "p.csv"), shape);
  CHECK(shape == GridShape{2, 3});
  CHECK(back[0] == 0.0);
  CHECK(back[1] == 1.0);  // clamped
  CHECK(std::isnan(back[2]));
  CHECK(back[3] == 0.0);
  CHECK(back[4] == 0.5);
  CHECK(read_text_file(dir / "p_mask.csv") == "0,0,1\n0,0,0\n");

  SUBCASE("temperature maps span the sea range and ignore land values") {
    const std::vector<double> temps{10.0, 12.0, 99.0, 14.0, 11.0, 13.0};
    const auto t = heatmap_pgm(temps, mask, HeatmapKind::kTemperature);
    CHECK(t.find("# scale: 1 = 10, 255 = 14, 0 = land") != std::string::npos);
    CHECK(t == heatmap_pgm(temps, mask, HeatmapKind::kTemperature));
    auto t2 = temps;
    t2[2] = -50.0;
    CHECK(heatmap_pgm(t2, mask, HeatmapKind::kTemperature) == t);
  }
}

TEST_CASE("end-to-end run") {
  test::TempDir dir("run");
  auto cfg = parse_pipeline_config(kTinyConfig);
  cfg.output_dir = dir.path() / "out";
  run_all(cfg, false);
  const auto first = snapshot_dir(cfg.output_dir);

  for (const char* name : {"config.txt", "manifest.txt", "series.btg", "fisheries.csv", "forecaster.fck",
                           "forecast_errors.csv", "forecast_errors_baseline.csv", "gbm_SOL.txt", "gbm_PLE_notemp.txt",
                           "gbm_eval.csv", "horizon_report.csv", "sensitivity_SOL.csv", "sensitivity_PLE.csv"}) {
    INFO(name);
    CHECK(first.count(name) == 1);
  }
  CHECK(first.at("manifest.txt").find("stage sensitivity done") != std::string::npos);
  CHECK(first.at("forecast_errors.csv").rfind("horizon,mae,rmse\n", 0) == 0);

  SUBCASE("a rerun reproduces every byte") {
    fs::remove_all(cfg.output_dir);
    run_all(cfg, false);
    const auto second = snapshot_dir(cfg.output_dir);
    CHECK(second.size() == first.size());
    for (const auto& [name, bytes] : first) {
      INFO(name);
      REQUIRE(second.count(name) == 1);
      CHECK(second.at(name) == bytes);
    }
  }
  SUBCASE("resume skips completed stages") {
    const auto ckpt = cfg.resolve(cfg.checkpoint);
    const auto stamp = fs::last_write_time(ckpt);
    // A stale marker inside a recorded output shows whether the stage ran.
    const auto report = cfg.resolve(cfg.gbm_report);
    write_text_file(report, "untouched\n");
    run_all(cfg, true);
    CHECK(fs::last_write_time(ckpt) == stamp);
    CHECK(read_text_file(report) == "untouched\n");

    auto changed = cfg;
    changed.gbm.n_trees = 10;
    run_all(changed, true);
    CHECK(read_text_file(report) != "untouched\n");
  }
}

TEST_CASE("stages report missing inputs") {
  test::TempDir dir("missing");
  auto cfg = parse_pipeline_config(kTinyConfig);
  cfg.output_dir = dir.path();
  try {
    stage_train_forecast(cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    const std::string what = e.what();
    CHECK(what.find("[train-forecast]") != std::string::npos);
    CHECK(what.find("series.btg") != std::string::npos);
  }
  CHECK_THROWS_AS(stage_eval_gbm(cfg), StageError);
  CHECK_THROWS_AS(stage_sensitivity(cfg), StageError);
}
