#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "teffect/csv.hpp"
#include "teffect/decide.hpp"
#include "teffect/report.hpp"

using namespace teffect;
using teffect::testing::make_panel;
using teffect::testing::make_treatment;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("teffect_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

// Small panel study driven end to end through run_study.
StudyResult tiny_panel_study(StudyConfig& config_out) {
    Rng noise(3);
    std::vector<double> cell(static_cast<std::size_t>(40 * 20));
    for (auto& v : cell) v = noise.normal();
    PanelDataset panel = make_panel(40, 20, [&](int u, int t) {
        return 10.0 + 0.5 * u + 0.2 * t + 0.3 * cell[static_cast<std::size_t>(u * 20 + t)] +
               ((u < 6 && t >= 10) ? 4.0 : 0.0);
    });
    TreatmentTable treatment = make_treatment(panel, {{0, 10}, {1, 10}, {2, 10}, {3, 11}, {4, 11}, {5, 11}});
    ParsedInputs inputs;
    inputs.panel = panel;
    inputs.treatment = treatment;
    inputs.config = parse_config_json(R"({
      "time_column":"date","unit_column":"unit_id","outcome_column":"y",
      "pre_window":8,"post_window":5,"seed":11,
      "cohort_min_times":1,"cohort_max_times":2,"cohort_min_treated":3,
      "hyperparameters":{"forest_trees":15,"boosted_rounds":15,"bootstrap_replicates":25}
    })");
    config_out = inputs.config;
    return run_study(inputs);
}

}  // namespace

TEST_CASE("uplift arithmetic") {
    CHECK(compute_uplift(make_estimate("x", 2.0, 0.1, 1, 1), 40.0) == doctest::Approx(5.0));
    CHECK(compute_uplift(make_estimate("x", 0.0, 0.1, 1, 1), 40.0) == doctest::Approx(0.0));
    CHECK_THROWS_WITH_AS(compute_uplift(make_estimate("x", 2.0, 0.1, 1, 1), 0.0),
                         doctest::Contains("ZeroControlBaseline"), EstimationError);
}

TEST_CASE("uplift is invariant to common rescaling") {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        double ate = rng.uniform(-10, 10);
        double baseline = rng.uniform(0.5, 100);
        double c = rng.uniform(0.1, 50);
        double a = compute_uplift(make_estimate("x", ate, 0.1, 1, 1), baseline);
        double b = compute_uplift(make_estimate("x", c * ate, 0.1, 1, 1), c * baseline);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("result json is stable, versioned, and round-trips") {
    StudyConfig config;
    StudyResult study = tiny_panel_study(config);
    std::string dir = temp_dir("result");
    std::string path = write_result(study, dir);
    std::string text = slurp(path);

    CHECK(text.find("\"schema_version\": \"1.0\"") != std::string::npos);
    CHECK(text.find("\"selected\"") != std::string::npos);
    CHECK(text.find("\"decision_trace\"") != std::string::npos);
    CHECK(text.find("\"validation\"") != std::string::npos);

    // key order is pinned: schema_version first, then seed
    CHECK(text.find("schema_version") < text.find("\"seed\""));

    // byte-identical on rewrite
    std::string dir2 = temp_dir("result2");
    CHECK(slurp(write_result(study, dir2)) == text);
}

TEST_CASE("floats in the result file carry six significant digits") {
    StudyResult study;
    study.selected = make_estimate("dml_linear", 1.23456789, 0.000123456789, 3, 5);
    study.all_candidates = {study.selected};
    study.uplift_percent = 12.3456789;
    std::string dir = temp_dir("digits");
    std::string text = slurp(write_result(study, dir));
    CHECK(text.find("1.23457") != std::string::npos);
    CHECK(text.find("12.3457") != std::string::npos);
    CHECK(text.find("1.23456789") == std::string::npos);
}

TEST_CASE("trend plots cover the pre window, the cohort span, and the post window") {
    StudyConfig config;
    StudyResult study = tiny_panel_study(config);
    REQUIRE_FALSE(study.cohort_list.empty());
    std::string dir = temp_dir("plots");
    auto paths = emit_plots(study, config, dir);
    REQUIRE_FALSE(paths.empty());

    CsvTable trend = read_csv(paths[0]);
    const Cohort& cohort = study.cohort_list[0];
    int span = cohort.window_end - cohort.window_start + 1;
    CHECK(static_cast<int>(trend.rows.size()) == config.pre_window + span + config.post_window);
    CHECK(trend.header == std::vector<std::string>{"date", "treated_mean", "control_mean"});

    // companion SVG exists and draws the two series
    std::string svg = slurp(paths[1]);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("treated_mean") != std::string::npos);
}

TEST_CASE("single treated unit trend equals that unit's series") {
    Rng noise(9);
    PanelDataset panel = make_panel(10, 14, [&](int u, int t) {
        return 5.0 + u + 0.1 * t + ((u == 0 && t >= 8) ? 2.0 : 0.0);
    });
    TreatmentTable treatment = make_treatment(panel, {{0, 8}});
    ParsedInputs inputs;
    inputs.panel = panel;
    inputs.treatment = treatment;
    inputs.config = parse_config_json(R"({
      "time_column":"date","unit_column":"unit_id","outcome_column":"y",
      "pre_window":7,"post_window":4,"seed":2,"cohort_min_treated":1,
      "hyperparameters":{"forest_trees":10,"boosted_rounds":10,"bootstrap_replicates":15,
                         "forest_min_leaf":2,"k_folds":3}
    })");
    StudyResult study = run_study(inputs);
    std::string dir = temp_dir("single");
    auto paths = emit_plots(study, inputs.config, dir);

    // find the trend CSV and compare treated_mean to unit 0's outcomes
    std::string trend_path;
    for (const auto& p : paths) {
        if (p.find("trend_0.csv") != std::string::npos) trend_path = p;
    }
    REQUIRE_FALSE(trend_path.empty());
    CsvTable trend = read_csv(trend_path);
    for (const auto& row : trend.rows) {
        Date d = Date::parse_iso(row[0]);
        auto it = std::lower_bound(panel.grid.begin(), panel.grid.end(), d);
        int t = static_cast<int>(it - panel.grid.begin());
        int64_t r = panel.row_of(0, t);
        REQUIRE(r >= 0);
        CHECK(std::strtod(row[1].c_str(), nullptr) ==
              doctest::Approx(panel.outcome[static_cast<std::size_t>(r)]));
    }
}

TEST_CASE("gsc studies emit the actual vs synthetic series") {
    Rng noise(17);
    std::vector<double> cell(static_cast<std::size_t>(25 * 26));
    for (auto& v : cell) v = noise.normal();
    PanelDataset panel = make_panel(25, 26, [&](int u, int t) {
        return 3.0 + 0.4 * u + 0.15 * t + 0.25 * cell[static_cast<std::size_t>(u * 26 + t)] +
               ((u == 0 && t >= 14) ? 5.0 : 0.0);
    });
    TreatmentTable treatment = make_treatment(panel, {{0, 14}});
    ParsedInputs inputs;
    inputs.panel = panel;
    inputs.treatment = treatment;
    inputs.config = parse_config_json(R"({
      "time_column":"date","unit_column":"unit_id","outcome_column":"y",
      "pre_window":12,"post_window":6,"seed":5,
      "hyperparameters":{"bootstrap_replicates":25,"gsc_rank":0}
    })");
    StudyResult study = run_study(inputs);
    REQUIRE(study.selected.estimator_id == "gsc");
    std::string dir = temp_dir("gsc_fit");
    auto paths = emit_plots(study, inputs.config, dir);

    std::string fit_path;
    for (const auto& p : paths) {
        if (p.find("gsc_fit.csv") != std::string::npos) fit_path = p;
    }
    REQUIRE_FALSE(fit_path.empty());
    CsvTable fit = read_csv(fit_path);
    CHECK(fit.rows.size() == panel.n_periods());
    CHECK(fit.header == std::vector<std::string>{"date", "actual", "synthetic"});

    // pre-treatment fit tracks the actual series
    double pre_rmse = 0.0;
    for (int t = 0; t < 14; ++t) {
        double actual = std::strtod(fit.rows[static_cast<std::size_t>(t)][1].c_str(), nullptr);
        double synthetic = std::strtod(fit.rows[static_cast<std::size_t>(t)][2].c_str(), nullptr);
        pre_rmse += (actual - synthetic) * (actual - synthetic);
    }
    pre_rmse = std::sqrt(pre_rmse / 14.0);
    CHECK(pre_rmse < 0.5);

    // SVG encodes the same series (generated from the CSV)
    std::string svg;
    for (const auto& p : paths) {
        if (p.find("gsc_fit.svg") != std::string::npos) svg = slurp(p);
    }
    REQUIRE_FALSE(svg.empty());
    CHECK(svg.find("stroke-dasharray") != std::string::npos);  // synthetic drawn dashed
}

TEST_CASE("write_all_artifacts lists everything it wrote") {
    StudyConfig config;
    StudyResult study = tiny_panel_study(config);
    std::string dir = temp_dir("all");
    std::string result_path = write_all_artifacts(study, config, dir);
    CHECK_FALSE(study.artifact_paths.empty());
    CHECK(std::filesystem::exists(result_path));
    for (const auto& p : study.artifact_paths) CHECK(std::filesystem::exists(p));
}
