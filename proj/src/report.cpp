#include "teffect/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "teffect/csv.hpp"

namespace teffect {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

double compute_uplift(const EffectEstimate& estimate, double control_post_mean) {
    if (control_post_mean == 0.0) {
        throw EstimationError("ZeroControlBaseline", "control post-window mean is zero");
    }
    return 100.0 * estimate.ate / control_post_mean;
}

// ---------------------------------------------------------------------------
// result.json
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSchemaVersion = "1.0";

double r6(double x) { return round_sig(x, 6); }

json estimate_json(const EffectEstimate& e) {
    json j;
    j["estimator"] = e.estimator_id;
    j["ate"] = r6(e.ate);
    j["se"] = r6(e.se);
    j["ci95"] = {r6(e.ci_lo), r6(e.ci_hi)};
    j["n_treated"] = e.n_treated;
    j["n_control"] = e.n_control;
    return j;
}

json cohort_json(const CohortEstimate& part) {
    json j;
    json times = json::array();
    for (const auto& d : part.cohort.treatment_times) times.push_back(d.iso());
    j["treatment_times"] = times;
    j["n_treated"] = part.cohort.n_treated();
    j["flagged"] = part.cohort.flagged;
    j["ate"] = r6(part.estimate.ate);
    j["se"] = r6(part.estimate.se);
    return j;
}

}  // namespace

std::string write_result(const StudyResult& study, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["seed"] = study.seed;
    doc["selected"] = estimate_json(study.selected);
    doc["uplift_percent"] = r6(study.uplift_percent);
    doc["control_post_mean"] = r6(study.control_post_mean);

    json candidates = json::array();
    for (const auto& c : study.all_candidates) candidates.push_back(estimate_json(c));
    doc["candidates"] = candidates;

    json cohorts = json::array();
    for (const auto& part : study.cohorts) cohorts.push_back(cohort_json(part));
    doc["cohorts"] = cohorts;

    {
        json trace;
        const RuleFacts& f = study.trace.facts;
        json facts;
        facts["total_events"] = f.total_events;
        facts["shape"] = shape_name(f.shape);
        facts["max_treated_per_cohort"] = f.max_treated_per_cohort;
        facts["n_valid_cohorts"] = f.n_valid_cohorts;
        facts["n_treated_units"] = f.n_treated_units;
        facts["n_control_units"] = f.n_control_units;
        facts["n_covariates"] = f.n_covariates;
        facts["pre_periods"] = f.pre_periods;
        facts["post_periods"] = f.post_periods;
        trace["facts"] = facts;
        trace["rules"] = study.trace.candidates.rationale;
        trace["candidates"] = study.trace.candidates.estimator_ids;
        if (study.trace.override_algorithm.has_value()) {
            trace["override"] = *study.trace.override_algorithm;
        } else {
            trace["override"] = nullptr;
        }
        json table = json::array();
        for (const auto& row : study.trace.eligibility) {
            json r;
            r["estimator"] = row.estimator_id;
            r["ate"] = r6(row.ate);
            r["se"] = r6(row.se);
            r["peer_votes"] = row.peer_votes;
            r["eligible"] = row.eligible;
            table.push_back(r);
        }
        trace["eligibility"] = table;
        trace["voting_degraded"] = study.trace.voting_degraded;
        trace["selected"] = study.trace.selected_id;
        doc["decision_trace"] = trace;
    }

    {
        json validation;
        json tests = json::array();
        for (const auto& t : study.validation.tests) {
            json row;
            row["name"] = t.name;
            row["original_ate"] = r6(t.original_ate);
            row["perturbed_ate"] = r6(t.perturbed_ate);
            row["threshold"] = r6(t.threshold_used);
            row["passed"] = t.passed;
            if (!t.note.empty()) row["note"] = t.note;
            tests.push_back(row);
        }
        validation["tests"] = tests;
        validation["overall_passed"] = study.validation.overall_passed;
        doc["validation"] = validation;
    }

    doc["warnings"] = study.warnings;
    {
        // basenames only: identical studies serialize identically regardless
        // of the output directory
        json names = json::array();
        for (const auto& p : study.artifact_paths) names.push_back(fs::path(p).filename().string());
        doc["artifacts"] = names;
    }

    std::string path = (fs::path(out_dir) / "result.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("FileNotWritable", "cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("FileNotWritable", "write failed for '" + path + "'");
    return path;
}

// ---------------------------------------------------------------------------
// plots
// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Series {
    std::string name;
    std::vector<double> values;
    bool dashed = false;
};

// Standalone SVG 1.1 line chart; vertical dotted markers at the given x
// positions (index space).
std::string svg_line_chart(const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series, const std::vector<int>& markers,
                           const std::string& title) {
    const int width = 720, height = 420;
    const int ml = 64, mr = 16, mt = 28, mb = 44;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        for (double v : s.values) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo) || lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const std::size_t n = x_labels.size();
    auto x_at = [&](std::size_t i) {
        return ml + (n <= 1 ? plot_w / 2 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1));
    };
    auto y_at = [&](double v) { return mt + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    static const char* palette[] = {"#d95f02", "#1f77b4", "#2ca02c", "#9467bd"};
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << ml << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << "</text>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
        << "\" y2=\"" << mt + plot_h << "\" stroke=\"#333\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
        << "\" stroke=\"#333\"/>\n";
    // y-axis labels
    for (int k = 0; k <= 4; ++k) {
        double v = lo + (hi - lo) * k / 4.0;
        svg << "<text x=\"4\" y=\"" << y_at(v) + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
            << round_sig(v, 4) << "</text>\n";
    }
    // x labels: first, markers, last
    std::set<int> label_ix = {0, static_cast<int>(n) - 1};
    for (int m : markers) label_ix.insert(m);
    for (int ix : label_ix) {
        if (ix < 0 || ix >= static_cast<int>(n)) continue;
        svg << "<text x=\"" << x_at(static_cast<std::size_t>(ix)) - 30 << "\" y=\"" << height - 16
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << x_labels[static_cast<std::size_t>(ix)]
            << "</text>\n";
    }
    for (int m : markers) {
        if (m < 0 || m >= static_cast<int>(n)) continue;
        svg << "<line x1=\"" << x_at(static_cast<std::size_t>(m)) << "\" y1=\"" << mt << "\" x2=\""
            << x_at(static_cast<std::size_t>(m)) << "\" y2=\"" << mt + plot_h
            << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        svg << "<polyline fill=\"none\" stroke=\"" << palette[s % 4] << "\" stroke-width=\"1.6\"";
        if (series[s].dashed) svg << " stroke-dasharray=\"6 4\"";
        svg << " points=\"";
        for (std::size_t i = 0; i < series[s].values.size() && i < n; ++i) {
            if (!std::isfinite(series[s].values[i])) continue;
            svg << x_at(i) << "," << y_at(series[s].values[i]) << " ";
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << ml + 8 + 150 * static_cast<double>(s) << "\" y=\"" << mt + 14
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << palette[s % 4] << "\">"
            << series[s].name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("FileNotWritable", "cannot write '" + path + "'");
    out << content;
}

// Render the SVG from the CSV on disk so both artifacts encode the same
// series by construction.
std::string svg_from_csv(const std::string& csv_path, const std::vector<int>& markers,
                         const std::string& title, bool second_dashed) {
    CsvTable table = read_csv(csv_path);
    std::vector<std::string> labels;
    std::vector<Series> series;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        Series s;
        s.name = table.header[c];
        s.dashed = second_dashed && c == 2;
        series.push_back(s);
    }
    for (const auto& row : table.rows) {
        labels.push_back(row[0]);
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            double v = row[c].empty() ? missing_value() : std::strtod(row[c].c_str(), nullptr);
            series[c - 1].values.push_back(v);
        }
    }
    return svg_line_chart(labels, series, markers, title);
}

}  // namespace

std::vector<std::string> emit_plots(const StudyResult& study, const StudyConfig& config,
                                    const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::vector<std::string> paths;
    const PanelDataset& panel = study.panel;

    // Per-cohort treated vs control trend.
    std::set<std::string> treated_anywhere;
    for (const auto& part : study.cohort_list) {
        for (const auto& id : part.treated_ids) treated_anywhere.insert(id);
    }
    for (std::size_t ci = 0; ci < study.cohort_list.size(); ++ci) {
        const Cohort& cohort = study.cohort_list[ci];
        int from = std::max(0, cohort.window_start - config.pre_window);
        int to = std::min(static_cast<int>(panel.n_periods()) - 1,
                          cohort.window_end + config.post_window);
        std::set<std::string> cohort_treated(cohort.treated_ids.begin(), cohort.treated_ids.end());

        CsvTable table;
        table.header = {panel.time_column, "treated_mean", "control_mean"};
        for (int t = from; t <= to; ++t) {
            std::vector<double> treated_vals, control_vals;
            for (std::size_t u = 0; u < panel.n_units(); ++u) {
                int64_t r = panel.row_of(static_cast<int32_t>(u), t);
                if (r < 0) continue;
                double v = panel.outcome[static_cast<std::size_t>(r)];
                if (is_missing(v)) continue;
                const std::string& id = panel.units[u];
                if (cohort_treated.count(id)) treated_vals.push_back(v);
                else if (!treated_anywhere.count(id)) control_vals.push_back(v);
            }
            table.rows.push_back({panel.grid[static_cast<std::size_t>(t)].iso(),
                                  num(mean_of(treated_vals)), num(mean_of(control_vals))});
        }
        std::string csv_path = (fs::path(out_dir) / ("trend_" + std::to_string(ci) + ".csv")).string();
        write_csv(csv_path, table);
        paths.push_back(csv_path);

        std::vector<int> markers = {cohort.window_start - from, cohort.window_end - from};
        std::string svg_path = (fs::path(out_dir) / ("trend_" + std::to_string(ci) + ".svg")).string();
        write_text(svg_path,
                   svg_from_csv(csv_path, markers, "outcome trend, cohort " + std::to_string(ci), false));
        paths.push_back(svg_path);
    }

    // GSC actual vs synthetic fit.
    if (study.gsc.has_value()) {
        const CounterfactualSeries& s = study.gsc->series;
        CsvTable table;
        table.header = {panel.time_column, "actual", "synthetic"};
        for (std::size_t t = 0; t < s.dates.size(); ++t) {
            table.rows.push_back({s.dates[t].iso(), num(s.actual[t]), num(s.predicted_y0[t])});
        }
        std::string csv_path = (fs::path(out_dir) / "gsc_fit.csv").string();
        write_csv(csv_path, table);
        paths.push_back(csv_path);
        std::string svg_path = (fs::path(out_dir) / "gsc_fit.svg").string();
        write_text(svg_path, svg_from_csv(csv_path, {s.treatment_marker},
                                          "treated vs synthetic control", true));
        paths.push_back(svg_path);
    }
    return paths;
}

std::string write_all_artifacts(StudyResult& study, const StudyConfig& config,
                                const std::string& out_dir) {
    study.artifact_paths = emit_plots(study, config, out_dir);
    std::string path = write_result(study, out_dir);
    study.artifact_paths.push_back(path);
    return path;
}

}  // namespace teffect
