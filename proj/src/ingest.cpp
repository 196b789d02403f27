#include "teffect/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "teffect/cohort.hpp"
#include "teffect/csv.hpp"

namespace teffect {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kKnownKeys = {
    "time_column",     "unit_column",        "outcome_column",
    "pre_window",      "post_window",        "algorithm",
    "scale_columns",   "scale_method",       "aggregation",
    "cohort_min_times", "cohort_max_times",  "cohort_min_treated",
    "lags",            "seed",               "hyperparameters",
    "refutation",      "treatment_unit_column", "treatment_date_column",
};

void require_key(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ValidationError("MissingConfigField", std::string("config is missing '") + key + "'");
    }
}

int positive_int(const json& j, const char* key) {
    int v = j.at(key).get<int>();
    if (v < 1) {
        throw ValidationError("InvalidConfigValue", std::string("'") + key + "' must be >= 1");
    }
    return v;
}

}  // namespace

StudyConfig parse_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError("InvalidConfigJson", e.what());
    }
    if (!j.is_object()) throw ValidationError("InvalidConfigJson", "config must be a JSON object");

    StudyConfig cfg;
    require_key(j, "time_column");
    require_key(j, "unit_column");
    require_key(j, "outcome_column");
    require_key(j, "pre_window");
    require_key(j, "post_window");

    cfg.time_column = j.at("time_column").get<std::string>();
    cfg.unit_column = j.at("unit_column").get<std::string>();
    cfg.outcome_column = j.at("outcome_column").get<std::string>();
    cfg.pre_window = positive_int(j, "pre_window");
    cfg.post_window = positive_int(j, "post_window");

    if (j.contains("algorithm")) cfg.algorithm = j.at("algorithm").get<std::string>();
    if (j.contains("scale_columns")) cfg.scale_columns = j.at("scale_columns").get<std::vector<std::string>>();
    if (j.contains("scale_method")) cfg.scale_method = j.at("scale_method").get<std::string>();
    if (j.contains("aggregation")) cfg.aggregation = j.at("aggregation").get<std::string>();
    if (j.contains("cohort_min_times")) cfg.cohort_min_times = positive_int(j, "cohort_min_times");
    if (j.contains("cohort_max_times")) cfg.cohort_max_times = positive_int(j, "cohort_max_times");
    if (j.contains("cohort_min_treated")) cfg.cohort_min_treated = positive_int(j, "cohort_min_treated");
    if (j.contains("lags")) cfg.lags = j.at("lags").get<std::vector<int>>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("treatment_unit_column"))
        cfg.treatment_unit_column = j.at("treatment_unit_column").get<std::string>();
    if (j.contains("treatment_date_column"))
        cfg.treatment_date_column = j.at("treatment_date_column").get<std::string>();

    if (cfg.cohort_max_times > 0 && cfg.cohort_min_times > cfg.cohort_max_times) {
        throw ValidationError("InvalidConfigValue", "cohort_min_times > cohort_max_times");
    }
    if (cfg.scale_method != "zscore" && cfg.scale_method != "minmax") {
        throw ValidationError("InvalidConfigValue", "scale_method must be 'zscore' or 'minmax'");
    }
    if (cfg.aggregation != "mean" && cfg.aggregation != "sum") {
        throw ValidationError("InvalidConfigValue", "aggregation must be 'mean' or 'sum'");
    }

    if (j.contains("hyperparameters")) {
        const json& h = j.at("hyperparameters");
        auto& hp = cfg.hp;
        if (h.contains("ridge_lambda")) hp.ridge_lambda = h.at("ridge_lambda").get<double>();
        if (h.contains("forest_trees")) hp.forest_trees = h.at("forest_trees").get<int>();
        if (h.contains("forest_max_depth")) hp.forest_max_depth = h.at("forest_max_depth").get<int>();
        if (h.contains("forest_min_leaf")) hp.forest_min_leaf = h.at("forest_min_leaf").get<int>();
        if (h.contains("forest_feature_subsample"))
            hp.forest_feature_subsample = h.at("forest_feature_subsample").get<double>();
        if (h.contains("boosted_rounds")) hp.boosted_rounds = h.at("boosted_rounds").get<int>();
        if (h.contains("boosted_learning_rate"))
            hp.boosted_learning_rate = h.at("boosted_learning_rate").get<double>();
        if (h.contains("boosted_max_depth")) hp.boosted_max_depth = h.at("boosted_max_depth").get<int>();
        if (h.contains("k_folds")) hp.k_folds = h.at("k_folds").get<int>();
        if (h.contains("crossfit_repetitions"))
            hp.crossfit_repetitions = h.at("crossfit_repetitions").get<int>();
        if (h.contains("bootstrap_replicates"))
            hp.bootstrap_replicates = h.at("bootstrap_replicates").get<int>();
        if (h.contains("gsc_rank")) hp.gsc_rank = h.at("gsc_rank").get<int>();
        if (h.contains("gsc_rank_max")) hp.gsc_rank_max = h.at("gsc_rank_max").get<int>();
        if (h.contains("gsc_tol")) hp.gsc_tol = h.at("gsc_tol").get<double>();
        if (h.contains("gsc_max_iter")) hp.gsc_max_iter = h.at("gsc_max_iter").get<int>();
    }
    if (j.contains("refutation")) {
        const json& r = j.at("refutation");
        auto& t = cfg.refute;
        if (r.contains("placebo_se_mult")) t.placebo_se_mult = r.at("placebo_se_mult").get<double>();
        if (r.contains("random_cc_pct")) t.random_cc_pct = r.at("random_cc_pct").get<double>();
        if (r.contains("unobserved_pct")) t.unobserved_pct = r.at("unobserved_pct").get<double>();
        if (r.contains("unobserved_strength"))
            t.unobserved_strength = r.at("unobserved_strength").get<double>();
        if (r.contains("subset_fraction")) t.subset_fraction = r.at("subset_fraction").get<double>();
        if (r.contains("subset_repetitions"))
            t.subset_repetitions = r.at("subset_repetitions").get<int>();
    }

    for (auto it = j.begin(); it != j.end(); ++it) {
        if (kKnownKeys.count(it.key()) == 0) {
            cfg.warnings.push_back("unknown config key '" + it.key() + "' ignored");
        }
    }
    return cfg;
}

StudyConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("FileNotReadable", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str());
}

// ---------------------------------------------------------------------------
// Treatment table
// ---------------------------------------------------------------------------

TreatmentTable parse_treatment_csv(const std::string& csv_text, const StudyConfig& config) {
    CsvTable csv = parse_csv(csv_text);
    int unit_col = csv.column(config.treatment_unit_column);
    int date_col = csv.column(config.treatment_date_column);
    if (unit_col < 0) {
        throw ValidationError("MissingTreatmentColumn",
                              "treatment CSV lacks column '" + config.treatment_unit_column + "'");
    }
    if (date_col < 0) {
        throw ValidationError("MissingTreatmentColumn",
                              "treatment CSV lacks column '" + config.treatment_date_column + "'");
    }
    std::vector<std::pair<std::string, Date>> rows;
    rows.reserve(csv.rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& row : csv.rows) {
        const std::string& unit = row[static_cast<std::size_t>(unit_col)];
        if (unit.empty()) throw ValidationError("EmptyUnitId", "treatment CSV has an empty unit id");
        if (!seen.insert(unit).second) {
            throw ValidationError("DuplicateTreatedUnit",
                                  "unit '" + unit + "' appears more than once in the treatment table");
        }
        rows.emplace_back(unit, Date::parse_iso(row[static_cast<std::size_t>(date_col)]));
    }
    std::sort(rows.begin(), rows.end());
    TreatmentTable table;
    table.units.reserve(rows.size());
    table.dates.reserve(rows.size());
    for (auto& [unit, date] : rows) {
        table.units.push_back(std::move(unit));
        table.dates.push_back(date);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Observations: period inference and grid construction
// ---------------------------------------------------------------------------

namespace {

double parse_numeric_cell(const std::string& cell, const std::string& column, bool is_outcome) {
    if (cell.empty()) return missing_value();
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == cell.c_str() || (end && *end != '\0')) {
        if (is_outcome) {
            throw ValidationError("NonNumericOutcome",
                                  "outcome column '" + column + "' has non-numeric value '" + cell + "'");
        }
        throw ValidationError("NonNumericCovariate",
                              "column '" + column + "' has non-numeric value '" + cell + "'");
    }
    return v;
}

int64_t month_index(const Date& d) { return static_cast<int64_t>(d.year) * 12 + (d.month - 1); }

// Index of a date on the period scale anchored at `anchor`.
int64_t period_index(const Date& d, PeriodKind kind, const Date& anchor) {
    switch (kind) {
        case PeriodKind::daily: return d.serial() - anchor.serial();
        case PeriodKind::weekly: return (d.serial() - anchor.serial()) / 7;
        case PeriodKind::monthly: return month_index(d) - month_index(anchor);
        case PeriodKind::yearly: return d.year - anchor.year;
        case PeriodKind::single: return 0;
    }
    return 0;
}

bool aligned(const Date& d, PeriodKind kind, const Date& anchor) {
    if (kind == PeriodKind::weekly) return (d.serial() - anchor.serial()) % 7 == 0;
    return true;
}

Date grid_date(int64_t index, PeriodKind kind, const Date& anchor) {
    switch (kind) {
        case PeriodKind::daily: return Date::from_serial(anchor.serial() + index);
        case PeriodKind::weekly: return Date::from_serial(anchor.serial() + 7 * index);
        case PeriodKind::monthly: {
            int64_t m = month_index(anchor) + index;
            int year = static_cast<int>(m / 12);
            int month = static_cast<int>(m % 12);
            if (month < 0) {
                month += 12;
                --year;
            }
            Date out{year, month + 1, anchor.day};
            // Clamp the anchor day into the target month.
            while (true) {
                try {
                    return Date::parse_iso(out.iso());
                } catch (const ValidationError&) {
                    --out.day;
                }
            }
        }
        case PeriodKind::yearly: return Date{anchor.year + static_cast<int>(index), anchor.month, anchor.day};
        case PeriodKind::single: return anchor;
    }
    return anchor;
}

PeriodKind kind_from_gap(int64_t days) {
    if (days == 1) return PeriodKind::daily;
    if (days == 7) return PeriodKind::weekly;
    if (days >= 28 && days <= 31) return PeriodKind::monthly;
    if (days >= 365 && days <= 366) return PeriodKind::yearly;
    return PeriodKind::single;  // sentinel: unsupported gap
}

}  // namespace

static PanelDataset parse_observations_impl(const CsvTable& csv, const StudyConfig& config,
                                            ParseReport& report) {
    int unit_col = csv.column(config.unit_column);
    int time_col = csv.column(config.time_column);
    int outcome_col = csv.column(config.outcome_column);
    if (unit_col < 0) {
        throw ValidationError("MissingUnitColumn",
                              "observations CSV lacks column '" + config.unit_column + "'");
    }
    if (time_col < 0) {
        throw ValidationError("MissingTimeColumn",
                              "observations CSV lacks column '" + config.time_column + "'");
    }
    if (outcome_col < 0) {
        throw ValidationError("MissingOutcomeColumn",
                              "observations CSV lacks outcome column '" + config.outcome_column + "'");
    }
    if (csv.rows.empty()) throw ValidationError("EmptyObservations", "observations CSV has no rows");

    PanelDataset panel;
    panel.unit_column = config.unit_column;
    panel.time_column = config.time_column;
    panel.outcome_column = config.outcome_column;
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
        if (static_cast<int>(c) == unit_col || static_cast<int>(c) == time_col ||
            static_cast<int>(c) == outcome_col)
            continue;
        panel.covariate_columns.push_back(csv.header[c]);
    }

    struct RawRow {
        std::string unit;
        Date date;
        double outcome;
        std::vector<double> cov;
    };
    std::vector<RawRow> raw;
    raw.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
        if (row.size() != csv.header.size()) {
            report.warnings.push_back("dropped malformed row with " + std::to_string(row.size()) +
                                      " fields");
            ++report.dropped_rows;
            continue;
        }
        RawRow r;
        r.unit = row[static_cast<std::size_t>(unit_col)];
        if (r.unit.empty()) throw ValidationError("EmptyUnitId", "observations CSV has an empty unit id");
        r.date = Date::parse_iso(row[static_cast<std::size_t>(time_col)]);
        r.outcome = parse_numeric_cell(row[static_cast<std::size_t>(outcome_col)],
                                       config.outcome_column, true);
        r.cov.reserve(panel.covariate_columns.size());
        std::size_t ci = 0;
        for (std::size_t c = 0; c < csv.header.size(); ++c) {
            if (static_cast<int>(c) == unit_col || static_cast<int>(c) == time_col ||
                static_cast<int>(c) == outcome_col)
                continue;
            r.cov.push_back(parse_numeric_cell(row[c], panel.covariate_columns[ci], false));
            ++ci;
        }
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw ValidationError("EmptyObservations", "observations CSV has no usable rows");

    // Distinct units, sorted.
    std::set<std::string> unit_set;
    for (const auto& r : raw) unit_set.insert(r.unit);
    panel.units.assign(unit_set.begin(), unit_set.end());
    std::unordered_map<std::string, int32_t> unit_of;
    for (std::size_t i = 0; i < panel.units.size(); ++i)
        unit_of[panel.units[i]] = static_cast<int32_t>(i);

    // Duplicate (unit, date) detection.
    {
        std::set<std::pair<std::string, int64_t>> seen;
        for (const auto& r : raw) {
            if (!seen.emplace(r.unit, r.date.serial()).second) {
                throw ValidationError("DuplicateUnitDate", "duplicate observation for unit '" + r.unit +
                                                               "' at " + r.date.iso());
            }
        }
    }

    // Period inference: modal day-gap between consecutive dates within units.
    std::map<std::string, std::vector<Date>> per_unit;
    for (const auto& r : raw) per_unit[r.unit].push_back(r.date);
    std::map<int64_t, int64_t> gap_counts;
    int64_t total_gaps = 0;
    for (auto& [unit, dates] : per_unit) {
        std::sort(dates.begin(), dates.end());
        for (std::size_t i = 1; i < dates.size(); ++i) {
            ++gap_counts[dates[i].serial() - dates[i - 1].serial()];
            ++total_gaps;
        }
    }

    Date anchor = std::min_element(raw.begin(), raw.end(), [](const RawRow& a, const RawRow& b) {
                      return a.date < b.date;
                  })->date;

    if (total_gaps == 0) {
        // One date per unit: cross-sectional snapshot.
        panel.period = PeriodKind::single;
        std::set<int64_t> distinct;
        for (const auto& r : raw) distinct.insert(r.date.serial());
        for (int64_t s : distinct) panel.grid.push_back(Date::from_serial(s));
        if (panel.grid.size() > 1) {
            // Multiple dates but never two per unit: treat each date as its own
            // grid point; shape detection will still call this cross-sectional.
        }
    } else {
        int64_t modal_gap = 0, modal_count = 0;
        for (auto& [gap, count] : gap_counts) {
            if (count > modal_count) {
                modal_count = count;
                modal_gap = gap;
            }
        }
        PeriodKind kind = kind_from_gap(modal_gap);
        if (kind == PeriodKind::single) {
            throw ValidationError("UnsupportedPeriod",
                                  "modal date gap of " + std::to_string(modal_gap) +
                                      " days is not daily/weekly/monthly/yearly");
        }
        // Count rows that do not align with the inferred period.
        int64_t misaligned = 0;
        for (const auto& r : raw) {
            if (!aligned(r.date, kind, anchor)) ++misaligned;
        }
        if (kind == PeriodKind::monthly || kind == PeriodKind::yearly) {
            // Alignment is by calendar index; nothing further to check here.
        }
        // Gap consistency: irregular gaps are those that are not a whole number
        // of periods (missing rows produce whole multiples and are fine).
        int64_t irregular = misaligned;
        for (auto& [gap, count] : gap_counts) {
            bool ok = false;
            switch (kind) {
                case PeriodKind::daily: ok = true; break;
                case PeriodKind::weekly: ok = gap % 7 == 0; break;
                case PeriodKind::monthly: ok = gap >= 28; break;
                case PeriodKind::yearly: ok = gap >= 365; break;
                default: ok = false;
            }
            if (!ok) irregular += count;
        }
        if (static_cast<double>(irregular) > 0.05 * static_cast<double>(raw.size())) {
            throw ValidationError("MixedPeriodicity",
                                  "more than 5% of rows do not fit a regular " +
                                      std::string(period_name(kind)) + " grid");
        }
        if (irregular > 0) {
            report.warnings.push_back(std::to_string(irregular) +
                                      " rows off the regular grid were dropped");
        }
        panel.period = kind;

        int64_t max_index = 0;
        for (const auto& r : raw) {
            if (!aligned(r.date, kind, anchor)) continue;
            max_index = std::max(max_index, period_index(r.date, kind, anchor));
        }
        panel.grid.reserve(static_cast<std::size_t>(max_index) + 1);
        for (int64_t i = 0; i <= max_index; ++i) panel.grid.push_back(grid_date(i, kind, anchor));
    }

    // Materialize rows.
    const std::size_t ncov = panel.covariate_columns.size();
    for (const auto& r : raw) {
        int64_t t;
        if (panel.period == PeriodKind::single) {
            auto it = std::lower_bound(panel.grid.begin(), panel.grid.end(), r.date);
            t = it - panel.grid.begin();
        } else {
            if (!aligned(r.date, panel.period, anchor)) {
                ++report.dropped_rows;
                continue;
            }
            t = period_index(r.date, panel.period, anchor);
        }
        panel.unit_ix.push_back(unit_of[r.unit]);
        panel.time_ix.push_back(static_cast<int32_t>(t));
        panel.outcome.push_back(r.outcome);
        for (std::size_t c = 0; c < ncov; ++c) panel.cov.push_back(r.cov[c]);
    }
    panel.sort_canonical();
    return panel;
}

PanelDataset parse_observations_csv(const std::string& csv_text, const StudyConfig& config,
                                    ParseReport& report) {
    return parse_observations_impl(parse_csv(csv_text), config, report);
}

ShapeKind detect_shape(const PanelDataset& panel) {
    if (panel.n_rows() == 0) throw ValidationError("EmptyObservations", "empty dataset");
    std::vector<int32_t> last_unit_time(panel.n_units(), -1);
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        int32_t u = panel.unit_ix[i];
        if (last_unit_time[u] >= 0 && last_unit_time[u] != panel.time_ix[i]) return ShapeKind::panel;
        last_unit_time[u] = panel.time_ix[i];
    }
    return ShapeKind::cross_sectional;
}

int treatment_grid_index(const PanelDataset& panel, const Date& when) {
    auto it = std::lower_bound(panel.grid.begin(), panel.grid.end(), when);
    if (it == panel.grid.end()) return -1;
    return static_cast<int>(it - panel.grid.begin());
}

// ---------------------------------------------------------------------------
// parse_inputs
// ---------------------------------------------------------------------------

static std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("FileNotReadable", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ParsedInputs parse_inputs_text(const std::string& treatment_csv, const std::string& observations_csv,
                               const std::string& config_json) {
    ParsedInputs out;
    out.config = parse_config_json(config_json);
    out.report.warnings = out.config.warnings;
    out.treatment = parse_treatment_csv(treatment_csv, out.config);
    out.panel = parse_observations_impl(parse_csv(observations_csv), out.config, out.report);

    // Every treated unit must be observed.
    for (const auto& unit : out.treatment.units) {
        if (!std::binary_search(out.panel.units.begin(), out.panel.units.end(), unit)) {
            throw ValidationError("TreatedUnitMissing",
                                  "treated unit '" + unit + "' has no observations");
        }
    }
    // At least one never-treated unit must exist to act as control.
    bool has_control = false;
    for (const auto& unit : out.panel.units) {
        if (!out.treatment.contains(unit)) {
            has_control = true;
            break;
        }
    }
    if (!has_control) {
        throw ValidationError("NoControlUnits", "every observed unit is treated; no control population");
    }
    return out;
}

ParsedInputs parse_inputs(const std::string& treatment_csv_path,
                          const std::string& observations_csv_path,
                          const std::string& config_json_path) {
    return parse_inputs_text(read_file(treatment_csv_path), read_file(observations_csv_path),
                             read_file(config_json_path));
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

RuleFacts summarize(const PanelDataset& panel, const TreatmentTable& treatment,
                    const StudyConfig& config) {
    RuleFacts facts;
    facts.total_events = static_cast<int64_t>(panel.n_rows());
    facts.shape = detect_shape(panel);
    facts.n_covariates = static_cast<int>(panel.n_cov());
    facts.n_treated_units = static_cast<int>(treatment.size());

    int controls = 0;
    for (const auto& unit : panel.units) {
        if (!treatment.contains(unit)) ++controls;
    }
    facts.n_control_units = controls;

    if (treatment.size() > 0) {
        // Dry-run cohortization with the configured constraints.
        auto cohorts = build_cohorts(treatment, panel, config.cohort_min_times,
                                     config.resolved_cohort_max_times(panel.period),
                                     config.cohort_min_treated);
        for (const auto& c : cohorts) {
            facts.max_treated_per_cohort = std::max(facts.max_treated_per_cohort, c.n_treated());
            if (!c.flagged) ++facts.n_valid_cohorts;
        }
        if (facts.shape == ShapeKind::panel) {
            int earliest = std::numeric_limits<int>::max();
            int latest = -1;
            for (const auto& date : treatment.dates) {
                int ix = treatment_grid_index(panel, date);
                if (ix < 0) ix = static_cast<int>(panel.n_periods());
                earliest = std::min(earliest, ix);
                latest = std::max(latest, ix);
            }
            facts.pre_periods = std::min<int>(earliest, static_cast<int>(panel.n_periods()));
            facts.post_periods = std::max(0, static_cast<int>(panel.n_periods()) - latest);
        }
    }
    return facts;
}

// ---------------------------------------------------------------------------
// Serializers
// ---------------------------------------------------------------------------

static std::string format_value(double v) {
    if (is_missing(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string treatment_to_csv(const TreatmentTable& table, const StudyConfig& config) {
    std::ostringstream out;
    out << config.treatment_unit_column << ',' << config.treatment_date_column << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.units[i] << ',' << table.dates[i].iso() << '\n';
    }
    return out.str();
}

std::string observations_to_csv(const PanelDataset& panel) {
    std::ostringstream out;
    out << panel.unit_column << ',' << panel.time_column << ',' << panel.outcome_column;
    for (const auto& c : panel.covariate_columns) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        out << panel.units[static_cast<std::size_t>(panel.unit_ix[i])] << ','
            << panel.grid[static_cast<std::size_t>(panel.time_ix[i])].iso() << ','
            << format_value(panel.outcome[i]);
        for (std::size_t c = 0; c < panel.n_cov(); ++c) out << ',' << format_value(panel.cov_at(i, c));
        out << '\n';
    }
    return out.str();
}

}  // namespace teffect
