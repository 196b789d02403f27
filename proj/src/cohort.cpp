#include "teffect/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "teffect/ingest.hpp"

namespace teffect {

// ---------------------------------------------------------------------------
// build_cohorts
// ---------------------------------------------------------------------------

std::vector<Cohort> build_cohorts(const TreatmentTable& treatment, const PanelDataset& panel,
                                  int min_times, int max_times, int min_treated) {
    if (treatment.size() == 0) {
        throw ValidationError("NoTreatedUnits", "treatment table is empty");
    }
    if (min_times > max_times) {
        throw ValidationError("InvalidConfigValue", "cohort_min_times > cohort_max_times");
    }
    if (min_treated < 1) {
        throw ValidationError("InvalidConfigValue", "cohort_min_treated must be >= 1");
    }

    // Distinct treatment times (grid indices), ascending, with their units.
    std::map<int, std::vector<std::string>> by_time;
    for (std::size_t i = 0; i < treatment.size(); ++i) {
        int ix = treatment_grid_index(panel, treatment.dates[i]);
        if (ix < 0) {
            log_warn("treated unit '" + treatment.units[i] +
                     "' has a treatment date past the observation grid; excluded from cohorts");
            continue;
        }
        by_time[ix].push_back(treatment.units[i]);
    }
    if (by_time.empty()) {
        throw ValidationError("NoTreatedUnits", "no treatment date falls on the observation grid");
    }

    std::vector<std::pair<int, std::vector<std::string>>> times(by_time.begin(), by_time.end());

    std::vector<Cohort> cohorts;
    std::size_t i = 0;
    while (i < times.size()) {
        Cohort c;
        int treated = 0;
        while (i < times.size()) {
            c.time_indices.push_back(times[i].first);
            for (auto& u : times[i].second) c.treated_ids.push_back(u);
            treated += static_cast<int>(times[i].second.size());
            ++i;
            int n_times = static_cast<int>(c.time_indices.size());
            bool satisfied = n_times >= min_times && treated >= min_treated;
            if (satisfied || n_times >= max_times) break;
        }
        c.flagged = static_cast<int>(c.time_indices.size()) < min_times || treated < min_treated;
        cohorts.push_back(std::move(c));
    }

    // Trailing remainder: merge backward when max_times permits.
    if (cohorts.size() >= 2 && cohorts.back().flagged) {
        const Cohort& last = cohorts.back();
        Cohort& prev = cohorts[cohorts.size() - 2];
        int merged_times = static_cast<int>(prev.time_indices.size() + last.time_indices.size());
        if (merged_times <= max_times) {
            prev.time_indices.insert(prev.time_indices.end(), last.time_indices.begin(),
                                     last.time_indices.end());
            prev.treated_ids.insert(prev.treated_ids.end(), last.treated_ids.begin(),
                                    last.treated_ids.end());
            prev.flagged = static_cast<int>(prev.time_indices.size()) < min_times ||
                           static_cast<int>(prev.treated_ids.size()) < min_treated;
            cohorts.pop_back();
        }
    }

    for (auto& c : cohorts) {
        std::sort(c.treated_ids.begin(), c.treated_ids.end());
        c.window_start = c.time_indices.front();
        c.window_end = c.time_indices.back();
        c.treatment_times.reserve(c.time_indices.size());
        for (int t : c.time_indices) c.treatment_times.push_back(panel.grid[static_cast<std::size_t>(t)]);
    }
    return cohorts;
}

// ---------------------------------------------------------------------------
// to_cross_section
// ---------------------------------------------------------------------------

namespace {

// Name ends with _lag<k> or _lead<k>: the column is a shifted series and the
// cross-section takes its value at the anchor date instead of aggregating.
bool is_lag_column(const std::string& name) {
    for (const char* tag : {"_lag", "_lead"}) {
        auto pos = name.rfind(tag);
        if (pos == std::string::npos) continue;
        std::size_t k_start = pos + std::string(tag).size();
        if (k_start >= name.size()) continue;
        bool all_digits = true;
        for (std::size_t i = k_start; i < name.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
                all_digits = false;
                break;
            }
        }
        if (all_digits) return true;
    }
    return false;
}

double aggregate_values(const std::vector<double>& v, Aggregation how) {
    if (how == Aggregation::sum) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    return mean_of(v);
}

}  // namespace

CohortCrossSection to_cross_section(const PanelDataset& panel, const Cohort& cohort,
                                    const TreatmentTable& treatment, int pre_window, int post_window,
                                    Aggregation aggregation) {
    const int t0 = cohort.window_start;
    const int t1 = cohort.window_end;
    const int pre_lo = t0 - pre_window;
    const int post_hi = t1 + post_window;
    if (pre_lo < 0 || post_hi >= static_cast<int>(panel.n_periods())) {
        throw ValidationError(
            "WindowOutOfRange",
            "cohort at " + panel.grid[static_cast<std::size_t>(t0)].iso() + ".." +
                panel.grid[static_cast<std::size_t>(t1)].iso() + " needs grid range [" +
                std::to_string(pre_lo) + ", " + std::to_string(post_hi) + "] but has [0, " +
                std::to_string(panel.n_periods() - 1) + "]");
    }

    std::set<std::string> cohort_treated(cohort.treated_ids.begin(), cohort.treated_ids.end());

    // Row selection: cohort treated units plus all never-treated units.
    struct Candidate {
        int32_t unit;
        bool treated;
    };
    std::vector<Candidate> selected;
    for (std::size_t u = 0; u < panel.n_units(); ++u) {
        const std::string& id = panel.units[u];
        bool is_cohort_treated = cohort_treated.count(id) > 0;
        bool ever_treated = treatment.contains(id);
        if (is_cohort_treated) {
            selected.push_back({static_cast<int32_t>(u), true});
        } else if (!ever_treated) {
            selected.push_back({static_cast<int32_t>(u), false});
        }
    }

    // Feature layout: one aggregate per covariate (anchor value for lag/lead
    // columns), plus the pre-window outcome aggregate.
    CohortCrossSection cs;
    cs.cohort = cohort;
    std::vector<bool> snapshot(panel.n_cov());
    for (std::size_t c = 0; c < panel.n_cov(); ++c) {
        snapshot[c] = is_lag_column(panel.covariate_columns[c]);
        cs.feature_names.push_back(panel.covariate_columns[c] + (snapshot[c] ? "" : "_pre"));
    }
    cs.feature_names.push_back(panel.outcome_column + "_pre");
    const std::size_t n_features = cs.feature_names.size();
    const int anchor = t0 - 1;

    std::vector<std::vector<double>> feat_rows;
    std::vector<double> outcomes;
    std::vector<double> treatments;
    std::vector<std::string> ids;
    for (const auto& cand : selected) {
        std::vector<double> row(n_features, missing_value());
        // pre-window aggregates
        std::vector<double> pre_outcome;
        std::vector<std::vector<double>> pre_cov(panel.n_cov());
        for (int t = pre_lo; t <= anchor; ++t) {
            int64_t r = panel.row_of(cand.unit, t);
            if (r < 0) continue;
            if (!is_missing(panel.outcome[static_cast<std::size_t>(r)]))
                pre_outcome.push_back(panel.outcome[static_cast<std::size_t>(r)]);
            for (std::size_t c = 0; c < panel.n_cov(); ++c) {
                double v = panel.cov_at(static_cast<std::size_t>(r), c);
                if (!is_missing(v)) pre_cov[c].push_back(v);
            }
        }
        for (std::size_t c = 0; c < panel.n_cov(); ++c) {
            if (snapshot[c]) {
                int64_t r = panel.row_of(cand.unit, anchor);
                row[c] = r >= 0 ? panel.cov_at(static_cast<std::size_t>(r), c) : missing_value();
            } else if (!pre_cov[c].empty()) {
                row[c] = aggregate_values(pre_cov[c], aggregation);
            }
        }
        if (!pre_outcome.empty()) row[n_features - 1] = aggregate_values(pre_outcome, aggregation);

        // post-window outcome
        std::vector<double> post_outcome;
        for (int t = t1 + 1; t <= post_hi; ++t) {
            int64_t r = panel.row_of(cand.unit, t);
            if (r < 0) continue;
            if (!is_missing(panel.outcome[static_cast<std::size_t>(r)]))
                post_outcome.push_back(panel.outcome[static_cast<std::size_t>(r)]);
        }
        if (post_outcome.empty() || pre_outcome.empty()) {
            log_warn("unit '" + panel.units[static_cast<std::size_t>(cand.unit)] +
                     "' has no usable outcome in the evaluation windows; excluded from cohort");
            continue;
        }
        feat_rows.push_back(std::move(row));
        outcomes.push_back(aggregate_values(post_outcome, aggregation));
        treatments.push_back(cand.treated ? 1.0 : 0.0);
        ids.push_back(panel.units[static_cast<std::size_t>(cand.unit)]);
    }

    // Drop feature columns that are missing for any retained row; the missing
    // marker stops here.
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < n_features; ++c) {
        bool ok = true;
        for (const auto& row : feat_rows) {
            if (is_missing(row[c])) {
                ok = false;
                break;
            }
        }
        if (ok) keep.push_back(c);
        else log_debug("dropping cross-section feature '" + cs.feature_names[c] + "' (missing values)");
    }

    cs.unit_ids = std::move(ids);
    const std::size_t n = feat_rows.size();
    cs.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keep.size()));
    cs.outcome.resize(static_cast<Eigen::Index>(n));
    cs.treatment.resize(static_cast<Eigen::Index>(n));
    std::vector<std::string> kept_names;
    for (std::size_t c : keep) kept_names.push_back(cs.feature_names[c]);
    cs.feature_names = std::move(kept_names);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < keep.size(); ++c) {
            cs.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                feat_rows[i][keep[c]];
        }
        cs.outcome(static_cast<Eigen::Index>(i)) = outcomes[i];
        cs.treatment(static_cast<Eigen::Index>(i)) = treatments[i];
        if (treatments[i] > 0.5) ++cs.n_treated;
        else ++cs.n_control;
    }
    return cs;
}

CohortCrossSection cross_section_from_snapshot(const PanelDataset& panel,
                                               const TreatmentTable& treatment) {
    CohortCrossSection cs;
    cs.feature_names = panel.covariate_columns;
    // Pseudo-cohort covering the snapshot date(s).
    cs.cohort.window_start = 0;
    cs.cohort.window_end = 0;
    if (!panel.grid.empty()) {
        cs.cohort.treatment_times = {panel.grid.front()};
        cs.cohort.time_indices = {0};
    }

    const std::size_t n = panel.n_rows();
    cs.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(panel.n_cov()));
    cs.outcome.resize(static_cast<Eigen::Index>(n));
    cs.treatment.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = panel.units[static_cast<std::size_t>(panel.unit_ix[i])];
        bool treated = treatment.contains(id);
        cs.unit_ids.push_back(id);
        for (std::size_t c = 0; c < panel.n_cov(); ++c) {
            double v = panel.cov_at(i, c);
            cs.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                is_missing(v) ? 0.0 : v;
        }
        cs.outcome(static_cast<Eigen::Index>(i)) = panel.outcome[i];
        cs.treatment(static_cast<Eigen::Index>(i)) = treated ? 1.0 : 0.0;
        if (treated) ++cs.n_treated;
        else ++cs.n_control;
        if (treated) cs.cohort.treated_ids.push_back(id);
    }
    std::sort(cs.cohort.treated_ids.begin(), cs.cohort.treated_ids.end());
    return cs;
}

// ---------------------------------------------------------------------------
// aggregate_estimates
// ---------------------------------------------------------------------------

EffectEstimate aggregate_estimates(const std::vector<CohortEstimate>& parts) {
    if (parts.empty()) throw EstimationError("NoEstimates", "no cohort estimates to aggregate");
    double w_sum = 0.0, point = 0.0, var = 0.0;
    int n_treated = 0, n_control = 0;
    for (const auto& part : parts) {
        double w = static_cast<double>(part.cohort.n_treated());
        w_sum += w;
        point += w * part.estimate.ate;
        var += w * w * part.estimate.se * part.estimate.se;
        n_treated += part.estimate.n_treated;
        n_control += part.estimate.n_control;
    }
    if (w_sum <= 0.0) throw EstimationError("NoEstimates", "cohort weights sum to zero");
    point /= w_sum;
    double se = std::sqrt(var) / w_sum;
    return make_estimate(parts.front().estimate.estimator_id, point, se, n_treated, n_control);
}

}  // namespace teffect
