#include "teffect/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace teffect {

// ---------------------------------------------------------------------------
// impute_missing
// ---------------------------------------------------------------------------

namespace {

struct UnitSeries {
    // column-major per unit: [outcome, cov0, cov1, ...] x n_periods
    std::vector<double> values;  // (1 + ncov) * T
    std::vector<bool> present;   // row exists at period t
};

void fill_forward(std::vector<double>& v) {
    // Leading gaps take the first observed value; interior/trailing gaps take
    // the previous observed value.
    double last = missing_value();
    for (double x : v) {
        if (!is_missing(x)) {
            last = x;
            break;
        }
    }
    for (auto& x : v) {
        if (is_missing(x)) x = last;
        else last = x;
    }
}

}  // namespace

static ImputeResult impute_with(const PanelDataset& panel, ImputePolicy outcome_policy,
                                ImputePolicy covariate_policy) {
    const std::size_t T = panel.n_periods();
    const std::size_t ncov = panel.n_cov();
    const std::size_t width = 1 + ncov;

    ImputeResult out;
    out.panel = panel;
    out.panel.unit_ix.clear();
    out.panel.time_ix.clear();
    out.panel.outcome.clear();
    out.panel.cov.clear();

    std::vector<std::string> kept_units;
    std::vector<std::vector<double>> kept_series;

    // Decompose into per-unit series.
    std::vector<UnitSeries> series(panel.n_units());
    for (auto& s : series) {
        s.values.assign(width * T, missing_value());
        s.present.assign(T, false);
    }
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        auto& s = series[static_cast<std::size_t>(panel.unit_ix[i])];
        std::size_t t = static_cast<std::size_t>(panel.time_ix[i]);
        s.present[t] = true;
        s.values[t] = panel.outcome[i];
        for (std::size_t c = 0; c < ncov; ++c) s.values[(1 + c) * T + t] = panel.cov_at(i, c);
    }

    for (std::size_t u = 0; u < panel.n_units(); ++u) {
        auto& s = series[u];
        int missing_cells = 0;
        for (std::size_t col = 0; col < width; ++col) {
            for (std::size_t t = 0; t < T; ++t) {
                if (is_missing(s.values[col * T + t])) ++missing_cells;
            }
        }
        bool any_outcome = false;
        for (std::size_t t = 0; t < T; ++t) {
            if (!is_missing(s.values[t])) any_outcome = true;
        }

        ImputePolicy op = outcome_policy;
        ImputePolicy cp = covariate_policy;
        if ((op == ImputePolicy::drop_unit || cp == ImputePolicy::drop_unit) && missing_cells > 0) {
            out.log.dropped_units.push_back(panel.units[u]);
            log_warn("unit '" + panel.units[u] + "' dropped: " + std::to_string(missing_cells) +
                     " missing cells under drop_unit policy");
            continue;
        }
        if (op == ImputePolicy::forward_fill && !any_outcome) {
            out.log.dropped_units.push_back(panel.units[u]);
            log_warn("unit '" + panel.units[u] + "' dropped: no observed outcome to forward-fill");
            continue;
        }

        if (missing_cells > 0) {
            // outcome
            std::vector<double> col(s.values.begin(), s.values.begin() + static_cast<long>(T));
            if (op == ImputePolicy::forward_fill) fill_forward(col);
            else
                for (auto& x : col)
                    if (is_missing(x)) x = 0.0;
            std::copy(col.begin(), col.end(), s.values.begin());
            // covariates
            for (std::size_t c = 0; c < ncov; ++c) {
                auto begin = s.values.begin() + static_cast<long>((1 + c) * T);
                std::vector<double> ccol(begin, begin + static_cast<long>(T));
                if (cp == ImputePolicy::forward_fill) {
                    fill_forward(ccol);
                    for (auto& x : ccol)
                        if (is_missing(x)) x = 0.0;  // unit never observed this covariate
                } else {
                    for (auto& x : ccol)
                        if (is_missing(x)) x = 0.0;
                }
                std::copy(ccol.begin(), ccol.end(), begin);
            }
            out.log.filled_per_unit.emplace_back(panel.units[u], missing_cells);
        }
        kept_units.push_back(panel.units[u]);
        kept_series.push_back(std::move(s.values));
    }

    if (kept_units.empty()) {
        throw ValidationError("EmptyObservations", "imputation dropped every unit");
    }

    out.panel.units = kept_units;
    const std::size_t n_units = kept_units.size();
    out.panel.unit_ix.reserve(n_units * T);
    for (std::size_t u = 0; u < n_units; ++u) {
        const auto& vals = kept_series[u];
        for (std::size_t t = 0; t < T; ++t) {
            out.panel.unit_ix.push_back(static_cast<int32_t>(u));
            out.panel.time_ix.push_back(static_cast<int32_t>(t));
            out.panel.outcome.push_back(vals[t]);
            for (std::size_t c = 0; c < ncov; ++c) out.panel.cov.push_back(vals[(1 + c) * T + t]);
        }
    }
    out.panel.build_row_index();
    return out;
}

ImputeResult impute_missing(const PanelDataset& panel, ImputePolicy policy) {
    return impute_with(panel, policy, policy);
}

ImputeResult impute_default(const PanelDataset& panel) {
    return impute_with(panel, ImputePolicy::forward_fill, ImputePolicy::zero);
}

// ---------------------------------------------------------------------------
// build_lag_features
// ---------------------------------------------------------------------------

PanelDataset build_lag_features(const PanelDataset& panel, const std::vector<int>& lags,
                                const std::vector<int>& leads) {
    const int T = static_cast<int>(panel.n_periods());
    for (int k : lags) {
        if (k < 1) throw ValidationError("InvalidLag", "lags must be positive");
        if (k >= T)
            throw ValidationError("LagExceedsHistory", "lag " + std::to_string(k) + " >= " +
                                                           std::to_string(T) + " periods");
    }
    for (int k : leads) {
        if (k < 1) throw ValidationError("InvalidLag", "leads must be positive");
        if (k >= T)
            throw ValidationError("LagExceedsHistory", "lead " + std::to_string(k) + " >= " +
                                                           std::to_string(T) + " periods");
    }

    PanelDataset out = panel;
    struct Shift {
        std::string name;
        int offset;  // -k for lag, +k for lead
    };
    std::vector<Shift> shifts;
    for (int k : lags) shifts.push_back({panel.outcome_column + "_lag" + std::to_string(k), -k});
    for (int k : leads) shifts.push_back({panel.outcome_column + "_lead" + std::to_string(k), k});

    const std::size_t old_ncov = panel.n_cov();
    for (const auto& s : shifts) out.covariate_columns.push_back(s.name);
    const std::size_t new_ncov = out.covariate_columns.size();

    out.cov.assign(panel.n_rows() * new_ncov, missing_value());
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        for (std::size_t c = 0; c < old_ncov; ++c) out.cov[i * new_ncov + c] = panel.cov_at(i, c);
        for (std::size_t s = 0; s < shifts.size(); ++s) {
            int src_t = panel.time_ix[i] + shifts[s].offset;
            if (src_t < 0 || src_t >= T) continue;  // off-grid: missing marker
            int64_t r = panel.row_of(panel.unit_ix[i], src_t);
            if (r >= 0) out.cov[i * new_ncov + old_ncov + s] = panel.outcome[static_cast<std::size_t>(r)];
        }
    }
    out.build_row_index();
    return out;
}

// ---------------------------------------------------------------------------
// scale_columns
// ---------------------------------------------------------------------------

ScaleResult scale_columns(const PanelDataset& panel, const std::vector<std::string>& columns,
                          ScaleMethod method) {
    ScaleResult out;
    out.panel = panel;
    for (const auto& name : columns) {
        bool is_outcome = name == panel.outcome_column;
        int ci = panel.cov_index(name);
        if (!is_outcome && ci < 0) {
            throw ValidationError("UnknownScaleColumn", "scale column '" + name + "' not found");
        }
        if (is_outcome) {
            out.params.warnings.push_back("scaling outcome column '" + name +
                                          "'; effect estimates will be in scaled units");
        }
        std::vector<double> values;
        values.reserve(panel.n_rows());
        for (std::size_t i = 0; i < panel.n_rows(); ++i) {
            double v = is_outcome ? panel.outcome[i] : panel.cov_at(i, static_cast<std::size_t>(ci));
            if (!is_missing(v)) values.push_back(v);
        }
        ColumnScale cs;
        cs.column = name;
        cs.method = method;
        if (method == ScaleMethod::zscore) {
            cs.offset = mean_of(values);
            cs.scale = stddev_pop(values);
        } else {
            auto [mn, mx] = std::minmax_element(values.begin(), values.end());
            cs.offset = values.empty() ? 0.0 : *mn;
            cs.scale = values.empty() ? 0.0 : *mx - *mn;
        }
        if (cs.scale <= 0.0 || !std::isfinite(cs.scale)) {
            out.params.skipped.push_back(name);
            out.params.warnings.push_back("column '" + name + "' is constant; not scaled");
            continue;
        }
        for (std::size_t i = 0; i < panel.n_rows(); ++i) {
            double* slot = is_outcome ? &out.panel.outcome[i]
                                      : &out.panel.cov_at(i, static_cast<std::size_t>(ci));
            if (!is_missing(*slot)) *slot = (*slot - cs.offset) / cs.scale;
        }
        out.params.columns.push_back(cs);
    }
    return out;
}

}  // namespace teffect
