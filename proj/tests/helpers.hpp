#pragma once

// Shared test fixtures: programmatic panel construction.

#include <functional>
#include <string>
#include <vector>

#include "teffect/types.hpp"

namespace teffect::testing {

// Balanced weekly panel with the given outcome function and optional static
// covariates per unit.
inline PanelDataset make_panel(int n_units, int n_periods,
                               const std::function<double(int unit, int t)>& outcome,
                               int n_cov = 0,
                               const std::function<double(int unit, int c)>& cov = nullptr) {
    PanelDataset panel;
    panel.outcome_column = "y";
    for (int c = 0; c < n_cov; ++c) panel.covariate_columns.push_back("x" + std::to_string(c));
    panel.period = PeriodKind::weekly;
    Date start = Date{2022, 1, 3};
    for (int t = 0; t < n_periods; ++t) {
        panel.grid.push_back(Date::from_serial(start.serial() + 7 * t));
    }
    for (int u = 0; u < n_units; ++u) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%04d", u);
        panel.units.push_back(buf);
    }
    for (int u = 0; u < n_units; ++u) {
        for (int t = 0; t < n_periods; ++t) {
            panel.unit_ix.push_back(u);
            panel.time_ix.push_back(t);
            panel.outcome.push_back(outcome(u, t));
            for (int c = 0; c < n_cov; ++c) panel.cov.push_back(cov ? cov(u, c) : 0.0);
        }
    }
    panel.build_row_index();
    return panel;
}

inline TreatmentTable make_treatment(const PanelDataset& panel,
                                     const std::vector<std::pair<int, int>>& unit_time) {
    TreatmentTable t;
    std::vector<std::pair<std::string, Date>> rows;
    for (auto [u, time] : unit_time) {
        rows.emplace_back(panel.units[static_cast<std::size_t>(u)],
                          panel.grid[static_cast<std::size_t>(time)]);
    }
    std::sort(rows.begin(), rows.end());
    for (auto& [unit, date] : rows) {
        t.units.push_back(unit);
        t.dates.push_back(date);
    }
    return t;
}

}  // namespace teffect::testing
