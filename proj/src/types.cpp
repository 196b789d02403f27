#include "teffect/types.hpp"

#include <algorithm>
#include <numeric>

namespace teffect {

const char* period_name(PeriodKind kind) {
    switch (kind) {
        case PeriodKind::daily: return "daily";
        case PeriodKind::weekly: return "weekly";
        case PeriodKind::monthly: return "monthly";
        case PeriodKind::yearly: return "yearly";
        case PeriodKind::single: return "single";
    }
    return "?";
}

const char* shape_name(ShapeKind kind) {
    return kind == ShapeKind::panel ? "panel" : "cross_sectional";
}

bool TreatmentTable::contains(const std::string& unit) const {
    return std::binary_search(units.begin(), units.end(), unit);
}

std::optional<Date> TreatmentTable::date_of(const std::string& unit) const {
    auto it = std::lower_bound(units.begin(), units.end(), unit);
    if (it == units.end() || *it != unit) return std::nullopt;
    return dates[static_cast<std::size_t>(it - units.begin())];
}

int PanelDataset::cov_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariate_columns.size(); ++i) {
        if (covariate_columns[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void PanelDataset::sort_canonical() {
    std::vector<std::size_t> order(n_rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (unit_ix[a] != unit_ix[b]) return unit_ix[a] < unit_ix[b];
        return time_ix[a] < time_ix[b];
    });
    const std::size_t c = n_cov();
    std::vector<int32_t> u2(n_rows()), t2(n_rows());
    std::vector<double> y2(n_rows()), cov2(n_rows() * c);
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::size_t s = order[i];
        u2[i] = unit_ix[s];
        t2[i] = time_ix[s];
        y2[i] = outcome[s];
        for (std::size_t k = 0; k < c; ++k) cov2[i * c + k] = cov[s * c + k];
    }
    unit_ix = std::move(u2);
    time_ix = std::move(t2);
    outcome = std::move(y2);
    cov = std::move(cov2);
    build_row_index();
}

void PanelDataset::build_row_index() {
    row_index_.assign(n_units() * n_periods(), -1);
    for (std::size_t i = 0; i < n_rows(); ++i) {
        row_index_[static_cast<std::size_t>(unit_ix[i]) * n_periods() + time_ix[i]] =
            static_cast<int64_t>(i);
    }
}

int64_t PanelDataset::row_of(int32_t unit, int32_t time) const {
    if (row_index_.size() != n_units() * n_periods()) return -1;
    return row_index_[static_cast<std::size_t>(unit) * n_periods() + time];
}

bool PanelDataset::is_balanced() const { return n_rows() == n_units() * n_periods(); }

int StudyConfig::resolved_cohort_max_times(PeriodKind period) const {
    if (cohort_max_times > 0) return cohort_max_times;
    switch (period) {
        case PeriodKind::daily: return 30;
        case PeriodKind::weekly: return 4;
        default: return 1;
    }
}

EffectEstimate make_estimate(std::string estimator_id, double ate, double se, int n_treated,
                             int n_control) {
    EffectEstimate e;
    e.estimator_id = std::move(estimator_id);
    e.ate = ate;
    e.se = se;
    e.ci_lo = ate - 1.96 * se;
    e.ci_hi = ate + 1.96 * se;
    e.n_treated = n_treated;
    e.n_control = n_control;
    return e;
}

}  // namespace teffect
