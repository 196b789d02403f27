#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "teffect/types.hpp"

namespace teffect {

// A block of consecutive treatment times and the units treated within it.
struct Cohort {
    std::vector<int> time_indices;      // ascending grid indices of treatment times
    std::vector<Date> treatment_times;  // same, as dates
    std::vector<std::string> treated_ids;
    int window_start = 0;  // first treatment time (grid index)
    int window_end = 0;    // last treatment time (grid index)
    bool flagged = false;  // constraints could not be met (remainder, undersized)

    int n_treated() const { return static_cast<int>(treated_ids.size()); }
};

struct CohortEstimate {
    Cohort cohort;
    EffectEstimate estimate;
};

// One row per unit: treatment flag, pre-window features, post-window outcome.
struct CohortCrossSection {
    Cohort cohort;
    std::vector<std::string> unit_ids;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd features;  // n_units x n_features
    Eigen::VectorXd outcome;
    Eigen::VectorXd treatment;  // 0/1
    int n_treated = 0;
    int n_control = 0;
};

// Greedy merge of consecutive treatment times, ascending. Every returned
// cohort satisfies min_times <= |times| <= max_times; cohorts that could not
// reach min_treated (capped by max_times, or the trailing remainder that
// cannot merge backward) are flagged.
std::vector<Cohort> build_cohorts(const TreatmentTable& treatment, const PanelDataset& panel,
                                  int min_times, int max_times, int min_treated);

enum class Aggregation { mean, sum };

// Panel -> one cross-sectional row per unit for a cohort. Features are
// pre-window aggregates ending at window_start-1 (lag/lead columns are taken
// at the anchor date instead); the outcome is the post-window aggregate
// starting at window_end+1. Controls come only from never-treated units.
CohortCrossSection to_cross_section(const PanelDataset& panel, const Cohort& cohort,
                                    const TreatmentTable& treatment, int pre_window, int post_window,
                                    Aggregation aggregation);

// Cross-sectional data is already one row per unit; wrap it directly.
CohortCrossSection cross_section_from_snapshot(const PanelDataset& panel,
                                               const TreatmentTable& treatment);

// Weighted average of per-cohort estimates (weights = treated counts);
// standard errors combine under cross-cohort independence.
EffectEstimate aggregate_estimates(const std::vector<CohortEstimate>& parts);

}  // namespace teffect
