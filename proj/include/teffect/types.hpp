#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teffect/common.hpp"

namespace teffect {

// ---------------------------------------------------------------------------
// Period grid
// ---------------------------------------------------------------------------

enum class PeriodKind { daily, weekly, monthly, yearly, single };

const char* period_name(PeriodKind kind);

enum class ShapeKind { panel, cross_sectional };

const char* shape_name(ShapeKind kind);

// ---------------------------------------------------------------------------
// TreatmentTable: one treatment event per unit.
// ---------------------------------------------------------------------------

struct TreatmentTable {
    std::vector<std::string> units;  // sorted ascending, unique
    std::vector<Date> dates;         // parallel to units

    std::size_t size() const { return units.size(); }
    bool contains(const std::string& unit) const;
    std::optional<Date> date_of(const std::string& unit) const;
};

// ---------------------------------------------------------------------------
// PanelDataset: long-format observations on a common regular date grid.
// Rows are kept in canonical (unit, time) order. Missing cells are NaN until
// imputation fills them; missing rows simply do not exist until then.
// ---------------------------------------------------------------------------

struct PanelDataset {
    std::string unit_column = "unit_id";
    std::string time_column = "date";
    std::string outcome_column;
    std::vector<std::string> covariate_columns;

    PeriodKind period = PeriodKind::single;
    std::vector<Date> grid;          // full regular range, ascending
    std::vector<std::string> units;  // distinct ids, ascending

    // Long format, canonical (unit-major, time ascending) order.
    std::vector<int32_t> unit_ix;
    std::vector<int32_t> time_ix;
    std::vector<double> outcome;
    std::vector<double> cov;  // row-major, n_rows x covariate_columns.size()

    std::size_t n_rows() const { return unit_ix.size(); }
    std::size_t n_units() const { return units.size(); }
    std::size_t n_periods() const { return grid.size(); }
    std::size_t n_cov() const { return covariate_columns.size(); }

    double cov_at(std::size_t row, std::size_t c) const { return cov[row * n_cov() + c]; }
    double& cov_at(std::size_t row, std::size_t c) { return cov[row * n_cov() + c]; }

    int cov_index(const std::string& name) const;  // -1 when absent

    void sort_canonical();

    // row index for (unit, time), -1 when the row does not exist.
    // Valid after build_row_index(); rebuilt automatically by sort_canonical.
    int64_t row_of(int32_t unit, int32_t time) const;
    void build_row_index();

    // True when every unit has a row at every grid date.
    bool is_balanced() const;

  private:
    std::vector<int64_t> row_index_;
};

// ---------------------------------------------------------------------------
// StudyConfig: parsed user configuration.
// ---------------------------------------------------------------------------

struct RefuteThresholds {
    double placebo_se_mult = 2.0;
    double random_cc_pct = 0.10;
    double unobserved_pct = 0.30;
    double unobserved_strength = 0.20;
    double subset_fraction = 0.80;
    int subset_repetitions = 5;
};

struct Hyperparameters {
    // learners
    double ridge_lambda = 1e-6;
    int forest_trees = 200;
    int forest_max_depth = 8;
    int forest_min_leaf = 5;
    double forest_feature_subsample = 0.0;  // 0 = sqrt(p)
    int boosted_rounds = 200;
    double boosted_learning_rate = 0.1;
    int boosted_max_depth = 3;
    // dml
    int k_folds = 5;
    int crossfit_repetitions = 1;
    // gsc
    int bootstrap_replicates = 200;
    int gsc_rank = -1;  // -1 = select by cross-validation
    int gsc_rank_max = 5;
    double gsc_tol = 1e-7;
    int gsc_max_iter = 1000;
};

struct StudyConfig {
    std::string time_column;
    std::string unit_column;
    std::string outcome_column;
    int pre_window = 0;
    int post_window = 0;

    std::string treatment_unit_column = "unit_id";
    std::string treatment_date_column = "treatment_date";

    std::optional<std::string> algorithm;  // estimator override
    std::vector<std::string> scale_columns;
    std::string scale_method = "zscore";
    std::string aggregation = "mean";  // pre/post window aggregate

    int cohort_min_times = 1;
    int cohort_max_times = 0;  // 0 = one calendar month of grid periods
    int cohort_min_treated = 50;

    std::vector<int> lags;  // empty = {1..pre_window} for panel DML

    uint64_t seed = 42;
    Hyperparameters hp;
    RefuteThresholds refute;

    std::vector<std::string> warnings;  // unknown keys, etc.

    // Resolved max_times for a given period kind (one calendar month default).
    int resolved_cohort_max_times(PeriodKind period) const;
};

// ---------------------------------------------------------------------------
// RuleFacts: inputs to the stage-one decision rules.
// ---------------------------------------------------------------------------

struct RuleFacts {
    int64_t total_events = 0;  // observation row count
    ShapeKind shape = ShapeKind::cross_sectional;
    int max_treated_per_cohort = 0;
    int n_valid_cohorts = 0;  // cohorts meeting all constraints in the dry run
    int n_treated_units = 0;
    int n_control_units = 0;
    int n_covariates = 0;
    int pre_periods = 0;   // grid periods strictly before the earliest treatment
    int post_periods = 0;  // grid periods at/after the latest treatment
};

// ---------------------------------------------------------------------------
// EffectEstimate: the universal estimator output.
// ---------------------------------------------------------------------------

struct EffectEstimate {
    std::string estimator_id;
    double ate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int n_treated = 0;
    int n_control = 0;

    bool contains(double point) const { return point >= ci_lo && point <= ci_hi; }
};

EffectEstimate make_estimate(std::string estimator_id, double ate, double se, int n_treated,
                             int n_control);

}  // namespace teffect
