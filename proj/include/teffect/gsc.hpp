#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "teffect/types.hpp"

namespace teffect {

// Interactive fixed-effects model fit on control units:
//   Y_it = X_it'beta + alpha_i + xi_t + lambda_i'f_t + e_it
// Matrices are periods x units (T x N).
struct FactorModel {
    Eigen::VectorXd beta;            // covariate coefficients (p)
    Eigen::MatrixXd factors;         // T x r, orthonormal columns
    Eigen::MatrixXd loadings;        // N_control x r
    Eigen::VectorXd alpha;           // unit intercepts (N_control), mean zero
    Eigen::VectorXd xi;              // time intercepts (T), carries the level
    int rank = 0;
    std::vector<double> objective_trace;  // non-increasing
    bool converged = true;
    int iterations = 0;
};

// Panel slices for the factor fit: outcome T x N plus one T x N slab per
// covariate.
struct PanelMatrix {
    Eigen::MatrixXd outcome;                // T x N
    std::vector<Eigen::MatrixXd> covariates;  // p slabs, each T x N
    std::vector<std::string> unit_ids;        // N
};

PanelMatrix panel_matrix(const PanelDataset& panel, const std::vector<std::string>& unit_ids);

FactorModel fit_ife(const PanelMatrix& controls, int rank, double tol = 1e-7, int max_iter = 1000);

// Leave-one-period-out cross-validation over pre-treatment periods; returns
// the rank in [0, r_max] with minimal held-out MSPE (ties -> smaller rank).
int select_rank(const PanelMatrix& controls, int r_max, int pre_periods);

struct CounterfactualSeries {
    std::vector<Date> dates;           // full grid
    std::vector<double> actual;        // treated mean per period
    std::vector<double> predicted_y0;  // counterfactual treated mean per period
    std::vector<double> att_t;         // per relative post period
    double att = 0.0;
    int treatment_marker = 0;  // earliest treatment grid index
};

struct GscOptions {
    int pre_window = 0;   // pre-treatment periods used to project treated loadings
    int post_window = 0;  // post-treatment periods entering the effect
    int rank = -1;        // -1: select by cross-validation
    int rank_max = 5;
    double tol = 1e-7;
    int max_iter = 1000;
    int bootstrap_replicates = 200;
    uint64_t seed = 42;
};

struct GscResult {
    EffectEstimate estimate;  // ATT with bootstrap SE
    CounterfactualSeries series;
    FactorModel model;
    int rank = 0;
    double percentile_lo = 0.0;  // bootstrap percentile 95% interval
    double percentile_hi = 0.0;
};

// Full estimator: fit factors on never-treated units, project each treated
// unit's pre-treatment residuals onto the factor space, predict
// counterfactuals, ATT over the post window, SE via control-unit bootstrap.
GscResult estimate_gsc(const PanelDataset& panel, const TreatmentTable& treatment,
                       const GscOptions& options);

}  // namespace teffect
