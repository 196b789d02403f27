#pragma once

#include <string>
#include <vector>

#include "teffect/cohort.hpp"
#include "teffect/learners.hpp"
#include "teffect/types.hpp"

namespace teffect {

struct NuisanceFit {
    Eigen::VectorXd g_hat;  // out-of-fold E[Y|X]
    Eigen::VectorXd m_hat;  // out-of-fold E[T|X], clipped
    std::vector<int> fold_map;
};

struct DmlOptions {
    // Test-only mode: nuisances fit once on the full sample with no propensity
    // clipping, so the estimate matches the joint-OLS coefficient exactly.
    bool crossfit = true;
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    int repetitions = 1;  // >1: median over independent fold splits
    std::string estimator_id;  // default: dml_<learner kind>
};

// Partially linear DML on one cross-section: residualize outcome and
// treatment, regress residual on residual, heteroskedasticity-robust SE.
EffectEstimate estimate_dml(const CohortCrossSection& cs, const LearnerSpec& outcome_spec,
                            const LearnerSpec& treatment_spec, int k_folds, uint64_t seed,
                            const DmlOptions& options = {});

// Nuisance predictions only (exposed for diagnostics/tests).
NuisanceFit fit_nuisances(const CohortCrossSection& cs, const LearnerSpec& outcome_spec,
                          const LearnerSpec& treatment_spec, int k_folds, uint64_t seed,
                          const DmlOptions& options = {});

// Run per-cohort DML over a list of cross-sections and aggregate with
// treated-count weights.
struct DmlStudy {
    EffectEstimate total;
    std::vector<CohortEstimate> parts;
};
DmlStudy estimate_dml_on_sections(const std::vector<CohortCrossSection>& sections,
                                  const LearnerSpec& outcome_spec, const LearnerSpec& treatment_spec,
                                  int k_folds, uint64_t seed, const DmlOptions& options = {});

}  // namespace teffect
