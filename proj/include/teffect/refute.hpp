#pragma once

#include <string>
#include <vector>

#include "teffect/cohort.hpp"
#include "teffect/dml.hpp"
#include "teffect/gsc.hpp"
#include "teffect/types.hpp"

namespace teffect {

struct ValidationTest {
    std::string name;
    double original_ate = 0.0;
    double perturbed_ate = 0.0;
    double threshold_used = 0.0;
    bool passed = false;
    std::string note;
};

struct ValidationReport {
    std::vector<ValidationTest> tests;
    bool overall_passed = true;

    void add(ValidationTest test) {
        overall_passed = overall_passed && test.passed;
        tests.push_back(std::move(test));
    }
};

// DML refutations: placebo (permuted treatment, effect must vanish), random
// common cause, simulated unobserved common cause, and seeded 80% subsets.
// Each test re-estimates with the original specs and folds; only the stated
// perturbation differs. A re-estimation failure marks the test failed and the
// suite continues.
ValidationReport refutation_suite(const std::vector<CohortCrossSection>& sections,
                                  const LearnerSpec& outcome_spec, const LearnerSpec& treatment_spec,
                                  int k_folds, const EffectEstimate& original,
                                  const RefuteThresholds& thresholds, uint64_t seed);

// GSC sensitivity: remove covariates, downsample controls to 80%, shrink the
// pre-treatment window. Pass rule is direction-only: the perturbed effect must
// keep the original sign.
ValidationReport sensitivity_suite(const PanelDataset& panel, const TreatmentTable& treatment,
                                   const GscOptions& options, const EffectEstimate& original,
                                   const RefuteThresholds& thresholds, uint64_t seed);

}  // namespace teffect
