#include "teffect/dml.hpp"

#include <algorithm>
#include <cmath>

namespace teffect {

NuisanceFit fit_nuisances(const CohortCrossSection& cs, const LearnerSpec& outcome_spec,
                          const LearnerSpec& treatment_spec, int k_folds, uint64_t seed,
                          const DmlOptions& options) {
    NuisanceFit fit;
    if (options.crossfit) {
        fit.fold_map = crossfit_fold_map(static_cast<std::size_t>(cs.features.rows()), k_folds, seed);
        fit.g_hat = crossfit_predict(cs.features, cs.outcome, outcome_spec, k_folds, seed);
        fit.m_hat = crossfit_predict(cs.features, cs.treatment, treatment_spec, k_folds, seed);
        fit.m_hat = fit.m_hat.cwiseMax(options.clip_lo).cwiseMin(options.clip_hi);
    } else {
        fit.fold_map.assign(static_cast<std::size_t>(cs.features.rows()), 0);
        fit.g_hat = fit_learner(outcome_spec, cs.features, cs.outcome)->predict(cs.features);
        fit.m_hat = fit_learner(treatment_spec, cs.features, cs.treatment)->predict(cs.features);
    }
    return fit;
}

static EffectEstimate estimate_once(const CohortCrossSection& cs, const LearnerSpec& outcome_spec,
                                    const LearnerSpec& treatment_spec, int k_folds, uint64_t seed,
                                    const DmlOptions& options, const std::string& id) {
    NuisanceFit fit = fit_nuisances(cs, outcome_spec, treatment_spec, k_folds, seed, options);

    Eigen::VectorXd y_res = cs.outcome - fit.g_hat;
    Eigen::VectorXd t_res = cs.treatment - fit.m_hat;

    double denom = t_res.squaredNorm();
    if (denom < 1e-12) {
        throw EstimationError("NoTreatmentVariation",
                              "treatment is (almost) perfectly predicted by features");
    }
    double theta = t_res.dot(y_res) / denom;
    Eigen::VectorXd eps = y_res - theta * t_res;
    double meat = (t_res.array().square() * eps.array().square()).sum();
    double se = std::sqrt(meat) / denom;
    return make_estimate(id, theta, se, cs.n_treated, cs.n_control);
}

EffectEstimate estimate_dml(const CohortCrossSection& cs, const LearnerSpec& outcome_spec,
                            const LearnerSpec& treatment_spec, int k_folds, uint64_t seed,
                            const DmlOptions& options) {
    if (cs.n_treated < 1 || cs.n_control < 1) {
        throw EstimationError("NoTreatmentVariation",
                              "cross-section needs at least one treated and one control row");
    }
    if (cs.features.cols() < 1) {
        throw EstimationError("NoFeatures", "cross-section has no feature columns");
    }
    std::string id = options.estimator_id.empty()
                         ? std::string("dml_") + learner_name(outcome_spec.kind)
                         : options.estimator_id;

    int reps = std::max(1, options.repetitions);
    if (reps == 1 || !options.crossfit) {
        return estimate_once(cs, outcome_spec, treatment_spec, k_folds, seed, options, id);
    }
    // Median over independent fold splits.
    std::vector<double> ates, ses;
    for (int r = 0; r < reps; ++r) {
        EffectEstimate e = estimate_once(cs, outcome_spec, treatment_spec, k_folds,
                                         derive_seed(seed, 0x5e11 + static_cast<uint64_t>(r)),
                                         options, id);
        ates.push_back(e.ate);
        ses.push_back(e.se);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    return make_estimate(id, median(ates), median(ses), cs.n_treated, cs.n_control);
}

DmlStudy estimate_dml_on_sections(const std::vector<CohortCrossSection>& sections,
                                  const LearnerSpec& outcome_spec, const LearnerSpec& treatment_spec,
                                  int k_folds, uint64_t seed, const DmlOptions& options) {
    if (sections.empty()) throw EstimationError("NoEstimates", "no cross-sections to estimate");
    DmlStudy study;
    study.parts.resize(sections.size());
    std::vector<std::exception_ptr> errors(sections.size());
    parallel_for(sections.size(), [&](std::size_t i) {
        try {
            CohortEstimate part;
            part.cohort = sections[i].cohort;
            part.estimate = estimate_dml(sections[i], outcome_spec, treatment_spec, k_folds,
                                         derive_seed(seed, 0xc040 + i), options);
            study.parts[i] = std::move(part);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
    }
    study.total = aggregate_estimates(study.parts);
    return study;
}

}  // namespace teffect
