#include "teffect/refute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace teffect {

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

EffectEstimate reestimate(const std::vector<CohortCrossSection>& sections,
                          const LearnerSpec& outcome_spec, const LearnerSpec& treatment_spec,
                          int k_folds, uint64_t seed) {
    return estimate_dml_on_sections(sections, outcome_spec, treatment_spec, k_folds, seed).total;
}

std::vector<CohortCrossSection> permute_treatment(const std::vector<CohortCrossSection>& sections,
                                                  uint64_t seed) {
    std::vector<CohortCrossSection> out = sections;
    for (std::size_t s = 0; s < out.size(); ++s) {
        Rng rng(derive_seed(seed, 0x91ace80 + s));
        std::vector<Eigen::Index> order(static_cast<std::size_t>(out[s].treatment.size()));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        Eigen::VectorXd permuted(out[s].treatment.size());
        for (Eigen::Index i = 0; i < out[s].treatment.size(); ++i) {
            permuted(i) = sections[s].treatment(order[static_cast<std::size_t>(i)]);
        }
        out[s].treatment = permuted;
    }
    return out;
}

std::vector<CohortCrossSection> append_random_covariate(
    const std::vector<CohortCrossSection>& sections, uint64_t seed) {
    std::vector<CohortCrossSection> out = sections;
    for (std::size_t s = 0; s < out.size(); ++s) {
        Rng rng(derive_seed(seed, 0xadd0c + s));
        Eigen::MatrixXd grown(out[s].features.rows(), out[s].features.cols() + 1);
        grown.leftCols(out[s].features.cols()) = out[s].features;
        for (Eigen::Index i = 0; i < grown.rows(); ++i) grown(i, grown.cols() - 1) = rng.normal();
        out[s].features = std::move(grown);
        out[s].feature_names.push_back("random_common_cause");
    }
    return out;
}

// Simulated unobserved confounder: a latent U shifts the outcome by
// strength*sd(Y)*U and flips treatment labels toward sign(U) with probability
// strength*|2*Phi(U)-1|. U itself is never added to the features.
std::vector<CohortCrossSection> inject_unobserved_confounder(
    const std::vector<CohortCrossSection>& sections, double strength, uint64_t seed) {
    std::vector<CohortCrossSection> out = sections;
    for (std::size_t s = 0; s < out.size(); ++s) {
        Rng rng(derive_seed(seed, 0x0b5c0 + s));
        std::vector<double> y(out[s].outcome.data(), out[s].outcome.data() + out[s].outcome.size());
        double sd_y = stddev_pop(y);
        for (Eigen::Index i = 0; i < out[s].outcome.size(); ++i) {
            double u = rng.normal();
            out[s].outcome(i) += strength * sd_y * u;
            double tilt = std::erf(u / std::sqrt(2.0));  // 2*Phi(u)-1
            if (rng.bernoulli(strength * std::fabs(tilt))) {
                out[s].treatment(i) = u > 0.0 ? 1.0 : 0.0;
            }
        }
        out[s].n_treated = static_cast<int>(out[s].treatment.sum());
        out[s].n_control = static_cast<int>(out[s].treatment.size()) - out[s].n_treated;
    }
    return out;
}

// Stratified 80% subsample: keeps at least one treated and one control row.
std::vector<CohortCrossSection> subsample(const std::vector<CohortCrossSection>& sections,
                                          double fraction, uint64_t seed) {
    std::vector<CohortCrossSection> out;
    out.reserve(sections.size());
    for (std::size_t s = 0; s < sections.size(); ++s) {
        const CohortCrossSection& src = sections[s];
        Rng rng(derive_seed(seed, 0x5175e7 + s));
        std::vector<Eigen::Index> treated_rows, control_rows;
        for (Eigen::Index i = 0; i < src.treatment.size(); ++i) {
            (src.treatment(i) > 0.5 ? treated_rows : control_rows).push_back(i);
        }
        auto take = [&](std::vector<Eigen::Index>& rows) {
            rng.shuffle(rows);
            std::size_t keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()))));
            rows.resize(std::min(keep, rows.size()));
        };
        take(treated_rows);
        take(control_rows);
        std::vector<Eigen::Index> rows = treated_rows;
        rows.insert(rows.end(), control_rows.begin(), control_rows.end());
        std::sort(rows.begin(), rows.end());

        CohortCrossSection cs;
        cs.cohort = src.cohort;
        cs.feature_names = src.feature_names;
        cs.features.resize(static_cast<Eigen::Index>(rows.size()), src.features.cols());
        cs.outcome.resize(static_cast<Eigen::Index>(rows.size()));
        cs.treatment.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            cs.features.row(static_cast<Eigen::Index>(i)) = src.features.row(rows[i]);
            cs.outcome(static_cast<Eigen::Index>(i)) = src.outcome(rows[i]);
            cs.treatment(static_cast<Eigen::Index>(i)) = src.treatment(rows[i]);
            cs.unit_ids.push_back(src.unit_ids[static_cast<std::size_t>(rows[i])]);
        }
        cs.n_treated = static_cast<int>(cs.treatment.sum());
        cs.n_control = static_cast<int>(cs.treatment.size()) - cs.n_treated;
        out.push_back(std::move(cs));
    }
    return out;
}

}  // namespace

ValidationReport refutation_suite(const std::vector<CohortCrossSection>& sections,
                                  const LearnerSpec& outcome_spec, const LearnerSpec& treatment_spec,
                                  int k_folds, const EffectEstimate& original,
                                  const RefuteThresholds& thresholds, uint64_t seed) {
    ValidationReport report;

    // 1. placebo: independent permutation of the treatment column
    {
        ValidationTest t;
        t.name = "placebo_treatment";
        t.original_ate = original.ate;
        try {
            EffectEstimate e = reestimate(permute_treatment(sections, derive_seed(seed, 1)),
                                          outcome_spec, treatment_spec, k_folds, derive_seed(seed, 2));
            t.perturbed_ate = e.ate;
            t.threshold_used = thresholds.placebo_se_mult * e.se;
            t.passed = std::fabs(e.ate) < t.threshold_used;
        } catch (const Error& err) {
            t.passed = false;
            t.note = std::string("re-estimation failed: ") + err.what();
        }
        report.add(std::move(t));
    }

    // 2. random common cause: an independent standard-normal covariate
    {
        ValidationTest t;
        t.name = "random_common_cause";
        t.original_ate = original.ate;
        t.threshold_used =
            std::max(thresholds.random_cc_pct * std::fabs(original.ate), 2.0 * original.se);
        try {
            EffectEstimate e = reestimate(append_random_covariate(sections, derive_seed(seed, 3)),
                                          outcome_spec, treatment_spec, k_folds, derive_seed(seed, 4));
            t.perturbed_ate = e.ate;
            t.passed = std::fabs(e.ate - original.ate) <= t.threshold_used;
        } catch (const Error& err) {
            t.passed = false;
            t.note = std::string("re-estimation failed: ") + err.what();
        }
        report.add(std::move(t));
    }

    // 3. unobserved common cause: sign must hold, deviation bounded
    {
        ValidationTest t;
        t.name = "unobserved_common_cause";
        t.original_ate = original.ate;
        t.threshold_used = thresholds.unobserved_pct * std::fabs(original.ate);
        try {
            EffectEstimate e = reestimate(
                inject_unobserved_confounder(sections, thresholds.unobserved_strength,
                                             derive_seed(seed, 5)),
                outcome_spec, treatment_spec, k_folds, derive_seed(seed, 6));
            t.perturbed_ate = e.ate;
            bool same_sign = sign_of(e.ate) == sign_of(original.ate);
            t.passed = same_sign && std::fabs(e.ate - original.ate) <= t.threshold_used;
        } catch (const Error& err) {
            t.passed = false;
            t.note = std::string("re-estimation failed: ") + err.what();
        }
        report.add(std::move(t));
    }

    // 4. data subsets: mean over seeded 80% subsamples stays near the original
    {
        ValidationTest t;
        t.name = "data_subset";
        t.original_ate = original.ate;
        t.threshold_used = 2.0 * original.se;
        try {
            std::vector<double> ates;
            for (int rep = 0; rep < thresholds.subset_repetitions; ++rep) {
                EffectEstimate e = reestimate(
                    subsample(sections, thresholds.subset_fraction,
                              derive_seed(seed, 7 + static_cast<uint64_t>(rep))),
                    outcome_spec, treatment_spec, k_folds,
                    derive_seed(seed, 100 + static_cast<uint64_t>(rep)));
                ates.push_back(e.ate);
            }
            t.perturbed_ate = mean_of(ates);
            t.passed = std::fabs(t.perturbed_ate - original.ate) <= t.threshold_used;
        } catch (const Error& err) {
            t.passed = false;
            t.note = std::string("re-estimation failed: ") + err.what();
        }
        report.add(std::move(t));
    }

    return report;
}

// ---------------------------------------------------------------------------

ValidationReport sensitivity_suite(const PanelDataset& panel, const TreatmentTable& treatment,
                                   const GscOptions& options, const EffectEstimate& original,
                                   const RefuteThresholds& thresholds, uint64_t seed) {
    ValidationReport report;

    auto run_variant = [&](const std::string& name, const PanelDataset& p, const GscOptions& opts) {
        ValidationTest t;
        t.name = name;
        t.original_ate = original.ate;
        t.threshold_used = 0.0;  // direction-only rule
        try {
            GscResult r = estimate_gsc(p, treatment, opts);
            t.perturbed_ate = r.estimate.ate;
            t.passed = sign_of(r.estimate.ate) == sign_of(original.ate);
        } catch (const Error& err) {
            t.passed = false;
            t.note = std::string("infeasible: ") + err.what();
        }
        report.add(std::move(t));
    };

    // 1. remove all covariates
    {
        PanelDataset stripped = panel;
        stripped.covariate_columns.clear();
        stripped.cov.clear();
        GscOptions opts = options;
        opts.seed = derive_seed(seed, 11);
        run_variant("remove_covariates", stripped, opts);
    }

    // 2. downsample controls to the configured fraction
    {
        std::vector<std::string> controls;
        for (const auto& unit : panel.units) {
            if (!treatment.contains(unit)) controls.push_back(unit);
        }
        Rng rng(derive_seed(seed, 12));
        rng.shuffle(controls);
        std::size_t keep = std::max<std::size_t>(
            2, static_cast<std::size_t>(
                   std::floor(thresholds.subset_fraction * static_cast<double>(controls.size()))));
        controls.resize(std::min(keep, controls.size()));
        std::set<std::string> kept(controls.begin(), controls.end());

        PanelDataset filtered = panel;
        filtered.units.clear();
        filtered.unit_ix.clear();
        filtered.time_ix.clear();
        filtered.outcome.clear();
        filtered.cov.clear();
        std::vector<int32_t> remap(panel.n_units(), -1);
        for (std::size_t u = 0; u < panel.n_units(); ++u) {
            if (kept.count(panel.units[u]) || treatment.contains(panel.units[u])) {
                remap[u] = static_cast<int32_t>(filtered.units.size());
                filtered.units.push_back(panel.units[u]);
            }
        }
        for (std::size_t i = 0; i < panel.n_rows(); ++i) {
            int32_t u = remap[static_cast<std::size_t>(panel.unit_ix[i])];
            if (u < 0) continue;
            filtered.unit_ix.push_back(u);
            filtered.time_ix.push_back(panel.time_ix[i]);
            filtered.outcome.push_back(panel.outcome[i]);
            for (std::size_t c = 0; c < panel.n_cov(); ++c) filtered.cov.push_back(panel.cov_at(i, c));
        }
        filtered.build_row_index();
        GscOptions opts = options;
        opts.seed = derive_seed(seed, 13);
        run_variant("downsample_controls", filtered, opts);
    }

    // 3. reduced pre-treatment window for the loading projection
    {
        GscOptions opts = options;
        opts.pre_window = std::min(options.pre_window,
                                   std::max(7, static_cast<int>(std::ceil(0.5 * options.pre_window))));
        opts.seed = derive_seed(seed, 14);
        run_variant("reduced_pre_window", panel, opts);
    }

    return report;
}

}  // namespace teffect
