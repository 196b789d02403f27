#include "teffect/decide.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "teffect/dml.hpp"
#include "teffect/preprocess.hpp"

namespace teffect {

// ---------------------------------------------------------------------------
// stage one
// ---------------------------------------------------------------------------

CandidateSet stage_one(const RuleFacts& facts) {
    CandidateSet out;
    auto note = [&](const std::string& s) { out.rationale.push_back(s); };

    bool gsc_ok = true;
    if (facts.shape != ShapeKind::panel) {
        gsc_ok = false;
        note("gsc rejected: data is cross-sectional");
    }
    if (facts.total_events >= 500000) {
        gsc_ok = false;
        note("gsc rejected: total events " + std::to_string(facts.total_events) + " >= 500000");
    }
    if (facts.max_treated_per_cohort >= 50) {
        gsc_ok = false;
        note("gsc rejected: max treated per cohort " +
             std::to_string(facts.max_treated_per_cohort) + " >= 50");
    }
    if (facts.n_control_units >= 5000) {
        gsc_ok = false;
        note("gsc rejected: control units " + std::to_string(facts.n_control_units) + " >= 5000");
    }
    if (facts.shape == ShapeKind::panel && facts.pre_periods < 7) {
        gsc_ok = false;
        note("gsc rejected: only " + std::to_string(facts.pre_periods) +
             " pre-treatment periods (< 7)");
    }
    if (gsc_ok) {
        note("gsc admitted: panel, events < 500000, treated/cohort < 50, controls < 5000, pre >= 7");
        if (facts.n_covariates > 5) {
            note("warning: " + std::to_string(facts.n_covariates) +
                 " covariates (> 5) make the factor model expensive");
        }
        out.estimator_ids.push_back("gsc");
    }

    bool dml_ok = false;
    if (facts.shape == ShapeKind::cross_sectional) {
        dml_ok = true;
        note("dml admitted: cross-sectional data");
    } else if (facts.pre_periods >= 1 && facts.post_periods >= 1 && facts.n_valid_cohorts >= 1) {
        dml_ok = true;
        note("dml admitted: panel with pre/post periods and " +
             std::to_string(facts.n_valid_cohorts) + " cohort(s) meeting the treated-count floor");
    } else {
        if (facts.pre_periods < 1 || facts.post_periods < 1) {
            note("dml rejected: no pre/post periods for a cohort cross-section");
        }
        if (facts.n_valid_cohorts < 1) {
            note("dml rejected: no cohort reaches the configured treated-unit floor");
        }
    }
    if (dml_ok) {
        out.estimator_ids.push_back("dml_linear");
        out.estimator_ids.push_back("dml_forest");
        out.estimator_ids.push_back("dml_boosted");
    }

    if (out.estimator_ids.empty()) {
        std::string detail;
        for (const auto& r : out.rationale) detail += "\n  - " + r;
        throw ValidationError("NoFeasibleEstimator", "no estimator is feasible:" + detail);
    }
    return out;
}

// ---------------------------------------------------------------------------
// stage two
// ---------------------------------------------------------------------------

StageTwoResult stage_two(const std::vector<EffectEstimate>& candidates) {
    if (candidates.empty()) {
        throw EstimationError("NoEstimates", "stage two called with no candidates");
    }
    StageTwoResult out;
    for (const auto& c : candidates) {
        EligibilityRow row;
        row.estimator_id = c.estimator_id;
        row.ate = c.ate;
        row.se = c.se;
        for (const auto& peer : candidates) {
            if (&peer == &c) continue;
            if (peer.contains(c.ate)) ++row.peer_votes;
        }
        row.eligible = row.peer_votes >= 2;
        out.table.push_back(row);
    }

    auto better = [&](const EffectEstimate& a, const EffectEstimate& b) {
        if (a.se != b.se) return a.se < b.se;
        return a.estimator_id < b.estimator_id;  // deterministic tie break
    };

    const EffectEstimate* pick = nullptr;
    if (candidates.size() >= 3) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (!out.table[i].eligible) continue;
            if (pick == nullptr || better(candidates[i], *pick)) pick = &candidates[i];
        }
    }
    if (pick == nullptr) {
        out.voting_degraded = true;
        for (const auto& c : candidates) {
            if (pick == nullptr || better(c, *pick)) pick = &c;
        }
    }
    out.selected = *pick;
    return out;
}

// ---------------------------------------------------------------------------
// run_study
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void rethrow_with_stage(const Error& e, const char* stage) {
    std::string msg = std::string("[stage: ") + stage + "] " + e.what();
    switch (e.kind()) {
        case ErrorKind::validation: throw ValidationError(e.code(), msg);
        case ErrorKind::estimation: throw EstimationError(e.code(), msg);
        case ErrorKind::io: throw IoError(e.code(), msg);
    }
    throw EstimationError(e.code(), msg);
}

LearnerKind kind_for(const std::string& estimator_id) {
    if (estimator_id == "dml_linear") return LearnerKind::linear;
    if (estimator_id == "dml_forest") return LearnerKind::forest;
    return LearnerKind::boosted;
}

// Mean control outcome over the post-treatment evaluation span; the uplift
// baseline.
double control_baseline_panel(const PanelDataset& panel, const TreatmentTable& treatment,
                              int from_ix, int to_ix) {
    std::vector<double> values;
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        int t = panel.time_ix[i];
        if (t < from_ix || t > to_ix) continue;
        const std::string& unit = panel.units[static_cast<std::size_t>(panel.unit_ix[i])];
        if (treatment.contains(unit)) continue;
        if (!is_missing(panel.outcome[i])) values.push_back(panel.outcome[i]);
    }
    return mean_of(values);
}

}  // namespace

StudyResult run_study(const ParsedInputs& inputs) {
    const StudyConfig& config = inputs.config;
    StudyResult result;
    result.seed = config.seed;
    result.warnings = inputs.report.warnings;

    // -- facts on the raw panel ---------------------------------------------
    RuleFacts facts;
    try {
        facts = summarize(inputs.panel, inputs.treatment, config);
    } catch (const Error& e) {
        rethrow_with_stage(e, "summarize");
    }

    // -- preprocessing -------------------------------------------------------
    PanelDataset panel;
    try {
        ImputeResult imputed = impute_default(inputs.panel);
        for (const auto& dropped : imputed.log.dropped_units) {
            result.warnings.push_back("unit '" + dropped + "' dropped during imputation");
        }
        panel = std::move(imputed.panel);
        if (!config.scale_columns.empty()) {
            ScaleResult scaled = scale_columns(panel, config.scale_columns,
                                               config.scale_method == "minmax" ? ScaleMethod::minmax
                                                                               : ScaleMethod::zscore);
            panel = std::move(scaled.panel);
            for (const auto& w : scaled.params.warnings) result.warnings.push_back(w);
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "preprocess");
    }

    // -- stage one -----------------------------------------------------------
    CandidateSet candidates;
    try {
        candidates = stage_one(facts);
        if (config.algorithm.has_value()) {
            const std::string& wanted = *config.algorithm;
            bool feasible = std::find(candidates.estimator_ids.begin(),
                                      candidates.estimator_ids.end(),
                                      wanted) != candidates.estimator_ids.end();
            if (!feasible) {
                throw ValidationError("NoFeasibleEstimator",
                                      "configured algorithm '" + wanted +
                                          "' is not feasible for this data");
            }
            candidates.estimator_ids = {wanted};
            candidates.rationale.push_back("user override: algorithm = " + wanted);
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "stage_one");
    }

    result.trace.facts = facts;
    result.trace.candidates = candidates;
    result.trace.override_algorithm = config.algorithm;

    const bool wants_dml = std::any_of(candidates.estimator_ids.begin(),
                                       candidates.estimator_ids.end(),
                                       [](const std::string& id) { return id.rfind("dml_", 0) == 0; });

    // -- cohort cross-sections for the DML path ------------------------------
    std::vector<CohortCrossSection> sections;
    try {
        if (wants_dml) {
            if (facts.shape == ShapeKind::cross_sectional) {
                sections.push_back(cross_section_from_snapshot(panel, inputs.treatment));
            } else {
                std::vector<int> lags = config.lags;
                if (lags.empty()) {
                    for (int k = 1; k <= config.pre_window; ++k) lags.push_back(k);
                }
                PanelDataset lagged = build_lag_features(panel, lags, {});
                result.cohort_list = build_cohorts(inputs.treatment, panel, config.cohort_min_times,
                                                   config.resolved_cohort_max_times(panel.period),
                                                   config.cohort_min_treated);
                Aggregation agg =
                    config.aggregation == "sum" ? Aggregation::sum : Aggregation::mean;
                for (const auto& cohort : result.cohort_list) {
                    sections.push_back(to_cross_section(lagged, cohort, inputs.treatment,
                                                        config.pre_window, config.post_window, agg));
                }
            }
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "cohort");
    }

    // -- run candidate estimators --------------------------------------------
    std::vector<EffectEstimate> estimates;
    std::map<std::string, DmlStudy> dml_studies;
    try {
        for (const auto& id : candidates.estimator_ids) {
            if (id == "gsc") {
                GscOptions opts;
                opts.pre_window = config.pre_window;
                opts.post_window = config.post_window;
                opts.rank = config.hp.gsc_rank;
                opts.rank_max = config.hp.gsc_rank_max;
                opts.tol = config.hp.gsc_tol;
                opts.max_iter = config.hp.gsc_max_iter;
                opts.bootstrap_replicates = config.hp.bootstrap_replicates;
                opts.seed = derive_seed(config.seed, 0x65c);
                result.gsc = estimate_gsc(panel, inputs.treatment, opts);
                estimates.push_back(result.gsc->estimate);
                log_info("gsc: ate " + std::to_string(result.gsc->estimate.ate) + " se " +
                         std::to_string(result.gsc->estimate.se) + " rank " +
                         std::to_string(result.gsc->rank));
            } else {
                LearnerKind kind = kind_for(id);
                LearnerSpec spec =
                    LearnerSpec::from_hyperparameters(kind, config.hp, derive_seed(config.seed, 0x1e));
                DmlOptions options;
                options.estimator_id = id;
                options.repetitions = config.hp.crossfit_repetitions;
                DmlStudy study = estimate_dml_on_sections(
                    sections, spec, spec, config.hp.k_folds,
                    derive_seed(config.seed, 0xd01 + static_cast<uint64_t>(kind)), options);
                estimates.push_back(study.total);
                log_info(id + ": ate " + std::to_string(study.total.ate) + " se " +
                         std::to_string(study.total.se));
                dml_studies.emplace(id, std::move(study));
            }
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "estimation");
    }

    // -- stage two ------------------------------------------------------------
    StageTwoResult voted;
    try {
        if (config.algorithm.has_value()) {
            voted.selected = estimates.front();
            voted.voting_degraded = false;
            EligibilityRow row;
            row.estimator_id = voted.selected.estimator_id;
            row.ate = voted.selected.ate;
            row.se = voted.selected.se;
            row.eligible = true;
            voted.table.push_back(row);
        } else {
            voted = stage_two(estimates);
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "stage_two");
    }

    result.selected = voted.selected;
    result.all_candidates = estimates;
    result.trace.eligibility = voted.table;
    result.trace.voting_degraded = voted.voting_degraded;
    result.trace.selected_id = voted.selected.estimator_id;
    if (auto it = dml_studies.find(voted.selected.estimator_id); it != dml_studies.end()) {
        result.cohorts = it->second.parts;
    } else if (!dml_studies.empty()) {
        // GSC selected: keep the lowest-SE DML breakdown for the report.
        const DmlStudy* best = nullptr;
        for (const auto& [id, study] : dml_studies) {
            if (best == nullptr || study.total.se < best->total.se) best = &study;
        }
        if (best != nullptr) result.cohorts = best->parts;
    }

    // -- validation of the winner ---------------------------------------------
    try {
        if (voted.selected.estimator_id == "gsc") {
            GscOptions opts;
            opts.pre_window = config.pre_window;
            opts.post_window = config.post_window;
            opts.rank = result.gsc->rank;  // re-use the resolved rank
            opts.rank_max = config.hp.gsc_rank_max;
            opts.tol = config.hp.gsc_tol;
            opts.max_iter = config.hp.gsc_max_iter;
            opts.bootstrap_replicates = config.hp.bootstrap_replicates;
            opts.seed = derive_seed(config.seed, 0x65c);
            result.validation = sensitivity_suite(panel, inputs.treatment, opts, voted.selected,
                                                  config.refute, derive_seed(config.seed, 0xef));
        } else {
            LearnerKind kind = kind_for(voted.selected.estimator_id);
            LearnerSpec spec =
                LearnerSpec::from_hyperparameters(kind, config.hp, derive_seed(config.seed, 0x1e));
            result.validation =
                refutation_suite(sections, spec, spec, config.hp.k_folds, voted.selected,
                                 config.refute, derive_seed(config.seed, 0xef));
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "refute");
    }

    // -- uplift -----------------------------------------------------------------
    try {
        double baseline = 0.0;
        if (facts.shape == ShapeKind::cross_sectional) {
            std::vector<double> values;
            for (std::size_t i = 0; i < panel.n_rows(); ++i) {
                const std::string& unit = panel.units[static_cast<std::size_t>(panel.unit_ix[i])];
                if (!inputs.treatment.contains(unit) && !is_missing(panel.outcome[i])) {
                    values.push_back(panel.outcome[i]);
                }
            }
            baseline = mean_of(values);
        } else if (voted.selected.estimator_id == "gsc" && result.gsc.has_value()) {
            int from = result.gsc->series.treatment_marker;
            baseline = control_baseline_panel(panel, inputs.treatment, from,
                                              std::min<int>(from + config.post_window - 1,
                                                            static_cast<int>(panel.n_periods()) - 1));
        } else if (!result.cohort_list.empty()) {
            // Weighted across cohorts with the aggregation weights.
            double acc = 0.0, wsum = 0.0;
            for (const auto& cohort : result.cohort_list) {
                double w = cohort.n_treated();
                double b = control_baseline_panel(
                    panel, inputs.treatment, cohort.window_end + 1,
                    std::min<int>(cohort.window_end + config.post_window,
                                  static_cast<int>(panel.n_periods()) - 1));
                acc += w * b;
                wsum += w;
            }
            baseline = wsum > 0 ? acc / wsum : 0.0;
        }
        result.control_post_mean = baseline;
        if (baseline == 0.0) {
            result.warnings.push_back("control baseline is zero; uplift not defined");
            result.uplift_percent = 0.0;
        } else {
            result.uplift_percent = 100.0 * result.selected.ate / baseline;
        }
    } catch (const Error& e) {
        rethrow_with_stage(e, "report");
    }

    result.panel = std::move(panel);
    return result;
}

}  // namespace teffect
