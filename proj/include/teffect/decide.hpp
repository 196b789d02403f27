#pragma once

#include <optional>
#include <string>
#include <vector>

#include "teffect/cohort.hpp"
#include "teffect/gsc.hpp"
#include "teffect/ingest.hpp"
#include "teffect/refute.hpp"
#include "teffect/types.hpp"

namespace teffect {

struct CandidateSet {
    std::vector<std::string> estimator_ids;  // ordered: gsc, dml_linear, dml_forest, dml_boosted
    std::vector<std::string> rationale;      // every fired rule
};

// Stage one: rule-based candidate selection from the summarized facts.
// Throws NoFeasibleEstimator when no rule admits an estimator.
CandidateSet stage_one(const RuleFacts& facts);

struct EligibilityRow {
    std::string estimator_id;
    double ate = 0.0;
    double se = 0.0;
    int peer_votes = 0;  // peers whose 95% CI contains this point estimate
    bool eligible = false;
};

struct StageTwoResult {
    EffectEstimate selected;
    std::vector<EligibilityRow> table;
    bool voting_degraded = false;
};

// Stage two: least standard error among candidates whose point estimate lies
// inside the 95% CI of at least two peers. Falls back to plain least-SE (with
// a degradation flag) when fewer than three candidates or none are eligible.
StageTwoResult stage_two(const std::vector<EffectEstimate>& candidates);

struct DecisionTrace {
    RuleFacts facts;
    CandidateSet candidates;
    std::optional<std::string> override_algorithm;
    std::vector<EligibilityRow> eligibility;
    bool voting_degraded = false;
    std::string selected_id;
};

struct StudyResult {
    EffectEstimate selected;
    std::vector<EffectEstimate> all_candidates;
    std::vector<CohortEstimate> cohorts;  // per-cohort breakdown (DML path)
    double uplift_percent = 0.0;
    double control_post_mean = 0.0;
    ValidationReport validation;
    DecisionTrace trace;
    std::vector<std::string> warnings;
    uint64_t seed = 0;

    // Extras for reporting.
    std::optional<GscResult> gsc;     // present when gsc ran
    PanelDataset panel;               // imputed panel (plot source)
    std::vector<Cohort> cohort_list;  // cohorts built for the DML path
    std::vector<std::string> artifact_paths;
};

// End-to-end pipeline: preprocess, decide, estimate all candidates, vote,
// validate the winner. Deterministic under config.seed.
StudyResult run_study(const ParsedInputs& inputs);

}  // namespace teffect
