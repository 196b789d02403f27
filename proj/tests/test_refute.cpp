#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "teffect/cohort.hpp"
#include "teffect/refute.hpp"
#include "teffect/synth.hpp"

using namespace teffect;
using teffect::testing::make_panel;
using teffect::testing::make_treatment;

namespace {

std::vector<CohortCrossSection> synth1_sections(int n, uint64_t seed) {
    SynthSpec spec = SynthSpec::cross_sectional_default();
    spec.n_samples = n;
    spec.seed = seed;
    SynthData data = gen_cross_sectional(spec);
    return {cross_section_from_snapshot(data.panel, data.treatment)};
}

}  // namespace

TEST_CASE("refutation suite passes on well-behaved linear data") {
    auto sections = synth1_sections(1500, 42);
    LearnerSpec spec = LearnerSpec::linear(1e-6);
    EffectEstimate original = estimate_dml(sections[0], spec, spec, 5, 7);
    RefuteThresholds thresholds;
    ValidationReport report = refutation_suite(sections, spec, spec, 5, original, thresholds, 21);

    REQUIRE(report.tests.size() == 4);
    CHECK(report.tests[0].name == "placebo_treatment");
    CHECK(report.tests[1].name == "random_common_cause");
    CHECK(report.tests[2].name == "unobserved_common_cause");
    CHECK(report.tests[3].name == "data_subset");
    for (const auto& t : report.tests) {
        INFO(t.name, ": perturbed ", t.perturbed_ate, " vs ", t.original_ate);
        CHECK(t.passed);
    }
    CHECK(report.overall_passed);
    // placebo effect is near zero, others near the original
    CHECK(std::fabs(report.tests[0].perturbed_ate) < 0.5);
    CHECK(std::fabs(report.tests[1].perturbed_ate - original.ate) < 1.0);
}

TEST_CASE("overall flag is the conjunction of the individual tests") {
    auto sections = synth1_sections(800, 7);
    LearnerSpec spec = LearnerSpec::linear(1e-6);
    EffectEstimate original = estimate_dml(sections[0], spec, spec, 5, 7);
    // claim a wildly wrong original estimate: deviation tests must fail
    EffectEstimate wrong = make_estimate(original.estimator_id, original.ate + 100.0, 0.001,
                                         original.n_treated, original.n_control);
    RefuteThresholds thresholds;
    ValidationReport report = refutation_suite(sections, spec, spec, 5, wrong, thresholds, 3);
    CHECK_FALSE(report.overall_passed);
    bool any_fail = false;
    for (const auto& t : report.tests) any_fail = any_fail || !t.passed;
    CHECK(any_fail);
}

TEST_CASE("refutation suite is deterministic under a fixed seed") {
    auto sections = synth1_sections(600, 11);
    LearnerSpec spec = LearnerSpec::linear(1e-6);
    EffectEstimate original = estimate_dml(sections[0], spec, spec, 4, 5);
    RefuteThresholds thresholds;
    ValidationReport a = refutation_suite(sections, spec, spec, 4, original, thresholds, 13);
    ValidationReport b = refutation_suite(sections, spec, spec, 4, original, thresholds, 13);
    REQUIRE(a.tests.size() == b.tests.size());
    for (std::size_t i = 0; i < a.tests.size(); ++i) {
        CHECK(a.tests[i].perturbed_ate == b.tests[i].perturbed_ate);
        CHECK(a.tests[i].passed == b.tests[i].passed);
    }
}

TEST_CASE("placebo passes on true-null data across seeds") {
    int passes = 0;
    for (uint64_t s = 0; s < 20; ++s) {
        SynthSpec spec = SynthSpec::cross_sectional_default();
        spec.n_samples = 400;
        spec.true_ate = 0.0;
        spec.seed = 100 + s;
        SynthData data = gen_cross_sectional(spec);
        auto sections =
            std::vector<CohortCrossSection>{cross_section_from_snapshot(data.panel, data.treatment)};
        LearnerSpec lspec = LearnerSpec::linear(1e-6);
        EffectEstimate original = estimate_dml(sections[0], lspec, lspec, 4, s);
        RefuteThresholds thresholds;
        ValidationReport report =
            refutation_suite(sections, lspec, lspec, 4, original, thresholds, 77 + s);
        if (report.tests[0].passed) ++passes;
    }
    CHECK(passes >= 18);
}

TEST_CASE("sensitivity suite reports all three tests and keeps the sign") {
    Rng noise(5);
    std::vector<double> cell(static_cast<std::size_t>(30 * 20));
    for (auto& v : cell) v = noise.normal();
    PanelDataset panel = make_panel(
        30, 20,
        [&](int u, int t) {
            return 2.0 + 0.6 * u + 0.1 * t + 0.4 * cell[static_cast<std::size_t>(u * 20 + t)] +
                   ((u < 2 && t >= 12) ? 3.0 : 0.0);
        },
        1, [](int u, int c) { return 0.3 * u + c; });
    TreatmentTable treatment = make_treatment(panel, {{0, 12}, {1, 12}});
    GscOptions options;
    options.pre_window = 10;
    options.post_window = 5;
    options.rank = 0;
    options.bootstrap_replicates = 30;
    GscResult original = estimate_gsc(panel, treatment, options);
    REQUIRE(original.estimate.ate > 0.0);

    RefuteThresholds thresholds;
    ValidationReport report =
        sensitivity_suite(panel, treatment, options, original.estimate, thresholds, 31);
    REQUIRE(report.tests.size() == 3);
    CHECK(report.tests[0].name == "remove_covariates");
    CHECK(report.tests[1].name == "downsample_controls");
    CHECK(report.tests[2].name == "reduced_pre_window");
    for (const auto& t : report.tests) {
        INFO(t.name, " -> ", t.perturbed_ate);
        CHECK(t.passed);
        CHECK(t.perturbed_ate > 0.0);  // sign preserved
    }
    CHECK(report.overall_passed);
}

TEST_CASE("a sign flip fails the direction rule") {
    ValidationReport report;
    ValidationTest t;
    t.name = "remove_covariates";
    t.original_ate = 5.0;
    t.perturbed_ate = -1.0;
    t.passed = false;
    report.add(t);
    CHECK_FALSE(report.overall_passed);
}
