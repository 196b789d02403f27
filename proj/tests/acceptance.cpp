// Acceptance suite: runs every release criterion and prints one line each.
//
//   teffect_acceptance [--data-dir DIR] [--out-dir DIR]
//
// Criteria that need the public benchmark datasets (smoking, IHDP) are
// skipped with a notice when the files are absent; scripts/fetch_data.sh
// downloads them. Exit code is nonzero iff any executed criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "teffect/cohort.hpp"
#include "teffect/csv.hpp"
#include "teffect/decide.hpp"
#include "teffect/dml.hpp"
#include "teffect/gsc.hpp"
#include "teffect/ingest.hpp"
#include "teffect/refute.hpp"
#include "teffect/report.hpp"
#include "teffect/synth.hpp"

using namespace teffect;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_passes = 0;
int g_skips = 0;

struct Check {
    std::string label;
    bool ok;
    std::string detail;
};

void report(int criterion, const std::string& name, const std::vector<Check>& checks) {
    bool all_ok = true;
    for (const auto& c : checks) all_ok = all_ok && c.ok;
    std::printf("[%s] criterion %d: %s\n", all_ok ? "PASS" : "FAIL", criterion, name.c_str());
    for (const auto& c : checks) {
        std::printf("        %-6s %s%s%s\n", c.ok ? "ok" : "FAIL", c.label.c_str(),
                    c.detail.empty() ? "" : " -- ", c.detail.c_str());
    }
    if (all_ok) ++g_passes;
    else ++g_failures;
}

void skip(int criterion, const std::string& name, const std::string& why) {
    std::printf("[SKIP] criterion %d: %s -- %s\n", criterion, name.c_str(), why.c_str());
    ++g_skips;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

StudyConfig base_config(const std::string& extra = "") {
    std::string text = R"({"time_column":"date","unit_column":"unit_id","outcome_column":"y",
                           "pre_window":1,"post_window":1,"seed":42)" +
                       extra + "}";
    return parse_config_json(text);
}

const EffectEstimate* find_candidate(const StudyResult& r, const std::string& id) {
    for (const auto& c : r.all_candidates) {
        if (c.estimator_id == id) return &c;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// 1. Synthetic #1 recovery
// ---------------------------------------------------------------------------

void criterion_1() {
    auto start = std::chrono::steady_clock::now();
    SynthSpec spec = SynthSpec::cross_sectional_default();  // seed 42
    SynthData data = gen_cross_sectional(spec);

    ParsedInputs inputs;
    inputs.treatment = data.treatment;
    inputs.panel = data.panel;
    inputs.config = base_config();
    StudyResult result = run_study(inputs);
    double elapsed = seconds_since(start);

    const EffectEstimate* linear = find_candidate(result, "dml_linear");
    std::vector<Check> checks;
    checks.push_back({"a DML variant is selected",
                      result.selected.estimator_id.rfind("dml_", 0) == 0,
                      result.selected.estimator_id});
    checks.push_back({"selected ate in [9.5, 10.5]",
                      result.selected.ate >= 9.5 && result.selected.ate <= 10.5,
                      fmt(result.selected.ate)});
    checks.push_back({"selected se < 0.15", result.selected.se < 0.15, fmt(result.selected.se)});
    checks.push_back({"dml_linear ate in [9.7, 10.3]",
                      linear != nullptr && linear->ate >= 9.7 && linear->ate <= 10.3,
                      linear ? fmt(linear->ate) : "absent"});
    checks.push_back({"runtime < 30 s", elapsed < 30.0, fmt(elapsed) + " s"});
    report(1, "synthetic cross-sectional recovery", checks);
}

// ---------------------------------------------------------------------------
// 2. Synthetic #2 recovery
// ---------------------------------------------------------------------------

void criterion_2() {
    auto start = std::chrono::steady_clock::now();
    SynthSpec spec = SynthSpec::panel_default();  // seed 42, true ate 20
    SynthData data = gen_panel(spec);

    ParsedInputs inputs;
    inputs.treatment = data.treatment;
    inputs.panel = data.panel;
    inputs.config = base_config(R"(,"pre_window":8,"post_window":8,
        "cohort_min_times":1,"cohort_max_times":3,"cohort_min_treated":25)");
    StudyResult result = run_study(inputs);
    double elapsed = seconds_since(start);

    std::vector<Check> checks;
    std::set<std::string> ids;
    for (const auto& c : result.all_candidates) ids.insert(c.estimator_id);
    checks.push_back({"all four candidates ran",
                      ids == std::set<std::string>{"gsc", "dml_linear", "dml_forest", "dml_boosted"},
                      std::to_string(ids.size()) + " candidates"});

    const EffectEstimate* gsc = find_candidate(result, "gsc");
    checks.push_back({"gsc ate in [19, 21]", gsc != nullptr && gsc->ate >= 19.0 && gsc->ate <= 21.0,
                      gsc ? fmt(gsc->ate) : "absent"});

    bool gsc_min_se = gsc != nullptr;
    for (const auto& c : result.all_candidates) {
        if (gsc != nullptr && c.se < gsc->se) gsc_min_se = false;
    }
    checks.push_back({"gsc selected when its se is minimal",
                      !gsc_min_se || result.selected.estimator_id == "gsc",
                      "min-se=" + std::string(gsc_min_se ? "gsc" : "other") + ", selected=" +
                          result.selected.estimator_id});

    checks.push_back({"cohorts were built", !result.cohort_list.empty(),
                      std::to_string(result.cohort_list.size()) + " cohorts"});

    bool aggregation_ok = false;
    if (!result.cohorts.empty()) {
        EffectEstimate re = aggregate_estimates(result.cohorts);
        const EffectEstimate* matching = find_candidate(result, re.estimator_id);
        aggregation_ok = matching != nullptr && std::fabs(re.ate - matching->ate) < 1e-9 &&
                         std::fabs(re.se - matching->se) < 1e-9;
    }
    checks.push_back({"weighted aggregation reproduces the candidate total", aggregation_ok, ""});
    checks.push_back({"runtime < 5 min", elapsed < 300.0, fmt(elapsed) + " s"});
    report(2, "synthetic panel recovery", checks);
}

// ---------------------------------------------------------------------------
// 3. Smoking benchmark (public data; skipped when absent)
// ---------------------------------------------------------------------------

struct SmokingInputs {
    std::string treatment_csv;
    std::string observations_no_cov;
    std::string observations_price;
};

// data/smoking.csv is the long-format Proposition 99 panel with columns
// state, year, cigsale, retprice (extra columns ignored).
bool load_smoking(const std::string& path, SmokingInputs& out) {
    if (!fs::exists(path)) return false;
    CsvTable csv = read_csv(path);
    int state = csv.column("state");
    int year = csv.column("year");
    int cigsale = csv.column("cigsale");
    int retprice = csv.column("retprice");
    if (state < 0 || year < 0 || cigsale < 0) return false;

    std::string treated;
    for (const auto& row : csv.rows) {
        std::string s = row[static_cast<std::size_t>(state)];
        if (s == "California" || s == "california" || s == "3") {
            treated = s;
            break;
        }
    }
    if (treated.empty()) return false;

    std::ostringstream no_cov, price;
    no_cov << "unit_id,date,y\n";
    price << "unit_id,date,y,retprice\n";
    for (const auto& row : csv.rows) {
        const std::string& y = row[static_cast<std::size_t>(cigsale)];
        if (y.empty()) continue;
        std::string date = row[static_cast<std::size_t>(year)].substr(0, 4) + "-01-01";
        no_cov << row[static_cast<std::size_t>(state)] << ',' << date << ',' << y << '\n';
        if (retprice >= 0) {
            price << row[static_cast<std::size_t>(state)] << ',' << date << ',' << y << ','
                  << row[static_cast<std::size_t>(retprice)] << '\n';
        }
    }
    out.treatment_csv = "unit_id,treatment_date\n" + treated + ",1989-01-01\n";
    out.observations_no_cov = no_cov.str();
    out.observations_price = retprice >= 0 ? price.str() : "";
    return true;
}

void criterion_3(const std::string& data_dir) {
    std::string path = (fs::path(data_dir) / "smoking.csv").string();
    SmokingInputs smoking;
    if (!load_smoking(path, smoking)) {
        skip(3, "smoking benchmark", path + " not present; run scripts/fetch_data.sh");
        return;
    }
    auto start = std::chrono::steady_clock::now();
    std::string config = R"({"time_column":"date","unit_column":"unit_id","outcome_column":"y",
        "pre_window":19,"post_window":12,"seed":42})";

    ParsedInputs no_cov = parse_inputs_text(smoking.treatment_csv, smoking.observations_no_cov, config);
    StudyResult base = run_study(no_cov);
    double elapsed = seconds_since(start);

    std::vector<Check> checks;
    checks.push_back({"gsc selected", base.selected.estimator_id == "gsc",
                      base.selected.estimator_id});
    checks.push_back({"ate in [-30, -15]", base.selected.ate >= -30.0 && base.selected.ate <= -15.0,
                      fmt(base.selected.ate)});
    checks.push_back({"sign negative", base.selected.ate < 0.0, ""});
    checks.push_back({"bootstrap se in [2, 12]", base.selected.se >= 2.0 && base.selected.se <= 12.0,
                      fmt(base.selected.se)});

    if (!smoking.observations_price.empty()) {
        ParsedInputs priced =
            parse_inputs_text(smoking.treatment_csv, smoking.observations_price, config);
        StudyResult with_price = run_study(priced);
        checks.push_back({"retail-price covariate moves the estimate toward zero",
                          std::fabs(with_price.selected.ate) < std::fabs(base.selected.ate),
                          fmt(base.selected.ate) + " -> " + fmt(with_price.selected.ate)});
    } else {
        checks.push_back({"retail price column present", false, "retprice missing from smoking.csv"});
    }
    checks.push_back({"runtime < 60 s", seconds_since(start) < 60.0, fmt(elapsed) + " s"});
    report(3, "smoking benchmark", checks);
}

// ---------------------------------------------------------------------------
// 4. IHDP benchmark (public data; skipped when absent)
// ---------------------------------------------------------------------------

// Headerless replicate files: treatment, y_factual, y_cfactual, mu0, mu1,
// x1..x25.
bool load_ihdp_replicate(const std::string& path, CohortCrossSection& cs, double& true_ate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) fields.push_back(std::strtod(cell.c_str(), nullptr));
        if (fields.size() < 6) return false;
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) return false;
    const std::size_t p = rows[0].size() - 5;
    cs = CohortCrossSection{};
    cs.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    cs.outcome.resize(static_cast<Eigen::Index>(rows.size()));
    cs.treatment.resize(static_cast<Eigen::Index>(rows.size()));
    double mu_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        cs.treatment(static_cast<Eigen::Index>(i)) = rows[i][0] > 0.5 ? 1.0 : 0.0;
        cs.outcome(static_cast<Eigen::Index>(i)) = rows[i][1];
        mu_sum += rows[i][4] - rows[i][3];
        for (std::size_t j = 0; j < p; ++j) {
            cs.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][5 + j];
        }
        cs.unit_ids.push_back("u" + std::to_string(i));
    }
    cs.n_treated = static_cast<int>(cs.treatment.sum());
    cs.n_control = static_cast<int>(cs.treatment.size()) - cs.n_treated;
    for (std::size_t j = 0; j < p; ++j) cs.feature_names.push_back("x" + std::to_string(j + 1));
    true_ate = mu_sum / static_cast<double>(rows.size());
    return true;
}

void criterion_4(const std::string& data_dir) {
    fs::path dir = fs::path(data_dir) / "ihdp";
    if (!fs::exists(dir / "ihdp_npci_1.csv")) {
        skip(4, "ihdp benchmark", dir.string() + " not present; run scripts/fetch_data.sh");
        return;
    }
    LearnerSpec spec = LearnerSpec::linear(1e-6);
    double abs_err_sum = 0.0;
    int used = 0;
    for (int rep = 1; rep <= 100; ++rep) {
        std::string path = (dir / ("ihdp_npci_" + std::to_string(rep) + ".csv")).string();
        CohortCrossSection cs;
        double true_ate = 0.0;
        if (!load_ihdp_replicate(path, cs, true_ate)) continue;
        EffectEstimate e = estimate_dml(cs, spec, spec, 5, 42 + static_cast<uint64_t>(rep));
        abs_err_sum += std::fabs(e.ate - true_ate);
        ++used;
    }
    std::vector<Check> checks;
    checks.push_back({"replicates found", used >= 50, std::to_string(used) + " of 100"});
    double mae = used > 0 ? abs_err_sum / used : 1e9;
    checks.push_back({"dml_linear mean MAE in [0.2, 0.8]", mae >= 0.2 && mae <= 0.8, fmt(mae)});
    report(4, "ihdp benchmark", checks);
}

// ---------------------------------------------------------------------------
// 5. Decision-path fixtures
// ---------------------------------------------------------------------------

void criterion_5() {
    std::vector<Check> checks;

    RuleFacts smoking;
    smoking.total_events = 1209;
    smoking.shape = ShapeKind::panel;
    smoking.max_treated_per_cohort = 1;
    smoking.n_valid_cohorts = 0;
    smoking.n_treated_units = 1;
    smoking.n_control_units = 38;
    smoking.n_covariates = 1;
    smoking.pre_periods = 19;
    smoking.post_periods = 12;
    CandidateSet set_a = stage_one(smoking);
    checks.push_back({"smoking facts -> exactly {gsc}",
                      set_a.estimator_ids == std::vector<std::string>{"gsc"}, ""});

    RuleFacts synth1;
    synth1.total_events = 5000;
    synth1.shape = ShapeKind::cross_sectional;
    synth1.max_treated_per_cohort = 2500;
    synth1.n_valid_cohorts = 1;
    synth1.n_treated_units = 2500;
    synth1.n_control_units = 2500;
    synth1.n_covariates = 7;
    CandidateSet set_b = stage_one(synth1);
    bool no_gsc = std::find(set_b.estimator_ids.begin(), set_b.estimator_ids.end(), "gsc") ==
                  set_b.estimator_ids.end();
    checks.push_back({"cross-sectional facts exclude gsc", no_gsc && set_b.estimator_ids.size() == 3,
                      ""});

    StageTwoResult single = stage_two({make_estimate("gsc", -24.6, 4.9, 1, 38)});
    checks.push_back({"single candidate sets voting_degraded", single.voting_degraded, ""});

    report(5, "decision-path fixtures", checks);
}

// ---------------------------------------------------------------------------
// 6. Refutation suite on Synthetic #1 + null placebo
// ---------------------------------------------------------------------------

void criterion_6() {
    SynthSpec spec = SynthSpec::cross_sectional_default();
    SynthData data = gen_cross_sectional(spec);
    std::vector<CohortCrossSection> sections = {
        cross_section_from_snapshot(data.panel, data.treatment)};
    LearnerSpec lspec = LearnerSpec::linear(1e-6);
    EffectEstimate original = estimate_dml(sections[0], lspec, lspec, 5, 42);
    RefuteThresholds thresholds;
    ValidationReport rep = refutation_suite(sections, lspec, lspec, 5, original, thresholds, 42);

    std::vector<Check> checks;
    const ValidationTest* placebo = nullptr;
    const ValidationTest* random_cc = nullptr;
    const ValidationTest* unobserved = nullptr;
    const ValidationTest* subset = nullptr;
    for (const auto& t : rep.tests) {
        if (t.name == "placebo_treatment") placebo = &t;
        if (t.name == "random_common_cause") random_cc = &t;
        if (t.name == "unobserved_common_cause") unobserved = &t;
        if (t.name == "data_subset") subset = &t;
    }
    checks.push_back({"placebo |ate| < 2 se", placebo != nullptr && placebo->passed,
                      placebo ? fmt(placebo->perturbed_ate) : "missing"});
    checks.push_back(
        {"random common cause within 10%",
         random_cc != nullptr &&
             std::fabs(random_cc->perturbed_ate - original.ate) <= 0.10 * std::fabs(original.ate),
         random_cc ? fmt(random_cc->perturbed_ate) : "missing"});
    checks.push_back(
        {"data subset within 10%",
         subset != nullptr &&
             std::fabs(subset->perturbed_ate - original.ate) <= 0.10 * std::fabs(original.ate),
         subset ? fmt(subset->perturbed_ate) : "missing"});
    bool unobserved_ok = unobserved != nullptr && unobserved->passed &&
                         (unobserved->perturbed_ate >= 0) == (original.ate >= 0) &&
                         std::fabs(unobserved->perturbed_ate - original.ate) <=
                             0.30 * std::fabs(original.ate);
    checks.push_back({"unobserved confounder passes sign + 30%", unobserved_ok,
                      unobserved ? fmt(unobserved->perturbed_ate) : "missing"});
    checks.push_back({"overall_passed", rep.overall_passed, ""});

    // Null-effect generator: placebo must pass in at least 18 of 20 seeds.
    int passes = 0;
    for (uint64_t s = 0; s < 20; ++s) {
        SynthSpec null_spec = SynthSpec::cross_sectional_default();
        null_spec.n_samples = 1000;
        null_spec.true_ate = 0.0;
        null_spec.seed = 9000 + s;
        SynthData null_data = gen_cross_sectional(null_spec);
        std::vector<CohortCrossSection> null_sections = {
            cross_section_from_snapshot(null_data.panel, null_data.treatment)};
        EffectEstimate null_orig = estimate_dml(null_sections[0], lspec, lspec, 5, s);
        ValidationReport null_rep =
            refutation_suite(null_sections, lspec, lspec, 5, null_orig, thresholds, 100 + s);
        if (null_rep.tests.front().passed) ++passes;
    }
    checks.push_back({"null placebo passes >= 18/20 seeds", passes >= 18,
                      std::to_string(passes) + "/20"});
    report(6, "refutation suite", checks);
}

// ---------------------------------------------------------------------------
// 7. Oracle equivalences
// ---------------------------------------------------------------------------

void criterion_7() {
    std::vector<Check> checks;

    // (a) Frisch-Waugh-Lovell on 50 random instances
    int fwl_ok = 0;
    for (uint64_t s = 0; s < 50; ++s) {
        Rng rng(7000 + s);
        int n = 60 + static_cast<int>(rng.uniform_int(140));
        int p = 1 + static_cast<int>(rng.uniform_int(5));
        CohortCrossSection cs;
        cs.features.resize(n, p);
        cs.outcome.resize(n);
        cs.treatment.resize(n);
        for (int i = 0; i < n; ++i) {
            double idx = 0.0;
            for (int j = 0; j < p; ++j) {
                cs.features(i, j) = rng.normal();
                idx += 0.3 * cs.features(i, j);
            }
            cs.treatment(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-idx))) ? 1.0 : 0.0;
            cs.outcome(i) = rng.uniform(-3, 3) * cs.treatment(i) + idx + rng.normal();
        }
        cs.n_treated = static_cast<int>(cs.treatment.sum());
        cs.n_control = n - cs.n_treated;
        if (cs.n_treated == 0 || cs.n_control == 0) {
            ++fwl_ok;  // degenerate draw; nothing to compare
            continue;
        }
        for (int j = 0; j < p; ++j) cs.feature_names.push_back("x");

        DmlOptions options;
        options.crossfit = false;
        EffectEstimate e =
            estimate_dml(cs, LearnerSpec::linear(0.0), LearnerSpec::linear(0.0), 2, 1, options);

        Eigen::MatrixXd design(n, p + 2);
        design.col(0).setOnes();
        design.col(1) = cs.treatment;
        design.rightCols(p) = cs.features;
        Eigen::VectorXd coef = design.colPivHouseholderQr().solve(cs.outcome);
        if (std::fabs(e.ate - coef(1)) < 1e-8) ++fwl_ok;
    }
    checks.push_back({"FWL equivalence on 50 instances", fwl_ok == 50,
                      std::to_string(fwl_ok) + "/50 within 1e-8"});

    // (b) rank-0 factor model equals two-way fixed-effects OLS
    int fe_ok = 0;
    for (uint64_t s = 0; s < 5; ++s) {
        Rng rng(7100 + s);
        const int T = 12, N = 15;
        PanelMatrix data;
        data.outcome.resize(T, N);
        data.covariates.assign(1, Eigen::MatrixXd(T, N));
        for (int u = 0; u < N; ++u) {
            data.unit_ids.push_back("u" + std::to_string(u));
            double alpha = rng.normal();
            for (int t = 0; t < T; ++t) {
                double x = rng.normal();
                data.covariates[0](t, u) = x;
                data.outcome(t, u) = 1.0 + alpha + 0.2 * t + 2.5 * x + 0.7 * rng.normal();
            }
        }
        FactorModel model = fit_ife(data, 0);

        Eigen::MatrixXd design(T * N, 1 + 1 + (N - 1) + (T - 1));
        Eigen::VectorXd target(T * N);
        int row = 0;
        for (int u = 0; u < N; ++u) {
            for (int t = 0; t < T; ++t) {
                design.row(row).setZero();
                design(row, 0) = 1.0;
                design(row, 1) = data.covariates[0](t, u);
                if (u > 0) design(row, 1 + u) = 1.0;
                if (t > 0) design(row, 1 + (N - 1) + t) = 1.0;
                target(row) = data.outcome(t, u);
                ++row;
            }
        }
        Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
        if (std::fabs(model.beta(0) - coef(1)) < 1e-6) ++fe_ok;
    }
    checks.push_back({"rank-0 factor model equals dummy OLS", fe_ok == 5,
                      std::to_string(fe_ok) + "/5 within 1e-6"});

    // (c) rank selection recovers the planted rank, 20/20 noiseless seeds
    int rank_ok = 0;
    for (uint64_t s = 0; s < 20; ++s) {
        int planted = static_cast<int>(s % 4);
        Rng rng(7200 + s);
        const int T = 20, N = 26;
        Eigen::MatrixXd F(T, planted), L(N, planted);
        for (int k = 0; k < planted; ++k) {
            for (int t = 0; t < T; ++t) F(t, k) = std::sin(0.5 * (k + 1) * t) + 0.4 * rng.normal();
            for (int u = 0; u < N; ++u) L(u, k) = rng.normal() * (2.0 - 0.4 * k);
        }
        PanelMatrix data;
        data.outcome.resize(T, N);
        for (int u = 0; u < N; ++u) {
            data.unit_ids.push_back("u" + std::to_string(u));
            double alpha = rng.normal();
            for (int t = 0; t < T; ++t) {
                double y = alpha + 0.3 * t;
                for (int k = 0; k < planted; ++k) y += F(t, k) * L(u, k);
                data.outcome(t, u) = y;
            }
        }
        if (select_rank(data, 5, 14) == planted) ++rank_ok;
    }
    checks.push_back({"rank selection recovers ranks 0..3", rank_ok == 20,
                      std::to_string(rank_ok) + "/20"});

    report(7, "oracle equivalences", checks);
}

// ---------------------------------------------------------------------------
// 8. Property suites and determinism
// ---------------------------------------------------------------------------

PanelDataset property_panel(int n_units, int n_periods) {
    PanelDataset panel;
    panel.outcome_column = "y";
    panel.period = PeriodKind::weekly;
    Date start{2022, 1, 3};
    for (int t = 0; t < n_periods; ++t)
        panel.grid.push_back(Date::from_serial(start.serial() + 7 * t));
    for (int u = 0; u < n_units; ++u) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%05d", u);
        panel.units.push_back(buf);
        for (int t = 0; t < n_periods; ++t) {
            panel.unit_ix.push_back(u);
            panel.time_ix.push_back(t);
            panel.outcome.push_back(u + 0.1 * t);
        }
    }
    panel.build_row_index();
    return panel;
}

void criterion_8(const std::string& out_dir) {
    std::vector<Check> checks;

    // cohort partition/constraint invariants on 1000 randomized tables
    int partition_ok = 0;
    const int trials = 1000;
    Rng rng(8000);
    for (int trial = 0; trial < trials; ++trial) {
        int n_times = 1 + static_cast<int>(rng.uniform_int(10));
        int min_times = 1 + static_cast<int>(rng.uniform_int(3));
        int max_times = min_times + static_cast<int>(rng.uniform_int(4));
        int min_treated = 1 + static_cast<int>(rng.uniform_int(80));

        PanelDataset panel = property_panel(400, n_times + 6);
        TreatmentTable treatment;
        int unit = 0;
        for (int k = 0; k < n_times; ++k) {
            int count = 1 + static_cast<int>(rng.uniform_int(50));
            for (int i = 0; i < count && unit < 360; ++i, ++unit) {
                treatment.units.push_back(panel.units[static_cast<std::size_t>(unit)]);
                treatment.dates.push_back(panel.grid[static_cast<std::size_t>(k + 2)]);
            }
        }
        auto cohorts = build_cohorts(treatment, panel, min_times, max_times, min_treated);

        bool ok = true;
        std::set<std::string> seen;
        int last_time = -1;
        int total = 0;
        for (std::size_t i = 0; i < cohorts.size(); ++i) {
            const Cohort& c = cohorts[i];
            for (const auto& id : c.treated_ids) ok = ok && seen.insert(id).second;
            for (int t : c.time_indices) {
                ok = ok && t > last_time;
                last_time = t;
            }
            total += c.n_treated();
            ok = ok && static_cast<int>(c.time_indices.size()) <= max_times;
            if (!c.flagged) {
                ok = ok && static_cast<int>(c.time_indices.size()) >= min_times;
                ok = ok && c.n_treated() >= min_treated;
            } else if (i + 1 < cohorts.size()) {
                ok = ok && static_cast<int>(c.time_indices.size()) == max_times;
            }
        }
        ok = ok && total == static_cast<int>(treatment.size());
        if (ok) ++partition_ok;
    }
    checks.push_back({"cohort invariants on 1000 random tables", partition_ok == trials,
                      std::to_string(partition_ok) + "/" + std::to_string(trials)});

    // aggregation permutation invariance
    int perm_ok = 0;
    for (uint64_t s = 0; s < 100; ++s) {
        Rng prng(8100 + s);
        std::vector<CohortEstimate> parts;
        int n = 2 + static_cast<int>(prng.uniform_int(6));
        for (int i = 0; i < n; ++i) {
            CohortEstimate part;
            int treated = 1 + static_cast<int>(prng.uniform_int(40));
            for (int k = 0; k < treated; ++k)
                part.cohort.treated_ids.push_back("u" + std::to_string(i * 100 + k));
            part.estimate = make_estimate("dml_linear", prng.uniform(-10, 10),
                                          prng.uniform(0.01, 3.0), treated, 50);
            parts.push_back(part);
        }
        EffectEstimate fwd = aggregate_estimates(parts);
        std::vector<CohortEstimate> shuffled = parts;
        std::vector<std::size_t> order(parts.size());
        std::iota(order.begin(), order.end(), 0);
        prng.shuffle(order);
        for (std::size_t i = 0; i < parts.size(); ++i) shuffled[i] = parts[order[i]];
        EffectEstimate rev = aggregate_estimates(shuffled);
        if (std::fabs(fwd.ate - rev.ate) < 1e-9 && std::fabs(fwd.se - rev.se) < 1e-9) ++perm_ok;
    }
    checks.push_back({"aggregation permutation invariance", perm_ok == 100,
                      std::to_string(perm_ok) + "/100"});

    // determinism: two identical seeded runs -> byte-identical artifacts
    {
        SynthSpec spec = SynthSpec::panel_default();
        spec.n_units = 120;
        spec.n_periods = 32;
        spec.n_treated = 30;
        spec.seed = 4242;
        SynthData data = gen_panel(spec);
        ParsedInputs inputs;
        inputs.treatment = data.treatment;
        inputs.panel = data.panel;
        inputs.config = base_config(R"(,"pre_window":6,"post_window":6,
            "cohort_min_times":1,"cohort_max_times":4,"cohort_min_treated":8,
            "hyperparameters":{"forest_trees":40,"boosted_rounds":40,"bootstrap_replicates":60})");

        fs::path dir_a = fs::path(out_dir) / "det_a";
        fs::path dir_b = fs::path(out_dir) / "det_b";
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);

        StudyResult run_a = run_study(inputs);
        write_all_artifacts(run_a, inputs.config, dir_a.string());
        StudyResult run_b = run_study(inputs);
        write_all_artifacts(run_b, inputs.config, dir_b.string());

        bool identical = true;
        int compared = 0;
        for (const auto& entry : fs::directory_iterator(dir_a)) {
            fs::path twin = dir_b / entry.path().filename();
            if (!fs::exists(twin) || slurp(entry.path().string()) != slurp(twin.string())) {
                identical = false;
            }
            ++compared;
        }
        checks.push_back({"two seeded runs are byte-identical", identical && compared >= 3,
                          std::to_string(compared) + " artifacts compared"});
    }

    report(8, "property suites and determinism", checks);
}

}  // namespace

int main(int argc, char** argv) {
    std::string data_dir = "data";
    std::string out_dir = (fs::temp_directory_path() / "teffect_acceptance").string();
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--data-dir") == 0) data_dir = argv[i + 1];
        if (std::strcmp(argv[i], "--out-dir") == 0) out_dir = argv[i + 1];
    }
    fs::create_directories(out_dir);
    set_log_level(LogLevel::error);

    criterion_1();
    criterion_2();
    criterion_3(data_dir);
    criterion_4(data_dir);
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8(out_dir);

    std::printf("\nacceptance: %d passed, %d failed, %d skipped\n", g_passes, g_failures, g_skips);
    return g_failures == 0 ? 0 : 1;
}
