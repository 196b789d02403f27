#include "teffect/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "teffect/ingest.hpp"

namespace teffect {

using json = nlohmann::ordered_json;

SynthSpec SynthSpec::cross_sectional_default() { return SynthSpec{}; }

SynthSpec SynthSpec::panel_default() {
    SynthSpec s;
    s.kind = SynthKind::panel_nonlinear;
    s.true_ate = 20.0;
    return s;
}

SynthSpec SynthSpec::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("InvalidSynthSpec", e.what());
    }
    std::string kind = j.value("kind", "cross_sectional_linear");
    SynthSpec s;
    if (kind == "cross_sectional_linear") {
        s = cross_sectional_default();
    } else if (kind == "panel_nonlinear") {
        s = panel_default();
    } else {
        throw ValidationError("InvalidSynthSpec", "unknown kind '" + kind + "'");
    }
    s.n_samples = j.value("n_samples", s.n_samples);
    s.n_common_causes = j.value("n_common_causes", s.n_common_causes);
    s.n_instruments = j.value("n_instruments", s.n_instruments);
    s.treatment_noise = j.value("treatment_noise", s.treatment_noise);
    s.n_units = j.value("n_units", s.n_units);
    s.n_periods = j.value("n_periods", s.n_periods);
    s.n_confounders = j.value("n_confounders", s.n_confounders);
    s.n_treated = j.value("n_treated", s.n_treated);
    s.confounder_correlation = j.value("confounder_correlation", s.confounder_correlation);
    s.true_ate = j.value("true_ate", s.true_ate);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    s.seed = j.value("seed", s.seed);
    if (s.n_samples < 1 || s.n_units < 1 || s.n_periods < 1) {
        throw ValidationError("InvalidSynthSpec", "counts must be positive");
    }
    return s;
}

std::string SynthSpec::to_json() const {
    json j;
    j["kind"] = kind == SynthKind::cross_sectional_linear ? "cross_sectional_linear"
                                                          : "panel_nonlinear";
    if (kind == SynthKind::cross_sectional_linear) {
        j["n_samples"] = n_samples;
        j["n_common_causes"] = n_common_causes;
        j["n_instruments"] = n_instruments;
        j["treatment_noise"] = treatment_noise;
    } else {
        j["n_units"] = n_units;
        j["n_periods"] = n_periods;
        j["n_confounders"] = n_confounders;
        j["n_treated"] = n_treated;
        j["confounder_correlation"] = confounder_correlation;
    }
    j["true_ate"] = true_ate;
    j["noise_sd"] = noise_sd;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

std::string unit_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%05d", i);
    return buf;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SynthData gen_cross_sectional(const SynthSpec& spec) {
    if (spec.kind != SynthKind::cross_sectional_linear) {
        throw ValidationError("InvalidSynthSpec", "expected cross_sectional_linear kind");
    }
    const int n = spec.n_samples;
    const int n_w = spec.n_common_causes;
    const int n_z = spec.n_instruments;
    Rng rng(spec.seed);

    std::vector<double> a(static_cast<std::size_t>(n_w)), b(static_cast<std::size_t>(n_z)),
        c(static_cast<std::size_t>(n_w));
    for (auto& v : a) v = rng.uniform(0.5, 1.5);
    for (auto& v : b) v = rng.uniform(0.5, 1.5);
    for (auto& v : c) v = rng.uniform(0.5, 1.5);
    // Scale keeps propensities off the saturated tails regardless of dimension.
    const double index_scale = 1.0 / std::sqrt(static_cast<double>(n_w + n_z));

    SynthData out;
    out.spec = spec;
    PanelDataset& panel = out.panel;
    panel.outcome_column = "y";
    for (int k = 0; k < n_w; ++k) panel.covariate_columns.push_back("w" + std::to_string(k));
    for (int k = 0; k < n_z; ++k) panel.covariate_columns.push_back("z" + std::to_string(k));
    panel.period = PeriodKind::single;
    const Date snapshot{2023, 1, 1};
    panel.grid = {snapshot};

    std::vector<std::string> treated_units;
    for (int i = 0; i < n; ++i) {
        std::vector<double> w(static_cast<std::size_t>(n_w)), z(static_cast<std::size_t>(n_z));
        for (auto& v : w) v = rng.normal();
        for (auto& v : z) v = rng.normal();
        double idx = 0.0;
        for (int k = 0; k < n_w; ++k) idx += a[static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(k)];
        for (int k = 0; k < n_z; ++k) idx += b[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
        double propensity = logistic(index_scale * idx);
        bool treated = rng.bernoulli(propensity);
        if (rng.bernoulli(spec.treatment_noise)) treated = !treated;
        double y = spec.true_ate * (treated ? 1.0 : 0.0);
        for (int k = 0; k < n_w; ++k) y += c[static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(k)];
        y += rng.normal(0.0, spec.noise_sd);

        panel.units.push_back(unit_name(i));
        panel.unit_ix.push_back(i);
        panel.time_ix.push_back(0);
        panel.outcome.push_back(y);
        for (double v : w) panel.cov.push_back(v);
        for (double v : z) panel.cov.push_back(v);
        if (treated) treated_units.push_back(unit_name(i));
    }
    panel.build_row_index();

    out.treatment.units = std::move(treated_units);  // generated in ascending unit order
    out.treatment.dates.assign(out.treatment.units.size(), snapshot);
    return out;
}

SynthData gen_panel(const SynthSpec& spec) {
    if (spec.kind != SynthKind::panel_nonlinear) {
        throw ValidationError("InvalidSynthSpec", "expected panel_nonlinear kind");
    }
    const int n_units = spec.n_units;
    const int T = spec.n_periods;
    if (spec.n_treated > n_units) {
        throw ValidationError("InvalidSynthSpec", "n_treated exceeds n_units");
    }
    // Staggered window: roughly periods 20..40 of a 52-period grid, scaled.
    const int first_treat = std::max(1, (T * 19) / 52);
    const int last_treat = std::min(T - 2, (T * 39) / 52);
    Rng rng(spec.seed);

    struct Unit {
        double w1, w2, w3;
        double effect;
        double propensity;
    };
    std::vector<Unit> units(static_cast<std::size_t>(n_units));
    const double rho = spec.confounder_correlation;
    for (auto& u : units) {
        u.w1 = rng.normal();
        u.w2 = rho * u.w1 + std::sqrt(1.0 - rho * rho) * rng.normal();
        u.w3 = rng.normal();
        u.effect = rng.normal();
        u.propensity = logistic(std::sin(u.w1) + u.w2 * u.w2 - 1.0 + 0.5 * u.w3);
    }

    // Top-propensity units receive treatment at seeded staggered dates.
    std::vector<int> order(static_cast<std::size_t>(n_units));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return units[static_cast<std::size_t>(x)].propensity >
               units[static_cast<std::size_t>(y)].propensity;
    });
    std::vector<int> treat_ix(static_cast<std::size_t>(n_units), -1);
    const int span = last_treat - first_treat + 1;
    for (int k = 0; k < spec.n_treated; ++k) {
        int unit = order[static_cast<std::size_t>(k)];
        treat_ix[static_cast<std::size_t>(unit)] =
            first_treat + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(span)));
    }

    SynthData out;
    out.spec = spec;
    PanelDataset& panel = out.panel;
    panel.outcome_column = "y";
    panel.covariate_columns = {"w1", "w2", "w3"};
    panel.period = PeriodKind::weekly;
    const Date start{2022, 1, 3};
    for (int t = 0; t < T; ++t) panel.grid.push_back(Date::from_serial(start.serial() + 7 * t));

    for (int i = 0; i < n_units; ++i) {
        panel.units.push_back(unit_name(i));
        const Unit& u = units[static_cast<std::size_t>(i)];
        double f_w = 2.0 * std::sin(u.w1) + u.w2 * u.w2 + 0.5 * u.w1 * u.w3;
        for (int t = 0; t < T; ++t) {
            bool treated_now = treat_ix[static_cast<std::size_t>(i)] >= 0 &&
                               t >= treat_ix[static_cast<std::size_t>(i)];
            double y = u.effect + 0.1 * t + f_w + (treated_now ? spec.true_ate : 0.0) +
                       rng.normal(0.0, spec.noise_sd);
            panel.unit_ix.push_back(i);
            panel.time_ix.push_back(t);
            panel.outcome.push_back(y);
            panel.cov.push_back(u.w1);
            panel.cov.push_back(u.w2);
            panel.cov.push_back(u.w3);
        }
    }
    panel.build_row_index();

    for (int i = 0; i < n_units; ++i) {
        if (treat_ix[static_cast<std::size_t>(i)] < 0) continue;
        out.treatment.units.push_back(unit_name(i));
        out.treatment.dates.push_back(panel.grid[static_cast<std::size_t>(treat_ix[static_cast<std::size_t>(i)])]);
    }
    return out;
}

SynthData generate(const SynthSpec& spec) {
    return spec.kind == SynthKind::cross_sectional_linear ? gen_cross_sectional(spec)
                                                          : gen_panel(spec);
}

std::vector<std::string> write_synth(const SynthData& data, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    StudyConfig naming;  // default treatment column names
    std::vector<std::string> paths;
    auto write = [&](const std::string& name, const std::string& content) {
        std::string path = (fs::path(out_dir) / name).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("FileNotWritable", "cannot write '" + path + "'");
        f << content;
        paths.push_back(path);
    };
    write("treatment.csv", treatment_to_csv(data.treatment, naming));
    write("observations.csv", observations_to_csv(data.panel));
    write("metadata.json", data.spec.to_json());
    return paths;
}

}  // namespace teffect
