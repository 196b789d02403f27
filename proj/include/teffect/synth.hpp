#pragma once

#include <string>

#include "teffect/types.hpp"

namespace teffect {

enum class SynthKind { cross_sectional_linear, panel_nonlinear };

struct SynthSpec {
    SynthKind kind = SynthKind::cross_sectional_linear;
    // cross-sectional
    int n_samples = 5000;
    int n_common_causes = 5;
    int n_instruments = 2;
    double treatment_noise = 0.05;  // label-flip rate
    // panel
    int n_units = 1000;
    int n_periods = 52;
    int n_confounders = 3;
    int n_treated = 263;
    double confounder_correlation = 0.7;

    double true_ate = 10.0;
    double noise_sd = 1.0;
    uint64_t seed = 42;

    static SynthSpec cross_sectional_default();
    static SynthSpec panel_default();
    static SynthSpec from_json(const std::string& json_text);
    std::string to_json() const;  // includes true_ate (metadata file content)
};

struct SynthData {
    PanelDataset panel;
    TreatmentTable treatment;
    SynthSpec spec;  // carries true_ate
};

// W ~ iid N(0,1), Z ~ iid N(0,1); coefficients once per seed from U(0.5,1.5);
// propensity = logistic((a'W + b'Z)/sqrt(p)); T ~ Bernoulli with label flips;
// Y = true_ate*T + c'W + N(0, noise_sd).
SynthData gen_cross_sectional(const SynthSpec& spec);

// Static unit confounders with one correlated pair; nonlinear effects on both
// the treatment propensity and the outcome; staggered treatment dates for the
// top-propensity units; Y_it = unit + 0.1 t + f(W) + true_ate*D + N(0,1).
SynthData gen_panel(const SynthSpec& spec);

SynthData generate(const SynthSpec& spec);

// Writes treatment.csv, observations.csv, metadata.json into out_dir.
std::vector<std::string> write_synth(const SynthData& data, const std::string& out_dir);

}  // namespace teffect
