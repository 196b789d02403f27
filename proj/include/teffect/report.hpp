#pragma once

#include <string>
#include <vector>

#include "teffect/decide.hpp"

namespace teffect {

// uplift% = 100 * effect / mean control outcome over the post window.
double compute_uplift(const EffectEstimate& estimate, double control_post_mean);

// Serialize the standardized result JSON (stable key order, floats at six
// significant digits). Returns the written path.
std::string write_result(const StudyResult& study, const std::string& out_dir);

// Per-cohort outcome trend series (CSV + SVG) and, for GSC, the actual vs
// synthetic fit. The SVG is rendered from the values read back out of the CSV.
std::vector<std::string> emit_plots(const StudyResult& study, const StudyConfig& config,
                                    const std::string& out_dir);

// Convenience used by the CLI: plots + result.json; fills artifact_paths.
std::string write_all_artifacts(StudyResult& study, const StudyConfig& config,
                                const std::string& out_dir);

}  // namespace teffect
