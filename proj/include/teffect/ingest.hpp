#pragma once

#include <string>
#include <vector>

#include "teffect/types.hpp"

namespace teffect {

struct ParseReport {
    std::vector<std::string> warnings;
    int dropped_rows = 0;
};

struct ParsedInputs {
    TreatmentTable treatment;
    PanelDataset panel;
    StudyConfig config;
    ParseReport report;
};

// Config JSON -> StudyConfig. Unknown top-level keys are collected as warnings.
StudyConfig parse_config_json(const std::string& json_text);
StudyConfig load_config(const std::string& path);

// Treatment CSV -> TreatmentTable (column names from config).
TreatmentTable parse_treatment_csv(const std::string& csv_text, const StudyConfig& config);

// Observations CSV -> PanelDataset with inferred period and regular grid.
PanelDataset parse_observations_csv(const std::string& csv_text, const StudyConfig& config,
                                    ParseReport& report);

// Full pipeline entry: read and cross-validate the three inputs.
ParsedInputs parse_inputs(const std::string& treatment_csv_path,
                          const std::string& observations_csv_path,
                          const std::string& config_json_path);

// Same, from in-memory text (used by tests and the synth round trip).
ParsedInputs parse_inputs_text(const std::string& treatment_csv, const std::string& observations_csv,
                               const std::string& config_json);

ShapeKind detect_shape(const PanelDataset& panel);

// Map a treatment date onto the panel grid: first grid index with date >= when.
// -1 when the date falls past the end of the grid.
int treatment_grid_index(const PanelDataset& panel, const Date& when);

RuleFacts summarize(const PanelDataset& panel, const TreatmentTable& treatment,
                    const StudyConfig& config);

// Serializers (inverse of the parsers; used for artifacts and round trips).
std::string treatment_to_csv(const TreatmentTable& table, const StudyConfig& config);
std::string observations_to_csv(const PanelDataset& panel);

}  // namespace teffect
