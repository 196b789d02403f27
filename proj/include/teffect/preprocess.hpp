#pragma once

#include <string>
#include <vector>

#include "teffect/types.hpp"

namespace teffect {

enum class ImputePolicy { forward_fill, zero, drop_unit };

struct ImputationLog {
    std::vector<std::pair<std::string, int>> filled_per_unit;  // units with >0 filled cells
    std::vector<std::string> dropped_units;
};

struct ImputeResult {
    PanelDataset panel;
    ImputationLog log;
};

// Fill the regular grid so every retained unit has a row at every grid date.
// `policy` applies to the outcome and all covariate columns alike.
ImputeResult impute_missing(const PanelDataset& panel, ImputePolicy policy);

// Pipeline default: forward-fill the outcome (leading gaps take the first
// observed value), zero-fill covariates.
ImputeResult impute_default(const PanelDataset& panel);

// Shifted copies of the outcome series: <outcome>_lag<k> / <outcome>_lead<k>.
// Cells whose source index falls off the grid carry the missing marker.
PanelDataset build_lag_features(const PanelDataset& panel, const std::vector<int>& lags,
                                const std::vector<int>& leads);

enum class ScaleMethod { zscore, minmax };

struct ColumnScale {
    std::string column;
    ScaleMethod method;
    double offset = 0.0;  // mean (zscore) or min (minmax)
    double scale = 1.0;   // stddev (zscore) or max-min (minmax)
};

struct ScalerParams {
    std::vector<ColumnScale> columns;
    std::vector<std::string> skipped;  // constant columns
    std::vector<std::string> warnings;
};

struct ScaleResult {
    PanelDataset panel;
    ScalerParams params;
};

// Scale named columns in place (zscore uses the population stddev). Constant
// columns are skipped with a warning. The outcome column may be named
// explicitly but a warning is recorded since estimates then change units.
ScaleResult scale_columns(const PanelDataset& panel, const std::vector<std::string>& columns,
                          ScaleMethod method);

}  // namespace teffect
