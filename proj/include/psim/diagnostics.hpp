#pragma once

#include <memory>
#include <string>
#include <vector>

#include "psim/env.hpp"

namespace psim {

/// Squared error summed over all feature dimensions, per rollout step
/// (standardized space).
std::vector<double> stepwise_mse(const Matrix& pred_std, const Matrix& true_std);

/// Per-rollout min-max normalization into [0,1]; a constant sequence maps to
/// all zeros.
std::vector<double> normalize_curve(const std::vector<double>& mse);

struct GrowthStat {
    double early_mean = 0.0;  // first decile of steps
    double late_mean = 0.0;   // last decile
    double ratio = 1.0;       // late/early; 1 when both are zero
};

/// Compares late-rollout error against early-rollout error; needs >= 20 steps.
GrowthStat growth_statistic(const std::vector<double>& mse);

struct SequenceSpec {
    std::string label;  // regime descriptor: steady | trend-shift | disturbance | sensor-burst
    int start_index = 0;
};

struct SequenceSuite {
    std::vector<SequenceSpec> sequences;
};

/// Start points at fixed fractions of the test region, labeled by the regime
/// the default scenario places there.
SequenceSuite default_suite(int n_rows, int l);

struct ErrorCurve {
    std::string model_label;
    std::string sequence_label;
    int start_index = 0;
    std::vector<double> step_mse;
    std::vector<double> normalized;
    GrowthStat growth;
    double one_step_mse = 0.0;
    double final_mse = 0.0;
    RolloutTrace trace;
    std::string error;  // non-empty when this cell failed

    bool ok() const { return error.empty(); }
};

struct EvalEntry {
    std::string label;
    std::shared_ptr<const ForecastModel> model;
    ScalerStats scaler;
};

/**
 * One replay rollout per (model, sequence) cell; failures are recorded in the
 * cell and the run continues. Cells are independent and evaluated
 * concurrently.
 */
std::vector<std::vector<ErrorCurve>> multi_sequence_eval(const std::vector<EvalEntry>& models,
                                                         const TimeSeriesDataset& dataset,
                                                         const SequenceSuite& suite, int episode_len,
                                                         const EnvConfig& base_config);

/// Overlay and error plots (SVG) plus `summary.csv`
/// (model,sequence,one_step_mse,growth_ratio,final_mse). Returns the files
/// written.
std::vector<std::string> render_report(const std::vector<std::vector<ErrorCurve>>& curves,
                                       const std::string& out_dir);

}  // namespace psim
