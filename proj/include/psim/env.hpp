#pragma once

#include <memory>
#include <string>
#include <vector>

#include "psim/dataset.hpp"
#include "psim/forecast.hpp"
#include "psim/preprocess.hpp"

namespace psim {

struct EnvConfig {
    int action_col = -1;     // i_a: dosage column index
    int objective_col = -1;  // i_o: objective (phosphate) column index
    int start_index = 0;     // p: first dataset row to predict
    int episode_len = 0;     // M
    int stride = 1;          // N: model applications per env step
    double gamma = 0.99;
    double w_p = 1.0;   // overshoot weight
    double w_u = 0.01;  // dosage cost weight
    double setpoint = 1.2;
    double divergence_guard = 10.0;  // |standardized component| limit

    void validate(int l, int n, int dataset_rows) const;
};

struct StepResult {
    Matrix state;  // 1 x n predicted row, unstandardized
    double reward = 0.0;
    bool done = false;
    // info
    int step = 0;
    double total_reward = 0.0;
    bool diverged = false;
};

/**
 * Step/reset simulation environment around a one-step forecaster. The rolling
 * l x n window starts as dataset history; each step overwrites the newest
 * row's action column with the agent's action, advances the model, and
 * appends the prediction. Exogenous clock columns (hour/dow/month encodings),
 * when present in the schema, are refreshed from the timestamp axis rather
 * than trusted from the model.
 */
class SimEnv {
public:
    SimEnv(std::shared_ptr<const ForecastModel> model, ScalerStats scaler,
           TimeSeriesDataset dataset, EnvConfig config);

    /// Restores the initial window; returns dataset rows [p-l, p) verbatim.
    Matrix reset();
    StepResult step(double action);

    bool done() const { return done_; }
    int steps_taken() const { return steps_; }
    double total_reward() const { return total_reward_; }
    /// Current model-input window, standardized (info/inspection).
    const Matrix& window_std() const { return window_; }
    /// How many of the window's newest rows are model predictions.
    int rows_predicted() const { return std::min(steps_ * config_.stride, model_->window_len()); }
    const EnvConfig& config() const { return config_; }

private:
    Matrix predict_next(double action_std, int absolute_row);

    std::shared_ptr<const ForecastModel> model_;
    ScalerStats scaler_;
    TimeSeriesDataset dataset_;
    Matrix std_values_;  // standardized dataset values
    EnvConfig config_;
    Matrix window_;
    int steps_ = 0;
    bool started_ = false;
    bool done_ = false;
    bool diverged_ = false;
    double total_reward_ = 0.0;
    std::vector<int> clock_cols_;  // schema columns refreshed from timestamps
};

/// r = -( w_p * max(0, objective - setpoint)^2 + w_u * action ); at most 0.
double reward(const Matrix& predicted_row, double action, const EnvConfig& config);

/// R_t = sum_{i=t}^{T} gamma^(i-t) r_i  (literal discounted sum).
double cumulative_reward(const std::vector<double>& rewards, double gamma);

struct RolloutRecord {
    int t = 0;
    double action = 0.0;  // plant-recorded dosage at the predicted row
    double pred_objective = 0.0;
    double true_objective = 0.0;
    double reward = 0.0;
    double step_mse = 0.0;  // squared error summed over dimensions, standardized
};

struct RolloutTrace {
    std::vector<RolloutRecord> records;
    Matrix pred_std;  // M x n standardized predictions
    Matrix true_std;  // M x n standardized dataset truth
    bool diverged = false;
};

/**
 * Dataset-replay test: the recorded plant controller acts as the agent. For
 * each of M steps the model predicts the next row, the prediction is appended
 * to the window, and the true dosage from the dataset replaces the predicted
 * one before the next advance.
 */
RolloutTrace replay_rollout(std::shared_ptr<const ForecastModel> model,
                            const ScalerStats& scaler, const TimeSeriesDataset& dataset,
                            const EnvConfig& config);

void save_trace_csv(const RolloutTrace& trace, const std::string& path);

}  // namespace psim
