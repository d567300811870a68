#include "psim/env.hpp"

#include <cmath>
#include <fstream>

namespace psim {

void EnvConfig::validate(int l, int n, int dataset_rows) const {
    if (action_col < 0 || action_col >= n || objective_col < 0 || objective_col >= n)
        throw std::invalid_argument("env: action/objective column out of range");
    if (action_col == objective_col)
        throw std::invalid_argument("env: action and objective columns must differ");
    if (start_index < l)
        throw std::invalid_argument("env: start index p must be >= l = " + std::to_string(l));
    if (start_index > dataset_rows)
        throw std::invalid_argument("env: start index beyond the dataset");
    if (episode_len < 0) throw std::invalid_argument("env: episode length must be >= 0");
    if (stride < 1) throw std::invalid_argument("env: stride must be >= 1");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("env: gamma must be in [0,1]");
    if (w_p < 0.0 || w_u < 0.0) throw std::invalid_argument("env: reward weights must be >= 0");
    if (divergence_guard <= 0.0)
        throw std::invalid_argument("env: divergence guard must be > 0");
}

namespace {

bool is_clock_feature(const std::string& name) {
    return name == "hour_sin" || name == "hour_cos" || name == "dow_sin" || name == "dow_cos" ||
           name == "month_sin" || name == "month_cos";
}

double clock_value(const std::string& name, int64_t epoch) {
    CivilTime c = epoch_to_civil(epoch);
    double day_frac = (c.hour * 3600.0 + c.minute * 60.0 + c.second) / 86400.0;
    double frac = 0.0;
    if (name.rfind("hour", 0) == 0) frac = day_frac;
    else if (name.rfind("dow", 0) == 0) frac = (day_of_week(epoch) + day_frac) / 7.0;
    else frac = ((c.month - 1) + (c.day - 1 + day_frac) / 31.0) / 12.0;
    const double angle = 2.0 * M_PI * frac;
    return name.size() > 4 && name.substr(name.size() - 3) == "sin" ? std::sin(angle)
                                                                    : std::cos(angle);
}

}  // namespace

SimEnv::SimEnv(std::shared_ptr<const ForecastModel> model, ScalerStats scaler,
               TimeSeriesDataset dataset, EnvConfig config)
    : model_(std::move(model)),
      scaler_(std::move(scaler)),
      dataset_(std::move(dataset)),
      config_(config) {
    if (dataset_.feature_names() != scaler_.features)
        throw std::invalid_argument("env: dataset schema does not match the model's scaler");
    if (model_->n_features() != dataset_.n_features())
        throw std::invalid_argument("env: dataset feature count does not match the model");
    config_.validate(model_->window_len(), dataset_.n_features(), dataset_.n_rows());
    std_values_ = apply_scaler(scaler_, dataset_.values());
    for (int c = 0; c < dataset_.n_features(); ++c)
        if (is_clock_feature(dataset_.feature_names()[c])) clock_cols_.push_back(c);
}

Matrix SimEnv::reset() {
    const int l = model_->window_len();
    window_ = std_values_.slice_rows(config_.start_index - l, config_.start_index);
    steps_ = 0;
    total_reward_ = 0.0;
    done_ = config_.episode_len == 0;
    diverged_ = false;
    started_ = true;
    return dataset_.values().slice_rows(config_.start_index - l, config_.start_index);
}

Matrix SimEnv::predict_next(double action_std, int absolute_row) {
    const int l = model_->window_len();
    window_(l - 1, config_.action_col) = action_std;
    PredictContext ctx;
    ctx.absolute_target_row = absolute_row;
    Matrix pred = model_->predict(window_, ctx);
    // slide the window and append the prediction
    for (int r = 0; r + 1 < l; ++r)
        for (int c = 0; c < window_.cols(); ++c) window_(r, c) = window_(r + 1, c);
    for (int c = 0; c < window_.cols(); ++c) window_(l - 1, c) = pred(0, c);
    // exogenous clock columns are known functions of time
    if (!clock_cols_.empty()) {
        const int64_t step_s =
            dataset_.n_rows() > 1 ? dataset_.timestamps()[1] - dataset_.timestamps()[0] : 60;
        const int64_t epoch =
            absolute_row < dataset_.n_rows()
                ? dataset_.timestamps()[absolute_row]
                : dataset_.timestamps().back() +
                      step_s * (absolute_row - dataset_.n_rows() + 1);
        for (int c : clock_cols_) {
            const double raw = clock_value(dataset_.feature_names()[c], epoch);
            window_(l - 1, c) = (raw - scaler_.mean[c]) / scaler_.std[c];
            pred(0, c) = window_(l - 1, c);
        }
    }
    return pred;
}

StepResult SimEnv::step(double action) {
    if (!started_) throw std::logic_error("env: step before reset");
    if (done_) throw std::logic_error("env: step after the episode finished");
    if (!std::isfinite(action)) throw std::invalid_argument("env: non-finite action");

    const double action_std =
        (action - scaler_.mean[config_.action_col]) / scaler_.std[config_.action_col];
    Matrix pred_std(1, window_.cols());
    for (int sub = 0; sub < config_.stride; ++sub) {
        const int absolute = config_.start_index + steps_ * config_.stride + sub;
        pred_std = predict_next(action_std, absolute);
    }
    for (int c = 0; c < pred_std.cols(); ++c)
        if (std::abs(pred_std(0, c)) > config_.divergence_guard) diverged_ = true;

    StepResult out;
    out.state = invert_scaler(scaler_, pred_std);
    out.reward = reward(out.state, action, config_);
    ++steps_;
    total_reward_ += out.reward;
    done_ = steps_ >= config_.episode_len || diverged_;
    out.done = done_;
    out.step = steps_;
    out.total_reward = total_reward_;
    out.diverged = diverged_;
    return out;
}

double reward(const Matrix& predicted_row, double action, const EnvConfig& config) {
    const double objective = predicted_row(0, config.objective_col);
    const double over = std::max(0.0, objective - config.setpoint);
    return -(config.w_p * over * over + config.w_u * action);
}

double cumulative_reward(const std::vector<double>& rewards, double gamma) {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("cumulative_reward: gamma must be in [0,1]");
    double total = 0.0;
    for (size_t i = 0; i < rewards.size(); ++i)
        total += std::pow(gamma, static_cast<double>(i)) * rewards[i];
    return total;
}

RolloutTrace replay_rollout(std::shared_ptr<const ForecastModel> model,
                            const ScalerStats& scaler, const TimeSeriesDataset& dataset,
                            const EnvConfig& config) {
    const int M = config.episode_len;
    if (config.start_index + M * config.stride > dataset.n_rows())
        throw std::invalid_argument(
            "replay_rollout: dataset too short, needs p + M*stride = " +
            std::to_string(config.start_index + M * config.stride) + " rows, has " +
            std::to_string(dataset.n_rows()));
    SimEnv env(model, scaler, dataset, config);
    env.reset();

    const int n = dataset.n_features();
    RolloutTrace trace;
    trace.pred_std = Matrix(M, n);
    trace.true_std = Matrix(M, n);
    const Matrix std_values = apply_scaler(scaler, dataset.values());

    // a_0 is the control variable already present in the window's last row
    double action = dataset.values()(config.start_index - 1, config.action_col);
    for (int t = 0; t < M; ++t) {
        StepResult res = env.step(action);
        const int row = config.start_index + (t + 1) * config.stride - 1;  // predicted truth row
        const Matrix& w = env.window_std();
        const double next_action = dataset.values()(row, config.action_col);
        double mse = 0.0;
        for (int c = 0; c < n; ++c) {
            // the recorded dosage replaces the predicted one before the state
            // is consumed, so the saved row carries the true action
            const double pred_c = c == config.action_col
                                      ? std_values(row, c)
                                      : w(model->window_len() - 1, c);
            trace.pred_std(t, c) = pred_c;
            trace.true_std(t, c) = std_values(row, c);
            const double d = pred_c - std_values(row, c);
            mse += d * d;
        }
        RolloutRecord rec;
        rec.t = t;
        rec.action = next_action;
        rec.pred_objective = res.state(0, config.objective_col);
        rec.true_objective = dataset.values()(row, config.objective_col);
        rec.reward = res.reward;
        rec.step_mse = mse;
        trace.records.push_back(rec);
        action = rec.action;  // the recorded plant controller acts as the agent
        if (res.diverged) {
            trace.diverged = true;
            break;
        }
    }
    if (static_cast<int>(trace.records.size()) < M) {
        trace.pred_std = trace.pred_std.slice_rows(0, static_cast<int>(trace.records.size()));
        trace.true_std = trace.true_std.slice_rows(0, static_cast<int>(trace.records.size()));
    }
    return trace;
}

void save_trace_csv(const RolloutTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "t,action,pred_obj,true_obj,reward,step_mse\n";
    for (const auto& r : trace.records)
        f << r.t << "," << r.action << "," << r.pred_objective << "," << r.true_objective << ","
          << r.reward << "," << r.step_mse << "\n";
}

}  // namespace psim
