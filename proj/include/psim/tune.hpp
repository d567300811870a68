#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "psim/training.hpp"

namespace psim {

enum class AxisType { kUniform, kLogUniform, kInt, kCategorical };

struct Axis {
    std::string name;
    AxisType type = AxisType::kUniform;
    double lo = 0.0, hi = 1.0;     // bounds (kInt inclusive)
    std::vector<double> choices;   // kCategorical
};

using ParamPoint = std::map<std::string, double>;

struct SearchSpace {
    std::vector<Axis> axes;
    bool contains(const ParamPoint& point) const;
};

struct Trial {
    ParamPoint point;
    double objective = std::numeric_limits<double>::infinity();
    bool failed = false;
};

struct TpeConfig {
    int budget = 30;
    int startup_trials = 10;  // random before the density model kicks in
    int candidates = 24;      // samples from l(x) scored by l/g per round
    double gamma = 0.25;      // fraction of trials forming the "good" density
    uint64_t seed = 0;
};

struct TuneOutcome {
    Trial best;
    std::vector<Trial> trials;
};

/**
 * Tree-structured Parzen Estimator, minimizing. Random startup trials, then
 * candidates sampled from a kernel density over the good trials and ranked by
 * the good/bad density ratio. Throws if every trial failed.
 */
TuneOutcome tpe_minimize(const SearchSpace& space,
                         const std::function<double(const ParamPoint&)>& objective,
                         const TpeConfig& cfg);

/// Fast per-family configurations for laptop-scale runs.
HyperParams desk_defaults(ModelKind kind);
/// Paper-scale tuned configurations (one per model family).
HyperParams table1_profile(ModelKind kind);
/// Search space whose axes admit every table1_profile point.
SearchSpace table1_search_space(ModelKind kind);
/// Smaller space for desk-scale tuning runs.
SearchSpace desk_search_space(ModelKind kind);

ParamPoint point_from_hyperparams(const HyperParams& hp);
HyperParams hyperparams_from_point(ModelKind kind, const ParamPoint& point,
                                   const HyperParams& base = {});

struct TuneModelConfig {
    int budget = 8;
    int epochs_per_trial = 3;
    int max_batches_per_epoch = 40;
    uint64_t seed = 0;
};

/// Tunes one model family on the given windows (desk-scale space); the
/// objective is the best validation MSE of a short training run.
TuneOutcome tune_model(ModelKind kind, const WindowSet& train_ws, const WindowSet& val_ws,
                       const ScalerStats& scaler, const TuneModelConfig& cfg);

void save_tuning_ledger_csv(const TuneOutcome& outcome, const std::string& path);

}  // namespace psim
