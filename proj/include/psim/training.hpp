#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "psim/forecast.hpp"
#include "psim/preprocess.hpp"

namespace psim {

/// First-order adaptive-moment gradient descent.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// Applies grads (scaled by `scale`) to the tensors.
    void step(std::vector<NamedTensor>& params, const std::vector<Matrix>& grads,
              double scale = 1.0);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Matrix> m_, v_;
};

/// Argmin tracking over validation losses, plus early-stop bookkeeping.
class BestEpochSelector {
public:
    void observe(double val_loss);
    int best_epoch() const { return best_epoch_; }  // 0-based, -1 if none
    double best_loss() const { return best_loss_; }
    int epochs_since_best() const { return since_best_; }

private:
    int observed_ = 0;
    int best_epoch_ = -1;
    double best_loss_ = std::numeric_limits<double>::infinity();
    int since_best_ = 0;
};

struct TrainConfig {
    int epochs = 30;
    int patience = 10;  // early stop after this many epochs without improvement
    int max_batches_per_epoch = 0;  // 0 = full pass over the training windows
    double clip_norm = 5.0;         // global gradient-norm clip; 0 disables
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> train_mse;  // per epoch, standardized space
    std::vector<double> val_mse;
    int best_epoch = -1;
    double wall_seconds = 0.0;
    uint64_t seed = 0;
    bool diverged = false;
};

/// Self-describing serialized model: kind, hyperparameters, feature schema,
/// window length, scaler statistics, and named weight tensors.
struct Checkpoint {
    uint32_t version = 1;
    HyperParams hp;
    int l = 0;
    int n = 0;
    ScalerStats scaler;  // carries the feature schema
    std::vector<std::pair<std::string, Matrix>> tensors;
};

struct TrainResult {
    Checkpoint checkpoint;
    TrainReport report;
};

/**
 * Adam on the MSE loss over all features, standardized space. The returned
 * checkpoint holds the weights of the epoch with the lowest validation MSE.
 * Divergence (non-finite loss) stops training; if no finite epoch completed,
 * it throws, otherwise the best finite state is returned with the report
 * flagged. Deterministic per seed.
 */
TrainResult train(const HyperParams& hp, const WindowSet& train_ws, const WindowSet& val_ws,
                  const ScalerStats& scaler, const TrainConfig& cfg);

struct EvalMetrics {
    double mse = 0.0;       // mean over samples and feature dimensions
    double nmse = 0.0;      // mse / variance of the test targets
    double accuracy = 0.0;  // 1 - nmse, clamped to [0,1]
};

EvalMetrics evaluate(const ForecastModel& model, const WindowSet& test_ws);
EvalMetrics evaluate_checkpoint(const Checkpoint& ckpt, const WindowSet& test_ws);

std::unique_ptr<ForecastModel> model_from_checkpoint(const Checkpoint& ckpt);

/// Binary container: magic + version + JSON header + raw little-endian
/// doubles. Numeric payloads round-trip bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_train_report_csv(const TrainReport& report, const std::string& path);

}  // namespace psim
