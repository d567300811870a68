#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "psim/autodiff.hpp"
#include "psim/matrix.hpp"

namespace psim {

enum class ModelKind { kLstm, kTransformer, kInformer, kAutoformer, kDLinear, kNLinear };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
std::vector<ModelKind> all_model_kinds();

struct HyperParams {
    ModelKind kind = ModelKind::kDLinear;
    double learning_rate = 1e-3;
    double dropout = 0.0;
    int batch_size = 32;
    int enc_layers = 1;  // stacked layers for the LSTM
    int dec_layers = 1;
    int dim = 32;  // LSTM hidden size / attention model dimension
    int heads = 2;
    int ffn_factor = 2;       // feed-forward width = ffn_factor * dim
    int decomp_kernel = 25;   // decomposition moving-average width
    bool individual = true;   // linear models: per-channel weights
    int label_len = 16;       // decoder start-token slice length
    double sparsity_factor = 1.0;  // probsparse c
    int top_k_delays = 3;
    bool paper_lstm_activations = false;  // sigmoid cell candidate instead of tanh
    bool positional_encoding = true;

    void validate() const;
};

/// Extra context available when the environment drives a model: the absolute
/// dataset row being predicted. Learned models ignore it; the plant-dynamics
/// oracle model needs it to evaluate time-varying forcing.
struct PredictContext {
    int64_t absolute_target_row = -1;
};

struct NamedTensor {
    std::string name;
    Matrix* tensor;
};

/**
 * Uniform one-step forecaster: standardized l x n window in, 1 x n row out.
 * Weights are immutable during predict; training mutates them through
 * loss_and_grads + an optimizer.
 */
class ForecastModel {
public:
    virtual ~ForecastModel() = default;

    ModelKind kind() const { return kind_; }
    int window_len() const { return l_; }
    int n_features() const { return n_; }
    const HyperParams& hyperparams() const { return hp_; }

    virtual Matrix predict(const Matrix& window, const PredictContext& ctx = {}) const;

    /// MSE-loss forward/backward for one sample; gradients are accumulated
    /// into `grad_accum` (aligned with parameters()). Returns the loss.
    double loss_and_grads(const Matrix& window, const Matrix& target,
                          std::vector<Matrix>& grad_accum, Rng* dropout_rng);

    std::vector<NamedTensor> parameters() { return params_; }
    std::vector<Matrix> snapshot_weights() const;
    void restore_weights(const std::vector<Matrix>& weights);

protected:
    ForecastModel(ModelKind kind, HyperParams hp, int l, int n)
        : kind_(kind), hp_(std::move(hp)), l_(l), n_(n) {}

    /// Builds the forward graph; param_ids are tape leaves aligned with
    /// parameters(). dropout_rng is null outside training.
    virtual ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                                     const std::vector<ad::NodeId>& param_ids,
                                     Rng* dropout_rng) const = 0;

    /// Owns the tensor and registers it; returns its index in parameters().
    int add_param(const std::string& name, Matrix init) {
        pool_.push_back(std::move(init));
        params_.push_back({name, &pool_.back()});
        return static_cast<int>(params_.size()) - 1;
    }

    ad::NodeId maybe_dropout(ad::Tape& t, ad::NodeId x, Rng* rng) const;

    ModelKind kind_;
    HyperParams hp_;
    int l_;
    int n_;
    std::deque<Matrix> pool_;  // stable addresses for params_
    std::vector<NamedTensor> params_;
};

std::unique_ptr<ForecastModel> make_model(const HyperParams& hp, int l, int n, uint64_t seed);

}  // namespace psim
