#include "psim/forecast.hpp"

#include <cmath>
#include <stdexcept>

#include "psim/models.hpp"

namespace psim {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kLstm: return "lstm";
        case ModelKind::kTransformer: return "transformer";
        case ModelKind::kInformer: return "informer";
        case ModelKind::kAutoformer: return "autoformer";
        case ModelKind::kDLinear: return "dlinear";
        case ModelKind::kNLinear: return "nlinear";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    for (ModelKind k : all_model_kinds())
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::vector<ModelKind> all_model_kinds() {
    return {ModelKind::kLstm,       ModelKind::kTransformer, ModelKind::kInformer,
            ModelKind::kAutoformer, ModelKind::kDLinear,     ModelKind::kNLinear};
}

void HyperParams::validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("hyperparams: learning rate must be > 0");
    if (dropout < 0 || dropout >= 1)
        throw std::invalid_argument("hyperparams: dropout must be in [0,1)");
    if (batch_size < 1) throw std::invalid_argument("hyperparams: batch size must be >= 1");
    if (dim < 1 || enc_layers < 1 || dec_layers < 1 || ffn_factor < 1)
        throw std::invalid_argument("hyperparams: layer sizes must be >= 1");
    if (heads < 1 || dim % heads != 0)
        throw std::invalid_argument("hyperparams: dim must be divisible by heads");
    if (decomp_kernel < 1 || decomp_kernel % 2 == 0)
        throw std::invalid_argument("hyperparams: decomposition kernel must be odd and >= 1");
    if (label_len < 1) throw std::invalid_argument("hyperparams: label length must be >= 1");
    if (sparsity_factor <= 0)
        throw std::invalid_argument("hyperparams: sparsity factor must be > 0");
    if (top_k_delays < 1) throw std::invalid_argument("hyperparams: top-k delays must be >= 1");
}

Matrix ForecastModel::predict(const Matrix& window, const PredictContext&) const {
    if (window.rows() != l_ || window.cols() != n_)
        throw std::invalid_argument("predict: expected a " + std::to_string(l_) + "x" +
                                    std::to_string(n_) + " window, got " +
                                    std::to_string(window.rows()) + "x" +
                                    std::to_string(window.cols()));
    if (!window.all_finite()) throw std::invalid_argument("predict: non-finite window");
    ad::Tape t;
    std::vector<ad::NodeId> ids;
    ids.reserve(params_.size());
    for (const auto& p : params_) ids.push_back(t.leaf(*p.tensor));
    ad::NodeId out = forward_graph(t, t.leaf(window), ids, nullptr);
    const Matrix& v = t.value(out);
    if (v.rows() != 1 || v.cols() != n_ || !v.all_finite())
        throw std::runtime_error("predict: model produced an invalid output row");
    return v;
}

double ForecastModel::loss_and_grads(const Matrix& window, const Matrix& target,
                                     std::vector<Matrix>& grad_accum, Rng* dropout_rng) {
    if (grad_accum.size() != params_.size()) {
        grad_accum.clear();
        for (const auto& p : params_)
            grad_accum.push_back(Matrix(p.tensor->rows(), p.tensor->cols(), 0.0));
    }
    ad::Tape t;
    std::vector<ad::NodeId> ids;
    ids.reserve(params_.size());
    for (const auto& p : params_) ids.push_back(t.leaf(*p.tensor));
    ad::NodeId pred = forward_graph(t, t.leaf(window), ids, dropout_rng);
    ad::NodeId diff = t.sub(pred, t.leaf(target));
    ad::NodeId loss = t.mean_all(t.mul(diff, diff));
    const double value = t.value(loss)(0, 0);
    t.backward(loss);
    for (size_t i = 0; i < ids.size(); ++i) {
        const Matrix& g = t.grad(ids[i]);
        Matrix& acc = grad_accum[i];
        for (size_t j = 0; j < acc.size(); ++j) acc.data()[j] += g.data()[j];
    }
    return value;
}

std::vector<Matrix> ForecastModel::snapshot_weights() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(*p.tensor);
    return out;
}

void ForecastModel::restore_weights(const std::vector<Matrix>& weights) {
    if (weights.size() != params_.size())
        throw std::invalid_argument("restore_weights: tensor count mismatch");
    for (size_t i = 0; i < weights.size(); ++i) {
        if (!weights[i].same_shape(*params_[i].tensor))
            throw std::invalid_argument("restore_weights: shape mismatch for " + params_[i].name);
        *params_[i].tensor = weights[i];
    }
}

ad::NodeId ForecastModel::maybe_dropout(ad::Tape& t, ad::NodeId x, Rng* rng) const {
    if (rng == nullptr || hp_.dropout <= 0.0) return x;
    const Matrix& v = t.value(x);
    Matrix mask(v.rows(), v.cols());
    const double keep = 1.0 - hp_.dropout;
    for (size_t i = 0; i < mask.size(); ++i)
        mask.data()[i] = rng->uniform01() < keep ? 1.0 / keep : 0.0;
    return t.mul(x, t.leaf(std::move(mask)));
}

std::unique_ptr<ForecastModel> make_model(const HyperParams& hp, int l, int n, uint64_t seed) {
    hp.validate();
    if (l < 1 || n < 1) throw std::invalid_argument("make_model: l and n must be >= 1");
    switch (hp.kind) {
        case ModelKind::kLstm: return std::make_unique<LstmModel>(hp, l, n, seed);
        case ModelKind::kTransformer: return std::make_unique<TransformerModel>(hp, l, n, seed);
        case ModelKind::kInformer: return std::make_unique<InformerModel>(hp, l, n, seed);
        case ModelKind::kAutoformer: return std::make_unique<AutoformerModel>(hp, l, n, seed);
        case ModelKind::kDLinear: return std::make_unique<DLinearModel>(hp, l, n, seed);
        case ModelKind::kNLinear: return std::make_unique<NLinearModel>(hp, l, n, seed);
    }
    throw std::invalid_argument("make_model: unknown kind");
}

}  // namespace psim
