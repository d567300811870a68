#include "psim/forecast_ops.hpp"

#include "model_blocks.hpp"
#include "psim/models.hpp"

namespace psim {

using namespace blocks;

TransformerModel::TransformerModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kTransformer, std::move(hp), l, n) {
    Rng rng(seed);
    auto add = [this](const std::string& name, Matrix m) {
        return add_param(name, std::move(m));
    };
    const int D = hp_.dim, F = hp_.ffn_factor * D;
    embed_w_ = add("embed.W", xavier(n, D, rng));
    embed_b_ = add("embed.b", Matrix(1, D, 0.0));
    for (int i = 0; i < hp_.enc_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        EncLayer layer;
        layer.mha = reg_mha(add, p + ".attn", D, hp_.heads, rng);
        layer.ln1 = reg_ln(add, p + ".ln1", D);
        layer.ffn = reg_ffn(add, p + ".ffn", D, F, rng);
        layer.ln2 = reg_ln(add, p + ".ln2", D);
        enc_.push_back(layer);
    }
    token_ = add("dec.token", xavier(1, D, rng));
    for (int i = 0; i < hp_.dec_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        DecLayer layer;
        layer.self_mha = reg_mha(add, p + ".self", D, hp_.heads, rng);
        layer.ln1 = reg_ln(add, p + ".ln1", D);
        layer.cross_mha = reg_mha(add, p + ".cross", D, hp_.heads, rng);
        layer.ln2 = reg_ln(add, p + ".ln2", D);
        layer.ffn = reg_ffn(add, p + ".ffn", D, F, rng);
        layer.ln3 = reg_ln(add, p + ".ln3", D);
        dec_.push_back(layer);
    }
    head_w_ = add("head.W", xavier(D, n, rng));
    head_b_ = add("head.b", Matrix(1, n, 0.0));
    pe_ = positional_encoding(l + 1, D);
}

ad::NodeId TransformerModel::encode(ad::Tape& t, ad::NodeId window,
                                    const std::vector<ad::NodeId>& P, Rng* dropout_rng) const {
    ad::NodeId x = linear(t, P, window, embed_w_, embed_b_);
    if (hp_.positional_encoding) x = t.add(x, t.leaf(pe_.slice_rows(0, l_)));
    x = maybe_dropout(t, x, dropout_rng);
    for (const auto& layer : enc_) {
        ad::NodeId a = mha(t, P, layer.mha, x, x);
        x = layer_norm(t, P, layer.ln1, t.add(x, maybe_dropout(t, a, dropout_rng)));
        ad::NodeId f = ffn(t, P, layer.ffn, x);
        x = layer_norm(t, P, layer.ln2, t.add(x, maybe_dropout(t, f, dropout_rng)));
    }
    return x;
}

ad::NodeId TransformerModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                           const std::vector<ad::NodeId>& P,
                                           Rng* dropout_rng) const {
    ad::NodeId enc_out = encode(t, window, P, dropout_rng);
    // single learned target token at the predicted position
    ad::NodeId d = P[token_];
    if (hp_.positional_encoding) d = t.add(d, t.leaf(pe_.slice_rows(l_, l_ + 1)));
    for (const auto& layer : dec_) {
        ad::NodeId a = mha(t, P, layer.self_mha, d, d);
        d = layer_norm(t, P, layer.ln1, t.add(d, maybe_dropout(t, a, dropout_rng)));
        ad::NodeId c = mha(t, P, layer.cross_mha, d, enc_out);
        d = layer_norm(t, P, layer.ln2, t.add(d, maybe_dropout(t, c, dropout_rng)));
        ad::NodeId f = ffn(t, P, layer.ffn, d);
        d = layer_norm(t, P, layer.ln3, t.add(d, maybe_dropout(t, f, dropout_rng)));
    }
    return linear(t, P, d, head_w_, head_b_);
}

Matrix TransformerModel::encoder_pooled(const Matrix& window) const {
    ad::Tape t;
    std::vector<ad::NodeId> P;
    for (const auto& p : params_) P.push_back(t.leaf(*p.tensor));
    ad::NodeId pooled = t.mean_rows(encode(t, t.leaf(window), P, nullptr));
    return t.value(pooled);
}

}  // namespace psim
