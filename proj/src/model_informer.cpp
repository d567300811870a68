#include "psim/forecast_ops.hpp"

#include "model_blocks.hpp"
#include "psim/models.hpp"

namespace psim {

using namespace blocks;

InformerModel::InformerModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kInformer, std::move(hp), l, n) {
    Rng rng(seed);
    auto add = [this](const std::string& name, Matrix m) {
        return add_param(name, std::move(m));
    };
    const int D = hp_.dim, F = hp_.ffn_factor * D;
    label_len_ = std::min(hp_.label_len, std::max(1, l / 2));
    embed_w_ = add("embed.W", xavier(n, D, rng));
    embed_b_ = add("embed.b", Matrix(1, D, 0.0));
    dec_embed_w_ = add("dec_embed.W", xavier(n, D, rng));
    dec_embed_b_ = add("dec_embed.b", Matrix(1, D, 0.0));
    for (int i = 0; i < hp_.enc_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        EncLayer layer;
        layer.mha = reg_mha(add, p + ".attn", D, hp_.heads, rng);
        layer.ln1 = reg_ln(add, p + ".ln1", D);
        layer.ffn = reg_ffn(add, p + ".ffn", D, F, rng);
        layer.ln2 = reg_ln(add, p + ".ln2", D);
        if (i + 1 < hp_.enc_layers) {
            layer.conv_w = add(p + ".distill.W", xavier(3 * D, D, rng));
            layer.conv_b = add(p + ".distill.b", Matrix(1, D, 0.0));
        }
        enc_.push_back(layer);
    }
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

ad::NodeId InformerModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                        const std::vector<ad::NodeId>& P,
                                        Rng* dropout_rng) const {
    MhaOptions sparse;
    sparse.mode = AttnMode::kProbSparse;
    sparse.sparsity_factor = hp_.sparsity_factor;

    ad::NodeId x = linear(t, P, window, embed_w_, embed_b_);
    x = t.add(x, t.leaf(pe_.slice_rows(0, l_)));
    x = maybe_dropout(t, x, dropout_rng);
    for (const auto& layer : enc_) {
        ad::NodeId a = mha(t, P, layer.mha, x, x, sparse);
        x = layer_norm(t, P, layer.ln1, t.add(x, maybe_dropout(t, a, dropout_rng)));
        ad::NodeId f = ffn(t, P, layer.ffn, x);
        x = layer_norm(t, P, layer.ln2, t.add(x, maybe_dropout(t, f, dropout_rng)));
        if (layer.conv_w >= 0)
            x = t.max_pool2_rows(t.elu(t.conv1d_same(x, P[layer.conv_w], P[layer.conv_b], 3)));
    }
    ad::NodeId enc_out = x;

    // generative decode: start-token slice plus a zero placeholder row
    ad::NodeId dec_raw = t.concat_rows(t.slice_rows(window, l_ - label_len_, l_),
                                       t.leaf(Matrix(1, n_, 0.0)));
    ad::NodeId d = linear(t, P, dec_raw, dec_embed_w_, dec_embed_b_);
    d = t.add(d, t.leaf(pe_.slice_rows(l_ - label_len_, l_ + 1)));
    d = maybe_dropout(t, d, dropout_rng);
    ad::NodeId mask = causal_mask_leaf(t, label_len_ + 1);
    for (const auto& layer : dec_) {
        MhaOptions self_opt;
        self_opt.mask = mask;
        ad::NodeId a = mha(t, P, layer.self_mha, d, d, self_opt);
        d = layer_norm(t, P, layer.ln1, t.add(d, maybe_dropout(t, a, dropout_rng)));
        ad::NodeId c = mha(t, P, layer.cross_mha, d, enc_out);
        d = layer_norm(t, P, layer.ln2, t.add(d, maybe_dropout(t, c, dropout_rng)));
        ad::NodeId f = ffn(t, P, layer.ffn, d);
        d = layer_norm(t, P, layer.ln3, t.add(d, maybe_dropout(t, f, dropout_rng)));
    }
    ad::NodeId last = t.slice_rows(d, label_len_, label_len_ + 1);
    return linear(t, P, last, head_w_, head_b_);
}

}  // namespace psim
