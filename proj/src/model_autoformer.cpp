#include "model_blocks.hpp"
#include "psim/models.hpp"

namespace psim {

using namespace blocks;

AutoformerModel::AutoformerModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kAutoformer, std::move(hp), l, n) {
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
        layer.ac = reg_mha(add, p + ".ac", D, hp_.heads, rng);
        layer.ffn = reg_ffn(add, p + ".ffn", D, F, rng);
        enc_.push_back(layer);
    }
    for (int i = 0; i < hp_.dec_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        DecLayer layer;
        layer.self_ac = reg_mha(add, p + ".self", D, hp_.heads, rng);
        layer.cross_ac = reg_mha(add, p + ".cross", D, hp_.heads, rng);
        layer.ffn = reg_ffn(add, p + ".ffn", D, F, rng);
        layer.trend_proj1 = add(p + ".trend1.W", xavier(D, n, rng));
        layer.trend_proj2 = add(p + ".trend2.W", xavier(D, n, rng));
        layer.trend_proj3 = add(p + ".trend3.W", xavier(D, n, rng));
        dec_.push_back(layer);
    }
    head_w_ = add("head.W", xavier(D, n, rng));
    head_b_ = add("head.b", Matrix(1, n, 0.0));
}

ad::NodeId AutoformerModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                          const std::vector<ad::NodeId>& P,
                                          Rng* dropout_rng) const {
    MhaOptions ac_opt;
    ac_opt.mode = AttnMode::kAutoCorr;
    ac_opt.top_k_delays = hp_.top_k_delays;

    auto seasonal_of = [&](ad::NodeId x, int rows) {
        return t.sub(x, t.moving_avg_rows(x, odd_kernel_for(rows, hp_.decomp_kernel)));
    };

    // encoder keeps the seasonal stream only
    ad::NodeId x = linear(t, P, window, embed_w_, embed_b_);
    x = maybe_dropout(t, x, dropout_rng);
    for (const auto& layer : enc_) {
        ad::NodeId a = mha(t, P, layer.ac, x, x, ac_opt);
        x = seasonal_of(t.add(x, maybe_dropout(t, a, dropout_rng)), l_);
        ad::NodeId f = ffn(t, P, layer.ffn, x);
        x = seasonal_of(t.add(x, maybe_dropout(t, f, dropout_rng)), l_);
    }
    ad::NodeId enc_out = x;

    // decoder: seasonal/trend initialization from the window tail
    const int ld = label_len_ + 1;
    ad::NodeId tail = t.slice_rows(window, l_ - label_len_, l_);
    const int tail_kernel = odd_kernel_for(label_len_, hp_.decomp_kernel);
    ad::NodeId tail_trend = t.moving_avg_rows(tail, tail_kernel);
    ad::NodeId tail_seasonal = t.sub(tail, tail_trend);
    ad::NodeId seasonal_init = t.concat_rows(tail_seasonal, t.leaf(Matrix(1, n_, 0.0)));
    ad::NodeId trend_stream = t.concat_rows(tail_trend, t.mean_rows(window));

    ad::NodeId d = linear(t, P, seasonal_init, dec_embed_w_, dec_embed_b_);
    d = maybe_dropout(t, d, dropout_rng);
    const int dec_kernel = odd_kernel_for(ld, hp_.decomp_kernel);
    auto split_step = [&](ad::NodeId sum, int proj) {
        ad::NodeId trend = t.moving_avg_rows(sum, dec_kernel);
        ad::NodeId season = t.sub(sum, trend);
        trend_stream = t.add(trend_stream, t.matmul(trend, P[proj]));
        return season;
    };
    for (const auto& layer : dec_) {
        ad::NodeId a = mha(t, P, layer.self_ac, d, d, ac_opt);
        d = split_step(t.add(d, maybe_dropout(t, a, dropout_rng)), layer.trend_proj1);
        ad::NodeId c = mha(t, P, layer.cross_ac, d, enc_out, ac_opt);
        d = split_step(t.add(d, maybe_dropout(t, c, dropout_rng)), layer.trend_proj2);
        ad::NodeId f = ffn(t, P, layer.ffn, d);
        d = split_step(t.add(d, maybe_dropout(t, f, dropout_rng)), layer.trend_proj3);
    }
    ad::NodeId seasonal_last = t.slice_rows(d, ld - 1, ld);
    ad::NodeId trend_last = t.slice_rows(trend_stream, ld - 1, ld);
    return t.add(linear(t, P, seasonal_last, head_w_, head_b_), trend_last);
}

}  // namespace psim
