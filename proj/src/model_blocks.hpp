#pragma once

// Internal graph builders shared by the attention-family models.

#include <cmath>
#include <vector>

#include "psim/autodiff.hpp"
#include "psim/matrix.hpp"
#include "psim/models.hpp"

namespace psim::blocks {

using ad::NodeId;
using ad::Tape;

inline Matrix xavier(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    const double lim = std::sqrt(6.0 / (rows + cols));
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-lim, lim);
    return m;
}

inline NodeId linear(Tape& t, const std::vector<NodeId>& P, NodeId x, int w, int b) {
    return b < 0 ? t.matmul(x, P[w]) : t.add_row(t.matmul(x, P[w]), P[b]);
}

inline NodeId dense_attention(Tape& t, NodeId q, NodeId k, NodeId v, double dk,
                              NodeId mask = -1) {
    NodeId scores = t.scale(t.matmul(q, t.transpose_(k)), 1.0 / std::sqrt(dk));
    if (mask >= 0) scores = t.add(scores, mask);
    return t.matmul(t.softmax_rows(scores), v);
}

inline NodeId probsparse_attention_graph(Tape& t, NodeId q, NodeId k, NodeId v, double dk,
                                         double c) {
    const int lq = t.value(q).rows();
    NodeId scores = t.scale(t.matmul(q, t.transpose_(k)), 1.0 / std::sqrt(dk));
    int u = static_cast<int>(std::ceil(c * std::log(static_cast<double>(lq))));
    u = std::clamp(u, 1, lq);
    auto sel = ad::top_indices(ad::sparsity_measure(t.value(scores)), u);
    NodeId att = t.matmul(t.softmax_rows(t.gather_rows(scores, sel)), v);
    NodeId base = t.broadcast_row(t.mean_rows(v), lq);
    return t.scatter_overwrite_rows(base, att, sel);
}

inline NodeId concat_cols(Tape& t, const std::vector<NodeId>& parts) {
    if (parts.size() == 1) return parts[0];
    NodeId acc = t.transpose_(parts[0]);
    for (size_t i = 1; i < parts.size(); ++i) acc = t.concat_rows(acc, t.transpose_(parts[i]));
    return t.transpose_(acc);
}

enum class AttnMode { kDense, kProbSparse, kAutoCorr };

struct MhaOptions {
    AttnMode mode = AttnMode::kDense;
    NodeId mask = -1;
    double sparsity_factor = 1.0;
    int top_k_delays = 3;
};

/// Multi-head attention (or an attention substitute) with output projection.
inline NodeId mha(Tape& t, const std::vector<NodeId>& P, const MhaIdx& idx, NodeId xq,
                  NodeId xkv, const MhaOptions& opt = {}) {
    std::vector<NodeId> heads;
    const int n_heads = static_cast<int>(idx.wq.size());
    for (int h = 0; h < n_heads; ++h) {
        NodeId q = t.matmul(xq, P[idx.wq[h]]);
        NodeId k = t.matmul(xkv, P[idx.wk[h]]);
        NodeId v = t.matmul(xkv, P[idx.wv[h]]);
        const double dk = t.value(q).cols();
        switch (opt.mode) {
            case AttnMode::kDense:
                heads.push_back(dense_attention(t, q, k, v, dk, opt.mask));
                break;
            case AttnMode::kProbSparse:
                heads.push_back(probsparse_attention_graph(t, q, k, v, dk, opt.sparsity_factor));
                break;
            case AttnMode::kAutoCorr: {
                const int lq = t.value(q).rows();
                const int lk = t.value(k).rows();
                if (lk != lq) {  // align on the most recent lq rows
                    k = t.slice_rows(k, lk - lq, lk);
                    v = t.slice_rows(v, lk - lq, lk);
                }
                NodeId scores = t.autocorr_scores(q, k);
                const Matrix& sv = t.value(scores);
                std::vector<double> s(sv.cols());
                for (int i = 0; i < sv.cols(); ++i) s[i] = sv(0, i);
                int kk = std::clamp(opt.top_k_delays, 1, sv.cols() - 1);
                std::vector<double> tail(s.begin() + 1, s.end());
                auto picked = ad::top_indices(tail, kk);
                for (int& d : picked) ++d;
                NodeId w = t.softmax_rows(t.gather_cols(scores, picked));
                NodeId acc = -1;
                for (size_t i = 0; i < picked.size(); ++i) {
                    NodeId rolled = t.roll_rows(v, picked[i]);
                    NodeId weighted = t.mul_scalar_entry(rolled, w, static_cast<int>(i));
                    acc = acc < 0 ? weighted : t.add(acc, weighted);
                }
                heads.push_back(acc);
                break;
            }
        }
    }
    return t.add_row(t.matmul(concat_cols(t, heads), P[idx.wo]), P[idx.bo]);
}

inline NodeId ffn(Tape& t, const std::vector<NodeId>& P, const FfnIdx& idx, NodeId x) {
    NodeId hidden = t.elu(t.add_row(t.matmul(x, P[idx.w1]), P[idx.b1]));
    return t.add_row(t.matmul(hidden, P[idx.w2]), P[idx.b2]);
}

inline NodeId layer_norm(Tape& t, const std::vector<NodeId>& P, const LnIdx& idx, NodeId x) {
    return t.layer_norm_rows(x, P[idx.gain], P[idx.bias]);
}

template <class AddFn>
MhaIdx reg_mha(AddFn add, const std::string& prefix, int dim, int heads, Rng& rng) {
    MhaIdx idx;
    const int dh = dim / heads;
    for (int h = 0; h < heads; ++h) {
        const std::string hp = prefix + ".h" + std::to_string(h);
        idx.wq.push_back(add(hp + ".Wq", xavier(dim, dh, rng)));
        idx.wk.push_back(add(hp + ".Wk", xavier(dim, dh, rng)));
        idx.wv.push_back(add(hp + ".Wv", xavier(dim, dh, rng)));
    }
    idx.wo = add(prefix + ".Wo", xavier(dim, dim, rng));
    idx.bo = add(prefix + ".bo", Matrix(1, dim, 0.0));
    return idx;
}

template <class AddFn>
FfnIdx reg_ffn(AddFn add, const std::string& prefix, int dim, int hidden, Rng& rng) {
    FfnIdx idx;
    idx.w1 = add(prefix + ".W1", xavier(dim, hidden, rng));
    idx.b1 = add(prefix + ".b1", Matrix(1, hidden, 0.0));
    idx.w2 = add(prefix + ".W2", xavier(hidden, dim, rng));
    idx.b2 = add(prefix + ".b2", Matrix(1, dim, 0.0));
    return idx;
}

template <class AddFn>
LnIdx reg_ln(AddFn add, const std::string& prefix, int dim) {
    LnIdx idx;
    idx.gain = add(prefix + ".gain", Matrix(1, dim, 1.0));
    idx.bias = add(prefix + ".bias", Matrix(1, dim, 0.0));
    return idx;
}

/// Largest odd kernel not exceeding the row count (and the requested width).
inline int odd_kernel_for(int rows, int want) {
    int k = std::min(want, rows);
    if (k % 2 == 0) --k;
    return std::max(1, k);
}

inline NodeId causal_mask_leaf(Tape& t, int len) {
    Matrix m(len, len, 0.0);
    for (int r = 0; r < len; ++r)
        for (int c = r + 1; c < len; ++c) m(r, c) = -1e30;
    return t.leaf(std::move(m));
}

}  // namespace psim::blocks
