#include "model_blocks.hpp"
#include "psim/models.hpp"

namespace psim {

using blocks::xavier;

LstmModel::LstmModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kLstm, std::move(hp), l, n) {
    Rng rng(seed);
    const int H = hp_.dim;
    for (int layer = 0; layer < hp_.enc_layers; ++layer) {
        const int in = layer == 0 ? n : H;
        const std::string p = "layer" + std::to_string(layer) + ".";
        LayerIdx w;
        w.wf = add_param(p + "W_f", xavier(in, H, rng));
        w.uf = add_param(p + "U_f", xavier(H, H, rng));
        w.bf = add_param(p + "b_f", Matrix(1, H, 1.0));  // open forget gate at start
        w.wi = add_param(p + "W_i", xavier(in, H, rng));
        w.ui = add_param(p + "U_i", xavier(H, H, rng));
        w.bi = add_param(p + "b_i", Matrix(1, H, 0.0));
        w.wo = add_param(p + "W_o", xavier(in, H, rng));
        w.uo = add_param(p + "U_o", xavier(H, H, rng));
        w.bo = add_param(p + "b_o", Matrix(1, H, 0.0));
        w.wc = add_param(p + "W_c", xavier(in, H, rng));
        w.uc = add_param(p + "U_c", xavier(H, H, rng));
        w.bc = add_param(p + "b_c", Matrix(1, H, 0.0));
        layers_.push_back(w);
    }
    head_w_ = add_param("W_x", xavier(H, n, rng));
    head_b_ = add_param("b_x", Matrix(1, n, 0.0));
}

std::pair<ad::NodeId, ad::NodeId> LstmModel::cell_graph(ad::Tape& t,
                                                        const std::vector<ad::NodeId>& P,
                                                        const LayerIdx& w, ad::NodeId x,
                                                        ad::NodeId h, ad::NodeId c) const {
    auto gate = [&](int wi, int ui, int bi) {
        return t.add(t.add(t.matmul(x, P[wi]), t.matmul(h, P[ui])), P[bi]);
    };
    ad::NodeId f = t.sigmoid(gate(w.wf, w.uf, w.bf));
    ad::NodeId i = t.sigmoid(gate(w.wi, w.ui, w.bi));
    ad::NodeId o = t.sigmoid(gate(w.wo, w.uo, w.bo));
    ad::NodeId pre = gate(w.wc, w.uc, w.bc);
    ad::NodeId ctil = hp_.paper_lstm_activations ? t.sigmoid(pre) : t.tanh_(pre);
    ad::NodeId c_next = t.add(t.mul(f, c), t.mul(i, ctil));
    ad::NodeId h_next = t.mul(o, t.tanh_(c_next));
    return {h_next, c_next};
}

ad::NodeId LstmModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                    const std::vector<ad::NodeId>& P, Rng* dropout_rng) const {
    const int H = hp_.dim;
    std::vector<ad::NodeId> h(layers_.size()), c(layers_.size());
    for (size_t layer = 0; layer < layers_.size(); ++layer) {
        h[layer] = t.leaf(Matrix(1, H, 0.0));
        c[layer] = t.leaf(Matrix(1, H, 0.0));
    }
    for (int step = 0; step < l_; ++step) {
        ad::NodeId x = t.slice_rows(window, step, step + 1);
        for (size_t layer = 0; layer < layers_.size(); ++layer) {
            ad::NodeId in = layer == 0 ? x : maybe_dropout(t, h[layer - 1], dropout_rng);
            auto [hn, cn] = cell_graph(t, P, layers_[layer], in, h[layer], c[layer]);
            h[layer] = hn;
            c[layer] = cn;
        }
        if (!t.value(h.back()).all_finite())
            throw std::runtime_error("lstm_forward: non-finite hidden state at step " +
                                     std::to_string(step));
    }
    return t.add(t.matmul(h.back(), P[head_w_]), P[head_b_]);
}

std::pair<Matrix, Matrix> LstmModel::cell_step(const Matrix& x, const Matrix& h_prev,
                                               const Matrix& c_prev, int layer) const {
    if (layer < 0 || layer >= static_cast<int>(layers_.size()))
        throw std::invalid_argument("cell_step: layer out of range");
    const int in_dim = layer == 0 ? n_ : hp_.dim;
    if (x.rows() != 1 || x.cols() != in_dim || h_prev.cols() != hp_.dim ||
        c_prev.cols() != hp_.dim)
        throw std::invalid_argument("cell_step: shape mismatch");
    ad::Tape t;
    std::vector<ad::NodeId> P;
    for (const auto& p : params_) P.push_back(t.leaf(*p.tensor));
    auto [h, c] = cell_graph(t, P, layers_[layer], t.leaf(x), t.leaf(h_prev), t.leaf(c_prev));
    return {t.value(h), t.value(c)};
}

}  // namespace psim
