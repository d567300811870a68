#pragma once

#include "psim/forecast.hpp"

namespace psim {

namespace blocks {
struct MhaIdx {
    std::vector<int> wq, wk, wv;
    int wo = -1, bo = -1;
};
struct FfnIdx {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};
struct LnIdx {
    int gain = -1, bias = -1;
};
}  // namespace blocks

/// Stacked LSTM with a fully connected head on the final hidden state.
class LstmModel : public ForecastModel {
public:
    LstmModel(HyperParams hp, int l, int n, uint64_t seed);

    /// One gate update on plain matrices (single layer), for inspection.
    std::pair<Matrix, Matrix> cell_step(const Matrix& x, const Matrix& h_prev,
                                        const Matrix& c_prev, int layer = 0) const;

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    struct LayerIdx {
        int wf, uf, bf, wi, ui, bi, wo, uo, bo, wc, uc, bc;
    };
    std::pair<ad::NodeId, ad::NodeId> cell_graph(ad::Tape& t, const std::vector<ad::NodeId>& P,
                                                 const LayerIdx& w, ad::NodeId x, ad::NodeId h,
                                                 ad::NodeId c) const;
    std::vector<LayerIdx> layers_;
    int head_w_, head_b_;
};

/// Single-head-per-channel linear map on a trend/remainder decomposition.
class DLinearModel : public ForecastModel {
public:
    DLinearModel(HyperParams hp, int l, int n, uint64_t seed);

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    int w_trend_, w_seasonal_;
};

/// Linear map on the last-value-subtracted window; the subtracted value is
/// added back, so a constant window is a fixed point for any weights.
class NLinearModel : public ForecastModel {
public:
    NLinearModel(HyperParams hp, int l, int n, uint64_t seed);

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    int w_;
};

/// Encoder-decoder attention model with sinusoidal positional encoding and a
/// single learned target token (one-step decode, no autoregression).
class TransformerModel : public ForecastModel {
public:
    TransformerModel(HyperParams hp, int l, int n, uint64_t seed);

    /// Mean-pooled encoder output; probe hook for order-sensitivity tests.
    Matrix encoder_pooled(const Matrix& window) const;

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    struct EncLayer {
        blocks::MhaIdx mha;
        blocks::LnIdx ln1, ln2;
        blocks::FfnIdx ffn;
    };
    struct DecLayer {
        blocks::MhaIdx self_mha, cross_mha;
        blocks::LnIdx ln1, ln2, ln3;
        blocks::FfnIdx ffn;
    };
    ad::NodeId encode(ad::Tape& t, ad::NodeId window, const std::vector<ad::NodeId>& P,
                      Rng* dropout_rng) const;

    int embed_w_, embed_b_;
    std::vector<EncLayer> enc_;
    int token_;
    std::vector<DecLayer> dec_;
    int head_w_, head_b_;
    Matrix pe_;
};

/// Probsparse-attention encoder with distilling between layers and a
/// generative one-pass decoder over a start-token slice plus placeholder.
class InformerModel : public ForecastModel {
public:
    InformerModel(HyperParams hp, int l, int n, uint64_t seed);

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    struct EncLayer {
        blocks::MhaIdx mha;
        blocks::LnIdx ln1, ln2;
        blocks::FfnIdx ffn;
        int conv_w = -1, conv_b = -1;  // distill after this layer, when present
    };
    struct DecLayer {
        blocks::MhaIdx self_mha, cross_mha;
        blocks::LnIdx ln1, ln2, ln3;
        blocks::FfnIdx ffn;
    };
    int embed_w_, embed_b_, dec_embed_w_, dec_embed_b_;
    std::vector<EncLayer> enc_;
    std::vector<DecLayer> dec_;
    int head_w_, head_b_;
    int label_len_;
    Matrix pe_;
};

/// Decomposition architecture with auto-correlation attention: progressive
/// seasonal/trend splits, trend re-accumulated at the output.
class AutoformerModel : public ForecastModel {
public:
    AutoformerModel(HyperParams hp, int l, int n, uint64_t seed);

protected:
    ad::NodeId forward_graph(ad::Tape& t, ad::NodeId window,
                             const std::vector<ad::NodeId>& P, Rng* dropout_rng) const override;

private:
    struct EncLayer {
        blocks::MhaIdx ac;
        blocks::FfnIdx ffn;
    };
    struct DecLayer {
        blocks::MhaIdx self_ac, cross_ac;
        blocks::FfnIdx ffn;
        int trend_proj1 = -1, trend_proj2 = -1, trend_proj3 = -1;  // D -> n
    };
    int embed_w_, embed_b_, dec_embed_w_, dec_embed_b_;
    std::vector<EncLayer> enc_;
    std::vector<DecLayer> dec_;
    int head_w_, head_b_;
    int label_len_;
};

}  // namespace psim
