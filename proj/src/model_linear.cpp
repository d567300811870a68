#include "model_blocks.hpp"
#include "psim/models.hpp"

namespace psim {

namespace {

// persistence initialization: weight mass on the newest time step
Matrix one_hot_last(int l, int cols) {
    Matrix m(l, cols, 0.0);
    for (int c = 0; c < cols; ++c) m(l - 1, c) = 1.0;
    return m;
}

// l x (n or 1) weights applied per channel; returns the 1 x n weighted sum
ad::NodeId channel_linear(ad::Tape& t, ad::NodeId x, ad::NodeId w, int l, int n,
                          bool individual) {
    ad::NodeId wb = w;
    if (!individual) wb = t.transpose_(t.broadcast_row(t.transpose_(w), n));
    return t.scale(t.mean_rows(t.mul(x, wb)), static_cast<double>(l));
}

}  // namespace

DLinearModel::DLinearModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kDLinear, std::move(hp), l, n) {
    (void)seed;
    const int cols = hp_.individual ? n : 1;
    w_trend_ = add_param("W_trend", one_hot_last(l, cols));
    w_seasonal_ = add_param("W_seasonal", one_hot_last(l, cols));
}

ad::NodeId DLinearModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                       const std::vector<ad::NodeId>& P, Rng*) const {
    const int kernel = blocks::odd_kernel_for(l_, hp_.decomp_kernel);
    ad::NodeId trend = t.moving_avg_rows(window, kernel);
    ad::NodeId remainder = t.sub(window, trend);
    ad::NodeId pt = channel_linear(t, trend, P[w_trend_], l_, n_, hp_.individual);
    ad::NodeId ps = channel_linear(t, remainder, P[w_seasonal_], l_, n_, hp_.individual);
    return t.add(pt, ps);
}

NLinearModel::NLinearModel(HyperParams hp, int l, int n, uint64_t seed)
    : ForecastModel(ModelKind::kNLinear, std::move(hp), l, n) {
    (void)seed;
    const int cols = hp_.individual ? n : 1;
    w_ = add_param("W", Matrix(l, cols, 0.0));  // zero weights = persistence
}

ad::NodeId NLinearModel::forward_graph(ad::Tape& t, ad::NodeId window,
                                       const std::vector<ad::NodeId>& P, Rng*) const {
    ad::NodeId last = t.slice_rows(window, l_ - 1, l_);
    ad::NodeId shifted = t.sub(window, t.broadcast_row(last, l_));
    ad::NodeId lin = channel_linear(t, shifted, P[w_], l_, n_, hp_.individual);
    return t.add(lin, last);
}

}  // namespace psim
