#include "psim/forecast_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psim/autodiff.hpp"

namespace psim {

Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V) {
    if (Q.cols() == 0) throw std::invalid_argument("attention: d_k must be positive");
    if (K.cols() != Q.cols()) throw std::invalid_argument("attention: Q/K dimension mismatch");
    if (V.rows() != K.rows()) throw std::invalid_argument("attention: K/V row mismatch");
    ad::Tape t;
    auto q = t.leaf(Q), k = t.leaf(K), v = t.leaf(V);
    auto scores = t.scale(t.matmul(q, t.transpose_(k)), 1.0 / std::sqrt(Q.cols()));
    auto out = t.matmul(t.softmax_rows(scores), v);
    return t.value(out);
}

ProbSparseResult probsparse_attention(const Matrix& Q, const Matrix& K, const Matrix& V,
                                      double c) {
    if (Q.rows() < 1) throw std::invalid_argument("probsparse_attention: needs >= 1 query");
    if (Q.cols() == 0) throw std::invalid_argument("probsparse_attention: d_k must be positive");
    const int lq = Q.rows();
    int u = static_cast<int>(std::ceil(c * std::log(static_cast<double>(lq))));
    u = std::clamp(u, 1, lq);

    ad::Tape t;
    auto q = t.leaf(Q), k = t.leaf(K), v = t.leaf(V);
    auto scores = t.scale(t.matmul(q, t.transpose_(k)), 1.0 / std::sqrt(Q.cols()));
    auto m = ad::sparsity_measure(t.value(scores));
    auto sel = ad::top_indices(m, u);
    auto picked = t.softmax_rows(t.gather_rows(scores, sel));
    auto att = t.matmul(picked, v);
    auto base = t.broadcast_row(t.mean_rows(v), lq);
    auto out = t.scatter_overwrite_rows(base, att, sel);
    return {t.value(out), sel, u};
}

Matrix distill_layer(const Matrix& x, const Matrix& conv_w, const Matrix& conv_b) {
    if (x.rows() < 2) throw std::invalid_argument("distill_layer: sequence length must be >= 2");
    ad::Tape t;
    auto conv = t.conv1d_same(t.leaf(x), t.leaf(conv_w), t.leaf(conv_b), 3);
    auto out = t.max_pool2_rows(t.elu(conv));
    return t.value(out);
}

std::pair<Matrix, Matrix> series_decompose(const Matrix& x, int kernel) {
    ad::Tape t;
    auto in = t.leaf(x);
    Matrix trend = t.value(t.moving_avg_rows(in, kernel));
    Matrix remainder(x.rows(), x.cols());
    // The reconstruction trend + remainder == x must hold bit-exactly; a
    // rounded difference can miss by one ulp, so re-balance the pair until the
    // sum reproduces x (at most one correction in practice).
    for (size_t i = 0; i < remainder.size(); ++i) {
        double xi = x.data()[i];
        double ti = trend.data()[i];
        double ri = xi - ti;
        for (int iter = 0; iter < 3 && ri + ti != xi; ++iter) {
            ti = xi - ri;
            ri = xi - ti;
        }
        if (ri + ti != xi) {
            ti = xi;
            ri = 0.0;
        }
        trend.data()[i] = ti;
        remainder.data()[i] = ri;
    }
    return {remainder, trend};
}

std::vector<double> autocorrelation_scores(const Matrix& q, const Matrix& k) {
    ad::Tape t;
    auto scores = t.autocorr_scores(t.leaf(q), t.leaf(k));
    const Matrix& row = t.value(scores);
    std::vector<double> out(row.cols());
    for (int i = 0; i < row.cols(); ++i) out[i] = row(0, i);
    return out;
}

std::vector<int> top_delays(const std::vector<double>& scores, int k) {
    const int L = static_cast<int>(scores.size());
    if (L < 2) throw std::invalid_argument("top_delays: needs at least 2 lags");
    k = std::clamp(k, 1, L - 1);
    std::vector<double> nonzero(scores.begin() + 1, scores.end());
    auto idx = ad::top_indices(nonzero, k);
    for (int& i : idx) ++i;  // shift past the excluded zero lag
    return idx;
}

Matrix aggregate_by_delay(const Matrix& values, const std::vector<double>& scores,
                          const std::vector<int>& delays) {
    if (delays.empty()) throw std::invalid_argument("aggregate_by_delay: no delays");
    ad::Tape t;
    Matrix picked(1, static_cast<int>(delays.size()));
    for (size_t i = 0; i < delays.size(); ++i) picked(0, static_cast<int>(i)) = scores[delays[i]];
    auto w = t.softmax_rows(t.leaf(picked));
    auto v = t.leaf(values);
    ad::NodeId acc = -1;
    for (size_t i = 0; i < delays.size(); ++i) {
        auto rolled = t.roll_rows(v, delays[i]);
        auto weighted = t.mul_scalar_entry(rolled, w, static_cast<int>(i));
        acc = acc < 0 ? weighted : t.add(acc, weighted);
    }
    return t.value(acc);
}

Matrix autocorrelation_block(const Matrix& q, const Matrix& k, const Matrix& v, int top_k) {
    if (q.rows() != k.rows() || k.rows() != v.rows())
        throw std::invalid_argument("autocorrelation_block: sequences must have equal length");
    auto scores = autocorrelation_scores(q, k);
    auto delays = top_delays(scores, top_k);
    return aggregate_by_delay(v, scores, delays);
}

Matrix positional_encoding(int length, int dim) {
    Matrix pe(length, dim);
    for (int pos = 0; pos < length; ++pos)
        for (int i = 0; i < dim; ++i) {
            double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(dim));
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

}  // namespace psim
