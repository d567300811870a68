#pragma once

#include <utility>
#include <vector>

#include "psim/matrix.hpp"

namespace psim {

/// Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V.
/// d_k is Q's column count and must be positive.
Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V);

struct ProbSparseResult {
    Matrix output;
    std::vector<int> selected_queries;  // rows given full attention
    int u = 0;                          // ceil(c * ln(L_Q)), clamped to L_Q
};

/// Sparse attention: only the top-u queries by the max-minus-mean sparsity
/// score get softmax rows; the rest receive the mean of V's rows.
ProbSparseResult probsparse_attention(const Matrix& Q, const Matrix& K, const Matrix& V, double c);

/// Distilling step between encoder layers: width-3 convolution (replicate
/// padding), ELU, then stride-2 max pooling. Halves the sequence length.
/// conv_w: (3*C_in) x C_out, conv_b: 1 x C_out.
Matrix distill_layer(const Matrix& x, const Matrix& conv_w, const Matrix& conv_b);

/// Moving-average decomposition: returns (remainder, trend); the two sum back
/// to the input exactly. Kernel must be odd and within the sequence length.
std::pair<Matrix, Matrix> series_decompose(const Matrix& x, int kernel);

/// Circular autocorrelation scores per delay, FFT-based (Wiener-Khinchin),
/// averaged across feature channels: R(tau) = (1/L) sum_t <q_t, k_{t+tau}>.
std::vector<double> autocorrelation_scores(const Matrix& q, const Matrix& k);

/// Top-k delays by score, excluding delay 0 (which always dominates for a
/// series against itself); k is clamped to L-1.
std::vector<int> top_delays(const std::vector<double>& scores, int k);

/// Aggregates value series circularly rolled by the given delays, weighted by
/// a softmax over the corresponding scores.
Matrix aggregate_by_delay(const Matrix& values, const std::vector<double>& scores,
                          const std::vector<int>& delays);

/// Full auto-correlation block: score, select top-k delays, aggregate.
Matrix autocorrelation_block(const Matrix& q, const Matrix& k, const Matrix& v, int top_k);

/// Sinusoidal positional encoding table (length x dim).
Matrix positional_encoding(int length, int dim);

}  // namespace psim
