#pragma once

#include <functional>
#include <vector>

#include "psim/matrix.hpp"

namespace psim::ad {

using NodeId = int32_t;

/**
 * Reverse-mode tape over Matrix values.
 *
 * Nodes are appended in topological order; backward() walks them in reverse.
 * Gradients are allocated lazily, so forward-only use (prediction) pays no
 * gradient cost. One tape serves one forward/backward pass; reset() keeps
 * the node storage for reuse.
 */
class Tape {
public:
    NodeId leaf(Matrix v);

    // a (m x k) * b (k x n)
    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    /// a (m x n) + row b (1 x n) broadcast over rows.
    NodeId add_row(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId sigmoid(NodeId a);
    NodeId tanh_(NodeId a);
    NodeId elu(NodeId a);
    /// Row-wise softmax.
    NodeId softmax_rows(NodeId a);
    /// Per-row layer normalization with gain/bias rows (1 x C).
    NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
    NodeId transpose_(NodeId a);
    NodeId slice_rows(NodeId a, int r0, int r1);
    NodeId concat_rows(NodeId a, NodeId b);
    NodeId mean_all(NodeId a);
    NodeId mean_rows(NodeId a);  // (m x n) -> (1 x n)
    /// Repeat a row vector m times.
    NodeId broadcast_row(NodeId a, int m);
    NodeId gather_rows(NodeId a, std::vector<int> idx);
    /// Copy of `base` with rows idx[i] overwritten by row i of `src`.
    NodeId scatter_overwrite_rows(NodeId base, NodeId src, std::vector<int> idx);
    /// Circular shift: out[t] = a[(t + shift) mod rows].
    NodeId roll_rows(NodeId a, int shift);
    /// out = a * w(0, entry), w a row node. Used for weighted aggregation.
    NodeId mul_scalar_entry(NodeId a, NodeId w, int entry);
    NodeId gather_cols(NodeId a, std::vector<int> idx);  // (1 x L) -> (1 x k)
    /// Same-length 1-D convolution over time (rows), replicate padding.
    /// x: (L x Cin), w: (K*Cin x Cout), b: (1 x Cout); kernel K odd.
    NodeId conv1d_same(NodeId x, NodeId w, NodeId b, int kernel);
    /// Max pooling over time, kernel 2 stride 2: (L x C) -> (floor(L/2) x C).
    NodeId max_pool2_rows(NodeId a);
    /// Centered moving average over rows with replicate padding (odd kernel).
    NodeId moving_avg_rows(NodeId a, int kernel);
    /// Circular autocorrelation scores between q and k (both L x d):
    /// out(0, tau) = (1/L) * sum_t sum_c q(t,c) * k((t+tau) mod L, c).
    /// Forward uses an FFT (Wiener-Khinchin); backward is direct.
    NodeId autocorr_scores(NodeId q, NodeId k);

    const Matrix& value(NodeId id) const { return values_[id]; }
    /// Valid after backward(); zero matrix if the node was not reached.
    const Matrix& grad(NodeId id);

    /// Seeds d(root)/d(root) = seed_value (root must be 1x1) and propagates.
    void backward(NodeId root, double seed_value = 1.0);

    void reset();
    size_t node_count() const { return values_.size(); }

private:
    enum class Op : uint8_t {
        kLeaf, kMatmul, kAdd, kAddRow, kSub, kMul, kScale, kSigmoid, kTanh,
        kElu, kSoftmaxRows, kLayerNorm, kTranspose, kSliceRows, kConcatRows,
        kMeanAll, kMeanRows, kBroadcastRow, kGatherRows, kScatterRows,
        kRollRows, kMulScalarEntry, kGatherCols, kConv1d, kMaxPool2,
        kMovingAvg, kAutocorr,
    };

    struct Node {
        Op op;
        NodeId a = -1, b = -1, c = -1;
        int i0 = 0, i1 = 0;
        double x = 0.0;
        std::vector<int> idx;
    };

    NodeId push(Op op, Matrix value, NodeId a = -1, NodeId b = -1, NodeId c = -1);
    Matrix& grad_ref(NodeId id);
    void backward_node(NodeId id);

    std::vector<Node> nodes_;
    std::vector<Matrix> values_;
    std::vector<Matrix> grads_;
    bool backward_ran_ = false;
};

/// Sparsity measurement used by probsparse attention:
/// M(q_i) = max_j(S(i,j)) - mean_j(S(i,j)) for score matrix S.
std::vector<double> sparsity_measure(const Matrix& scores);

/// Indices of the u largest entries (descending), ties by lower index.
std::vector<int> top_indices(const std::vector<double>& v, int u);

}  // namespace psim::ad
