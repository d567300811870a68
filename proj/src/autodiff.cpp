#include "psim/autodiff.hpp"

#include <algorithm>
#include <complex>
#include <numeric>

namespace psim::ad {

namespace {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Circular cross-correlation circ(tau) = sum_t q[t] * k[(t+tau) mod L],
// computed by zero-padded FFT.
std::vector<double> circular_corr(const double* q, const double* k, int L, int stride) {
    const size_t P = next_pow2(static_cast<size_t>(2 * L));
    std::vector<std::complex<double>> fa(P), fb(P);
    for (int t = 0; t < L; ++t) {
        fa[t] = q[static_cast<size_t>(t) * stride];
        fb[t] = k[static_cast<size_t>(t) * stride];
    }
    fft_inplace(fa, false);
    fft_inplace(fb, false);
    for (size_t i = 0; i < P; ++i) fa[i] = std::conj(fa[i]) * fb[i];
    fft_inplace(fa, true);
    std::vector<double> out(L);
    out[0] = fa[0].real();
    for (int tau = 1; tau < L; ++tau)
        out[tau] = fa[tau].real() + fa[P - (static_cast<size_t>(L) - tau)].real();
    return out;
}

}  // namespace

NodeId Tape::push(Op op, Matrix value, NodeId a, NodeId b, NodeId c) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    nodes_.push_back(std::move(n));
    values_.push_back(std::move(value));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Matrix& Tape::grad_ref(NodeId id) {
    if (grads_.size() < values_.size()) grads_.resize(values_.size());
    Matrix& g = grads_[id];
    if (g.empty() && !values_[id].empty())
        g = Matrix(values_[id].rows(), values_[id].cols(), 0.0);
    return g;
}

const Matrix& Tape::grad(NodeId id) { return grad_ref(id); }

void Tape::reset() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    backward_ran_ = false;
}

NodeId Tape::leaf(Matrix v) { return push(Op::kLeaf, std::move(v)); }

NodeId Tape::matmul(NodeId a, NodeId b) {
    return push(Op::kMatmul, psim::matmul(values_[a], values_[b]), a, b);
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Matrix& A = values_[a];
    const Matrix& B = values_[b];
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] += B.data()[i];
    return push(Op::kAdd, std::move(out), a, b);
}

NodeId Tape::add_row(NodeId a, NodeId b) {
    const Matrix& A = values_[a];
    const Matrix& B = values_[b];
    if (B.rows() != 1 || B.cols() != A.cols()) throw std::invalid_argument("add_row: shape mismatch");
    Matrix out = A;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) += B(0, c);
    return push(Op::kAddRow, std::move(out), a, b);
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Matrix& A = values_[a];
    const Matrix& B = values_[b];
    if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= B.data()[i];
    return push(Op::kSub, std::move(out), a, b);
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Matrix& A = values_[a];
    const Matrix& B = values_[b];
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= B.data()[i];
    return push(Op::kMul, std::move(out), a, b);
}

NodeId Tape::scale(NodeId a, double c) {
    Matrix out = values_[a];
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
    NodeId id = push(Op::kScale, std::move(out), a);
    nodes_[id].x = c;
    return id;
}

NodeId Tape::sigmoid(NodeId a) {
    Matrix out = values_[a];
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-out.data()[i]));
    return push(Op::kSigmoid, std::move(out), a);
}

NodeId Tape::tanh_(NodeId a) {
    Matrix out = values_[a];
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
    return push(Op::kTanh, std::move(out), a);
}

NodeId Tape::elu(NodeId a) {
    Matrix out = values_[a];
    for (size_t i = 0; i < out.size(); ++i) {
        double v = out.data()[i];
        out.data()[i] = v > 0.0 ? v : std::expm1(v);
    }
    return push(Op::kElu, std::move(out), a);
}

NodeId Tape::softmax_rows(NodeId a) {
    Matrix out = values_[a];
    for (int r = 0; r < out.rows(); ++r) {
        double* row = out.row_ptr(r);
        double mx = row[0];
        for (int c = 1; c < out.cols(); ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < out.cols(); ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < out.cols(); ++c) row[c] /= sum;
    }
    return push(Op::kSoftmaxRows, std::move(out), a);
}

NodeId Tape::layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps) {
    const Matrix& X = values_[x];
    const Matrix& G = values_[gain];
    const Matrix& B = values_[bias];
    if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() || B.cols() != X.cols())
        throw std::invalid_argument("layer_norm_rows: gain/bias shape mismatch");
    Matrix out(X.rows(), X.cols());
    const int C = X.cols();
    for (int r = 0; r < X.rows(); ++r) {
        const double* xr = X.row_ptr(r);
        double mu = 0.0;
        for (int c = 0; c < C; ++c) mu += xr[c];
        mu /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= C;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < C; ++c) out(r, c) = (xr[c] - mu) * inv * G(0, c) + B(0, c);
    }
    NodeId id = push(Op::kLayerNorm, std::move(out), x, gain, bias);
    nodes_[id].x = eps;
    return id;
}

NodeId Tape::transpose_(NodeId a) {
    return push(Op::kTranspose, psim::transpose(values_[a]), a);
}

NodeId Tape::slice_rows(NodeId a, int r0, int r1) {
    NodeId id = push(Op::kSliceRows, values_[a].slice_rows(r0, r1), a);
    nodes_[id].i0 = r0;
    nodes_[id].i1 = r1;
    return id;
}

NodeId Tape::concat_rows(NodeId a, NodeId b) {
    const Matrix& A = values_[a];
    const Matrix& B = values_[b];
    if (A.cols() != B.cols()) throw std::invalid_argument("concat_rows: column mismatch");
    Matrix out(A.rows() + B.rows(), A.cols());
    for (int r = 0; r < A.rows(); ++r)
        for (int c = 0; c < A.cols(); ++c) out(r, c) = A(r, c);
    for (int r = 0; r < B.rows(); ++r)
        for (int c = 0; c < B.cols(); ++c) out(A.rows() + r, c) = B(r, c);
    return push(Op::kConcatRows, std::move(out), a, b);
}

NodeId Tape::mean_all(NodeId a) {
    const Matrix& A = values_[a];
    double s = 0.0;
    for (size_t i = 0; i < A.size(); ++i) s += A.data()[i];
    Matrix out(1, 1, s / static_cast<double>(A.size()));
    return push(Op::kMeanAll, std::move(out), a);
}

NodeId Tape::mean_rows(NodeId a) {
    const Matrix& A = values_[a];
    Matrix out(1, A.cols(), 0.0);
    for (int r = 0; r < A.rows(); ++r)
        for (int c = 0; c < A.cols(); ++c) out(0, c) += A(r, c);
    for (int c = 0; c < A.cols(); ++c) out(0, c) /= A.rows();
    return push(Op::kMeanRows, std::move(out), a);
}

NodeId Tape::broadcast_row(NodeId a, int m) {
    const Matrix& A = values_[a];
    if (A.rows() != 1) throw std::invalid_argument("broadcast_row: expects a row vector");
    Matrix out(m, A.cols());
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < A.cols(); ++c) out(r, c) = A(0, c);
    return push(Op::kBroadcastRow, std::move(out), a);
}

NodeId Tape::gather_rows(NodeId a, std::vector<int> idx) {
    const Matrix& A = values_[a];
    Matrix out(static_cast<int>(idx.size()), A.cols());
    for (size_t i = 0; i < idx.size(); ++i)
        for (int c = 0; c < A.cols(); ++c) out(static_cast<int>(i), c) = A(idx[i], c);
    NodeId id = push(Op::kGatherRows, std::move(out), a);
    nodes_[id].idx = std::move(idx);
    return id;
}

NodeId Tape::scatter_overwrite_rows(NodeId base, NodeId src, std::vector<int> idx) {
    const Matrix& B = values_[base];
    const Matrix& S = values_[src];
    if (S.rows() != static_cast<int>(idx.size()) || S.cols() != B.cols())
        throw std::invalid_argument("scatter_overwrite_rows: shape mismatch");
    Matrix out = B;
    for (size_t i = 0; i < idx.size(); ++i)
        for (int c = 0; c < B.cols(); ++c) out(idx[i], c) = S(static_cast<int>(i), c);
    NodeId id = push(Op::kScatterRows, std::move(out), base, src);
    nodes_[id].idx = std::move(idx);
    return id;
}

NodeId Tape::roll_rows(NodeId a, int shift) {
    const Matrix& A = values_[a];
    const int m = A.rows();
    Matrix out(m, A.cols());
    for (int t = 0; t < m; ++t) {
        int s = ((t + shift) % m + m) % m;
        for (int c = 0; c < A.cols(); ++c) out(t, c) = A(s, c);
    }
    NodeId id = push(Op::kRollRows, std::move(out), a);
    nodes_[id].i0 = shift;
    return id;
}

NodeId Tape::mul_scalar_entry(NodeId a, NodeId w, int entry) {
    const Matrix& A = values_[a];
    const double wv = values_[w](0, entry);
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= wv;
    NodeId id = push(Op::kMulScalarEntry, std::move(out), a, w);
    nodes_[id].i0 = entry;
    return id;
}

NodeId Tape::gather_cols(NodeId a, std::vector<int> idx) {
    const Matrix& A = values_[a];
    if (A.rows() != 1) throw std::invalid_argument("gather_cols: expects a row vector");
    Matrix out(1, static_cast<int>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) out(0, static_cast<int>(i)) = A(0, idx[i]);
    NodeId id = push(Op::kGatherCols, std::move(out), a);
    nodes_[id].idx = std::move(idx);
    return id;
}

NodeId Tape::conv1d_same(NodeId x, NodeId w, NodeId b, int kernel) {
    const Matrix& X = values_[x];
    const Matrix& W = values_[w];
    const Matrix& B = values_[b];
    if (kernel % 2 == 0 || kernel < 1) throw std::invalid_argument("conv1d_same: kernel must be odd");
    const int L = X.rows(), cin = X.cols(), cout = W.cols();
    if (W.rows() != kernel * cin || B.cols() != cout || B.rows() != 1)
        throw std::invalid_argument("conv1d_same: weight shape mismatch");
    const int h = kernel / 2;
    Matrix out(L, cout);
    for (int t = 0; t < L; ++t) {
        for (int co = 0; co < cout; ++co) {
            double acc = B(0, co);
            for (int o = 0; o < kernel; ++o) {
                int src = std::clamp(t + o - h, 0, L - 1);
                for (int ci = 0; ci < cin; ++ci) acc += W(o * cin + ci, co) * X(src, ci);
            }
            out(t, co) = acc;
        }
    }
    NodeId id = push(Op::kConv1d, std::move(out), x, w, b);
    nodes_[id].i0 = kernel;
    return id;
}

NodeId Tape::max_pool2_rows(NodeId a) {
    const Matrix& A = values_[a];
    if (A.rows() < 2) throw std::invalid_argument("max_pool2_rows: needs at least 2 rows");
    const int m = A.rows() / 2, C = A.cols();
    Matrix out(m, C);
    std::vector<int> arg(static_cast<size_t>(m) * C);
    for (int p = 0; p < m; ++p) {
        for (int c = 0; c < C; ++c) {
            int r0 = 2 * p, r1 = 2 * p + 1;
            int best = A(r0, c) >= A(r1, c) ? r0 : r1;
            out(p, c) = A(best, c);
            arg[static_cast<size_t>(p) * C + c] = best;
        }
    }
    NodeId id = push(Op::kMaxPool2, std::move(out), a);
    nodes_[id].idx = std::move(arg);
    return id;
}

NodeId Tape::moving_avg_rows(NodeId a, int kernel) {
    const Matrix& A = values_[a];
    if (kernel % 2 == 0 || kernel < 1 || kernel > A.rows())
        throw std::invalid_argument("moving_avg_rows: kernel must be odd, in [1, rows]");
    const int L = A.rows(), C = A.cols(), h = kernel / 2;
    Matrix out(L, C, 0.0);
    for (int t = 0; t < L; ++t)
        for (int o = -h; o <= h; ++o) {
            int src = std::clamp(t + o, 0, L - 1);
            for (int c = 0; c < C; ++c) out(t, c) += A(src, c);
        }
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] /= kernel;
    NodeId id = push(Op::kMovingAvg, std::move(out), a);
    nodes_[id].i0 = kernel;
    return id;
}

NodeId Tape::autocorr_scores(NodeId q, NodeId k) {
    const Matrix& Q = values_[q];
    const Matrix& K = values_[k];
    if (!Q.same_shape(K)) throw std::invalid_argument("autocorr_scores: q/k shape mismatch");
    const int L = Q.rows(), d = Q.cols();
    Matrix out(1, L, 0.0);
    for (int c = 0; c < d; ++c) {
        auto circ = circular_corr(Q.data() + c, K.data() + c, L, d);
        for (int tau = 0; tau < L; ++tau) out(0, tau) += circ[tau];
    }
    for (int tau = 0; tau < L; ++tau) out(0, tau) /= L;
    return push(Op::kAutocorr, std::move(out), q, k);
}

void Tape::backward(NodeId root, double seed_value) {
    const Matrix& rv = values_[root];
    if (rv.rows() != 1 || rv.cols() != 1)
        throw std::invalid_argument("backward: root must be a 1x1 scalar");
    grad_ref(root)(0, 0) += seed_value;
    backward_ran_ = true;
    for (NodeId id = root; id >= 0; --id) {
        if (grads_.size() <= static_cast<size_t>(id) || grads_[id].empty()) continue;
        backward_node(id);
    }
}

void Tape::backward_node(NodeId id) {
    const Node& n = nodes_[id];
    const Matrix& g = grads_[id];
    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kMatmul: {
            const Matrix& A = values_[n.a];
            const Matrix& B = values_[n.b];
            Matrix ga = psim::matmul(g, psim::transpose(B));
            Matrix gb = psim::matmul(psim::transpose(A), g);
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += ga.data()[i];
            Matrix& rb = grad_ref(n.b);
            for (size_t i = 0; i < rb.size(); ++i) rb.data()[i] += gb.data()[i];
            break;
        }
        case Op::kAdd: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += g.data()[i];
            Matrix& rb = grad_ref(n.b);
            for (size_t i = 0; i < rb.size(); ++i) rb.data()[i] += g.data()[i];
            break;
        }
        case Op::kAddRow: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += g.data()[i];
            Matrix& rb = grad_ref(n.b);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) rb(0, c) += g(r, c);
            break;
        }
        case Op::kSub: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += g.data()[i];
            Matrix& rb = grad_ref(n.b);
            for (size_t i = 0; i < rb.size(); ++i) rb.data()[i] -= g.data()[i];
            break;
        }
        case Op::kMul: {
            const Matrix& A = values_[n.a];
            const Matrix& B = values_[n.b];
            {
                Matrix& ra = grad_ref(n.a);
                for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += g.data()[i] * B.data()[i];
            }
            {
                Matrix& rb = grad_ref(n.b);
                for (size_t i = 0; i < rb.size(); ++i) rb.data()[i] += g.data()[i] * A.data()[i];
            }
            break;
        }
        case Op::kScale: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += n.x * g.data()[i];
            break;
        }
        case Op::kSigmoid: {
            const Matrix& out = values_[id];
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) {
                double s = out.data()[i];
                ra.data()[i] += g.data()[i] * s * (1.0 - s);
            }
            break;
        }
        case Op::kTanh: {
            const Matrix& out = values_[id];
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) {
                double t = out.data()[i];
                ra.data()[i] += g.data()[i] * (1.0 - t * t);
            }
            break;
        }
        case Op::kElu: {
            const Matrix& in = values_[n.a];
            const Matrix& out = values_[id];
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) {
                double d = in.data()[i] > 0.0 ? 1.0 : out.data()[i] + 1.0;
                ra.data()[i] += g.data()[i] * d;
            }
            break;
        }
        case Op::kSoftmaxRows: {
            const Matrix& out = values_[id];
            Matrix& ra = grad_ref(n.a);
            for (int r = 0; r < out.rows(); ++r) {
                double dot = 0.0;
                for (int c = 0; c < out.cols(); ++c) dot += g(r, c) * out(r, c);
                for (int c = 0; c < out.cols(); ++c)
                    ra(r, c) += out(r, c) * (g(r, c) - dot);
            }
            break;
        }
        case Op::kLayerNorm: {
            const Matrix& X = values_[n.a];
            const Matrix& G = values_[n.b];
            const int C = X.cols();
            Matrix& rx = grad_ref(n.a);
            Matrix& rg = grad_ref(n.b);
            Matrix& rb = grad_ref(n.c);
            for (int r = 0; r < X.rows(); ++r) {
                const double* xr = X.row_ptr(r);
                double mu = 0.0;
                for (int c = 0; c < C; ++c) mu += xr[c];
                mu /= C;
                double var = 0.0;
                for (int c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
                var /= C;
                const double inv = 1.0 / std::sqrt(var + n.x);
                double mean_gxh = 0.0, mean_gxh_xh = 0.0;
                std::vector<double> xh(C), gxh(C);
                for (int c = 0; c < C; ++c) {
                    xh[c] = (xr[c] - mu) * inv;
                    gxh[c] = g(r, c) * G(0, c);
                    rg(0, c) += g(r, c) * xh[c];
                    rb(0, c) += g(r, c);
                    mean_gxh += gxh[c];
                    mean_gxh_xh += gxh[c] * xh[c];
                }
                mean_gxh /= C;
                mean_gxh_xh /= C;
                for (int c = 0; c < C; ++c)
                    rx(r, c) += inv * (gxh[c] - mean_gxh - xh[c] * mean_gxh_xh);
            }
            break;
        }
        case Op::kTranspose: {
            Matrix& ra = grad_ref(n.a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) ra(c, r) += g(r, c);
            break;
        }
        case Op::kSliceRows: {
            Matrix& ra = grad_ref(n.a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) ra(n.i0 + r, c) += g(r, c);
            break;
        }
        case Op::kConcatRows: {
            const int ar = values_[n.a].rows();
            Matrix& ra = grad_ref(n.a);
            for (int r = 0; r < ar; ++r)
                for (int c = 0; c < g.cols(); ++c) ra(r, c) += g(r, c);
            Matrix& rb = grad_ref(n.b);
            for (int r = ar; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) rb(r - ar, c) += g(r, c);
            break;
        }
        case Op::kMeanAll: {
            Matrix& ra = grad_ref(n.a);
            const double gv = g(0, 0) / static_cast<double>(ra.size());
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += gv;
            break;
        }
        case Op::kMeanRows: {
            Matrix& ra = grad_ref(n.a);
            const double inv = 1.0 / ra.rows();
            for (int r = 0; r < ra.rows(); ++r)
                for (int c = 0; c < ra.cols(); ++c) ra(r, c) += g(0, c) * inv;
            break;
        }
        case Op::kBroadcastRow: {
            Matrix& ra = grad_ref(n.a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) ra(0, c) += g(r, c);
            break;
        }
        case Op::kGatherRows: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < n.idx.size(); ++i)
                for (int c = 0; c < g.cols(); ++c) ra(n.idx[i], c) += g(static_cast<int>(i), c);
            break;
        }
        case Op::kScatterRows: {
            Matrix& ra = grad_ref(n.a);
            std::vector<char> overwritten(ra.rows(), 0);
            for (int r : n.idx) overwritten[r] = 1;
            for (int r = 0; r < g.rows(); ++r) {
                if (overwritten[r]) continue;
                for (int c = 0; c < g.cols(); ++c) ra(r, c) += g(r, c);
            }
            Matrix& rb = grad_ref(n.b);
            for (size_t i = 0; i < n.idx.size(); ++i)
                for (int c = 0; c < g.cols(); ++c) rb(static_cast<int>(i), c) += g(n.idx[i], c);
            break;
        }
        case Op::kRollRows: {
            Matrix& ra = grad_ref(n.a);
            const int m = g.rows();
            for (int t = 0; t < m; ++t) {
                int s = ((t + n.i0) % m + m) % m;
                for (int c = 0; c < g.cols(); ++c) ra(s, c) += g(t, c);
            }
            break;
        }
        case Op::kMulScalarEntry: {
            const Matrix& A = values_[n.a];
            const double wv = values_[n.b](0, n.i0);
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < ra.size(); ++i) ra.data()[i] += g.data()[i] * wv;
            Matrix& rw = grad_ref(n.b);
            double acc = 0.0;
            for (size_t i = 0; i < A.size(); ++i) acc += g.data()[i] * A.data()[i];
            rw(0, n.i0) += acc;
            break;
        }
        case Op::kGatherCols: {
            Matrix& ra = grad_ref(n.a);
            for (size_t i = 0; i < n.idx.size(); ++i) ra(0, n.idx[i]) += g(0, static_cast<int>(i));
            break;
        }
        case Op::kConv1d: {
            const Matrix& X = values_[n.a];
            const Matrix& W = values_[n.b];
            const int L = X.rows(), cin = X.cols(), cout = W.cols();
            const int kernel = n.i0, h = kernel / 2;
            Matrix& rx = grad_ref(n.a);
            Matrix& rw = grad_ref(n.b);
            Matrix& rb = grad_ref(n.c);
            for (int t = 0; t < L; ++t) {
                for (int co = 0; co < cout; ++co) {
                    const double gv = g(t, co);
                    if (gv == 0.0) continue;
                    rb(0, co) += gv;
                    for (int o = 0; o < kernel; ++o) {
                        int src = std::clamp(t + o - h, 0, L - 1);
                        for (int ci = 0; ci < cin; ++ci) {
                            rw(o * cin + ci, co) += gv * X(src, ci);
                            rx(src, ci) += gv * W(o * cin + ci, co);
                        }
                    }
                }
            }
            break;
        }
        case Op::kMaxPool2: {
            Matrix& ra = grad_ref(n.a);
            const int C = g.cols();
            for (int p = 0; p < g.rows(); ++p)
                for (int c = 0; c < C; ++c)
                    ra(n.idx[static_cast<size_t>(p) * C + c], c) += g(p, c);
            break;
        }
        case Op::kMovingAvg: {
            Matrix& ra = grad_ref(n.a);
            const int L = g.rows(), h = n.i0 / 2;
            const double inv = 1.0 / n.i0;
            for (int t = 0; t < L; ++t)
                for (int o = -h; o <= h; ++o) {
                    int src = std::clamp(t + o, 0, L - 1);
                    for (int c = 0; c < g.cols(); ++c) ra(src, c) += g(t, c) * inv;
                }
            break;
        }
        case Op::kAutocorr: {
            const Matrix& Q = values_[n.a];
            const Matrix& K = values_[n.b];
            const int L = Q.rows(), d = Q.cols();
            Matrix& rq = grad_ref(n.a);
            Matrix& rk = grad_ref(n.b);
            const double inv = 1.0 / L;
            for (int tau = 0; tau < L; ++tau) {
                const double gv = g(0, tau) * inv;
                if (gv == 0.0) continue;
                for (int t = 0; t < L; ++t) {
                    const int s = (t + tau) % L;
                    for (int c = 0; c < d; ++c) {
                        rq(t, c) += gv * K(s, c);
                        rk(s, c) += gv * Q(t, c);
                    }
                }
            }
            break;
        }
    }
}

std::vector<double> sparsity_measure(const Matrix& scores) {
    std::vector<double> m(scores.rows());
    for (int r = 0; r < scores.rows(); ++r) {
        const double* row = scores.row_ptr(r);
        double mx = row[0], mean = 0.0;
        for (int c = 0; c < scores.cols(); ++c) {
            mx = std::max(mx, row[c]);
            mean += row[c];
        }
        mean /= scores.cols();
        m[r] = mx - mean;
    }
    return m;
}

std::vector<int> top_indices(const std::vector<double>& v, int u) {
    std::vector<int> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return v[a] > v[b]; });
    order.resize(std::min<size_t>(u, order.size()));
    return order;
}

}  // namespace psim::ad
