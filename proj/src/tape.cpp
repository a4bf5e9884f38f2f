#include "lossland/tape.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace lossland {

extern "C" void openblas_set_num_threads(int);

namespace {

// Threaded BLAS would break the fixed reduction order; everything above the
// gemm level parallelizes across grid points instead.
struct BlasInit {
    BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init{};

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, const float *a,
           int lda, const float *b, int ldb, float beta, float *c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, lda, b,
                ldb, beta, c, ldc);
}

// Unrolls conv patches for samples [n0, n0+count) into col [C*kh*kw, count*H*W].
void im2col(const float *input, int C, int H, int W, int kh, int kw, int n0,
            int count, float *col) {
    const int pad_h = kh / 2, pad_w = kw / 2;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t cols = static_cast<int64_t>(count) * hw;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                float *row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * cols;
                for (int n = 0; n < count; ++n) {
                    const float *in = input + (static_cast<int64_t>(n0 + n) * C + c) * hw;
                    float *dst = row + n * hw;
                    for (int y = 0; y < H; ++y) {
                        const int iy = y + ky - pad_h;
                        float *d = dst + static_cast<int64_t>(y) * W;
                        if (iy < 0 || iy >= H) {
                            std::memset(d, 0, sizeof(float) * static_cast<size_t>(W));
                            continue;
                        }
                        const int x_lo = std::max(0, pad_w - kx);
                        const int x_hi = std::min(W, W + pad_w - kx);
                        if (x_lo > 0) std::memset(d, 0, sizeof(float) * static_cast<size_t>(x_lo));
                        if (x_hi > x_lo) {
                            std::memcpy(d + x_lo, in + static_cast<int64_t>(iy) * W + x_lo + kx - pad_w,
                                        sizeof(float) * static_cast<size_t>(x_hi - x_lo));
                        }
                        if (x_hi < W) std::memset(d + x_hi, 0, sizeof(float) * static_cast<size_t>(W - x_hi));
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
void col2im_add(const float *col, int C, int H, int W, int kh, int kw, int n0,
                int count, float *input_grad) {
    const int pad_h = kh / 2, pad_w = kw / 2;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t cols = static_cast<int64_t>(count) * hw;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const float *row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * cols;
                for (int n = 0; n < count; ++n) {
                    float *gin = input_grad + (static_cast<int64_t>(n0 + n) * C + c) * hw;
                    const float *src = row + n * hw;
                    for (int y = 0; y < H; ++y) {
                        const int iy = y + ky - pad_h;
                        if (iy < 0 || iy >= H) continue;
                        const float *s = src + static_cast<int64_t>(y) * W;
                        const int x_lo = std::max(0, pad_w - kx);
                        const int x_hi = std::min(W, W + pad_w - kx);
                        float *g = gin + static_cast<int64_t>(iy) * W + kx - pad_w;
                        for (int x = x_lo; x < x_hi; ++x) g[x] += s[x];
                    }
                }
            }
        }
    }
}

int conv_chunk_size(int64_t ckk, int64_t hw, int batch) {
    const int64_t budget = 48LL * 1024 * 1024 / 4;  // floats
    int64_t g = budget / std::max<int64_t>(1, ckk * hw);
    return static_cast<int>(std::clamp<int64_t>(g, 1, batch));
}

}  // namespace

Tape::VarId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

Tape::VarId Tape::record(Tensor value, std::vector<VarId> parents,
                         std::function<void(Tape &, VarId)> back) {
    Node n;
    n.value = std::move(value);
    n.tracked = grad_enabled_;
    if (grad_enabled_) {
        n.parents = std::move(parents);
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

Tensor &Tape::grad_buf(VarId id) {
    Node &n = node(id);
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

void Tape::zero_grad() {
    for (auto &n : nodes_) {
        std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0f);
    }
}

void Tape::backward(VarId loss) {
    Node &ln = node(loss);
    if (ln.value.numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(ln.value.shape));
    }
    if (!ln.tracked) {
        throw std::logic_error("backward: loss was not produced by a grad-tracked op");
    }
    // leaf gradients accumulate across calls; op outputs restart from zero so
    // a second backward contributes exactly one more gradient of the loss
    for (Node &n : nodes_) {
        if (n.back && !n.grad.data.empty()) {
            std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0f);
        }
    }
    grad_buf(loss).data[0] = 1.0f;
    std::vector<char> reachable(nodes_.size(), 0);
    reachable[static_cast<size_t>(loss)] = 1;
    for (VarId id = loss; id >= 0; --id) {
        Node &n = node(id);
        if (!reachable[static_cast<size_t>(id)] || !n.back) continue;
        for (VarId p : n.parents) reachable[static_cast<size_t>(p)] = 1;
        n.back(*this, id);
    }
}

Tape::VarId Tape::matmul(VarId a, VarId b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape) +
                         " x " + shape_str(B.shape));
    }
    const int M = A.dim(0), K = A.dim(1), N = B.dim(1);
    Tensor C({M, N});
    sgemm(false, false, M, N, K, A.ptr(), K, B.ptr(), N, 0.0f, C.ptr(), N);
    return record(std::move(C), {a, b}, [a, b, M, K, N](Tape &t, VarId self) {
        const float *dC = t.grad(self).ptr();
        sgemm(false, true, M, K, N, dC, N, t.value(b).ptr(), N, 1.0f,
              t.grad_buf(a).ptr(), K);
        sgemm(true, false, K, N, M, t.value(a).ptr(), K, dC, N, 1.0f,
              t.grad_buf(b).ptr(), N);
    });
}

Tape::VarId Tape::matmul_nt(VarId a, VarId b) {
    const Tensor &A = value(a), &B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(1)) {
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(A.shape) +
                         " x " + shape_str(B.shape) + "^T");
    }
    const int M = A.dim(0), K = A.dim(1), N = B.dim(0);
    Tensor C({M, N});
    sgemm(false, true, M, N, K, A.ptr(), K, B.ptr(), K, 0.0f, C.ptr(), N);
    return record(std::move(C), {a, b}, [a, b, M, K, N](Tape &t, VarId self) {
        const float *dC = t.grad(self).ptr();
        sgemm(false, false, M, K, N, dC, N, t.value(b).ptr(), K, 1.0f,
              t.grad_buf(a).ptr(), K);
        sgemm(true, false, N, K, M, dC, N, t.value(a).ptr(), K, 1.0f,
              t.grad_buf(b).ptr(), K);
    });
}

Tape::VarId Tape::conv2d_same(VarId input, VarId weight) {
    const Tensor &X = value(input), &Wt = value(weight);
    if (X.rank() != 4 || Wt.rank() != 4 || X.dim(1) != Wt.dim(1) ||
        Wt.dim(2) % 2 == 0 || Wt.dim(3) % 2 == 0) {
        throw ShapeError("conv2d: incompatible input " + shape_str(X.shape) +
                         " and kernel " + shape_str(Wt.shape));
    }
    const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
    const int O = Wt.dim(0), kh = Wt.dim(2), kw = Wt.dim(3);
    const int64_t ckk = static_cast<int64_t>(C) * kh * kw;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int chunk = conv_chunk_size(ckk, hw, N);

    Tensor Y({N, O, H, W});
    std::vector<float> col(static_cast<size_t>(ckk * chunk * hw));
    std::vector<float> out(static_cast<size_t>(O) * chunk * hw);
    for (int n0 = 0; n0 < N; n0 += chunk) {
        const int g = std::min(chunk, N - n0);
        const int64_t cols = static_cast<int64_t>(g) * hw;
        im2col(X.ptr(), C, H, W, kh, kw, n0, g, col.data());
        sgemm(false, false, O, static_cast<int>(cols), static_cast<int>(ckk),
              Wt.ptr(), static_cast<int>(ckk), col.data(), static_cast<int>(cols),
              0.0f, out.data(), static_cast<int>(cols));
        for (int n = 0; n < g; ++n) {
            for (int o = 0; o < O; ++o) {
                std::memcpy(Y.ptr() + ((static_cast<int64_t>(n0 + n) * O + o) * hw),
                            out.data() + (static_cast<int64_t>(o) * cols + n * hw),
                            sizeof(float) * static_cast<size_t>(hw));
            }
        }
    }
    return record(std::move(Y), {input, weight},
                  [input, weight, N, C, H, W, O, kh, kw](Tape &t, VarId self) {
        const Tensor &X = t.value(input), &Wt = t.value(weight);
        const Tensor &dY = t.grad(self);
        float *dX = t.grad_buf(input).ptr();
        float *dW = t.grad_buf(weight).ptr();
        const int64_t ckk = static_cast<int64_t>(C) * kh * kw;
        const int64_t hw = static_cast<int64_t>(H) * W;
        const int chunk = conv_chunk_size(ckk, hw, N);
        std::vector<float> col(static_cast<size_t>(ckk * chunk * hw));
        std::vector<float> dcol(static_cast<size_t>(ckk * chunk * hw));
        std::vector<float> dy_pack(static_cast<size_t>(O) * chunk * hw);
        for (int n0 = 0; n0 < N; n0 += chunk) {
            const int g = std::min(chunk, N - n0);
            const int64_t cols = static_cast<int64_t>(g) * hw;
            for (int n = 0; n < g; ++n) {
                for (int o = 0; o < O; ++o) {
                    std::memcpy(dy_pack.data() + (static_cast<int64_t>(o) * cols + n * hw),
                                dY.ptr() + ((static_cast<int64_t>(n0 + n) * O + o) * hw),
                                sizeof(float) * static_cast<size_t>(hw));
                }
            }
            im2col(X.ptr(), C, H, W, kh, kw, n0, g, col.data());
            // dW += dY . col^T
            sgemm(false, true, O, static_cast<int>(ckk), static_cast<int>(cols),
                  dy_pack.data(), static_cast<int>(cols), col.data(),
                  static_cast<int>(cols), 1.0f, dW, static_cast<int>(ckk));
            // dcol = W^T . dY
            sgemm(true, false, static_cast<int>(ckk), static_cast<int>(cols), O,
                  Wt.ptr(), static_cast<int>(ckk), dy_pack.data(),
                  static_cast<int>(cols), 0.0f, dcol.data(), static_cast<int>(cols));
            col2im_add(dcol.data(), C, H, W, kh, kw, n0, g, dX);
        }
    });
}

Tape::VarId Tape::add_bias(VarId x, VarId bias) {
    const Tensor &X = value(x), &B = value(bias);
    if (B.rank() != 1 || (X.rank() != 4 && X.rank() != 2) || X.dim(1) != B.dim(0)) {
        throw ShapeError("add_bias: incompatible input " + shape_str(X.shape) +
                         " and bias " + shape_str(B.shape));
    }
    Tensor Y = X;
    const int C = B.dim(0);
    if (X.rank() == 4) {
        const int64_t hw = static_cast<int64_t>(X.dim(2)) * X.dim(3);
        for (int n = 0; n < X.dim(0); ++n) {
            for (int c = 0; c < C; ++c) {
                float *p = Y.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
                const float bv = B.data[static_cast<size_t>(c)];
                for (int64_t i = 0; i < hw; ++i) p[i] += bv;
            }
        }
    } else {
        for (int n = 0; n < X.dim(0); ++n) {
            float *p = Y.ptr() + static_cast<int64_t>(n) * C;
            for (int c = 0; c < C; ++c) p[c] += B.data[static_cast<size_t>(c)];
        }
    }
    return record(std::move(Y), {x, bias}, [x, bias](Tape &t, VarId self) {
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        Tensor &dB = t.grad_buf(bias);
        for (int64_t i = 0; i < dY.numel(); ++i) dX.data[static_cast<size_t>(i)] += dY.data[static_cast<size_t>(i)];
        const Tensor &X = t.value(x);
        const int C = static_cast<int>(dB.numel());
        if (X.rank() == 4) {
            const int64_t hw = static_cast<int64_t>(X.dim(2)) * X.dim(3);
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int n = 0; n < X.dim(0); ++n) {
                    const float *p = dY.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
                    for (int64_t i = 0; i < hw; ++i) acc += p[i];
                }
                dB.data[static_cast<size_t>(c)] += static_cast<float>(acc);
            }
        } else {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int n = 0; n < X.dim(0); ++n) acc += dY.data[static_cast<size_t>(static_cast<int64_t>(n) * C + c)];
                dB.data[static_cast<size_t>(c)] += static_cast<float>(acc);
            }
        }
    });
}

Tape::VarId Tape::relu(VarId x) {
    const Tensor &X = value(x);
    Tensor Y = X;
    for (auto &v : Y.data) v = v > 0.0f ? v : 0.0f;
    return record(std::move(Y), {x}, [x](Tape &t, VarId self) {
        const Tensor &X = t.value(x);
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        for (size_t i = 0; i < X.data.size(); ++i) {
            if (X.data[i] > 0.0f) dX.data[i] += dY.data[i];
        }
    });
}

Tape::VarId Tape::batchnorm2d(VarId x, VarId gamma, VarId beta, Tensor &running_mean,
                              Tensor &running_var, bool train, float momentum,
                              float eps) {
    const Tensor &X = value(x);
    const Tensor &G = value(gamma), &Bt = value(beta);
    if (X.rank() != 4 || G.rank() != 1 || G.dim(0) != X.dim(1) || !G.same_shape(Bt) ||
        !running_mean.same_shape(G) || !running_var.same_shape(G)) {
        throw ShapeError("batchnorm2d: incompatible input " + shape_str(X.shape) +
                         " gamma " + shape_str(G.shape));
    }
    const int N = X.dim(0), C = X.dim(1);
    const int64_t hw = static_cast<int64_t>(X.dim(2)) * X.dim(3);
    const int64_t m = static_cast<int64_t>(N) * hw;

    Tensor Y(X.shape);
    Tensor xhat(X.shape);
    std::vector<float> invstd(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
        double mu, var;
        if (train) {
            double s = 0.0, s2 = 0.0;
            for (int n = 0; n < N; ++n) {
                const float *p = X.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    s += p[i];
                    s2 += static_cast<double>(p[i]) * p[i];
                }
            }
            mu = s / static_cast<double>(m);
            var = s2 / static_cast<double>(m) - mu * mu;
            if (var < 0.0) var = 0.0;
            running_mean.data[static_cast<size_t>(c)] =
                (1.0f - momentum) * running_mean.data[static_cast<size_t>(c)] +
                momentum * static_cast<float>(mu);
            const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
            running_var.data[static_cast<size_t>(c)] =
                (1.0f - momentum) * running_var.data[static_cast<size_t>(c)] +
                momentum * static_cast<float>(unbiased);
        } else {
            mu = running_mean.data[static_cast<size_t>(c)];
            var = running_var.data[static_cast<size_t>(c)];
        }
        const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
        invstd[static_cast<size_t>(c)] = is;
        const float gm = G.data[static_cast<size_t>(c)], bt = Bt.data[static_cast<size_t>(c)];
        const float muf = static_cast<float>(mu);
        for (int n = 0; n < N; ++n) {
            const int64_t off = (static_cast<int64_t>(n) * C + c) * hw;
            const float *p = X.ptr() + off;
            float *xh = xhat.ptr() + off;
            float *y = Y.ptr() + off;
            for (int64_t i = 0; i < hw; ++i) {
                xh[i] = (p[i] - muf) * is;
                y[i] = gm * xh[i] + bt;
            }
        }
    }
    return record(std::move(Y), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), invstd = std::move(invstd),
                   N, C, hw, m, train](Tape &t, VarId self) {
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        Tensor &dG = t.grad_buf(gamma);
        Tensor &dB = t.grad_buf(beta);
        const Tensor &G = t.value(gamma);
        for (int c = 0; c < C; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < N; ++n) {
                const int64_t off = (static_cast<int64_t>(n) * C + c) * hw;
                const float *dy = dY.ptr() + off;
                const float *xh = xhat.ptr() + off;
                for (int64_t i = 0; i < hw; ++i) {
                    sum_dy += dy[i];
                    sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
                }
            }
            dG.data[static_cast<size_t>(c)] += static_cast<float>(sum_dy_xhat);
            dB.data[static_cast<size_t>(c)] += static_cast<float>(sum_dy);
            const double gm = G.data[static_cast<size_t>(c)];
            const double is = invstd[static_cast<size_t>(c)];
            if (train) {
                const double scale = gm * is / static_cast<double>(m);
                for (int n = 0; n < N; ++n) {
                    const int64_t off = (static_cast<int64_t>(n) * C + c) * hw;
                    const float *dy = dY.ptr() + off;
                    const float *xh = xhat.ptr() + off;
                    float *dx = dX.ptr() + off;
                    for (int64_t i = 0; i < hw; ++i) {
                        dx[i] += static_cast<float>(
                            scale * (static_cast<double>(m) * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
                    }
                }
            } else {
                const double scale = gm * is;
                for (int n = 0; n < N; ++n) {
                    const int64_t off = (static_cast<int64_t>(n) * C + c) * hw;
                    const float *dy = dY.ptr() + off;
                    float *dx = dX.ptr() + off;
                    for (int64_t i = 0; i < hw; ++i) dx[i] += static_cast<float>(scale * dy[i]);
                }
            }
        }
    });
}

Tape::VarId Tape::mean_pool_2x2(VarId x) {
    const Tensor &X = value(x);
    if (X.rank() != 4 || X.dim(2) < 2 || X.dim(3) < 2) {
        throw ShapeError("mean_pool_2x2: need [N,C,H>=2,W>=2], got " + shape_str(X.shape));
    }
    const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
    const int Ho = H / 2, Wo = W / 2;
    Tensor Y({N, C, Ho, Wo});
    for (int nc = 0; nc < N * C; ++nc) {
        const float *in = X.ptr() + static_cast<int64_t>(nc) * H * W;
        float *out = Y.ptr() + static_cast<int64_t>(nc) * Ho * Wo;
        for (int y = 0; y < Ho; ++y) {
            for (int xw = 0; xw < Wo; ++xw) {
                const float *p = in + (2 * y) * W + 2 * xw;
                out[y * Wo + xw] = 0.25f * (p[0] + p[1] + p[W] + p[W + 1]);
            }
        }
    }
    return record(std::move(Y), {x}, [x, N, C, H, W, Ho, Wo](Tape &t, VarId self) {
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        for (int nc = 0; nc < N * C; ++nc) {
            const float *dy = dY.ptr() + static_cast<int64_t>(nc) * Ho * Wo;
            float *dx = dX.ptr() + static_cast<int64_t>(nc) * H * W;
            for (int y = 0; y < Ho; ++y) {
                for (int xw = 0; xw < Wo; ++xw) {
                    const float g = 0.25f * dy[y * Wo + xw];
                    float *p = dx + (2 * y) * W + 2 * xw;
                    p[0] += g;
                    p[1] += g;
                    p[W] += g;
                    p[W + 1] += g;
                }
            }
        }
    });
}

Tape::VarId Tape::global_avg_max_pool(VarId x) {
    const Tensor &X = value(x);
    if (X.rank() != 4) {
        throw ShapeError("global_avg_max_pool: need [N,C,H,W], got " + shape_str(X.shape));
    }
    const int N = X.dim(0), C = X.dim(1);
    const int64_t hw = static_cast<int64_t>(X.dim(2)) * X.dim(3);
    Tensor Y({N, C});
    std::vector<int64_t> argmax(static_cast<size_t>(N) * C);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float *p = X.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
            double acc = 0.0;
            float mx = p[0];
            int64_t mi = 0;
            for (int64_t i = 0; i < hw; ++i) {
                acc += p[i];
                if (p[i] > mx) {
                    mx = p[i];
                    mi = i;
                }
            }
            Y.data[static_cast<size_t>(n) * C + c] =
                static_cast<float>(acc / static_cast<double>(hw)) + mx;
            argmax[static_cast<size_t>(n) * C + c] = mi;
        }
    }
    return record(std::move(Y), {x},
                  [x, N, C, hw, argmax = std::move(argmax)](Tape &t, VarId self) {
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        const float inv = 1.0f / static_cast<float>(hw);
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                const float g = dY.data[static_cast<size_t>(n) * C + c];
                float *dx = dX.ptr() + (static_cast<int64_t>(n) * C + c) * hw;
                const float ga = g * inv;
                for (int64_t i = 0; i < hw; ++i) dx[i] += ga;
                dx[argmax[static_cast<size_t>(n) * C + c]] += g;
            }
        }
    });
}

Tape::VarId Tape::softmax_cross_entropy(VarId logits, const std::vector<int> &labels) {
    const Tensor &Z = value(logits);
    if (Z.rank() != 2 || static_cast<size_t>(Z.dim(0)) != labels.size()) {
        throw ShapeError("softmax_cross_entropy: logits " + shape_str(Z.shape) +
                         " vs " + std::to_string(labels.size()) + " labels");
    }
    const int N = Z.dim(0), C = Z.dim(1);
    for (int n = 0; n < N; ++n) {
        if (labels[static_cast<size_t>(n)] < 0 || labels[static_cast<size_t>(n)] >= C) {
            throw std::invalid_argument("softmax_cross_entropy: label " +
                                        std::to_string(labels[static_cast<size_t>(n)]) +
                                        " out of range [0," + std::to_string(C) + ")");
        }
    }
    Tensor probs({N, C});
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const float *z = Z.ptr() + static_cast<int64_t>(n) * C;
        float *p = probs.ptr() + static_cast<int64_t>(n) * C;
        double mx = z[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(z[c]));
        double se = 0.0;
        for (int c = 0; c < C; ++c) se += std::exp(static_cast<double>(z[c]) - mx);
        const double lse = std::log(se) + mx;
        for (int c = 0; c < C; ++c) {
            p[c] = static_cast<float>(std::exp(static_cast<double>(z[c]) - lse));
        }
        total += lse - z[labels[static_cast<size_t>(n)]];
    }
    Tensor L = Tensor::scalar(static_cast<float>(total / N));
    return record(std::move(L), {logits},
                  [logits, labels, probs = std::move(probs), N, C](Tape &t, VarId self) {
        const float g = t.grad(self).data[0] / static_cast<float>(N);
        Tensor &dZ = t.grad_buf(logits);
        for (int n = 0; n < N; ++n) {
            const float *p = probs.ptr() + static_cast<int64_t>(n) * C;
            float *dz = dZ.ptr() + static_cast<int64_t>(n) * C;
            for (int c = 0; c < C; ++c) {
                dz[c] += g * (p[c] - (labels[static_cast<size_t>(n)] == c ? 1.0f : 0.0f));
            }
        }
    });
}

Tape::VarId Tape::square(VarId x) {
    const Tensor &X = value(x);
    Tensor Y = X;
    for (auto &v : Y.data) v *= v;
    return record(std::move(Y), {x}, [x](Tape &t, VarId self) {
        const Tensor &X = t.value(x);
        const Tensor &dY = t.grad(self);
        Tensor &dX = t.grad_buf(x);
        for (size_t i = 0; i < X.data.size(); ++i) dX.data[i] += 2.0f * X.data[i] * dY.data[i];
    });
}

Tape::VarId Tape::sum_all(VarId x) {
    const Tensor &X = value(x);
    double acc = 0.0;
    for (float v : X.data) acc += v;
    return record(Tensor::scalar(static_cast<float>(acc)), {x}, [x](Tape &t, VarId self) {
        const float g = t.grad(self).data[0];
        Tensor &dX = t.grad_buf(x);
        for (auto &v : dX.data) v += g;
    });
}

std::string shape_str(const std::vector<int> &shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

int64_t shape_numel(const std::vector<int> &shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 1) throw ShapeError("shape entries must be >= 1, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace lossland
