#include "sfada/tensor_ops.hpp"

#include <algorithm>

namespace sfada {

// Convolutions are written shift-and-accumulate: one contiguous row pass per
// (channel pair, tap), which keeps the hot inner loops vectorizable.

void conv3x3_same(const Tensor& in, const double* w, const double* b, int cout, Tensor& out) {
    const int H = in.h, W = in.w;
    out.resize(cout, H, W);
    for (int co = 0; co < cout; ++co) {
        double* op = out.plane(co);
        std::fill(op, op + static_cast<size_t>(H) * W, b[co]);
        for (int ci = 0; ci < in.c; ++ci) {
            const double* ip = in.plane(ci);
            const double* wk = w + (static_cast<size_t>(co) * in.c + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
                    const double wv = wk[ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        const double* src = ip + static_cast<size_t>(y + dy) * W + dx;
                        double* dst = op + static_cast<size_t>(y) * W;
                        for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    }
}

void conv3x3_same_backward(const Tensor& in, const double* w, int cout, const Tensor& dout,
                           Tensor& din, double* dw, double* db) {
    const int H = in.h, W = in.w;
    din.resize(in.c, H, W);
    for (int co = 0; co < cout; ++co) {
        const double* gp = dout.plane(co);
        double bsum = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) bsum += gp[i];
        db[co] += bsum;
        for (int ci = 0; ci < in.c; ++ci) {
            const double* ip = in.plane(ci);
            double* dp = din.plane(ci);
            double* dwk = dw + (static_cast<size_t>(co) * in.c + ci) * 9;
            const double* wk = w + (static_cast<size_t>(co) * in.c + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
                    const double wv = wk[ky * 3 + kx];
                    double wsum = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* src = ip + static_cast<size_t>(y + dy) * W + dx;
                        double* dd = dp + static_cast<size_t>(y + dy) * W + dx;
                        const double* g = gp + static_cast<size_t>(y) * W;
                        for (int x = x0; x < x1; ++x) {
                            wsum += g[x] * src[x];
                            dd[x] += wv * g[x];
                        }
                    }
                    dwk[ky * 3 + kx] += wsum;
                }
            }
        }
    }
}

void conv1x1(const Tensor& in, const double* w, const double* b, int cout, Tensor& out) {
    const size_t n = static_cast<size_t>(in.h) * in.w;
    out.resize(cout, in.h, in.w);
    for (int co = 0; co < cout; ++co) {
        double* op = out.plane(co);
        std::fill(op, op + n, b[co]);
        for (int ci = 0; ci < in.c; ++ci) {
            const double wv = w[static_cast<size_t>(co) * in.c + ci];
            const double* ip = in.plane(ci);
            for (size_t i = 0; i < n; ++i) op[i] += wv * ip[i];
        }
    }
}

void conv1x1_backward(const Tensor& in, const double* w, int cout, const Tensor& dout, Tensor& din,
                      double* dw, double* db) {
    const size_t n = static_cast<size_t>(in.h) * in.w;
    din.resize(in.c, in.h, in.w);
    for (int co = 0; co < cout; ++co) {
        const double* gp = dout.plane(co);
        double bsum = 0.0;
        for (size_t i = 0; i < n; ++i) bsum += gp[i];
        db[co] += bsum;
        for (int ci = 0; ci < in.c; ++ci) {
            const double wv = w[static_cast<size_t>(co) * in.c + ci];
            const double* ip = in.plane(ci);
            double* dp = din.plane(ci);
            double wsum = 0.0;
            for (size_t i = 0; i < n; ++i) {
                wsum += gp[i] * ip[i];
                dp[i] += wv * gp[i];
            }
            dw[static_cast<size_t>(co) * in.c + ci] += wsum;
        }
    }
}

void relu_inplace(Tensor& t) {
    for (double& x : t.v) x = x > 0.0 ? x : 0.0;
}

void relu_backward_inplace(const Tensor& activated, Tensor& grad) {
    for (size_t i = 0; i < grad.v.size(); ++i)
        if (!(activated.v[i] > 0.0)) grad.v[i] = 0.0;
}

void maxpool2(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    const int oh = in.h / 2, ow = in.w / 2;
    out.resize(in.c, oh, ow);
    argmax.assign(static_cast<size_t>(in.c) * oh * ow, 0);
    for (int ci = 0; ci < in.c; ++ci) {
        const double* ip = in.plane(ci);
        double* op = out.plane(ci);
        int* ap = argmax.data() + static_cast<size_t>(ci) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int best = (2 * y) * in.w + 2 * x;
                double bv = ip[best];
                const int cand[3] = {(2 * y) * in.w + 2 * x + 1, (2 * y + 1) * in.w + 2 * x,
                                     (2 * y + 1) * in.w + 2 * x + 1};
                for (int idx : cand)
                    if (ip[idx] > bv) {
                        bv = ip[idx];
                        best = idx;
                    }
                op[y * ow + x] = bv;
                ap[y * ow + x] = best;
            }
    }
}

void maxpool2_backward(const std::vector<int>& argmax, const Tensor& dout, Tensor& din, int in_h,
                       int in_w) {
    din.resize(dout.c, in_h, in_w);
    const size_t plane = static_cast<size_t>(dout.h) * dout.w;
    for (int ci = 0; ci < dout.c; ++ci) {
        const double* gp = dout.plane(ci);
        double* dp = din.plane(ci);
        const int* ap = argmax.data() + ci * plane;
        for (size_t i = 0; i < plane; ++i) dp[ap[i]] += gp[i];
    }
}

void upsample2(const Tensor& in, Tensor& out) {
    out.resize(in.c, in.h * 2, in.w * 2);
    for (int ci = 0; ci < in.c; ++ci) {
        const double* ip = in.plane(ci);
        double* op = out.plane(ci);
        for (int y = 0; y < out.h; ++y) {
            const double* src = ip + static_cast<size_t>(y / 2) * in.w;
            double* dst = op + static_cast<size_t>(y) * out.w;
            for (int x = 0; x < out.w; ++x) dst[x] = src[x / 2];
        }
    }
}

void upsample2_backward(const Tensor& dout, Tensor& din) {
    din.resize(dout.c, dout.h / 2, dout.w / 2);
    for (int ci = 0; ci < dout.c; ++ci) {
        const double* gp = dout.plane(ci);
        double* dp = din.plane(ci);
        for (int y = 0; y < dout.h; ++y) {
            const double* src = gp + static_cast<size_t>(y) * dout.w;
            double* dst = dp + static_cast<size_t>(y / 2) * din.w;
            for (int x = 0; x < dout.w; ++x) dst[x / 2] += src[x];
        }
    }
}

}  // namespace sfada
