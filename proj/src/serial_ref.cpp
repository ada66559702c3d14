#include "sfada/serial_ref.hpp"

#include <algorithm>
#include <cmath>

namespace sfada::serial_ref {

namespace {

using P = SegmenterParams;

void conv3x3(const Tensor& in, const double* w, const double* b, int cout, Tensor& out) {
    out.resize(cout, in.h, in.w);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double sum = b[co];
                for (int ci = 0; ci < in.c; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int yy = y + ky - 1, xx = x + kx - 1;
                            if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                            sum += w[((static_cast<size_t>(co) * in.c + ci) * 3 + ky) * 3 + kx] *
                                   in.at(ci, yy, xx);
                        }
                out.at(co, y, x) = sum;
            }
}

void conv3x3_backward(const Tensor& in, const double* w, int cout, const Tensor& dout, Tensor& din,
                      double* dw, double* db) {
    din.resize(in.c, in.h, in.w);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const double g = dout.at(co, y, x);
                db[co] += g;
                for (int ci = 0; ci < in.c; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int yy = y + ky - 1, xx = x + kx - 1;
                            if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                            const size_t wi =
                                ((static_cast<size_t>(co) * in.c + ci) * 3 + ky) * 3 + kx;
                            dw[wi] += g * in.at(ci, yy, xx);
                            din.at(ci, yy, xx) += g * w[wi];
                        }
            }
}

void mix1x1(const Tensor& in, const double* w, const double* b, int cout, Tensor& out) {
    out.resize(cout, in.h, in.w);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double sum = b[co];
                for (int ci = 0; ci < in.c; ++ci)
                    sum += w[static_cast<size_t>(co) * in.c + ci] * in.at(ci, y, x);
                out.at(co, y, x) = sum;
            }
}

void mix1x1_backward(const Tensor& in, const double* w, int cout, const Tensor& dout, Tensor& din,
                      double* dw, double* db) {
    din.resize(in.c, in.h, in.w);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                const double g = dout.at(co, y, x);
                db[co] += g;
                for (int ci = 0; ci < in.c; ++ci) {
                    dw[static_cast<size_t>(co) * in.c + ci] += g * in.at(ci, y, x);
                    din.at(ci, y, x) += g * w[static_cast<size_t>(co) * in.c + ci];
                }
            }
}

void relu(Tensor& t) {
    for (double& x : t.v) x = std::max(0.0, x);
}

void pool2(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    out.resize(in.c, in.h / 2, in.w / 2);
    argmax.assign(out.size(), 0);
    for (int ci = 0; ci < in.c; ++ci)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                int best = -1;
                double bv = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * y + dy) * in.w + 2 * x + dx;
                        const double v = in.plane(ci)[idx];
                        if (best < 0 || v > bv) {
                            best = idx;
                            bv = v;
                        }
                    }
                out.at(ci, y, x) = bv;
                argmax[(static_cast<size_t>(ci) * out.h + y) * out.w + x] = best;
            }
}

void pool2_backward(const std::vector<int>& argmax, const Tensor& dout, Tensor& din, int in_h,
                    int in_w) {
    din.resize(dout.c, in_h, in_w);
    for (int ci = 0; ci < dout.c; ++ci)
        for (int y = 0; y < dout.h; ++y)
            for (int x = 0; x < dout.w; ++x)
                din.plane(ci)[argmax[(static_cast<size_t>(ci) * dout.h + y) * dout.w + x]] +=
                    dout.at(ci, y, x);
}

void up2(const Tensor& in, Tensor& out) {
    out.resize(in.c, in.h * 2, in.w * 2);
    for (int ci = 0; ci < in.c; ++ci)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) out.at(ci, y, x) = in.at(ci, y / 2, x / 2);
}

void up2_backward(const Tensor& dout, Tensor& din) {
    din.resize(dout.c, dout.h / 2, dout.w / 2);
    for (int ci = 0; ci < dout.c; ++ci)
        for (int y = 0; y < dout.h; ++y)
            for (int x = 0; x < dout.w; ++x) din.at(ci, y / 2, x / 2) += dout.at(ci, y, x);
}

struct Trace {
    Tensor x, a1, p1, a2, p2, u1, a3, u2, a4, logits, probs;
    std::vector<int> am1, am2;
};

void run_forward(const SegmenterParams& params, const Image& img, Trace& t) {
    if (img.height % 4 != 0 || img.width % 4 != 0)
        throw DataError("segmenter input shape must be divisible by 4");
    const double* f = params.flat.data();
    t.x.resize(1, img.height, img.width);
    std::copy(img.pixels.begin(), img.pixels.end(), t.x.v.begin());
    conv3x3(t.x, f + P::kEnc1W, f + P::kEnc1B, P::kEnc1, t.a1);
    relu(t.a1);
    pool2(t.a1, t.p1, t.am1);
    conv3x3(t.p1, f + P::kEnc2W, f + P::kEnc2B, P::kEnc2, t.a2);
    relu(t.a2);
    pool2(t.a2, t.p2, t.am2);
    up2(t.p2, t.u1);
    conv3x3(t.u1, f + P::kDec1W, f + P::kDec1B, P::kDec, t.a3);
    relu(t.a3);
    up2(t.a3, t.u2);
    conv3x3(t.u2, f + P::kDec2W, f + P::kDec2B, P::kDec, t.a4);
    relu(t.a4);
    mix1x1(t.a4, f + P::kHeadW, f + P::kHeadB, P::kClasses, t.logits);
    t.probs.resize(2, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double z0 = t.logits.at(0, y, x), z1 = t.logits.at(1, y, x);
            const double m = std::max(z0, z1);
            const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
            t.probs.at(0, y, x) = e0 / (e0 + e1);
            t.probs.at(1, y, x) = e1 / (e0 + e1);
        }
}

}  // namespace

Prediction forward(const SegmenterParams& params, const Image& img) {
    Trace t;
    run_forward(params, img, t);
    Prediction pred;
    pred.mask = make_mask(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            pred.mask.at(y, x) = t.logits.at(1, y, x) > t.logits.at(0, y, x) ? 1 : 0;
    pred.logits = std::move(t.logits);
    pred.probs = std::move(t.probs);
    pred.penultimate = std::move(t.a4);
    return pred;
}

BatchGradient batch_gradient(const SegmenterParams& params,
                             const std::vector<const Sample*>& batch) {
    if (batch.empty()) throw DataError("gradient batch is empty");
    const double* f = params.flat.data();
    BatchGradient out;
    out.grad.assign(P::kCount, 0.0);

    for (const Sample* s : batch) {
        if (!s->truth) throw DataError("gradient batch sample has no truth mask");
        Trace t;
        run_forward(params, s->image, t);
        const Mask& truth = *s->truth;
        const int H = t.probs.h, W = t.probs.w;
        const size_t n = static_cast<size_t>(H) * W;

        Prediction pred;
        pred.probs = t.probs;
        out.loss += composite_loss(pred, truth);

        double sum_y = 0, sum_p2 = 0, sum_yp = 0;
        for (size_t i = 0; i < n; ++i) {
            const double y = truth.labels[i];
            const double p1 = t.probs.plane(1)[i];
            sum_y += y;
            sum_p2 += p1 * p1;
            sum_yp += y * p1;
        }

        Tensor dz;
        dz.resize(2, H, W);
        for (size_t i = 0; i < n; ++i) {
            const double p0 = t.probs.plane(0)[i], p1 = t.probs.plane(1)[i];
            const double y = truth.labels[i];
            double g0 = 0, g1 = 0;
            const double pc = y != 0.0 ? p1 : p0;
            const double ce = pc > 1e-12 ? -1.0 / (static_cast<double>(n) * pc) : 0.0;
            (y != 0.0 ? g1 : g0) = ce;
            if (!(sum_y == 0.0 && sum_p2 == 0.0)) {
                const double J = sum_y + sum_p2 + 1e-6;
                g1 += (-2.0 * y * J + 4.0 * sum_yp * p1) / (J * J);
            }
            const double dot = g0 * p0 + g1 * p1;
            dz.plane(0)[i] = p0 * (g0 - dot);
            dz.plane(1)[i] = p1 * (g1 - dot);
        }

        std::vector<double> grad(P::kCount, 0.0);
        double* g = grad.data();
        Tensor da4, du2, da3, du1, dp2, da2, dp1, da1, dx;
        mix1x1_backward(t.a4, f + P::kHeadW, P::kClasses, dz, da4, g + P::kHeadW, g + P::kHeadB);
        for (size_t i = 0; i < da4.v.size(); ++i)
            if (!(t.a4.v[i] > 0.0)) da4.v[i] = 0.0;
        conv3x3_backward(t.u2, f + P::kDec2W, P::kDec, da4, du2, g + P::kDec2W, g + P::kDec2B);
        up2_backward(du2, da3);
        for (size_t i = 0; i < da3.v.size(); ++i)
            if (!(t.a3.v[i] > 0.0)) da3.v[i] = 0.0;
        conv3x3_backward(t.u1, f + P::kDec1W, P::kDec, da3, du1, g + P::kDec1W, g + P::kDec1B);
        up2_backward(du1, dp2);
        pool2_backward(t.am2, dp2, da2, t.a2.h, t.a2.w);
        for (size_t i = 0; i < da2.v.size(); ++i)
            if (!(t.a2.v[i] > 0.0)) da2.v[i] = 0.0;
        conv3x3_backward(t.p1, f + P::kEnc2W, P::kEnc2, da2, dp1, g + P::kEnc2W, g + P::kEnc2B);
        pool2_backward(t.am1, dp1, da1, t.a1.h, t.a1.w);
        for (size_t i = 0; i < da1.v.size(); ++i)
            if (!(t.a1.v[i] > 0.0)) da1.v[i] = 0.0;
        conv3x3_backward(t.x, f + P::kEnc1W, P::kEnc1, da1, dx, g + P::kEnc1W, g + P::kEnc1B);

        for (size_t j = 0; j < P::kCount; ++j) out.grad[j] += grad[j];
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (double& v : out.grad) v *= inv_b;
    out.loss *= inv_b;
    return out;
}

}  // namespace sfada::serial_ref
