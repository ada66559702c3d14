#include <doctest.h>

#include "sfada/rng.hpp"
#include "sfada/tensor_ops.hpp"

using namespace sfada;

namespace {

Tensor random_tensor(int c, int h, int w, Rng& rng) {
    Tensor t;
    t.resize(c, h, w);
    for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
    return t;
}

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

// Direct per-pixel zero-padded convolution, the definitional oracle.
Tensor conv3x3_naive(const Tensor& in, const std::vector<double>& w, const std::vector<double>& b,
                     int cout) {
    Tensor out;
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
    return out;
}

}  // namespace

TEST_CASE("conv3x3 matches the per-pixel oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int cin = 1 + static_cast<int>(rng.below(4));
        const int cout = 1 + static_cast<int>(rng.below(4));
        const int h = 3 + static_cast<int>(rng.below(6));
        const int w = 3 + static_cast<int>(rng.below(6));
        const Tensor in = random_tensor(cin, h, w, rng);
        const std::vector<double> wts = random_vec(static_cast<size_t>(cout) * cin * 9, rng);
        const std::vector<double> bias = random_vec(cout, rng);

        Tensor out;
        conv3x3_same(in, wts.data(), bias.data(), cout, out);
        const Tensor expect = conv3x3_naive(in, wts, bias, cout);
        for (size_t i = 0; i < out.v.size(); ++i)
            CHECK(out.v[i] == doctest::Approx(expect.v[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv3x3 backward satisfies the adjoint identities") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(3));
        const int h = 4 + static_cast<int>(rng.below(4));
        const int w = 4 + static_cast<int>(rng.below(4));
        const Tensor in = random_tensor(cin, h, w, rng);
        const std::vector<double> wts = random_vec(static_cast<size_t>(cout) * cin * 9, rng);
        const std::vector<double> zeros(cout, 0.0);
        const Tensor g = random_tensor(cout, h, w, rng);

        Tensor din;
        std::vector<double> dw(wts.size(), 0.0), db(cout, 0.0);
        conv3x3_same_backward(in, wts.data(), cout, g, din, dw.data(), db.data());

        // <L(in), g> == <in, L^T g> for the bias-free linear map
        Tensor out;
        conv3x3_same(in, wts.data(), zeros.data(), cout, out);
        CHECK(dot(out, g) == doctest::Approx(dot(in, din)).epsilon(1e-10));

        // directional derivative in the weights: <conv_dW(in), g> == <dW, dw>
        const std::vector<double> dir = random_vec(wts.size(), rng);
        Tensor dir_out;
        conv3x3_same(in, dir.data(), zeros.data(), cout, dir_out);
        double lhs = dot(dir_out, g), rhs = 0;
        for (size_t i = 0; i < dir.size(); ++i) rhs += dir[i] * dw[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

        // bias gradient: <b-part, g> = sum_co b[co] * db[co]
        for (int co = 0; co < cout; ++co) {
            double gsum = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) gsum += g.at(co, y, x);
            CHECK(db[co] == doctest::Approx(gsum).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv1x1 matches a direct channel mix and its adjoint") {
    Rng rng(3);
    const Tensor in = random_tensor(5, 6, 7, rng);
    const std::vector<double> wts = random_vec(3 * 5, rng);
    const std::vector<double> bias = random_vec(3, rng);
    Tensor out;
    conv1x1(in, wts.data(), bias.data(), 3, out);
    for (int co = 0; co < 3; ++co)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 7; ++x) {
                double sum = bias[co];
                for (int ci = 0; ci < 5; ++ci) sum += wts[co * 5 + ci] * in.at(ci, y, x);
                CHECK(out.at(co, y, x) == doctest::Approx(sum).epsilon(1e-12));
            }

    const Tensor g = random_tensor(3, 6, 7, rng);
    Tensor din;
    std::vector<double> dw(wts.size(), 0.0), db(3, 0.0);
    conv1x1_backward(in, wts.data(), 3, g, din, dw.data(), db.data());
    const std::vector<double> zeros(3, 0.0);
    Tensor lin;
    conv1x1(in, wts.data(), zeros.data(), 3, lin);
    CHECK(dot(lin, g) == doctest::Approx(dot(in, din)).epsilon(1e-10));
}

TEST_CASE("maxpool takes the first maximum in row-major order") {
    Tensor t;
    t.resize(1, 2, 4);
    // left window: all equal -> index 0 wins; right window: bottom-right strictly larger
    t.v = {5, 5, 1, 2, 5, 5, 3, 9};
    Tensor out;
    std::vector<int> am;
    maxpool2(t, out, am);
    CHECK(out.at(0, 0, 0) == 5);
    CHECK(out.at(0, 0, 1) == 9);
    CHECK(am[0] == 0);
    CHECK(am[1] == 7);

    Tensor g;
    g.resize(1, 1, 2);
    g.v = {2.0, 3.0};
    Tensor din;
    maxpool2_backward(am, g, din, 2, 4);
    CHECK(din.v == std::vector<double>{2, 0, 0, 0, 0, 0, 0, 3});
}

TEST_CASE("upsample and its backward are adjoint") {
    Rng rng(4);
    const Tensor in = random_tensor(3, 4, 5, rng);
    Tensor out;
    upsample2(in, out);
    for (int ci = 0; ci < 3; ++ci)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 10; ++x) CHECK(out.at(ci, y, x) == in.at(ci, y / 2, x / 2));

    const Tensor g = random_tensor(3, 8, 10, rng);
    Tensor din;
    upsample2_backward(g, din);
    CHECK(dot(out, g) == doctest::Approx(dot(in, din)).epsilon(1e-12));
}

TEST_CASE("relu backward gates on the activated output, zero at the kink") {
    Tensor act;
    act.resize(1, 1, 4);
    act.v = {0.0, 2.0, 0.0, 1.5};
    Tensor g;
    g.resize(1, 1, 4);
    g.v = {1, 1, -3, -3};
    relu_backward_inplace(act, g);
    CHECK(g.v == std::vector<double>{0, 1, 0, -3});
}
