#pragma once
#include <vector>

#include "sfada/image.hpp"

namespace sfada {

// Dense CHW tensor of doubles.
struct Tensor {
    int c = 0, h = 0, w = 0;

    std::vector<double> v;

    void resize(int C, int H, int W) {
        c = C;
        h = H;
        w = W;
        v.assign(static_cast<size_t>(C) * H * W, 0.0);
    }
    size_t size() const { return v.size(); }
    double* plane(int ci) { return v.data() + static_cast<size_t>(ci) * h * w; }
    const double* plane(int ci) const { return v.data() + static_cast<size_t>(ci) * h * w; }
    double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
};

// 3x3 convolution, zero-padded to the same shape.
// w layout [cout][cin][ky][kx], b layout [cout]; out is resized.
void conv3x3_same(const Tensor& in, const double* w, const double* b, int cout, Tensor& out);

// din is overwritten; dw and db are accumulated into (caller zeroes them).
void conv3x3_same_backward(const Tensor& in, const double* w, int cout, const Tensor& dout,
                           Tensor& din, double* dw, double* db);

// 1x1 convolution; w layout [cout][cin].
void conv1x1(const Tensor& in, const double* w, const double* b, int cout, Tensor& out);
void conv1x1_backward(const Tensor& in, const double* w, int cout, const Tensor& dout, Tensor& din,
                      double* dw, double* db);

void relu_inplace(Tensor& t);
// grad *= (activated > 0), elementwise; zero at the kink.
void relu_backward_inplace(const Tensor& activated, Tensor& grad);

// 2x2 max pooling, stride 2; even h and w required. argmax stores the winning
// in-plane flat index per output element (ties -> first in row-major order).
void maxpool2(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool2_backward(const std::vector<int>& argmax, const Tensor& dout, Tensor& din, int in_h,
                       int in_w);

// 2x nearest-neighbor upsampling.
void upsample2(const Tensor& in, Tensor& out);
void upsample2_backward(const Tensor& dout, Tensor& din);

}  // namespace sfada
