#include "triagelab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace triagelab::kernels {

namespace {

Backend pick_default() {
    const char* env = std::getenv("TRIAGELAB_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) {
            return Backend::Scalar;
        }
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2::available()) {
                throw std::runtime_error("TRIAGELAB_KERNELS=avx2 but CPU lacks AVX2/FMA");
            }
            return Backend::Avx2;
        }
        throw std::runtime_error("TRIAGELAB_KERNELS must be 'scalar' or 'avx2'");
    }
    return avx2::available() ? Backend::Avx2 : Backend::Scalar;
}

Backend& backend_slot() {
    static Backend b = pick_default();
    return b;
}

}  // namespace

Backend detected_backend() {
    return avx2::available() ? Backend::Avx2 : Backend::Scalar;
}

Backend active_backend() {
    return backend_slot();
}

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2::available()) {
        throw std::runtime_error("AVX2 backend requested but not available on this CPU");
    }
    backend_slot() = b;
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "unknown";
}

float dot(const float* a, const float* b, int n) {
    if (active_backend() == Backend::Avx2) {
        return avx2::dot(a, b, n);
    }
    return ref::dot(a, b, n);
}

void axpy(float* y, float a, const float* x, int n) {
    if (active_backend() == Backend::Avx2) {
        avx2::axpy(y, a, x, n);
        return;
    }
    ref::axpy(y, a, x, n);
}

void add_inplace(float* y, const float* x, int n) {
    if (active_backend() == Backend::Avx2) {
        avx2::add_inplace(y, x, n);
        return;
    }
    ref::add_inplace(y, x, n);
}

void matmul_forward(float* out, const float* inp, const float* weight, const float* bias,
                    int rows, int in_dim, int out_dim) {
    if (active_backend() == Backend::Avx2) {
        avx2::matmul_forward(out, inp, weight, bias, rows, in_dim, out_dim);
        return;
    }
    ref::matmul_forward(out, inp, weight, bias, rows, in_dim, out_dim);
}

void matmul_backward(float* dinp, float* dweight, float* dbias, const float* dout,
                     const float* inp, const float* weight,
                     int rows, int in_dim, int out_dim) {
    if (active_backend() == Backend::Avx2) {
        avx2::matmul_backward(dinp, dweight, dbias, dout, inp, weight, rows, in_dim, out_dim);
        return;
    }
    ref::matmul_backward(dinp, dweight, dbias, dout, inp, weight, rows, in_dim, out_dim);
}

void adamw_update(float* w, float* m, float* v, const float* g, int n,
                  float lr, float beta1, float beta2, float eps, float weight_decay,
                  float bc1, float bc2) {
    if (active_backend() == Backend::Avx2) {
        avx2::adamw_update(w, m, v, g, n, lr, beta1, beta2, eps, weight_decay, bc1, bc2);
        return;
    }
    ref::adamw_update(w, m, v, g, n, lr, beta1, beta2, eps, weight_decay, bc1, bc2);
}

}  // namespace triagelab::kernels
