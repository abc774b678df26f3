#pragma once

#include <cmath>
#include <cstdint>

namespace triagelab::kernels {

// Runtime-selected backend for the float32 training kernels. The scalar
// path is the reference implementation; AVX2 variants are used when the
// CPU supports them and must stay numerically equivalent (tested against
// scalar at tolerance). The float64 path used by the gradient checker is
// always scalar.
enum class Backend { Scalar, Avx2 };

Backend detected_backend();
Backend active_backend();
void set_backend(Backend b);
const char* backend_name(Backend b);

// ---------------------------------------------------------------------------
// Scalar reference kernels. Row-major throughout:
//   inp    (rows, in_dim)
//   weight (out_dim, in_dim)   so each output channel is a contiguous dot
//   out    (rows, out_dim)
// Backward kernels accumulate into their d* outputs.
// ---------------------------------------------------------------------------
namespace ref {

template <typename T>
inline T dot(const T* a, const T* b, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

template <typename T>
inline void axpy(T* y, T a, const T* x, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

template <typename T>
inline void add_inplace(T* y, const T* x, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += x[i];
    }
}

template <typename T>
inline void scale_inplace(T* y, T a, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] *= a;
    }
}

template <typename T>
inline void matmul_forward(T* out, const T* inp, const T* weight, const T* bias,
                           int rows, int in_dim, int out_dim) {
    for (int r = 0; r < rows; ++r) {
        const T* x = inp + static_cast<size_t>(r) * in_dim;
        T* o = out + static_cast<size_t>(r) * out_dim;
        for (int oc = 0; oc < out_dim; ++oc) {
            const T* w = weight + static_cast<size_t>(oc) * in_dim;
            o[oc] = dot(x, w, in_dim) + (bias ? bias[oc] : T(0));
        }
    }
}

template <typename T>
inline void matmul_backward(T* dinp, T* dweight, T* dbias, const T* dout,
                            const T* inp, const T* weight,
                            int rows, int in_dim, int out_dim) {
    for (int r = 0; r < rows; ++r) {
        const T* dy = dout + static_cast<size_t>(r) * out_dim;
        const T* x = inp + static_cast<size_t>(r) * in_dim;
        T* dx = dinp + static_cast<size_t>(r) * in_dim;
        for (int oc = 0; oc < out_dim; ++oc) {
            const T d = dy[oc];
            if (dinp) {
                axpy(dx, d, weight + static_cast<size_t>(oc) * in_dim, in_dim);
            }
            if (dweight) {
                axpy(dweight + static_cast<size_t>(oc) * in_dim, d, x, in_dim);
            }
            if (dbias) {
                dbias[oc] += d;
            }
        }
    }
}

// GPT-2 style tanh GELU.
template <typename T>
inline T gelu_one(T x) {
    const T k = T(0.7978845608028653559);  // sqrt(2/pi)
    const T c = T(0.044715);
    return T(0.5) * x * (T(1) + std::tanh(k * (x + c * x * x * x)));
}

template <typename T>
inline void gelu_forward(T* out, const T* inp, int n) {
    for (int i = 0; i < n; ++i) {
        out[i] = gelu_one(inp[i]);
    }
}

template <typename T>
inline void gelu_backward(T* dinp, const T* inp, const T* dout, int n) {
    const T k = T(0.7978845608028653559);
    const T c = T(0.044715);
    for (int i = 0; i < n; ++i) {
        const T x = inp[i];
        const T cube = c * x * x * x;
        const T u = k * (x + cube);
        const T th = std::tanh(u);
        const T sech2 = T(1) - th * th;
        const T local = T(0.5) * (T(1) + th) +
                        T(0.5) * x * sech2 * k * (T(1) + T(3) * c * x * x);
        dinp[i] += dout[i] * local;
    }
}

// Row-wise layer norm. mean/rstd are cached per row for the backward pass.
// Stays scalar on every backend: rows are short and the cost is negligible
// next to the matmuls.
template <typename T>
inline void layernorm_forward(T* out, T* mean, T* rstd, const T* inp,
                              const T* gain, const T* bias, int rows, int n,
                              T eps = T(1e-5)) {
    for (int r = 0; r < rows; ++r) {
        const T* x = inp + static_cast<size_t>(r) * n;
        T* o = out + static_cast<size_t>(r) * n;
        T m = T(0);
        for (int i = 0; i < n; ++i) {
            m += x[i];
        }
        m /= T(n);
        T var = T(0);
        for (int i = 0; i < n; ++i) {
            const T d = x[i] - m;
            var += d * d;
        }
        var /= T(n);
        const T rs = T(1) / std::sqrt(var + eps);
        for (int i = 0; i < n; ++i) {
            o[i] = (x[i] - m) * rs * gain[i] + bias[i];
        }
        mean[r] = m;
        rstd[r] = rs;
    }
}

template <typename T>
inline void layernorm_backward(T* dinp, T* dgain, T* dbias, const T* dout,
                               const T* inp, const T* mean, const T* rstd,
                               const T* gain, int rows, int n) {
    for (int r = 0; r < rows; ++r) {
        const T* x = inp + static_cast<size_t>(r) * n;
        const T* dy = dout + static_cast<size_t>(r) * n;
        T* dx = dinp + static_cast<size_t>(r) * n;
        const T m = mean[r];
        const T rs = rstd[r];

        T dnorm_mean = T(0);
        T dnorm_norm_mean = T(0);
        for (int i = 0; i < n; ++i) {
            const T norm = (x[i] - m) * rs;
            const T dnorm = gain[i] * dy[i];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean /= T(n);
        dnorm_norm_mean /= T(n);

        for (int i = 0; i < n; ++i) {
            const T norm = (x[i] - m) * rs;
            const T dnorm = gain[i] * dy[i];
            dx[i] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rs;
            dgain[i] += dy[i] * norm;
            dbias[i] += dy[i];
        }
    }
}

// One AdamW step over a flat tensor. m/v are the running moments, bc1/bc2
// the (1 - beta^t) bias corrections. Weight decay is decoupled.
template <typename T>
inline void adamw_update(T* w, T* m, T* v, const T* g, int n,
                         T lr, T beta1, T beta2, T eps, T weight_decay,
                         T bc1, T bc2) {
    for (int i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
    }
}

}  // namespace ref

// layernorm, gelu and the loss softmax stay scalar on every backend; the
// matmul and optimizer kernels below are the dispatched hot paths.
using ref::gelu_backward;
using ref::gelu_forward;
using ref::layernorm_backward;
using ref::layernorm_forward;

// ---------------------------------------------------------------------------
// Dispatched entry points. double always routes to ref; float routes to the
// active backend.
// ---------------------------------------------------------------------------

float dot(const float* a, const float* b, int n);
void axpy(float* y, float a, const float* x, int n);
void add_inplace(float* y, const float* x, int n);
void matmul_forward(float* out, const float* inp, const float* weight, const float* bias,
                    int rows, int in_dim, int out_dim);
void matmul_backward(float* dinp, float* dweight, float* dbias, const float* dout,
                     const float* inp, const float* weight,
                     int rows, int in_dim, int out_dim);
void adamw_update(float* w, float* m, float* v, const float* g, int n,
                  float lr, float beta1, float beta2, float eps, float weight_decay,
                  float bc1, float bc2);

inline double dot(const double* a, const double* b, int n) { return ref::dot(a, b, n); }
inline void axpy(double* y, double a, const double* x, int n) { ref::axpy(y, a, x, n); }
inline void add_inplace(double* y, const double* x, int n) { ref::add_inplace(y, x, n); }
inline void matmul_forward(double* out, const double* inp, const double* weight,
                           const double* bias, int rows, int in_dim, int out_dim) {
    ref::matmul_forward(out, inp, weight, bias, rows, in_dim, out_dim);
}
inline void matmul_backward(double* dinp, double* dweight, double* dbias, const double* dout,
                            const double* inp, const double* weight,
                            int rows, int in_dim, int out_dim) {
    ref::matmul_backward(dinp, dweight, dbias, dout, inp, weight, rows, in_dim, out_dim);
}
inline void adamw_update(double* w, double* m, double* v, const double* g, int n,
                         double lr, double beta1, double beta2, double eps,
                         double weight_decay, double bc1, double bc2) {
    ref::adamw_update(w, m, v, g, n, lr, beta1, beta2, eps, weight_decay, bc1, bc2);
}

// AVX2 implementations, compiled only on x86-64. Callers go through the
// dispatched entry points above.
namespace avx2 {
bool available();
float dot(const float* a, const float* b, int n);
void axpy(float* y, float a, const float* x, int n);
void add_inplace(float* y, const float* x, int n);
void matmul_forward(float* out, const float* inp, const float* weight, const float* bias,
                    int rows, int in_dim, int out_dim);
void matmul_backward(float* dinp, float* dweight, float* dbias, const float* dout,
                     const float* inp, const float* weight,
                     int rows, int in_dim, int out_dim);
void adamw_update(float* w, float* m, float* v, const float* g, int n,
                  float lr, float beta1, float beta2, float eps, float weight_decay,
                  float bc1, float bc2);
}  // namespace avx2

}  // namespace triagelab::kernels
