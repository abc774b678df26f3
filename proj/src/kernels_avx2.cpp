#include "triagelab/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define TRIAGELAB_X86 1
#include <immintrin.h>
#else
#define TRIAGELAB_X86 0
#include <cstdlib>
#endif

namespace triagelab::kernels::avx2 {

#if TRIAGELAB_X86

bool available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

}  // namespace

float dot(const float* a, const float* b, int n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    int i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    float acc = hsum256(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void axpy(float* y, float a, const float* x, int n) {
    const __m256 va = _mm256_set1_ps(a);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vy = _mm256_loadu_ps(y + i);
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void add_inplace(float* y, const float* x, int n) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    }
    for (; i < n; ++i) {
        y[i] += x[i];
    }
}

void matmul_forward(float* out, const float* inp, const float* weight, const float* bias,
                    int rows, int in_dim, int out_dim) {
    for (int r = 0; r < rows; ++r) {
        const float* x = inp + static_cast<size_t>(r) * in_dim;
        float* o = out + static_cast<size_t>(r) * out_dim;
        for (int oc = 0; oc < out_dim; ++oc) {
            const float* w = weight + static_cast<size_t>(oc) * in_dim;
            o[oc] = dot(x, w, in_dim) + (bias ? bias[oc] : 0.0f);
        }
    }
}

void matmul_backward(float* dinp, float* dweight, float* dbias, const float* dout,
                     const float* inp, const float* weight,
                     int rows, int in_dim, int out_dim) {
    for (int r = 0; r < rows; ++r) {
        const float* dy = dout + static_cast<size_t>(r) * out_dim;
        const float* x = inp + static_cast<size_t>(r) * in_dim;
        float* dx = dinp + static_cast<size_t>(r) * in_dim;
        for (int oc = 0; oc < out_dim; ++oc) {
            const float d = dy[oc];
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

void adamw_update(float* w, float* m, float* v, const float* g, int n,
                  float lr, float beta1, float beta2, float eps, float weight_decay,
                  float bc1, float bc2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 v1mb1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 v1mb2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 vbc1 = _mm256_set1_ps(bc1);
    const __m256 vbc2 = _mm256_set1_ps(bc2);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 vwd = _mm256_set1_ps(weight_decay);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_loadu_ps(m + i);
        __m256 vi = _mm256_loadu_ps(v + i);
        mi = _mm256_fmadd_ps(vb1, mi, _mm256_mul_ps(v1mb1, gi));
        vi = _mm256_fmadd_ps(vb2, vi, _mm256_mul_ps(v1mb2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_div_ps(mi, vbc1);
        const __m256 vhat = _mm256_div_ps(vi, vbc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        __m256 wi = _mm256_loadu_ps(w + i);
        const __m256 step = _mm256_add_ps(_mm256_div_ps(mhat, denom), _mm256_mul_ps(vwd, wi));
        wi = _mm256_fnmadd_ps(vlr, step, wi);
        _mm256_storeu_ps(w + i, wi);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w[i]);
    }
}

#else  // !TRIAGELAB_X86

bool available() { return false; }

float dot(const float*, const float*, int) { std::abort(); }
void axpy(float*, float, const float*, int) { std::abort(); }
void add_inplace(float*, const float*, int) { std::abort(); }
void matmul_forward(float*, const float*, const float*, const float*, int, int, int) { std::abort(); }
void matmul_backward(float*, float*, float*, const float*, const float*, const float*, int, int, int) { std::abort(); }
void adamw_update(float*, float*, float*, const float*, int, float, float, float, float, float, float, float) { std::abort(); }

#endif

}  // namespace triagelab::kernels::avx2
