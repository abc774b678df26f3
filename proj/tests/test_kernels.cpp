#include <doctest.h>

#include <cmath>
#include <vector>

#include "triagelab/kernels.hpp"
#include "triagelab/rng.hpp"

using namespace triagelab;
namespace k = triagelab::kernels;

namespace {

std::vector<float> random_vec(Rng& rng, int n, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) {
        x = static_cast<float>(rng.next_normal() * scale);
    }
    return v;
}

// guards the scalar/AVX2 equivalence checks below
bool close(float a, float b, float tol) {
    const float scale = std::max({std::abs(a), std::abs(b), 1.0f});
    return std::abs(a - b) <= tol * scale;
}

struct BackendGuard {
    k::Backend saved;
    BackendGuard() : saved(k::active_backend()) {}
    ~BackendGuard() { k::set_backend(saved); }
};

}  // namespace

TEST_CASE("matmul_forward matches a naive double-precision oracle") {
    Rng rng(1);
    const int rows = 5, in_dim = 37, out_dim = 11;
    const auto inp = random_vec(rng, rows * in_dim);
    const auto w = random_vec(rng, out_dim * in_dim);
    const auto bias = random_vec(rng, out_dim);

    std::vector<float> out(rows * out_dim);
    k::ref::matmul_forward(out.data(), inp.data(), w.data(), bias.data(), rows, in_dim, out_dim);

    for (int r = 0; r < rows; ++r) {
        for (int oc = 0; oc < out_dim; ++oc) {
            double acc = bias[oc];
            for (int i = 0; i < in_dim; ++i) {
                acc += static_cast<double>(inp[r * in_dim + i]) * w[oc * in_dim + i];
            }
            CHECK(out[r * out_dim + oc] == doctest::Approx(acc).epsilon(1e-4));
        }
    }
}

TEST_CASE("matmul_backward matches finite differences of the forward map") {
    // d(sum(out * dout))/d(inp, w, bias) via the backward kernel
    Rng rng(2);
    const int rows = 3, in_dim = 8, out_dim = 5;
    std::vector<double> inp(rows * in_dim), w(out_dim * in_dim), bias(out_dim),
        dout(rows * out_dim);
    for (auto* v : {&inp, &w, &bias, &dout}) {
        for (auto& x : *v) {
            x = rng.next_normal();
        }
    }

    std::vector<double> dinp(inp.size(), 0), dw(w.size(), 0), dbias(bias.size(), 0);
    k::ref::matmul_backward(dinp.data(), dw.data(), dbias.data(), dout.data(), inp.data(),
                            w.data(), rows, in_dim, out_dim);

    auto objective = [&]() {
        std::vector<double> out(rows * out_dim);
        k::ref::matmul_forward(out.data(), inp.data(), w.data(), bias.data(), rows, in_dim,
                               out_dim);
        double s = 0;
        for (size_t i = 0; i < out.size(); ++i) {
            s += out[i] * dout[i];
        }
        return s;
    };

    const double h = 1e-6;
    auto check_grad = [&](std::vector<double>& param, const std::vector<double>& grad) {
        for (size_t i = 0; i < param.size(); i += std::max<size_t>(1, param.size() / 7)) {
            const double saved = param[i];
            param[i] = saved + h;
            const double lp = objective();
            param[i] = saved - h;
            const double lm = objective();
            param[i] = saved;
            CHECK(grad[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
        }
    };
    check_grad(inp, dinp);
    check_grad(w, dw);
    check_grad(bias, dbias);
}

TEST_CASE("gelu backward matches finite differences") {
    for (const double x : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.0}) {
        double out_p, out_m;
        const double h = 1e-7;
        double xp = x + h, xm = x - h;
        k::ref::gelu_forward(&out_p, &xp, 1);
        k::ref::gelu_forward(&out_m, &xm, 1);
        double dinp = 0, dout = 1, inp = x;
        k::ref::gelu_backward(&dinp, &inp, &dout, 1);
        CHECK(dinp == doctest::Approx((out_p - out_m) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("layernorm forward normalizes and backward matches finite differences") {
    Rng rng(4);
    const int rows = 3, n = 16;
    std::vector<double> inp(rows * n), gain(n), bias(n), dout(rows * n);
    for (auto& x : inp) x = rng.next_normal() * 2 + 1;
    for (auto& x : gain) x = 1 + 0.1 * rng.next_normal();
    for (auto& x : bias) x = 0.1 * rng.next_normal();
    for (auto& x : dout) x = rng.next_normal();

    std::vector<double> out(rows * n), mean(rows), rstd(rows);
    k::layernorm_forward(out.data(), mean.data(), rstd.data(), inp.data(), gain.data(),
                         bias.data(), rows, n);

    // unit gain, zero bias => exactly standardized rows
    std::vector<double> unit_gain(n, 1.0), zero_bias(n, 0.0), norm(rows * n);
    k::layernorm_forward(norm.data(), mean.data(), rstd.data(), inp.data(), unit_gain.data(),
                         zero_bias.data(), rows, n);
    for (int r = 0; r < rows; ++r) {
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            s += norm[r * n + i];
            s2 += norm[r * n + i] * norm[r * n + i];
        }
        CHECK(std::abs(s / n) < 1e-12);
        CHECK(s2 / n == doctest::Approx(1.0).epsilon(1e-4));  // eps-shifted variance
    }

    std::vector<double> dinp(rows * n, 0), dgain(n, 0), dbias(n, 0);
    k::layernorm_forward(out.data(), mean.data(), rstd.data(), inp.data(), gain.data(),
                         bias.data(), rows, n);
    k::layernorm_backward(dinp.data(), dgain.data(), dbias.data(), dout.data(), inp.data(),
                          mean.data(), rstd.data(), gain.data(), rows, n);

    auto objective = [&]() {
        std::vector<double> o(rows * n), m(rows), rs(rows);
        k::layernorm_forward(o.data(), m.data(), rs.data(), inp.data(), gain.data(), bias.data(),
                             rows, n);
        double s = 0;
        for (size_t i = 0; i < o.size(); ++i) {
            s += o[i] * dout[i];
        }
        return s;
    };
    const double h = 1e-6;
    for (size_t i = 0; i < inp.size(); i += 5) {
        const double saved = inp[i];
        inp[i] = saved + h;
        const double lp = objective();
        inp[i] = saved - h;
        const double lm = objective();
        inp[i] = saved;
        CHECK(dinp[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
    for (size_t i = 0; i < gain.size(); i += 3) {
        const double saved = gain[i];
        gain[i] = saved + h;
        const double lp = objective();
        gain[i] = saved - h;
        const double lm = objective();
        gain[i] = saved;
        CHECK(dgain[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("layernorm bias gradient for constant input matches the closed form") {
    // constant row => normalized values are 0, output = bias, so d(out)/d(bias)
    // is the identity and dbias accumulates dout exactly
    const int n = 8;
    std::vector<double> inp(n, 3.7), gain(n, 1.3), bias(n, 0.2), dout(n);
    for (int i = 0; i < n; ++i) {
        dout[i] = 0.5 * i - 1;
    }
    std::vector<double> out(n), mean(1), rstd(1);
    k::layernorm_forward(out.data(), mean.data(), rstd.data(), inp.data(), gain.data(),
                         bias.data(), 1, n);
    for (int i = 0; i < n; ++i) {
        CHECK(out[i] == doctest::Approx(bias[i]).epsilon(1e-9));
    }
    std::vector<double> dinp(n, 0), dgain(n, 0), dbias(n, 0);
    k::layernorm_backward(dinp.data(), dgain.data(), dbias.data(), dout.data(), inp.data(),
                          mean.data(), rstd.data(), gain.data(), 1, n);
    for (int i = 0; i < n; ++i) {
        CHECK(dbias[i] == doctest::Approx(dout[i]).epsilon(1e-12));
        CHECK(dgain[i] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("adamw first step matches the closed form to 1e-12 in 64-bit") {
    // with g = 1 the bias-corrected mhat/sqrt(vhat) is exactly 1, so the
    // update is lr * (1/(1+eps') + wd*w); eps is added after the sqrt
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.0;
    double w = 0.5, m = 0, v = 0, g = 1.0;
    k::adamw_update(&w, &m, &v, &g, 1, lr, b1, b2, eps, wd, 1 - b1, 1 - b2);
    const double mhat = (1 - b1) * 1.0 / (1 - b1);
    const double vhat = (1 - b2) * 1.0 / (1 - b2);
    const double expected = 0.5 - lr * (mhat / (std::sqrt(vhat) + eps));
    CHECK(std::abs(w - expected) < 1e-12);
    CHECK(std::abs((0.5 - w) - lr) < 1e-6);  // update magnitude ~ lr
}

TEST_CASE("adamw fixed point: zero gradients, zero decay leave weights unchanged") {
    std::vector<float> w = {1.f, -2.f, 3.f}, m(3, 0.f), v(3, 0.f), g(3, 0.f);
    const std::vector<float> before = w;
    for (int step = 1; step <= 5; ++step) {
        k::adamw_update(w.data(), m.data(), v.data(), g.data(), 3, 1e-3f, 0.9f, 0.999f, 1e-8f,
                        0.0f, 1.0f - std::pow(0.9f, step), 1.0f - std::pow(0.999f, step));
    }
    CHECK(w == before);
}

TEST_CASE("adamw with decay and zero gradients shrinks weights strictly") {
    std::vector<double> w = {1.0, -2.0}, m(2, 0.0), v(2, 0.0), g(2, 0.0);
    k::adamw_update(w.data(), m.data(), v.data(), g.data(), 2, 1e-3, 0.9, 0.999, 1e-8, 0.01,
                    0.1, 0.001);
    CHECK(std::abs(w[0]) < 1.0);
    CHECK(std::abs(w[1]) < 2.0);
    CHECK(w[0] > 0.0);
    CHECK(w[1] < 0.0);
}

#if defined(__x86_64__)
TEST_CASE("avx2 kernels are numerically equivalent to the scalar reference") {
    if (!k::avx2::available()) {
        return;  // nothing to compare on this machine
    }
    Rng rng(9);
    // sizes cover the vector width boundaries and scalar tails
    for (const int n : {1, 3, 7, 8, 9, 15, 16, 17, 63, 64, 65, 256}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        CHECK(close(k::avx2::dot(a.data(), b.data(), n), k::ref::dot(a.data(), b.data(), n),
                    1e-5f));

        auto y1 = random_vec(rng, n);
        auto y2 = y1;
        k::avx2::axpy(y1.data(), 0.37f, a.data(), n);
        k::ref::axpy(y2.data(), 0.37f, a.data(), n);
        for (int i = 0; i < n; ++i) {
            CHECK(close(y1[i], y2[i], 1e-6f));
        }
    }

    for (const auto [rows, in_dim, out_dim] :
         {std::tuple{4, 64, 64}, std::tuple{3, 33, 17}, std::tuple{1, 256, 2}}) {
        const auto inp = random_vec(rng, rows * in_dim);
        const auto w = random_vec(rng, out_dim * in_dim);
        const auto bias = random_vec(rng, out_dim);
        std::vector<float> o1(rows * out_dim), o2(rows * out_dim);
        k::avx2::matmul_forward(o1.data(), inp.data(), w.data(), bias.data(), rows, in_dim,
                                out_dim);
        k::ref::matmul_forward(o2.data(), inp.data(), w.data(), bias.data(), rows, in_dim,
                               out_dim);
        for (size_t i = 0; i < o1.size(); ++i) {
            CHECK(close(o1[i], o2[i], 1e-5f));
        }

        const auto dout = random_vec(rng, rows * out_dim);
        std::vector<float> dinp1(rows * in_dim, 0), dinp2(rows * in_dim, 0);
        std::vector<float> dw1(out_dim * in_dim, 0), dw2(out_dim * in_dim, 0);
        std::vector<float> db1(out_dim, 0), db2(out_dim, 0);
        k::avx2::matmul_backward(dinp1.data(), dw1.data(), db1.data(), dout.data(), inp.data(),
                                 w.data(), rows, in_dim, out_dim);
        k::ref::matmul_backward(dinp2.data(), dw2.data(), db2.data(), dout.data(), inp.data(),
                                w.data(), rows, in_dim, out_dim);
        for (size_t i = 0; i < dinp1.size(); ++i) {
            CHECK(close(dinp1[i], dinp2[i], 1e-5f));
        }
        for (size_t i = 0; i < dw1.size(); ++i) {
            CHECK(close(dw1[i], dw2[i], 1e-5f));
        }
        for (size_t i = 0; i < db1.size(); ++i) {
            CHECK(close(db1[i], db2[i], 1e-5f));
        }
    }

    // adamw: run several steps and require near-identical trajectories
    const int n = 37;
    auto w1 = random_vec(rng, n);
    auto w2 = w1;
    std::vector<float> m1(n, 0), v1(n, 0), m2(n, 0), v2(n, 0);
    for (int step = 1; step <= 10; ++step) {
        const auto g = random_vec(rng, n);
        const float bc1 = 1.0f - std::pow(0.9f, static_cast<float>(step));
        const float bc2 = 1.0f - std::pow(0.999f, static_cast<float>(step));
        k::avx2::adamw_update(w1.data(), m1.data(), v1.data(), g.data(), n, 1e-3f, 0.9f, 0.999f,
                              1e-8f, 0.01f, bc1, bc2);
        k::ref::adamw_update(w2.data(), m2.data(), v2.data(), g.data(), n, 1e-3f, 0.9f, 0.999f,
                             1e-8f, 0.01f, bc1, bc2);
    }
    for (int i = 0; i < n; ++i) {
        CHECK(close(w1[i], w2[i], 1e-5f));
    }
}

TEST_CASE("backend dispatch is switchable and reported") {
    BackendGuard guard;
    k::set_backend(k::Backend::Scalar);
    CHECK(k::active_backend() == k::Backend::Scalar);
    CHECK(std::string(k::backend_name(k::active_backend())) == "scalar");
    if (k::avx2::available()) {
        k::set_backend(k::Backend::Avx2);
        CHECK(k::active_backend() == k::Backend::Avx2);
    }
}
#endif
