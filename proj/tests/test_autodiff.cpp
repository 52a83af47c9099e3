#include "gazerep/rng.hpp"
#include "gazerep/tensor.hpp"

#include "reference.hpp"

#include <doctest.h>

#include <cmath>

using namespace gazerep;

namespace {

// random values in [-1,1], nudged away from 0 so relu/finite differences
// stay well-posed
std::vector<float> random_values(size_t n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    CounterRng rng(seed);
    std::vector<float> out(n);
    for (size_t i = 0; i < n; ++i) {
        double v = rng.uniform(lo, hi);
        if (std::abs(v) < 0.05) v += v >= 0 ? 0.06 : -0.06;
        out[i] = static_cast<float>(v);
    }
    return out;
}

ref::Vec to_f64(const std::vector<float>& v) { return ref::Vec(v.begin(), v.end()); }

void check_grad(const std::vector<float>& analytic, const ref::Vec& numeric, double tol = 1e-3) {
    REQUIRE(analytic.size() == numeric.size());
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, std::abs(double(analytic[i]) - numeric[i]));
    CHECK(worst <= tol);
}

} // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("conv1d causal matches the hand example") {
    // kernel [1,1,1], d=1, left pad 2: running sum of the last three inputs
    Tensor x = Tensor::from_data({1, 1, 4}, {1, 2, 3, 4});
    Tensor w = Tensor::from_data({1, 1, 3}, {1, 1, 1});
    Tensor b = Tensor::zeros({1});
    Tensor out = conv1d(x, w, b, 1, /*causal=*/true);
    std::vector<float> expected = {1, 3, 6, 9};
    CHECK(out.to_vector() == expected);
}

TEST_CASE("conv1d identity kernel at the current timestep") {
    auto vals = random_values(16, 7);
    Tensor x = Tensor::from_data({1, 1, 16}, vals);
    Tensor w = Tensor::from_data({1, 1, 3}, {0, 0, 1});
    Tensor b = Tensor::zeros({1});
    for (int d : {1, 4, 64}) {
        Tensor out = conv1d(x, w, b, d, /*causal=*/true);
        CHECK(out.to_vector() == vals);
    }
}

TEST_CASE("conv1d forward matches the float64 loop (both paddings)") {
    int B = 2, C = 3, T = 17, O = 4;
    for (bool causal : {true, false})
        for (int d : {1, 2, 5}) {
            auto xv = random_values(size_t(B * C * T), 11);
            auto wv = random_values(size_t(O * C * 3), 13);
            auto bv = random_values(size_t(O), 17);
            Tensor out = conv1d(Tensor::from_data({B, C, T}, xv), Tensor::from_data({O, C, 3}, wv),
                                Tensor::from_data({O}, bv), d, causal);
            ref::Vec expect = ref::conv1d(to_f64(xv), to_f64(wv), to_f64(bv), B, C, T, O, 3, d,
                                          causal);
            for (size_t i = 0; i < expect.size(); ++i) {
                double rel = std::abs(double(out.to_vector()[i]) - expect[i]) /
                             std::max(1.0, std::abs(expect[i]));
                CHECK(rel < 1e-4);
            }
        }
}

TEST_CASE("relu forward") {
    Tensor x = Tensor::from_data({3}, {-1, 0, 2});
    CHECK(relu(x).to_vector() == std::vector<float>{0, 0, 2});
}

TEST_CASE("backward on sum of squares") {
    Tensor x = Tensor::from_data({2}, {1, 2}, /*requires_grad=*/true);
    Tensor loss = sum_of_squares(x);
    CHECK(loss.item() == doctest::Approx(5.0));
    loss.backward();
    CHECK(x.grad_vector() == std::vector<float>{2, 4});
}

TEST_CASE("backward rejects non-scalars") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = add(x, x);
    CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates; zero_grads resets") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor loss = sum_of_squares(x);
    loss.backward();
    loss.backward();
    CHECK(x.grad_vector() == std::vector<float>{4, 8});
    std::vector<Tensor> params = {x};
    zero_grads(params);
    CHECK(x.grad_vector() == std::vector<float>{0, 0});
    zero_grads(params); // idempotent
    CHECK(x.grad_vector() == std::vector<float>{0, 0});
    loss.backward();
    CHECK(x.grad_vector() == std::vector<float>{2, 4});
}

TEST_CASE("shape mismatches raise descriptive errors") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(mul(a, Tensor::zeros({2, 2})), doctest::Contains("[2,2]"),
                         std::invalid_argument);
    Tensor x = Tensor::zeros({1, 3, 8});
    Tensor w = Tensor::zeros({2, 4, 3});
    CHECK_THROWS_WITH_AS(conv1d(x, w, Tensor::zeros({2}), 1, true),
                         doctest::Contains("conv1d"), std::invalid_argument);
}

TEST_CASE("causal conv gradient is zero toward the future") {
    int T = 12;
    auto xv = random_values(size_t(T), 23);
    Tensor x = Tensor::from_data({1, 1, T}, xv, true);
    Tensor w = Tensor::from_data({1, 1, 3}, random_values(3, 29), true);
    Tensor b = Tensor::zeros({1}, true);
    Tensor out = conv1d(x, w, b, 2, /*causal=*/true);
    // loss that reads only output at time t
    int t = 5;
    std::vector<float> sel(size_t(T), 0.0f);
    sel[size_t(t)] = 1.0f;
    Tensor loss = sum_of_squares(mul(out, Tensor::from_data({1, 1, T}, sel)));
    loss.backward();
    auto gx = x.grad_vector();
    for (int u = t + 1; u < T; ++u) CHECK(gx[size_t(u)] == 0.0f);
}

// central-difference oracle per operator, float64 replay via tests/reference.hpp
TEST_CASE("gradients match float64 central differences per operator") {
    const double h = 1e-3;

    SUBCASE("add/sub/scalar_mul/mul") {
        auto av = random_values(6, 31);
        auto bv = random_values(6, 37);
        Tensor a = Tensor::from_data({6}, av, true);
        Tensor b = Tensor::from_data({6}, bv, true);
        Tensor loss = sum_of_squares(mul(add(a, scalar_mul(b, 0.5f)), sub(a, b)));
        loss.backward();
        auto f = [&](const ref::Vec& all) {
            double acc = 0.0;
            for (int i = 0; i < 6; ++i) {
                double ai = all[size_t(i)], bi = all[size_t(6 + i)];
                double v = (ai + 0.5 * bi) * (ai - bi);
                acc += v * v;
            }
            return acc;
        };
        ref::Vec x0 = to_f64(av);
        ref::Vec b0 = to_f64(bv);
        x0.insert(x0.end(), b0.begin(), b0.end());
        ref::Vec numeric = ref::central_diff(f, x0, h);
        check_grad(a.grad_vector(), ref::Vec(numeric.begin(), numeric.begin() + 6));
        check_grad(b.grad_vector(), ref::Vec(numeric.begin() + 6, numeric.end()));
    }

    SUBCASE("conv1d") {
        int B = 2, C = 2, T = 9, O = 2;
        for (bool causal : {true, false})
            for (int d : {1, 3}) {
                auto xv = random_values(size_t(B * C * T), 41);
                auto wv = random_values(size_t(O * C * 3), 43);
                auto bv = random_values(size_t(O), 47);
                Tensor x = Tensor::from_data({B, C, T}, xv, true);
                Tensor w = Tensor::from_data({O, C, 3}, wv, true);
                Tensor b = Tensor::from_data({O}, bv, true);
                Tensor loss = sum_of_squares(conv1d(x, w, b, d, causal));
                loss.backward();

                auto fx = [&](const ref::Vec& v) {
                    return ref::sum_of_squares(
                        ref::conv1d(v, to_f64(wv), to_f64(bv), B, C, T, O, 3, d, causal));
                };
                check_grad(x.grad_vector(), ref::central_diff(fx, to_f64(xv), h));
                auto fw = [&](const ref::Vec& v) {
                    return ref::sum_of_squares(
                        ref::conv1d(to_f64(xv), v, to_f64(bv), B, C, T, O, 3, d, causal));
                };
                check_grad(w.grad_vector(), ref::central_diff(fw, to_f64(wv), h));
                auto fb = [&](const ref::Vec& v) {
                    return ref::sum_of_squares(
                        ref::conv1d(to_f64(xv), to_f64(wv), v, B, C, T, O, 3, d, causal));
                };
                check_grad(b.grad_vector(), ref::central_diff(fb, to_f64(bv), h));
            }
    }

    SUBCASE("relu") {
        auto xv = random_values(20, 53);
        Tensor x = Tensor::from_data({20}, xv, true);
        sum_of_squares(relu(x)).backward();
        auto f = [](const ref::Vec& v) { return ref::sum_of_squares(ref::relu(v)); };
        check_grad(x.grad_vector(), ref::central_diff(f, to_f64(xv), h));
    }

    SUBCASE("matmul both orientations") {
        int M = 3, K = 4, N = 2;
        auto av = random_values(size_t(M * K), 59);
        auto bv = random_values(size_t(K * N), 61);
        for (bool transpose_b : {false, true}) {
            Tensor a = Tensor::from_data({M, K}, av, true);
            Tensor b = transpose_b ? Tensor::from_data({N, K}, bv, true)
                                   : Tensor::from_data({K, N}, bv, true);
            sum_of_squares(matmul(a, b, transpose_b)).backward();
            auto f = [&](const ref::Vec& all) {
                double acc = 0.0;
                for (int i = 0; i < M; ++i)
                    for (int j = 0; j < N; ++j) {
                        double s = 0.0;
                        for (int k = 0; k < K; ++k) {
                            double bj = transpose_b ? all[size_t(M * K + j * K + k)]
                                                    : all[size_t(M * K + k * N + j)];
                            s += all[size_t(i * K + k)] * bj;
                        }
                        acc += s * s;
                    }
                return acc;
            };
            ref::Vec x0 = to_f64(av);
            ref::Vec b0 = to_f64(bv);
            x0.insert(x0.end(), b0.begin(), b0.end());
            ref::Vec numeric = ref::central_diff(f, x0, h);
            check_grad(a.grad_vector(), ref::Vec(numeric.begin(), numeric.begin() + M * K));
            check_grad(b.grad_vector(), ref::Vec(numeric.begin() + M * K, numeric.end()));
        }
    }

    SUBCASE("batch moments") {
        int B = 3, C = 2, T = 5;
        auto xv = random_values(size_t(B * C * T), 67);
        Tensor x = Tensor::from_data({B, C, T}, xv, true);
        Tensor mean = channel_mean(x);
        Tensor loss = add(sum_of_squares(mean), sum_of_squares(channel_var(x, mean)));
        loss.backward();
        auto f = [&](const ref::Vec& v) {
            double acc = 0.0;
            double n = double(B) * T;
            for (int c = 0; c < C; ++c) {
                double m = 0.0;
                for (int b = 0; b < B; ++b)
                    for (int t = 0; t < T; ++t) m += v[size_t((b * C + c) * T + t)];
                m /= n;
                double var = 0.0;
                for (int b = 0; b < B; ++b)
                    for (int t = 0; t < T; ++t) {
                        double d = v[size_t((b * C + c) * T + t)] - m;
                        var += d * d;
                    }
                var /= n;
                acc += m * m + var * var;
            }
            return acc;
        };
        check_grad(x.grad_vector(), ref::central_diff(f, to_f64(xv), h));
    }

    SUBCASE("broadcast_add_time and gap") {
        int B = 2, C = 3, T = 4;
        auto xv = random_values(size_t(B * C * T), 71);
        auto vv = random_values(size_t(B * C), 73);
        Tensor x = Tensor::from_data({B, C, T}, xv, true);
        Tensor v = Tensor::from_data({B, C}, vv, true);
        sum_of_squares(gap(broadcast_add_time(x, v))).backward();
        auto f = [&](const ref::Vec& all) {
            ref::Vec xs(all.begin(), all.begin() + B * C * T);
            ref::Vec vs(all.begin() + B * C * T, all.end());
            return ref::sum_of_squares(
                ref::gap(ref::broadcast_add_time(xs, vs, B, C, T), B, C, T));
        };
        ref::Vec x0 = to_f64(xv);
        ref::Vec v0 = to_f64(vv);
        x0.insert(x0.end(), v0.begin(), v0.end());
        ref::Vec numeric = ref::central_diff(f, x0, h);
        check_grad(x.grad_vector(), ref::Vec(numeric.begin(), numeric.begin() + B * C * T));
        check_grad(v.grad_vector(), ref::Vec(numeric.begin() + B * C * T, numeric.end()));
    }

    SUBCASE("dropout-mask-apply") {
        auto xv = random_values(12, 79);
        auto mask = std::make_shared<std::vector<float>>(12, 1.0f);
        for (size_t i = 0; i < 12; i += 3) (*mask)[i] = 0.0f;
        Tensor x = Tensor::from_data({12}, xv, true);
        sum_of_squares(apply_mask(x, mask)).backward();
        auto f = [&](const ref::Vec& v) {
            ref::Vec masked(v.size());
            for (size_t i = 0; i < v.size(); ++i) masked[i] = v[i] * (*mask)[i];
            return ref::sum_of_squares(masked);
        };
        check_grad(x.grad_vector(), ref::central_diff(f, to_f64(xv), h));
    }

    SUBCASE("linear") {
        int B = 3, N = 4, M = 2;
        auto xv = random_values(size_t(B * N), 83);
        auto wv = random_values(size_t(M * N), 89);
        auto bv = random_values(size_t(M), 97);
        Tensor x = Tensor::from_data({B, N}, xv, true);
        Tensor w = Tensor::from_data({M, N}, wv, true);
        Tensor b = Tensor::from_data({M}, bv, true);
        sum_of_squares(linear(x, w, b)).backward();
        auto fx = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::linear(v, to_f64(wv), to_f64(bv), B, N, M));
        };
        check_grad(x.grad_vector(), ref::central_diff(fx, to_f64(xv), h));
        auto fw = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::linear(to_f64(xv), v, to_f64(bv), B, N, M));
        };
        check_grad(w.grad_vector(), ref::central_diff(fw, to_f64(wv), h));
        auto fb = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::linear(to_f64(xv), to_f64(wv), v, B, N, M));
        };
        check_grad(b.grad_vector(), ref::central_diff(fb, to_f64(bv), h));
    }

    SUBCASE("batchnorm (training mode)") {
        int B = 4, C = 2, T = 3;
        auto xv = random_values(size_t(B * C * T), 101);
        auto gv = random_values(size_t(C), 103, 0.5, 1.5);
        auto bv = random_values(size_t(C), 107);
        Tensor x = Tensor::from_data({B, C, T}, xv, true);
        Tensor g = Tensor::from_data({C}, gv, true);
        Tensor b = Tensor::from_data({C}, bv, true);
        sum_of_squares(batchnorm_train(x, g, b, 1e-5f)).backward();
        auto fx = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::batchnorm_train(v, to_f64(gv), to_f64(bv), B, C, T,
                                                            1e-5));
        };
        check_grad(x.grad_vector(), ref::central_diff(fx, to_f64(xv), h), 2e-3);
        auto fg = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::batchnorm_train(to_f64(xv), v, to_f64(bv), B, C, T,
                                                            1e-5));
        };
        check_grad(g.grad_vector(), ref::central_diff(fg, to_f64(gv), h), 2e-3);
        auto fb = [&](const ref::Vec& v) {
            return ref::sum_of_squares(ref::batchnorm_train(to_f64(xv), to_f64(gv), v, B, C, T,
                                                            1e-5));
        };
        check_grad(b.grad_vector(), ref::central_diff(fb, to_f64(bv), h), 2e-3);
    }

    SUBCASE("softmax cross-entropy") {
        int B = 3, K = 4;
        auto lv = random_values(size_t(B * K), 109);
        std::vector<int> labels = {2, 0, 3};
        Tensor logits = Tensor::from_data({B, K}, lv, true);
        softmax_xent(logits, labels).backward();
        auto f = [&](const ref::Vec& v) {
            double loss = 0.0;
            for (int b = 0; b < B; ++b) {
                double mx = -1e300;
                for (int k = 0; k < K; ++k) mx = std::max(mx, v[size_t(b * K + k)]);
                double z = 0.0;
                for (int k = 0; k < K; ++k) z += std::exp(v[size_t(b * K + k)] - mx);
                loss -= v[size_t(b * K + labels[size_t(b)])] - mx - std::log(z);
            }
            return loss;
        };
        check_grad(logits.grad_vector(), ref::central_diff(f, to_f64(lv), h));
    }
}

TEST_CASE("no-grad scope detaches results") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    NoGradGuard guard;
    Tensor y = sum_of_squares(x);
    CHECK_FALSE(y.requires_grad());
}

TEST_SUITE_END();
