#include "gazerep/rng.hpp"
#include "gazerep/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace gazerep;

namespace {

GazeTrial make_trial(std::vector<double> xs, std::vector<double> ys, double rate_hz) {
    GazeTrial t;
    t.trial_id = "t0";
    t.rate_hz = rate_hz;
    double dt = 1000.0 / rate_hz;
    for (size_t i = 0; i < xs.size(); ++i) t.timestamps_ms.push_back(double(i) * dt);
    t.x_px = std::move(xs);
    t.y_px = std::move(ys);
    t.meta.subject_id = "s";
    t.meta.stimulus_id = "c";
    t.meta.dataset_id = "d";
    return t;
}

GazeTrial uniform_trial(size_t n, double rate_hz, uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = rng.uniform(0.0, 1280.0);
        ys[i] = rng.uniform(0.0, 1024.0);
    }
    return make_trial(std::move(xs), std::move(ys), rate_hz);
}

} // namespace

TEST_SUITE_BEGIN("signal");

TEST_CASE("zero_blinks replaces negative samples with the origin") {
    GazeTrial t = make_trial({-1, 3}, {-1, 4}, 500);
    GazeTrial z = zero_blinks(t);
    CHECK(z.x_px == std::vector<double>{0, 3});
    CHECK(z.y_px == std::vector<double>{0, 4});

    // either negative coordinate blanks the whole sample
    GazeTrial t2 = make_trial({5, 1}, {-2, 1}, 500);
    GazeTrial z2 = zero_blinks(t2);
    CHECK(z2.x_px[0] == 0.0);
    CHECK(z2.y_px[0] == 0.0);
    CHECK(z2.x_px[1] == 1.0);

    // brute-force scan over sign combinations: zeroed iff any coordinate < 0
    for (double sx : {-1.0, 0.0, 2.0})
        for (double sy : {-3.0, 0.0, 4.0}) {
            GazeTrial probe = make_trial({sx, 1}, {sy, 1}, 500);
            GazeTrial out = zero_blinks(probe);
            bool blink = sx < 0.0 || sy < 0.0;
            CHECK(out.x_px[0] == (blink ? 0.0 : sx));
            CHECK(out.y_px[0] == (blink ? 0.0 : sy));
        }

    GazeTrial clean = uniform_trial(20, 500, 3);
    GazeTrial same = zero_blinks(clean);
    CHECK(same.x_px == clean.x_px);
    CHECK(same.y_px == clean.y_px);
}

TEST_CASE("resample decimates by integer factors") {
    GazeTrial t = make_trial({0, 1, 2, 3}, {10, 11, 12, 13}, 1000);
    GazeTrial half = resample(t, 500);
    CHECK(half.rate_hz == 500);
    CHECK(half.x_px == std::vector<double>{0, 2});
    CHECK(half.y_px == std::vector<double>{10, 12});
    CHECK(half.timestamps_ms == std::vector<double>{0, 2});
}

TEST_CASE("resample rejects non-integer downsampling and short cubic inputs") {
    GazeTrial t = uniform_trial(10, 500, 5);
    CHECK_THROWS_AS(resample(t, 333.0), std::invalid_argument);
    GazeTrial tiny = make_trial({1, 2, 3}, {1, 2, 3}, 240);
    CHECK_THROWS_AS(resample(tiny, 500.0), std::invalid_argument);
}

TEST_CASE("cubic upsampling is exact on a linear ramp") {
    size_t n = 48;
    std::vector<double> xs(n), ys(n);
    double dt = 1000.0 / 240.0;
    for (size_t i = 0; i < n; ++i) {
        xs[i] = double(i) * dt; // x(t) = t
        ys[i] = 7.0;
    }
    GazeTrial t = make_trial(std::move(xs), std::move(ys), 240);
    GazeTrial up = resample(t, 500);
    CHECK(up.rate_hz == 500);
    for (size_t i = 0; i < up.length(); ++i) {
        CHECK(std::abs(up.x_px[i] - up.timestamps_ms[i]) < 1e-9);
        CHECK(std::abs(up.y_px[i] - 7.0) < 1e-9);
    }
}

TEST_CASE("cubic upsampling is exact on cubic polynomials") {
    size_t n = 24;
    std::vector<double> xs(n), ys(n);
    double dt = 1000.0 / 240.0;
    for (size_t i = 0; i < n; ++i) {
        double u = double(i) * dt / 100.0;
        xs[i] = 0.5 * u * u * u - 2.0 * u * u + u + 3.0;
        ys[i] = u * u;
    }
    GazeTrial t = make_trial(std::move(xs), std::move(ys), 240);
    GazeTrial up = resample(t, 500);
    for (size_t i = 0; i < up.length(); ++i) {
        double u = up.timestamps_ms[i] / 100.0;
        CHECK(std::abs(up.x_px[i] - (0.5 * u * u * u - 2.0 * u * u + u + 3.0)) < 1e-9);
        CHECK(std::abs(up.y_px[i] - u * u) < 1e-9);
    }
}

TEST_CASE("240 to 500 Hz upsampling tracks an analytic unit-scale sine") {
    // interpolation error grows as (amplitude * f^4 / rate^4); a couple of
    // pixels at <= 20 Hz sits within the 1e-3 budget
    size_t n = 240;
    for (double freq : {12.0, 20.0}) {
        std::vector<double> xs(n), ys(n);
        for (size_t i = 0; i < n; ++i) {
            double t_s = double(i) / 240.0;
            xs[i] = 100.0 + 2.0 * std::sin(2.0 * 3.141592653589793 * freq * t_s);
            ys[i] = 100.0 + 2.0 * std::cos(2.0 * 3.141592653589793 * freq * t_s);
        }
        GazeTrial t = make_trial(std::move(xs), std::move(ys), 240);
        GazeTrial up = resample(t, 500);
        double worst_interior = 0.0, worst_edge = 0.0;
        for (size_t i = 0; i < up.length(); ++i) {
            double t_s = up.timestamps_ms[i] / 1000.0;
            double err = std::max(
                std::abs(up.x_px[i] -
                         (100.0 + 2.0 * std::sin(2.0 * 3.141592653589793 * freq * t_s))),
                std::abs(up.y_px[i] -
                         (100.0 + 2.0 * std::cos(2.0 * 3.141592653589793 * freq * t_s))));
            // the outermost knot intervals carry the not-a-knot end effects
            if (i >= 5 && i + 5 < up.length()) worst_interior = std::max(worst_interior, err);
            else worst_edge = std::max(worst_edge, err);
        }
        CHECK(worst_interior < 1e-3);
        CHECK(worst_edge < 1e-2);
    }
}

TEST_CASE("normalize clips to the 1280x1024 reference screen") {
    GazeTrial t = make_trial({1500, 0}, {2000, 0}, 500);
    GazeTrial n = normalize_coords(t);
    CHECK(n.x_px[0] == 1280.0);
    CHECK(n.y_px[0] == 1024.0);
    CHECK(n.x_px[1] == 0.0); // top-left input is untouched
    CHECK(n.y_px[1] == 0.0);
}

TEST_CASE("normalize shifts center-origin coordinates") {
    GazeTrial t = make_trial({0, -512}, {0, -384}, 500);
    t.meta.origin = Origin::Center;
    t.meta.screen_wh = {{1024.0, 768.0}};
    GazeTrial n = normalize_coords(t);
    CHECK(n.x_px[0] == 512.0);
    CHECK(n.y_px[0] == 384.0);
    CHECK(n.x_px[1] == 0.0);
    CHECK(n.y_px[1] == 0.0);
    CHECK(n.meta.origin == Origin::TopLeft);

    GazeTrial no_geom = make_trial({0, 1}, {0, 1}, 500);
    no_geom.meta.origin = Origin::Center;
    CHECK_THROWS_AS(normalize_coords(no_geom), std::invalid_argument);
}

TEST_CASE("dva scaling") {
    // 1024 px spanning 28 degrees
    double ppd = 1024.0 / 28.0;
    GazeTrial t = make_trial({1024, 100}, {0, 50}, 500);
    t.meta.px_per_dva = ppd;
    GazeTrial s = scale_to_dva(t);
    double factor = 35.0 * 28.0 / 1024.0;
    CHECK(s.x_px[0] == doctest::Approx(1024.0 * factor));
    CHECK(std::abs(factor - 0.957) < 1e-3);

    GazeTrial unit = make_trial({3, 4}, {5, 6}, 500);
    unit.meta.px_per_dva = 35.0;
    GazeTrial same = scale_to_dva(unit);
    CHECK(same.x_px == unit.x_px);

    GazeTrial absent = make_trial({3, 4}, {5, 6}, 500);
    CHECK(scale_to_dva(absent).x_px == absent.x_px); // left unprocessed

    GazeTrial bad = make_trial({1, 2}, {1, 2}, 500);
    bad.meta.px_per_dva = -1.0;
    CHECK_THROWS_AS(scale_to_dva(bad), std::invalid_argument);
}

TEST_CASE("derive_velocity basics") {
    std::vector<float> channels = {0, 2, 2, /*y:*/ 0, 4, 4};
    auto v = derive_velocity(channels, 3, 500); // dt = 2 ms
    CHECK(v == std::vector<float>{0, 1, 0, 0, 2, 0});

    std::vector<float> constant(10, 3.0f);
    auto vz = derive_velocity(constant, 5, 500);
    for (float f : vz) CHECK(f == 0.0f);
}

TEST_CASE("velocity trial integrates back to positions") {
    GazeTrial t = uniform_trial(300, 500, 13);
    GazeTrial v = derive_velocity_trial(t);
    double dt = 2.0;
    double acc_x = t.x_px[0], acc_y = t.y_px[0];
    for (size_t i = 1; i < t.length(); ++i) {
        acc_x += v.x_px[i] * dt;
        acc_y += v.y_px[i] * dt;
        CHECK(std::abs(acc_x - t.x_px[i]) < 1e-9);
        CHECK(std::abs(acc_y - t.y_px[i]) < 1e-9);
    }
}

TEST_CASE("window slicing counts and padding") {
    auto count = [](size_t n) {
        GazeTrial t = uniform_trial(n, 500, n);
        return window_slices(t).size();
    };
    CHECK(count(1400) == 3);
    CHECK(count(1000) == 1);
    CHECK(count(2000) == 6);

    GazeTrial t = uniform_trial(999, 500, 77);
    auto ws = window_slices(t);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].length == 1000);
    auto sig = trial_signal(t);
    for (int i = 0; i < 999; ++i) {
        CHECK(ws[0].x(i) == sig[size_t(i)]);
        CHECK(ws[0].y(i) == sig[size_t(999 + i)]);
    }
    CHECK(ws[0].x(999) == 0.0f);
    CHECK(ws[0].y(999) == 0.0f);

    GazeTrial t2 = uniform_trial(1400, 500, 78);
    auto ws2 = window_slices(t2);
    CHECK(ws2[0].start_index == 0);
    CHECK(ws2[1].start_index == 200);
    CHECK(ws2[2].start_index == 400);

    GazeTrial empty;
    empty.trial_id = "e";
    empty.rate_hz = 500;
    CHECK_THROWS_AS(window_slices(empty), std::invalid_argument);
}

TEST_CASE("no window exceeds the padded trial") {
    for (size_t n : {size_t(999), size_t(1000), size_t(1001), size_t(1234), size_t(3000)}) {
        GazeTrial t = uniform_trial(n, 500, n * 7);
        auto ws = window_slices(t);
        for (const auto& w : ws) CHECK(w.start_index + 1000 <= std::max<size_t>(n, 1000) + 200);
    }
}

TEST_CASE("pipeline is idempotent on its own output") {
    GazeTrial t = uniform_trial(700, 1000, 21);
    t.x_px[3] = -5; // a blink
    t.y_px[3] = -5;
    t.meta.px_per_dva = 40.0;
    GazeTrial once = preprocess_pipeline(t);
    GazeTrial twice = preprocess_pipeline(once);
    CHECK(once.rate_hz == 500.0);
    REQUIRE(once.length() == twice.length());
    for (size_t i = 0; i < once.length(); ++i) {
        CHECK(once.x_px[i] == doctest::Approx(twice.x_px[i]).epsilon(1e-12));
        CHECK(once.y_px[i] == doctest::Approx(twice.y_px[i]).epsilon(1e-12));
    }
}

TEST_CASE("downsample of a cubic upsample returns the original smooth trace") {
    size_t n = 500;
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        double t_s = double(i) / 500.0;
        xs[i] = 600.0 + 90.0 * std::sin(2.0 * 3.141592653589793 * 3.0 * t_s);
        ys[i] = 500.0 + 70.0 * std::cos(2.0 * 3.141592653589793 * 2.0 * t_s);
    }
    GazeTrial t = make_trial(std::move(xs), std::move(ys), 500);
    GazeTrial up = resample(t, 1000);
    GazeTrial back = resample(up, 500);
    REQUIRE(back.length() == t.length());
    for (size_t i = 0; i < t.length(); ++i) {
        CHECK(std::abs(back.x_px[i] - t.x_px[i]) < 1e-6);
        CHECK(std::abs(back.y_px[i] - t.y_px[i]) < 1e-6);
    }
}

TEST_CASE("trial files round-trip and reject non-monotone timestamps") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gazerep_signal_io";
    fs::remove_all(dir);

    GazeTrial t = uniform_trial(50, 500, 31);
    t.trial_id = "s00_c01_r000";
    t.meta.subject_id = "s00";
    t.meta.stimulus_id = "c01";
    t.meta.dataset_id = "synth";
    t.meta.px_per_dva = 35.0;
    t.meta.screen_wh = {{1280.0, 1024.0}};
    write_trial(t, dir.string());

    GazeTrial r = read_trial((dir / "s00_c01_r000.csv").string());
    CHECK(r.trial_id == t.trial_id);
    CHECK(r.rate_hz == t.rate_hz);
    CHECK(r.meta.subject_id == "s00");
    REQUIRE(r.length() == t.length());
    for (size_t i = 0; i < t.length(); ++i) CHECK(r.x_px[i] == doctest::Approx(t.x_px[i]));

    {
        std::ofstream csv(dir / "bad.csv");
        csv << "t_ms,x_px,y_px\n0,1,1\n2,2,2\n2,3,3\n";
        std::ofstream meta(dir / "bad.meta");
        meta << "rate_hz: 500\nsubject_id: s\nstimulus_id: c\ndataset_id: d\n";
    }
    CHECK_THROWS_AS(read_trial((dir / "bad.csv").string()), std::invalid_argument);

    {
        std::ofstream csv(dir / "odd.csv");
        csv << "t_ms,x_px,y_px\n0,1,1\n2,2,2\n";
        std::ofstream meta(dir / "odd.meta");
        meta << "rate_hz: 500\nsubjct_id: s\n";
    }
    CHECK_THROWS_WITH_AS(read_trial((dir / "odd.csv").string()),
                         doctest::Contains("unknown key"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_SUITE_END();
