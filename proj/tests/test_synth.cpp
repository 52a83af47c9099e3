#include "gazerep/signal.hpp"
#include "gazerep/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

using namespace gazerep;

TEST_SUITE_BEGIN("synth");

TEST_CASE("all noise sources off gives an effectively constant trace") {
    SubjectProfile quiet;
    quiet.subject_id = "s";
    quiet.saccade_peak_vel = 2.0;
    quiet.fixation_jitter_sd = 1e-12;
    quiet.microsaccade_rate = 1e-12;
    quiet.drift_coeff = 1e-12;
    StimulusClass single;
    single.class_id = "c";
    single.n_targets = 1;
    single.dispersion = 100.0;
    single.revisit_prob = 1.0;
    GazeTrial t = generate_trial(quiet, single, 2.0, 500, 7);
    for (size_t i = 1; i < t.length(); ++i) {
        CHECK(std::abs(t.x_px[i] - t.x_px[0]) < 1e-6);
        CHECK(std::abs(t.y_px[i] - t.y_px[0]) < 1e-6);
    }
}

TEST_CASE("same inputs give bit-identical trials") {
    auto profiles = make_subject_profiles(2, 5);
    auto classes = make_stimulus_classes(2, 5);
    GazeTrial a = generate_trial(profiles[1], classes[0], 2.5, 500, 42);
    GazeTrial b = generate_trial(profiles[1], classes[0], 2.5, 500, 42);
    CHECK(a.x_px == b.x_px);
    CHECK(a.y_px == b.y_px);
    CHECK(a.timestamps_ms == b.timestamps_ms);
    GazeTrial c = generate_trial(profiles[1], classes[0], 2.5, 500, 43);
    CHECK(a.x_px != c.x_px);
}

TEST_CASE("generated saccades peak near the profile velocity") {
    auto profiles = make_subject_profiles(3, 11);
    auto classes = make_stimulus_classes(2, 11);
    for (const auto& profile : profiles) {
        double worst_rel = 1.0;
        for (int rep = 0; rep < 4; ++rep) {
            GazeTrial t = generate_trial(profile, classes[0], 4.0, 500, 100 + rep);
            auto sig = trial_signal(t);
            auto vel = derive_velocity(sig, static_cast<int>(t.length()), t.rate_hz);
            double peak = 0.0;
            for (size_t i = 0; i < t.length(); ++i)
                peak = std::max(peak, std::hypot(double(vel[i]),
                                                 double(vel[t.length() + i])));
            worst_rel = std::min(worst_rel, std::abs(peak - profile.saccade_peak_vel) /
                                                profile.saccade_peak_vel);
        }
        CHECK(worst_rel < 0.05);
    }
}

TEST_CASE("dataset has the full label grid") {
    auto data = generate_dataset(2, 2, 3, 1, 2.0);
    CHECK(data.size() == 12);
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& t : data) {
        cells.insert({t.meta.subject_id, t.meta.stimulus_id});
        CHECK(t.meta.dataset_id == "synth");
        CHECK(t.rate_hz == 500.0);
    }
    CHECK(cells.size() == 4);

    auto other = generate_dataset(2, 2, 3, 2, 2.0);
    CHECK(other.size() == 12);
    bool any_diff = false;
    for (size_t i = 0; i < data.size(); ++i) {
        CHECK(other[i].meta.subject_id == data[i].meta.subject_id);
        CHECK(other[i].meta.stimulus_id == data[i].meta.stimulus_id);
        if (other[i].x_px != data[i].x_px) any_diff = true;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(generate_dataset(0, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("generated trials are already normalized") {
    auto data = generate_dataset(2, 2, 2, 9, 2.2);
    for (const auto& t : data) {
        t.validate();
        GazeTrial through = preprocess_pipeline(t);
        REQUIRE(through.length() == t.length());
        for (size_t i = 0; i < t.length(); ++i) {
            CHECK(t.x_px[i] >= 0.0);
            CHECK(t.x_px[i] <= 1280.0);
            CHECK(t.y_px[i] >= 0.0);
            CHECK(t.y_px[i] <= 1024.0);
            CHECK(through.x_px[i] == doctest::Approx(t.x_px[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("blink injection writes negative segments that zero out") {
    auto profiles = make_subject_profiles(1, 3);
    auto classes = make_stimulus_classes(1, 3);
    GazeTrial t = generate_trial(profiles[0], classes[0], 2.0, 500, 5, /*inject_blinks=*/true);
    int negatives = 0;
    for (size_t i = 0; i < t.length(); ++i) negatives += t.x_px[i] < 0.0;
    CHECK(negatives >= 50); // at least one 100 ms blink at 500 Hz
    GazeTrial z = zero_blinks(t);
    for (size_t i = 0; i < z.length(); ++i) CHECK(z.x_px[i] >= 0.0);
}

TEST_CASE("saccade event rate tracks the fixation/saccade cycle") {
    // fixations average 250 ms; hops 20-80 ms. Count velocity runs above a
    // threshold no microsaccade can reach (microsaccades peak at half the
    // profile velocity).
    SubjectProfile p;
    p.subject_id = "s";
    p.saccade_peak_vel = 2.0;
    p.fixation_jitter_sd = 0.05;
    p.microsaccade_rate = 1e-9;
    p.drift_coeff = 0.5;
    StimulusClass c;
    c.class_id = "c";
    c.n_targets = 8;
    c.dispersion = 350.0;
    c.revisit_prob = 0.1;

    double total_events = 0.0;
    double total_expected = 0.0;
    int trials = 32;
    for (int rep = 0; rep < trials; ++rep) {
        GazeTrial t = generate_trial(p, c, 4.0, 500, 1000 + rep);
        auto sig = trial_signal(t);
        auto vel = derive_velocity(sig, static_cast<int>(t.length()), t.rate_hz);
        int events = 0;
        bool inside = false;
        double mean_sacc_ms = 0.0;
        int sacc_samples = 0;
        for (size_t i = 0; i < t.length(); ++i) {
            double speed = std::hypot(double(vel[i]), double(vel[t.length() + i]));
            bool high = speed > 0.5 * p.saccade_peak_vel;
            if (high && !inside) ++events;
            if (high) ++sacc_samples;
            inside = high;
        }
        // measured mean saccade duration feeds the expected cycle length
        mean_sacc_ms = events > 0 ? (double(sacc_samples) * 2.0 / events) : 60.0;
        total_events += events;
        total_expected += 4000.0 / (250.0 + mean_sacc_ms);
    }
    double ratio = total_events / total_expected;
    CHECK(ratio > 0.8);
    CHECK(ratio < 1.2);
}

TEST_CASE("profile and class validation") {
    SubjectProfile bad;
    bad.subject_id = "b";
    bad.saccade_peak_vel = -1.0;
    StimulusClass c;
    c.class_id = "c";
    CHECK_THROWS_AS(generate_trial(bad, c, 2.0, 500, 0), std::invalid_argument);

    auto profiles = make_subject_profiles(1, 1);
    StimulusClass wild;
    wild.class_id = "w";
    wild.dispersion = 1e9;
    CHECK_THROWS_AS(generate_trial(profiles[0], wild, 2.0, 500, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_trial(profiles[0], c, 0.5, 500, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_trial(profiles[0], c, 2.0, 333, 0), std::invalid_argument);
}

TEST_SUITE_END();
