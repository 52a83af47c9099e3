#include "gazerep/synth.hpp"

#include "gazerep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gazerep {

namespace {

constexpr double kScreenW = 1280.0;
constexpr double kScreenH = 1024.0;
constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0, y = 0.0;
};

double clamp_x(double v) { return std::clamp(v, 0.0, kScreenW); }
double clamp_y(double v) { return std::clamp(v, 0.0, kScreenH); }

// raised-cosine displacement: s(u) = A*(u - sin(2*pi*u)/(2*pi)), u in [0,1];
// velocity peaks at 2A/D halfway through
double raised_cosine_progress(double u) { return u - std::sin(2.0 * kPi * u) / (2.0 * kPi); }

} // namespace

void SubjectProfile::validate() const {
    if (saccade_peak_vel <= 0.0 || fixation_jitter_sd <= 0.0 || microsaccade_rate <= 0.0 ||
        drift_coeff <= 0.0)
        throw std::invalid_argument("subject profile " + subject_id +
                                    ": parameters must be strictly positive");
}

void StimulusClass::validate() const {
    if (n_targets < 1) throw std::invalid_argument("stimulus class " + class_id + ": needs targets");
    if (revisit_prob < 0.0 || revisit_prob > 1.0)
        throw std::invalid_argument("stimulus class " + class_id + ": revisit_prob outside [0,1]");
    double diag = std::sqrt(kScreenW * kScreenW + kScreenH * kScreenH);
    if (dispersion <= 0.0 || dispersion > diag)
        throw std::invalid_argument("stimulus class " + class_id + ": dispersion outside (0, diag]");
}

std::vector<SubjectProfile> make_subject_profiles(int n_subjects, uint64_t seed) {
    if (n_subjects < 1) throw std::invalid_argument("make_subject_profiles: need >= 1 subject");
    std::vector<SubjectProfile> out;
    out.reserve(static_cast<size_t>(n_subjects));
    CounterRng rng(CounterRng::mix(seed, 0x737562ULL));
    for (int i = 0; i < n_subjects; ++i) {
        SubjectProfile p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%02d", i);
        p.subject_id = buf;
        // spacing in peak velocity is large against within-subject spread so a
        // linear probe on velocity statistics can tell the cohort apart
        p.saccade_peak_vel = 1.2 + 0.45 * i + rng.uniform(-0.02, 0.02);
        p.fixation_jitter_sd = 0.10 + 0.015 * (i % 5) + rng.uniform(0.0, 0.005);
        p.microsaccade_rate = 0.6 + 0.5 * ((i * 7) % 4) + rng.uniform(0.0, 0.05);
        p.drift_coeff = 2.0 + 0.8 * ((i * 3) % 5) + rng.uniform(0.0, 0.1);
        p.validate();
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<StimulusClass> make_stimulus_classes(int n_classes, uint64_t seed) {
    if (n_classes < 1) throw std::invalid_argument("make_stimulus_classes: need >= 1 class");
    std::vector<StimulusClass> out;
    out.reserve(static_cast<size_t>(n_classes));
    CounterRng rng(CounterRng::mix(seed, 0x636c73ULL));
    for (int i = 0; i < n_classes; ++i) {
        StimulusClass c;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%02d", i);
        c.class_id = buf;
        c.n_targets = 4 + (i % 5) * 2;
        c.dispersion = 220.0 + 90.0 * (i % 4) + rng.uniform(0.0, 10.0);
        c.revisit_prob = 0.1 + 0.15 * (i % 3);
        c.validate();
        out.push_back(std::move(c));
    }
    return out;
}

GazeTrial generate_trial(const SubjectProfile& profile, const StimulusClass& stim,
                         double duration_s, double rate_hz, uint64_t seed, bool inject_blinks) {
    profile.validate();
    stim.validate();
    if (duration_s < 1.0) throw std::invalid_argument("generate_trial: duration must be >= 1 s");
    if (rate_hz != 250.0 && rate_hz != 500.0 && rate_hz != 1000.0)
        throw std::invalid_argument("generate_trial: rate must be 250, 500 or 1000 Hz");

    // target layout is a property of the stimulus class, not of the trial
    uint64_t class_key = 0;
    for (char ch : stim.class_id) class_key = class_key * 131 + static_cast<unsigned char>(ch);
    CounterRng layout(CounterRng::mix(0x7461726765747380ULL, class_key));
    std::vector<Vec2> targets(static_cast<size_t>(stim.n_targets));
    for (auto& t : targets) {
        t.x = clamp_x(kScreenW / 2.0 + layout.uniform(-stim.dispersion, stim.dispersion));
        t.y = clamp_y(kScreenH / 2.0 + layout.uniform(-stim.dispersion, stim.dispersion));
    }

    CounterRng rng(CounterRng::mix(seed, class_key, 0x747269616cULL));
    double dt_ms = 1000.0 / rate_hz;
    size_t n = static_cast<size_t>(std::lround(duration_s * rate_hz));

    GazeTrial trial;
    trial.rate_hz = rate_hz;
    trial.meta.subject_id = profile.subject_id;
    trial.meta.stimulus_id = stim.class_id;
    trial.meta.dataset_id = "synth";
    trial.meta.px_per_dva = 35.0;
    trial.meta.screen_wh = {{kScreenW, kScreenH}};
    trial.timestamps_ms.reserve(n);
    trial.x_px.reserve(n);
    trial.y_px.reserve(n);

    int target_idx = rng.uniform_int(stim.n_targets);
    Vec2 eye = targets[static_cast<size_t>(target_idx)];
    double t_ms = 0.0;
    size_t emitted = 0;

    auto emit = [&](double x, double y) {
        trial.timestamps_ms.push_back(t_ms);
        trial.x_px.push_back(clamp_x(x));
        trial.y_px.push_back(clamp_y(y));
        t_ms += dt_ms;
        ++emitted;
    };

    // One ballistic hop toward `to`, amplitude capped so the raised-cosine
    // peak never exceeds peak_vel within the 80 ms duration budget; distant
    // targets are reached over several fixation-saccade cycles.
    auto run_saccade = [&](Vec2 to, double peak_vel) {
        double dx = to.x - eye.x, dy = to.y - eye.y;
        double dist = std::hypot(dx, dy);
        if (dist < 1e-9) return;
        double amp = std::min(dist, 0.95 * peak_vel * 80.0 / 2.0);
        double dur_ms = std::clamp(2.0 * amp / peak_vel, 20.0, 80.0);
        Vec2 from = eye;
        size_t steps = static_cast<size_t>(std::ceil(dur_ms / dt_ms));
        for (size_t s = 1; s <= steps && emitted < n; ++s) {
            double u = std::min(1.0, (static_cast<double>(s) * dt_ms) / dur_ms);
            double prog = raised_cosine_progress(u);
            emit(from.x + dx / dist * amp * prog, from.y + dy / dist * amp * prog);
        }
        eye = {from.x + dx / dist * amp, from.y + dy / dist * amp};
    };

    emit(eye.x, eye.y);
    while (emitted < n) {
        // fixation
        double fix_ms = rng.uniform(100.0, 400.0);
        size_t fix_steps = static_cast<size_t>(std::lround(fix_ms / dt_ms));
        double drift_angle = rng.uniform(0.0, 2.0 * kPi);
        Vec2 anchor = eye;
        double ms_prob = profile.microsaccade_rate / rate_hz;
        for (size_t s = 1; s <= fix_steps && emitted < n; ++s) {
            if (rng.uniform() < ms_prob) {
                // small corrective hop (< 1 dva), never at full peak velocity
                double amp = rng.uniform(5.0, 30.0);
                double ang = rng.uniform(0.0, 2.0 * kPi);
                Vec2 to{anchor.x + amp * std::cos(ang), anchor.y + amp * std::sin(ang)};
                eye = anchor;
                run_saccade(to, profile.saccade_peak_vel * 0.5);
                anchor = eye;
                continue;
            }
            double el_s = static_cast<double>(s) * dt_ms / 1000.0;
            double drift = profile.drift_coeff * std::sqrt(el_s);
            double jx = rng.gaussian() * profile.fixation_jitter_sd;
            double jy = rng.gaussian() * profile.fixation_jitter_sd;
            emit(anchor.x + drift * std::cos(drift_angle) + jx,
                 anchor.y + drift * std::sin(drift_angle) + jy);
        }
        eye = {anchor.x + profile.drift_coeff * std::sqrt(fix_ms / 1000.0) * std::cos(drift_angle),
               anchor.y + profile.drift_coeff * std::sqrt(fix_ms / 1000.0) * std::sin(drift_angle)};
        if (emitted >= n) break;

        // continue toward an unreached target, otherwise pick the next one
        Vec2 goal = targets[static_cast<size_t>(target_idx)];
        if (std::hypot(goal.x - eye.x, goal.y - eye.y) < 2.0) {
            int next = target_idx;
            if (stim.n_targets > 1 && rng.uniform() >= stim.revisit_prob) {
                next = rng.uniform_int(stim.n_targets - 1);
                if (next >= target_idx) ++next;
            }
            target_idx = next;
            goal = targets[static_cast<size_t>(target_idx)];
        }
        run_saccade(goal, profile.saccade_peak_vel);
    }

    if (inject_blinks) {
        size_t blink_len = static_cast<size_t>(std::lround(100.0 / dt_ms));
        size_t n_blinks = 1 + static_cast<size_t>(rng.uniform_int(2));
        for (size_t b = 0; b < n_blinks; ++b) {
            size_t start = static_cast<size_t>(rng.uniform_int(static_cast<int>(n - blink_len)));
            for (size_t i = start; i < start + blink_len; ++i) {
                trial.x_px[i] = -1.0;
                trial.y_px[i] = -1.0;
            }
        }
    }

    trial.validate();
    return trial;
}

std::vector<GazeTrial> generate_dataset(int n_subjects, int n_stimuli_classes, int trials_per_cell,
                                        uint64_t seed, double duration_s, double rate_hz,
                                        bool inject_blinks) {
    if (n_subjects < 1 || n_stimuli_classes < 1 || trials_per_cell < 1)
        throw std::invalid_argument("generate_dataset: all counts must be >= 1");
    auto profiles = make_subject_profiles(n_subjects, seed);
    auto classes = make_stimulus_classes(n_stimuli_classes, seed);
    std::vector<GazeTrial> out;
    out.reserve(static_cast<size_t>(n_subjects) * n_stimuli_classes * trials_per_cell);
    for (int s = 0; s < n_subjects; ++s)
        for (int c = 0; c < n_stimuli_classes; ++c)
            for (int r = 0; r < trials_per_cell; ++r) {
                uint64_t trial_seed = CounterRng::mix(seed, static_cast<uint64_t>(s) * 10007 +
                                                                static_cast<uint64_t>(c) * 101 +
                                                                static_cast<uint64_t>(r));
                GazeTrial t = generate_trial(profiles[static_cast<size_t>(s)],
                                             classes[static_cast<size_t>(c)], duration_s, rate_hz,
                                             trial_seed, inject_blinks);
                char buf[48];
                std::snprintf(buf, sizeof(buf), "%s_%s_r%03d",
                              profiles[static_cast<size_t>(s)].subject_id.c_str(),
                              classes[static_cast<size_t>(c)].class_id.c_str(), r);
                t.trial_id = buf;
                out.push_back(std::move(t));
            }
    return out;
}

} // namespace gazerep
