#pragma once

#include "gazerep/signal.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gazerep {

struct SubjectProfile {
    std::string subject_id;
    double saccade_peak_vel = 2.0;  // px/ms
    double fixation_jitter_sd = 0.15; // px
    double microsaccade_rate = 1.0; // events/s
    double drift_coeff = 3.0;       // px/sqrt(s)

    void validate() const;
};

struct StimulusClass {
    std::string class_id;
    int n_targets = 6;
    double dispersion = 300.0; // px around screen center
    double revisit_prob = 0.2;

    void validate() const;
};

// deterministic, well-separated profiles for a synthetic cohort
std::vector<SubjectProfile> make_subject_profiles(int n_subjects, uint64_t seed);
std::vector<StimulusClass> make_stimulus_classes(int n_classes, uint64_t seed);

// Alternating fixations (100-400 ms, jitter + drift, occasional
// microsaccades) and saccades between class-specific targets. Saccades use
// a raised-cosine velocity profile whose peak is the subject's
// saccade_peak_vel; displacement over duration D is peak*D/2. Fully
// determined by (profile, stim, seed). Set inject_blinks to overwrite short
// segments with negative coordinates.
GazeTrial generate_trial(const SubjectProfile& profile, const StimulusClass& stim,
                         double duration_s, double rate_hz, uint64_t seed,
                         bool inject_blinks = false);

// Cartesian product subjects x classes x repetitions, labeled via metadata.
std::vector<GazeTrial> generate_dataset(int n_subjects, int n_stimuli_classes, int trials_per_cell,
                                        uint64_t seed, double duration_s = 3.0,
                                        double rate_hz = 500.0, bool inject_blinks = false);

} // namespace gazerep
