#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace gazerep {

enum class Origin { TopLeft, Center, BottomLeft };
enum class Modality { Position, Velocity };

struct TrialMeta {
    std::string subject_id;
    std::string stimulus_id;
    std::string dataset_id;
    std::optional<double> px_per_dva;
    std::optional<std::array<double, 2>> screen_wh; // pixels
    Origin origin = Origin::TopLeft;
};

// One recorded viewing: timestamped screen positions plus acquisition
// metadata. Coordinates are pixels; timestamps milliseconds, strictly
// increasing.
struct GazeTrial {
    std::string trial_id;
    std::vector<double> timestamps_ms;
    std::vector<double> x_px;
    std::vector<double> y_px;
    double rate_hz = 0.0;
    TrialMeta meta;

    size_t length() const { return timestamps_ms.size(); }
    void validate() const; // throws on broken invariants
};

// Fixed-length 2-channel sample: x-row then y-row, time contiguous.
struct SignalWindow {
    std::vector<float> channels; // 2*T
    int length = 0;
    Modality modality = Modality::Position;
    std::string trial_id;
    size_t start_index = 0;

    float x(int t) const { return channels[static_cast<size_t>(t)]; }
    float y(int t) const { return channels[static_cast<size_t>(length + t)]; }
};

// ---- preprocessing transforms (pure) ----

// Blink samples are marked with negative coordinates; both coordinates of
// such a sample become zero.
GazeTrial zero_blinks(const GazeTrial& trial);

// Integer-factor downsampling keeps indices 0, k, 2k, ...; upsampling
// interpolates x(t), y(t) with a not-a-knot cubic spline onto a uniform
// grid spanning the original time range.
GazeTrial resample(const GazeTrial& trial, double target_hz);

// Express coordinates with a top-left origin (y down), then clip to the
// 1280x1024 reference screen.
GazeTrial normalize_coords(const GazeTrial& trial);

// Rescale so one degree of visual angle spans 35 px; identity when the
// trial carries no px_per_dva estimate.
GazeTrial scale_to_dva(const GazeTrial& trial);

// zero_blinks -> resample(500) -> normalize_coords -> scale_to_dva
GazeTrial preprocess_pipeline(const GazeTrial& trial, double target_hz = 500.0);

// v[t] = (p[t] - p[t-1]) / dt_ms, v[0] = 0; same length as the input
std::vector<float> derive_velocity(const std::vector<float>& channels, int length, double rate_hz);
GazeTrial derive_velocity_trial(const GazeTrial& trial); // convenience, px/ms in x/y

// 2 s windows stepped by 0.4 s (1000/200 samples at 500 Hz). Trials shorter
// than one window yield a single right-zero-padded window.
std::vector<SignalWindow> window_slices(const GazeTrial& trial, double win_s = 2.0,
                                        double stride_s = 0.4);
std::vector<SignalWindow> window_slices_signal(const std::vector<float>& channels, int length,
                                               double rate_hz, Modality modality,
                                               const std::string& trial_id, double win_s = 2.0,
                                               double stride_s = 0.4);

// position channels of a whole trial as a 2xT f32 signal
std::vector<float> trial_signal(const GazeTrial& trial);

// ---- trial files ----
// <stem>.csv holds "t_ms,x_px,y_px" rows; <stem>.meta holds key: value
// lines (rate_hz, subject_id, stimulus_id, dataset_id, px_per_dva,
// screen_w, screen_h, origin).

void write_trial(const GazeTrial& trial, const std::string& dir);
GazeTrial read_trial(const std::string& csv_path); // expects sidecar .meta
std::vector<GazeTrial> read_trial_dir(const std::string& dir);

// not-a-knot cubic spline through (t, y); needs >= 4 knots
class CubicSpline {
public:
    CubicSpline(const std::vector<double>& t, const std::vector<double>& y);
    double operator()(double x) const;

private:
    std::vector<double> t_, y_, second_; // second derivatives at knots
};

} // namespace gazerep
