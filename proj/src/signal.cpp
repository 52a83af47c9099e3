#include "gazerep/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace gazerep {

namespace {

constexpr double kScreenMaxX = 1280.0;
constexpr double kScreenMaxY = 1024.0;
constexpr double kPxPerDva = 35.0;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

void GazeTrial::validate() const {
    if (timestamps_ms.size() < 2)
        throw std::invalid_argument("trial " + trial_id + ": needs at least 2 samples");
    if (timestamps_ms.size() != x_px.size() || timestamps_ms.size() != y_px.size())
        throw std::invalid_argument("trial " + trial_id + ": channel lengths differ");
    for (size_t i = 1; i < timestamps_ms.size(); ++i)
        if (timestamps_ms[i] <= timestamps_ms[i - 1])
            throw std::invalid_argument("trial " + trial_id + ": timestamps not strictly increasing at index " +
                                        std::to_string(i));
    if (rate_hz <= 0.0) throw std::invalid_argument("trial " + trial_id + ": rate_hz must be positive");
}

GazeTrial zero_blinks(const GazeTrial& trial) {
    GazeTrial out = trial;
    for (size_t i = 0; i < out.length(); ++i)
        if (out.x_px[i] < 0.0 || out.y_px[i] < 0.0) {
            out.x_px[i] = 0.0;
            out.y_px[i] = 0.0;
        }
    return out;
}

CubicSpline::CubicSpline(const std::vector<double>& t, const std::vector<double>& y)
    : t_(t), y_(y) {
    size_t n = t.size();
    if (n < 4) throw std::invalid_argument("cubic spline: needs at least 4 knots");
    if (y.size() != n) throw std::invalid_argument("cubic spline: t/y length mismatch");
    std::vector<double> h(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = t[i + 1] - t[i];
        if (h[i] <= 0.0) throw std::invalid_argument("cubic spline: knots must increase");
    }
    // interior continuity rows for the second derivatives sigma_1..sigma_{n-2},
    // with not-a-knot conditions eliminated into the first and last rows:
    //   sigma_0 = sigma_1 + (h0/h1)(sigma_1 - sigma_2)
    //   sigma_{n-1} = sigma_{n-2} + (h_{n-2}/h_{n-3})(sigma_{n-2} - sigma_{n-3})
    size_t m = n - 2;
    std::vector<double> a(m, 0.0), b(m, 0.0), c(m, 0.0), d(m, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        size_t r = i - 1;
        a[r] = h[i - 1];
        b[r] = 2.0 * (h[i - 1] + h[i]);
        c[r] = h[i];
        d[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    // fold sigma_0 into row 0 and sigma_{n-1} into row m-1
    b[0] += a[0] * (1.0 + h[0] / h[1]);
    c[0] -= a[0] * (h[0] / h[1]);
    a[0] = 0.0;
    b[m - 1] += c[m - 1] * (1.0 + h[n - 2] / h[n - 3]);
    a[m - 1] -= c[m - 1] * (h[n - 2] / h[n - 3]);
    c[m - 1] = 0.0;
    // Thomas solve
    for (size_t i = 1; i < m; ++i) {
        double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    std::vector<double> sigma(n, 0.0);
    sigma[m] = d[m - 1] / b[m - 1];
    for (size_t i = m - 1; i >= 1; --i) sigma[i] = (d[i - 1] - c[i - 1] * sigma[i + 1]) / b[i - 1];
    sigma[0] = sigma[1] + (h[0] / h[1]) * (sigma[1] - sigma[2]);
    sigma[n - 1] = sigma[n - 2] + (h[n - 2] / h[n - 3]) * (sigma[n - 2] - sigma[n - 3]);
    second_ = std::move(sigma);
}

double CubicSpline::operator()(double x) const {
    size_t n = t_.size();
    size_t hi = static_cast<size_t>(std::upper_bound(t_.begin(), t_.end(), x) - t_.begin());
    if (hi == 0) hi = 1;
    if (hi >= n) hi = n - 1;
    size_t lo = hi - 1;
    double h = t_[hi] - t_[lo];
    double u = x - t_[lo];
    double v = t_[hi] - x;
    return (second_[lo] * v * v * v + second_[hi] * u * u * u) / (6.0 * h) +
           (y_[lo] / h - second_[lo] * h / 6.0) * v + (y_[hi] / h - second_[hi] * h / 6.0) * u;
}

GazeTrial resample(const GazeTrial& trial, double target_hz) {
    if (target_hz <= 0.0) throw std::invalid_argument("resample: target rate must be positive");
    trial.validate();
    if (std::abs(trial.rate_hz - target_hz) < 1e-9) return trial;

    GazeTrial out;
    out.trial_id = trial.trial_id;
    out.meta = trial.meta;
    out.rate_hz = target_hz;

    if (trial.rate_hz > target_hz) {
        double ratio = trial.rate_hz / target_hz;
        int k = static_cast<int>(std::lround(ratio));
        if (std::abs(ratio - k) > 1e-9)
            throw std::invalid_argument("resample: downsampling " + format_double(trial.rate_hz) +
                                        " -> " + format_double(target_hz) +
                                        " is not an integer factor");
        for (size_t i = 0; i < trial.length(); i += static_cast<size_t>(k)) {
            out.timestamps_ms.push_back(trial.timestamps_ms[i]);
            out.x_px.push_back(trial.x_px[i]);
            out.y_px.push_back(trial.y_px[i]);
        }
        return out;
    }

    if (trial.length() < 4)
        throw std::invalid_argument("resample: cubic upsampling needs at least 4 samples");
    CubicSpline sx(trial.timestamps_ms, trial.x_px);
    CubicSpline sy(trial.timestamps_ms, trial.y_px);
    double t0 = trial.timestamps_ms.front();
    double t1 = trial.timestamps_ms.back();
    double dt = 1000.0 / target_hz;
    size_t count = static_cast<size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
    out.timestamps_ms.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        double t = t0 + static_cast<double>(i) * dt;
        out.timestamps_ms.push_back(t);
        out.x_px.push_back(sx(t));
        out.y_px.push_back(sy(t));
    }
    return out;
}

GazeTrial normalize_coords(const GazeTrial& trial) {
    GazeTrial out = trial;
    if (trial.meta.origin != Origin::TopLeft) {
        if (!trial.meta.screen_wh)
            throw std::invalid_argument("normalize_coords: trial " + trial.trial_id +
                                        " needs screen geometry to shift the origin");
        double w = (*trial.meta.screen_wh)[0];
        double h = (*trial.meta.screen_wh)[1];
        for (size_t i = 0; i < out.length(); ++i) {
            if (trial.meta.origin == Origin::Center) {
                out.x_px[i] = trial.x_px[i] + w / 2.0;
                out.y_px[i] = trial.y_px[i] + h / 2.0;
            } else { // bottom-left: flip y
                out.y_px[i] = h - trial.y_px[i];
            }
        }
        out.meta.origin = Origin::TopLeft;
    }
    for (size_t i = 0; i < out.length(); ++i) {
        out.x_px[i] = std::clamp(out.x_px[i], 0.0, kScreenMaxX);
        out.y_px[i] = std::clamp(out.y_px[i], 0.0, kScreenMaxY);
    }
    return out;
}

GazeTrial scale_to_dva(const GazeTrial& trial) {
    if (!trial.meta.px_per_dva) return trial;
    double ppd = *trial.meta.px_per_dva;
    if (ppd <= 0.0)
        throw std::invalid_argument("scale_to_dva: px_per_dva must be positive, got " +
                                    format_double(ppd));
    double factor = kPxPerDva / ppd;
    GazeTrial out = trial;
    for (size_t i = 0; i < out.length(); ++i) {
        out.x_px[i] = trial.x_px[i] * factor;
        out.y_px[i] = trial.y_px[i] * factor;
    }
    out.meta.px_per_dva = kPxPerDva; // now in 35 px/dva units; rescaling is a no-op
    return out;
}

GazeTrial preprocess_pipeline(const GazeTrial& trial, double target_hz) {
    return scale_to_dva(normalize_coords(resample(zero_blinks(trial), target_hz)));
}

std::vector<float> derive_velocity(const std::vector<float>& channels, int length, double rate_hz) {
    if (length < 2) throw std::invalid_argument("derive_velocity: needs at least 2 samples");
    if (rate_hz <= 0.0) throw std::invalid_argument("derive_velocity: rate must be positive");
    if (static_cast<int>(channels.size()) != 2 * length)
        throw std::invalid_argument("derive_velocity: channel buffer is not 2xT");
    double dt_ms = 1000.0 / rate_hz;
    std::vector<float> out(channels.size(), 0.0f);
    for (int ch = 0; ch < 2; ++ch) {
        const float* src = channels.data() + static_cast<size_t>(ch) * length;
        float* dst = out.data() + static_cast<size_t>(ch) * length;
        dst[0] = 0.0f;
        for (int t = 1; t < length; ++t)
            dst[t] = static_cast<float>((double(src[t]) - double(src[t - 1])) / dt_ms);
    }
    return out;
}

GazeTrial derive_velocity_trial(const GazeTrial& trial) {
    trial.validate();
    GazeTrial out = trial;
    double dt_ms = 1000.0 / trial.rate_hz;
    out.x_px[0] = 0.0;
    out.y_px[0] = 0.0;
    for (size_t i = trial.length() - 1; i >= 1; --i) {
        out.x_px[i] = (trial.x_px[i] - trial.x_px[i - 1]) / dt_ms;
        out.y_px[i] = (trial.y_px[i] - trial.y_px[i - 1]) / dt_ms;
    }
    return out;
}

std::vector<SignalWindow> window_slices_signal(const std::vector<float>& channels, int length,
                                               double rate_hz, Modality modality,
                                               const std::string& trial_id, double win_s,
                                               double stride_s) {
    if (length <= 0) throw std::invalid_argument("window_slices: empty trial " + trial_id);
    int win = static_cast<int>(std::lround(win_s * rate_hz));
    int stride = static_cast<int>(std::lround(stride_s * rate_hz));
    if (win <= 0 || stride <= 0) throw std::invalid_argument("window_slices: bad window/stride");

    std::vector<SignalWindow> out;
    auto make_window = [&](int start) {
        SignalWindow w;
        w.length = win;
        w.modality = modality;
        w.trial_id = trial_id;
        w.start_index = static_cast<size_t>(start);
        w.channels.assign(static_cast<size_t>(2 * win), 0.0f);
        int copy = std::min(win, length - start);
        for (int ch = 0; ch < 2; ++ch)
            std::copy_n(channels.data() + static_cast<size_t>(ch) * length + start, copy,
                        w.channels.data() + static_cast<size_t>(ch) * win);
        return w;
    };

    if (length < win) {
        out.push_back(make_window(0)); // right-zero-padded
        return out;
    }
    for (int start = 0; start + win <= length; start += stride) out.push_back(make_window(start));
    return out;
}

std::vector<float> trial_signal(const GazeTrial& trial) {
    size_t n = trial.length();
    std::vector<float> sig(2 * n);
    for (size_t i = 0; i < n; ++i) {
        sig[i] = static_cast<float>(trial.x_px[i]);
        sig[n + i] = static_cast<float>(trial.y_px[i]);
    }
    return sig;
}

std::vector<SignalWindow> window_slices(const GazeTrial& trial, double win_s, double stride_s) {
    return window_slices_signal(trial_signal(trial), static_cast<int>(trial.length()),
                                trial.rate_hz, Modality::Position, trial.trial_id, win_s, stride_s);
}

// ---- trial files ----

void write_trial(const GazeTrial& trial, const std::string& dir) {
    fs::create_directories(dir);
    fs::path csv = fs::path(dir) / (trial.trial_id + ".csv");
    std::ofstream out(csv);
    if (!out) throw std::runtime_error("cannot write " + csv.string());
    out << "t_ms,x_px,y_px\n";
    for (size_t i = 0; i < trial.length(); ++i)
        out << format_double(trial.timestamps_ms[i]) << "," << format_double(trial.x_px[i]) << ","
            << format_double(trial.y_px[i]) << "\n";

    fs::path meta = fs::path(dir) / (trial.trial_id + ".meta");
    std::ofstream m(meta);
    if (!m) throw std::runtime_error("cannot write " + meta.string());
    m << "rate_hz: " << format_double(trial.rate_hz) << "\n";
    m << "subject_id: " << trial.meta.subject_id << "\n";
    m << "stimulus_id: " << trial.meta.stimulus_id << "\n";
    m << "dataset_id: " << trial.meta.dataset_id << "\n";
    if (trial.meta.px_per_dva) m << "px_per_dva: " << format_double(*trial.meta.px_per_dva) << "\n";
    if (trial.meta.screen_wh) {
        m << "screen_w: " << format_double((*trial.meta.screen_wh)[0]) << "\n";
        m << "screen_h: " << format_double((*trial.meta.screen_wh)[1]) << "\n";
    }
    if (trial.meta.origin != Origin::TopLeft)
        m << "origin: " << (trial.meta.origin == Origin::Center ? "center" : "bottom-left") << "\n";
}

namespace {

std::pair<std::string, std::string> split_kv(const std::string& line) {
    auto pos = line.find(':');
    if (pos == std::string::npos) throw std::runtime_error("malformed key:value line: " + line);
    std::string key = line.substr(0, pos);
    std::string val = line.substr(pos + 1);
    auto trim = [](std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(val);
    return {key, val};
}

} // namespace

GazeTrial read_trial(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    GazeTrial trial;
    trial.trial_id = fs::path(csv_path).stem().string();
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(csv_path + ": empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t, x, y;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &y) != 3)
            throw std::runtime_error(csv_path + ": malformed row: " + line);
        trial.timestamps_ms.push_back(t);
        trial.x_px.push_back(x);
        trial.y_px.push_back(y);
    }

    fs::path meta_path = fs::path(csv_path).replace_extension(".meta");
    std::ifstream m(meta_path);
    if (!m) throw std::runtime_error("missing sidecar manifest " + meta_path.string());
    double screen_w = 0.0, screen_h = 0.0;
    bool have_w = false, have_h = false;
    while (std::getline(m, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto [key, val] = split_kv(line);
        if (key == "rate_hz") trial.rate_hz = std::stod(val);
        else if (key == "subject_id") trial.meta.subject_id = val;
        else if (key == "stimulus_id") trial.meta.stimulus_id = val;
        else if (key == "dataset_id") trial.meta.dataset_id = val;
        else if (key == "px_per_dva") trial.meta.px_per_dva = std::stod(val);
        else if (key == "screen_w") { screen_w = std::stod(val); have_w = true; }
        else if (key == "screen_h") { screen_h = std::stod(val); have_h = true; }
        else if (key == "origin") {
            if (val == "top-left") trial.meta.origin = Origin::TopLeft;
            else if (val == "center") trial.meta.origin = Origin::Center;
            else if (val == "bottom-left") trial.meta.origin = Origin::BottomLeft;
            else throw std::runtime_error(meta_path.string() + ": unknown origin " + val);
        } else {
            throw std::runtime_error(meta_path.string() + ": unknown key " + key);
        }
    }
    if (have_w && have_h) trial.meta.screen_wh = {{screen_w, screen_h}};
    trial.validate(); // rejects non-monotone timestamps
    return trial;
}

std::vector<GazeTrial> read_trial_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<GazeTrial> trials;
    trials.reserve(paths.size());
    for (const auto& p : paths) trials.push_back(read_trial(p));
    return trials;
}

} // namespace gazerep
