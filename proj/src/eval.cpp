#include "gazerep/eval.hpp"

#include "gazerep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gazerep {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// binary SMO with linear kernel; labels in {-1,+1}
void smo_binary(const std::vector<std::vector<double>>& X, const std::vector<int>& y, double C,
                double tol, std::vector<double>& w, double& b) {
    size_t n = X.size();
    size_t d = X[0].size();
    std::vector<double> alpha(n, 0.0);
    std::vector<double> f(n, 0.0); // w . x_i
    std::vector<double> diag(n);
    for (size_t i = 0; i < n; ++i) diag[i] = dot(X[i], X[i]);
    w.assign(d, 0.0);

    auto in_up = [&](size_t i) { return (y[i] > 0 && alpha[i] < C) || (y[i] < 0 && alpha[i] > 0); };
    auto in_low = [&](size_t i) { return (y[i] < 0 && alpha[i] < C) || (y[i] > 0 && alpha[i] > 0); };

    const size_t max_iter = 200000;
    for (size_t iter = 0; iter < max_iter; ++iter) {
        // maximal violating pair on v_i = y_i - f_i
        double up_best = -1e300, low_best = 1e300;
        size_t i = n, j = n;
        for (size_t p = 0; p < n; ++p) {
            double v = y[p] - f[p];
            if (in_up(p) && v > up_best) {
                up_best = v;
                i = p;
            }
            if (in_low(p) && v < low_best) {
                low_best = v;
                j = p;
            }
        }
        if (i >= n || j >= n || up_best - low_best <= tol) break;

        double quad = diag[i] + diag[j] - 2.0 * dot(X[i], X[j]);
        if (quad < 1e-12) quad = 1e-12;
        // step along alpha_i += y_i t, alpha_j -= y_j t
        double t = (up_best - low_best) / quad;
        double t_hi = 1e300, t_lo = -1e300;
        auto bound = [&](double lo, double hi) {
            t_lo = std::max(t_lo, lo);
            t_hi = std::min(t_hi, hi);
        };
        if (y[i] > 0) bound(-alpha[i], C - alpha[i]);
        else bound(alpha[i] - C, alpha[i]);
        if (y[j] > 0) bound(alpha[j] - C, alpha[j]);
        else bound(-alpha[j], C - alpha[j]);
        t = std::clamp(t, t_lo, t_hi);
        if (t == 0.0) break;

        alpha[i] += y[i] * t;
        alpha[j] -= y[j] * t;
        for (size_t k = 0; k < d; ++k) w[k] += t * (X[i][k] - X[j][k]);
        for (size_t p = 0; p < n; ++p) f[p] += t * (dot(X[i], X[p]) - dot(X[j], X[p]));
    }

    // bias from free support vectors, else from the violation bounds
    double acc = 0.0;
    int free_svs = 0;
    for (size_t p = 0; p < n; ++p)
        if (alpha[p] > 1e-9 && alpha[p] < C - 1e-9) {
            acc += y[p] - f[p];
            ++free_svs;
        }
    if (free_svs > 0) {
        b = acc / free_svs;
    } else {
        double up_best = -1e300, low_best = 1e300;
        for (size_t p = 0; p < n; ++p) {
            double v = y[p] - f[p];
            if (in_up(p)) up_best = std::max(up_best, v);
            if (in_low(p)) low_best = std::min(low_best, v);
        }
        b = (up_best + low_best) / 2.0;
    }
}

} // namespace

int SvmModel::predict(const std::vector<double>& x) const {
    int best = 0;
    double best_score = -1e300;
    for (int c = 0; c < n_classes; ++c) {
        double s = score(x, c);
        if (s > best_score) {
            best_score = s;
            best = c;
        }
    }
    return best;
}

double SvmModel::score(const std::vector<double>& x, int cls) const {
    return dot(weights[static_cast<size_t>(cls)], x) + biases[static_cast<size_t>(cls)];
}

SvmModel fit_linear_svm(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                        double C, double tol) {
    if (X.empty()) throw std::invalid_argument("svm: empty data");
    for (const auto& row : X)
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("svm: non-finite feature value");
    int n_classes = *std::max_element(y.begin(), y.end()) + 1;
    std::set<int> present(y.begin(), y.end());
    if (present.size() < 2) throw std::invalid_argument("svm: single-class input");

    SvmModel model;
    model.n_classes = n_classes;
    model.dim = static_cast<int>(X[0].size());
    model.weights.assign(static_cast<size_t>(n_classes), {});
    model.biases.assign(static_cast<size_t>(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int> yy(y.size());
        for (size_t i = 0; i < y.size(); ++i) yy[i] = y[i] == c ? 1 : -1;
        if (!present.count(c)) {
            // class absent from this training split; score stays lowest
            model.weights[static_cast<size_t>(c)].assign(static_cast<size_t>(model.dim), 0.0);
            model.biases[static_cast<size_t>(c)] = -1e300;
            continue;
        }
        smo_binary(X, yy, C, tol, model.weights[static_cast<size_t>(c)],
                   model.biases[static_cast<size_t>(c)]);
    }
    return model;
}

double svm_binary_objective(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                            int positive_class, const std::vector<double>& w, double b, double C) {
    double obj = 0.5 * dot(w, w);
    for (size_t i = 0; i < X.size(); ++i) {
        double yy = y[i] == positive_class ? 1.0 : -1.0;
        obj += C * std::max(0.0, 1.0 - yy * (dot(w, X[i]) + b));
    }
    return obj;
}

// ---- PCA ----

void jacobi_eigh(std::vector<std::vector<double>> A, std::vector<double>& eigenvalues,
                 std::vector<std::vector<double>>& eigenvectors) {
    size_t n = A.size();
    eigenvectors.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) eigenvectors[i][i] = 1.0;

    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += A[p][q] * A[p][q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(A[p][q]) < 1e-300) continue;
                double theta = (A[q][q] - A[p][p]) / (2.0 * A[p][q]);
                double sign = theta >= 0.0 ? 1.0 : -1.0;
                double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double akp = A[k][p], akq = A[k][q];
                    A[k][p] = c * akp - s * akq;
                    A[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = A[p][k], aqk = A[q][k];
                    A[p][k] = c * apk - s * aqk;
                    A[q][k] = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    double vkp = eigenvectors[p][k], vkq = eigenvectors[q][k];
                    eigenvectors[p][k] = c * vkp - s * vkq;
                    eigenvectors[q][k] = s * vkp + c * vkq;
                }
            }
    }
    eigenvalues.resize(n);
    for (size_t i = 0; i < n; ++i) eigenvalues[i] = A[i][i];

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return eigenvalues[a] > eigenvalues[b]; });
    std::vector<double> ev(n);
    std::vector<std::vector<double>> vecs(n);
    for (size_t i = 0; i < n; ++i) {
        ev[i] = eigenvalues[idx[i]];
        vecs[i] = eigenvectors[idx[i]];
    }
    eigenvalues = std::move(ev);
    eigenvectors = std::move(vecs);
}

namespace {

// deterministic sign: largest-|entry| coordinate made positive
void fix_sign(std::vector<double>& v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    if (v[best] < 0.0)
        for (auto& x : v) x = -x;
}

} // namespace

PcaResult pca_fit_transform(const std::vector<std::vector<double>>& X, int n_components) {
    size_t n = X.size();
    if (n < 2) throw std::invalid_argument("pca: needs at least 2 samples");
    size_t d = X[0].size();
    if (n_components < 1 || static_cast<size_t>(n_components) > std::min(n, d))
        throw std::invalid_argument("pca: n_components " + std::to_string(n_components) +
                                    " exceeds min(n_samples, dim) = " +
                                    std::to_string(std::min(n, d)));
    PcaResult result;
    result.mean.assign(d, 0.0);
    for (const auto& row : X)
        for (size_t j = 0; j < d; ++j) result.mean[j] += row[j];
    for (size_t j = 0; j < d; ++j) result.mean[j] /= static_cast<double>(n);

    std::vector<std::vector<double>> Xc(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) Xc[i][j] = X[i][j] - result.mean[j];

    size_t k = static_cast<size_t>(n_components);
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> eigenvectors;
    if (d <= n) {
        std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
        for (size_t i = 0; i < n; ++i)
            for (size_t a = 0; a < d; ++a)
                for (size_t b2 = a; b2 < d; ++b2) cov[a][b2] += Xc[i][a] * Xc[i][b2];
        for (size_t a = 0; a < d; ++a)
            for (size_t b2 = a; b2 < d; ++b2) {
                cov[a][b2] /= static_cast<double>(n - 1);
                cov[b2][a] = cov[a][b2];
            }
        jacobi_eigh(std::move(cov), eigenvalues, eigenvectors);
        result.components.assign(k, std::vector<double>(d));
        for (size_t c = 0; c < k; ++c) {
            result.components[c] = eigenvectors[c];
            fix_sign(result.components[c]);
        }
    } else {
        // Gram route: eigenvectors of X Xt / (n-1) lift to covariance ones
        std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i; j < n; ++j) {
                gram[i][j] = dot(Xc[i], Xc[j]) / static_cast<double>(n - 1);
                gram[j][i] = gram[i][j];
            }
        jacobi_eigh(std::move(gram), eigenvalues, eigenvectors);
        result.components.assign(k, std::vector<double>(d, 0.0));
        for (size_t c = 0; c < k; ++c) {
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < d; ++j)
                    result.components[c][j] += eigenvectors[c][i] * Xc[i][j];
            double norm = std::sqrt(dot(result.components[c], result.components[c]));
            if (norm > 1e-300)
                for (auto& v : result.components[c]) v /= norm;
            fix_sign(result.components[c]);
        }
    }
    result.explained_variance.assign(eigenvalues.begin(),
                                     eigenvalues.begin() + static_cast<long>(k));
    for (auto& v : result.explained_variance) v = std::max(0.0, v);
    result.scores.assign(n, std::vector<double>(k));
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < k; ++c) result.scores[i][c] = dot(Xc[i], result.components[c]);
    return result;
}

// ---- cross validation ----

std::vector<double> c_grid() { return {0.1, 1.0, 10.0}; }

std::vector<int> stratified_folds(const std::vector<int>& y, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("folds: k must be >= 2");
    int n_classes = *std::max_element(y.begin(), y.end()) + 1;
    std::vector<int> folds(y.size(), -1);
    for (int c = 0; c < n_classes; ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) members.push_back(i);
        CounterRng rng(CounterRng::mix(seed, 0x666f6c64ULL, static_cast<uint64_t>(c)));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
        for (size_t i = 0; i < members.size(); ++i)
            folds[members[i]] = static_cast<int>(i % static_cast<size_t>(k));
    }
    return folds;
}

namespace {

struct Split {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

std::vector<std::vector<double>> gather_rows(const std::vector<std::vector<double>>& X,
                                             const std::vector<size_t>& idx) {
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(X[i]);
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& y, const std::vector<size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(y[i]);
    return out;
}

void check_train_classes(const std::vector<int>& y_train) {
    std::set<int> classes(y_train.begin(), y_train.end());
    if (classes.size() < 2)
        throw std::invalid_argument("cross_validate: a training fold has a single class");
}

// stratified 20% of the training split for the inner C selection
double select_c(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                uint64_t seed) {
    int n_classes = *std::max_element(y.begin(), y.end()) + 1;
    std::vector<size_t> val_idx, fit_idx;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) members.push_back(i);
        if (members.empty()) continue;
        CounterRng rng(CounterRng::mix(seed, 0x696e6e6572ULL, static_cast<uint64_t>(c)));
        for (size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
        size_t n_val = members.size() >= 2
                           ? std::max<size_t>(1, static_cast<size_t>(0.2 * static_cast<double>(members.size())))
                           : 0;
        for (size_t i = 0; i < members.size(); ++i)
            (i < n_val ? val_idx : fit_idx).push_back(members[i]);
    }
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(fit_idx.begin(), fit_idx.end());

    auto X_fit = gather_rows(X, fit_idx);
    auto y_fit = gather_labels(y, fit_idx);
    std::set<int> fit_classes(y_fit.begin(), y_fit.end());
    double best_c = c_grid().front();
    double best_acc = -1.0;
    for (double c : c_grid()) {
        double acc = 0.0;
        if (!val_idx.empty() && fit_classes.size() >= 2) {
            SvmModel m = fit_linear_svm(X_fit, y_fit, c);
            int correct = 0;
            for (size_t i : val_idx)
                if (m.predict(X[i]) == y[i]) ++correct;
            acc = static_cast<double>(correct) / static_cast<double>(val_idx.size());
        }
        if (acc > best_acc + 1e-12) { // ties keep the smaller C
            best_acc = acc;
            best_c = c;
        }
    }
    return best_c;
}

} // namespace

EvalReport cross_validate(const EvalTask& task, const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y,
                          const std::vector<std::string>& class_names) {
    if (X.size() != y.size() || X.empty())
        throw std::invalid_argument("cross_validate: data/label size mismatch");
    int n_classes = *std::max_element(y.begin(), y.end()) + 1;
    if (n_classes < 2) throw std::invalid_argument("cross_validate: needs >= 2 classes");

    std::vector<Split> splits;
    std::string cv_desc;
    if (task.scheme == CvScheme::KFold) {
        auto folds = stratified_folds(y, task.k, task.seed);
        splits.resize(static_cast<size_t>(task.k));
        for (size_t i = 0; i < y.size(); ++i)
            for (int f = 0; f < task.k; ++f)
                (folds[i] == f ? splits[static_cast<size_t>(f)].test
                               : splits[static_cast<size_t>(f)].train)
                    .push_back(i);
        cv_desc = "kfold:" + std::to_string(task.k);
    } else if (task.scheme == CvScheme::Loocv) {
        splits.resize(y.size());
        for (size_t i = 0; i < y.size(); ++i)
            for (size_t j = 0; j < y.size(); ++j)
                (i == j ? splits[i].test : splits[i].train).push_back(j);
        cv_desc = "loocv";
    } else {
        Split s;
        for (int i : task.fixed_train) s.train.push_back(static_cast<size_t>(i));
        for (int i : task.fixed_test) s.test.push_back(static_cast<size_t>(i));
        splits.push_back(std::move(s));
        cv_desc = "fixed";
    }

    EvalReport report;
    report.task_name = task.name;
    report.cv_desc = cv_desc;
    report.class_names = class_names;
    report.confusion.assign(static_cast<size_t>(n_classes),
                            std::vector<int>(static_cast<size_t>(n_classes), 0));
    double acc_sum = 0.0;
    for (size_t f = 0; f < splits.size(); ++f) {
        const Split& split = splits[f];
        if (split.test.empty()) throw std::invalid_argument("cross_validate: empty test fold");
        auto X_train = gather_rows(X, split.train);
        auto y_train = gather_labels(y, split.train);
        check_train_classes(y_train);
        double chosen = select_c(X_train, y_train, CounterRng::mix(task.seed, f));
        SvmModel model = fit_linear_svm(X_train, y_train, chosen);
        int correct = 0;
        for (size_t i : split.test) {
            int pred = model.predict(X[i]);
            report.confusion[static_cast<size_t>(y[i])][static_cast<size_t>(pred)] += 1;
            if (pred == y[i]) ++correct;
        }
        double acc = static_cast<double>(correct) / static_cast<double>(split.test.size());
        report.fold_accuracies.push_back(acc);
        report.chosen_c.push_back(chosen);
        acc_sum += acc;
    }
    report.mean_accuracy = acc_sum / static_cast<double>(splits.size());
    return report;
}

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out << "task: " << task_name << "\n";
    out << "representation: " << representation << "\n";
    out << "cv: " << cv_desc << "\n";
    out << "stratified: true\n";
    out << "fold,accuracy,chosen_C\n";
    char buf[64];
    for (size_t f = 0; f < fold_accuracies.size(); ++f) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g", f, fold_accuracies[f], chosen_c[f]);
        out << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.9g", mean_accuracy);
    out << "mean_accuracy: " << buf << "\n";
    out << "classes:";
    for (const auto& name : class_names) out << " " << name;
    out << "\nconfusion:\n";
    for (const auto& row : confusion) {
        for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
        out << "\n";
    }
    if (!importance_counts.empty()) {
        out << "feature_importance:";
        for (const auto& [name, count] : importance_counts) out << " " << name << "=" << count;
        out << "\n";
    }
    return out.str();
}

// ---- feature importance ----

std::vector<FeatureGroup> zpv_groups() {
    return {{"pos-micro", 0, 64}, {"pos-macro", 64, 128}, {"vel-micro", 128, 192},
            {"vel-macro", 192, 256}};
}

std::vector<std::pair<std::string, int>> feature_importance(
    const std::vector<std::vector<double>>& weights, const std::vector<FeatureGroup>& groups) {
    if (weights.empty()) throw std::invalid_argument("feature_importance: empty weight matrix");
    int dim = static_cast<int>(weights[0].size());
    std::vector<char> covered(static_cast<size_t>(dim), 0);
    for (const auto& g : groups) {
        if (g.begin < 0 || g.end > dim || g.begin >= g.end)
            throw std::invalid_argument("feature_importance: bad group range " + g.name);
        for (int i = g.begin; i < g.end; ++i) {
            if (covered[static_cast<size_t>(i)])
                throw std::invalid_argument("feature_importance: groups overlap at column " +
                                            std::to_string(i));
            covered[static_cast<size_t>(i)] = 1;
        }
    }
    for (int i = 0; i < dim; ++i)
        if (!covered[static_cast<size_t>(i)])
            throw std::invalid_argument("feature_importance: groups do not cover column " +
                                        std::to_string(i));

    std::vector<double> magnitude(static_cast<size_t>(dim), 0.0);
    for (const auto& row : weights)
        for (int j = 0; j < dim; ++j)
            magnitude[static_cast<size_t>(j)] =
                std::max(magnitude[static_cast<size_t>(j)], std::abs(row[static_cast<size_t>(j)]));
    std::vector<int> idx(static_cast<size_t>(dim));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return magnitude[static_cast<size_t>(a)] > magnitude[static_cast<size_t>(b)];
    });
    int top = static_cast<int>(std::ceil(0.2 * dim));

    std::vector<std::pair<std::string, int>> counts;
    for (const auto& g : groups) counts.emplace_back(g.name, 0);
    for (int r = 0; r < top; ++r) {
        int col = idx[static_cast<size_t>(r)];
        for (size_t gi = 0; gi < groups.size(); ++gi)
            if (col >= groups[gi].begin && col < groups[gi].end) {
                counts[gi].second += 1;
                break;
            }
    }
    return counts;
}

// ---- representation extraction ----

ReprTable extract_representations(Autoencoder* position_model, Autoencoder* velocity_model,
                                  const std::vector<GazeTrial>& trials) {
    if (!position_model && !velocity_model)
        throw std::invalid_argument("extract_representations: no model supplied");
    if (position_model && position_model->config().modality != Modality::Position)
        throw std::invalid_argument("extract_representations: position slot holds a velocity model");
    if (velocity_model && velocity_model->config().modality != Modality::Velocity)
        throw std::invalid_argument("extract_representations: velocity slot holds a position model");

    ReprTable table;
    for (const auto& trial : trials) {
        std::vector<float> row;
        int length = static_cast<int>(trial.length());
        if (position_model) {
            Representation rep = position_model->represent(trial_signal(trial), length);
            row.insert(row.end(), rep.z.begin(), rep.z.end());
        }
        if (velocity_model) {
            std::vector<float> vel = derive_velocity(trial_signal(trial), length, trial.rate_hz);
            Representation rep = velocity_model->represent(vel, length);
            row.insert(row.end(), rep.z.begin(), rep.z.end());
        }
        table.dim = static_cast<int>(row.size());
        table.rows.push_back(std::move(row));
        table.trial_ids.push_back(trial.trial_id);
        table.subject_ids.push_back(trial.meta.subject_id);
        table.stimulus_ids.push_back(trial.meta.stimulus_id);
        table.dataset_ids.push_back(trial.meta.dataset_id);
    }
    return table;
}

std::vector<std::vector<double>> pca_signal_features(const std::vector<GazeTrial>& trials,
                                                     int n_components) {
    if (trials.size() < 2) throw std::invalid_argument("pca features: needs >= 2 trials");
    size_t min_len = trials[0].length();
    for (const auto& t : trials) min_len = std::min(min_len, t.length());
    size_t L = std::max<size_t>(1000, min_len);

    auto equalize = [L](const std::vector<float>& sig, size_t len) {
        std::vector<double> row(2 * L, 0.0);
        size_t copy = std::min(L, len);
        for (size_t i = 0; i < copy; ++i) {
            row[i] = sig[i];
            row[L + i] = sig[len + i];
        }
        return row;
    };

    size_t n = trials.size();
    int k = std::min<int>(n_components, static_cast<int>(std::min(n, 2 * L)));
    std::vector<std::vector<double>> pos_rows, vel_rows;
    for (const auto& t : trials) {
        auto sig = trial_signal(t);
        auto vel = derive_velocity(sig, static_cast<int>(t.length()), t.rate_hz);
        pos_rows.push_back(equalize(sig, t.length()));
        vel_rows.push_back(equalize(vel, t.length()));
    }
    PcaResult pos_pca = pca_fit_transform(pos_rows, k);
    PcaResult vel_pca = pca_fit_transform(vel_rows, k);
    std::vector<std::vector<double>> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i] = pos_pca.scores[i];
        out[i].insert(out[i].end(), vel_pca.scores[i].begin(), vel_pca.scores[i].end());
    }
    return out;
}

void write_repr_csv(const std::string& path, const ReprTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "trial_id,subject_id,stimulus_id,dataset_id";
    for (int j = 0; j < table.dim; ++j) out << ",z_" << j;
    out << "\n";
    char buf[40];
    for (size_t i = 0; i < table.rows.size(); ++i) {
        out << table.trial_ids[i] << "," << table.subject_ids[i] << "," << table.stimulus_ids[i]
            << "," << table.dataset_ids[i];
        for (float v : table.rows[i]) {
            std::snprintf(buf, sizeof(buf), "%.9g", double(v));
            out << "," << buf;
        }
        out << "\n";
    }
}

ReprTable read_repr_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    size_t n_cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (n_cols < 5) throw std::runtime_error(path + ": expected id columns plus features");
    ReprTable table;
    table.dim = static_cast<int>(n_cols - 4);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != n_cols) throw std::runtime_error(path + ": ragged row: " + line);
        table.trial_ids.push_back(fields[0]);
        table.subject_ids.push_back(fields[1]);
        table.stimulus_ids.push_back(fields[2]);
        table.dataset_ids.push_back(fields[3]);
        std::vector<float> row(static_cast<size_t>(table.dim));
        for (size_t j = 4; j < n_cols; ++j) row[j - 4] = std::stof(fields[j]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<int> labels_for_field(const ReprTable& table, const std::string& field,
                                  std::vector<std::string>& class_names) {
    const std::vector<std::string>* src = nullptr;
    if (field == "subject" || field == "subject_id") src = &table.subject_ids;
    else if (field == "stimulus" || field == "stimulus_id") src = &table.stimulus_ids;
    else if (field == "dataset" || field == "dataset_id") src = &table.dataset_ids;
    else throw std::invalid_argument("unknown label field: " + field);

    std::set<std::string> uniq(src->begin(), src->end());
    class_names.assign(uniq.begin(), uniq.end());
    std::vector<int> y;
    y.reserve(src->size());
    for (const auto& s : *src)
        y.push_back(static_cast<int>(
            std::distance(class_names.begin(),
                          std::find(class_names.begin(), class_names.end(), s))));
    return y;
}

} // namespace gazerep
