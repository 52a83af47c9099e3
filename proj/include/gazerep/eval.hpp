#pragma once

#include "gazerep/model.hpp"
#include "gazerep/signal.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gazerep {

// ---- linear SVM (one-vs-rest) ----

// Per-class binary objective: min 1/2 ||w||^2 + C sum max(0, 1 - y(w.x+b)),
// solved in the dual with an SMO-style maximal-violating-pair loop.
// Deterministic: ties break on the lowest index.
struct SvmModel {
    std::vector<std::vector<double>> weights; // classes x dim
    std::vector<double> biases;               // classes
    int n_classes = 0;
    int dim = 0;

    int predict(const std::vector<double>& x) const;  // argmax score, ties -> lower class
    double score(const std::vector<double>& x, int cls) const;
};

SvmModel fit_linear_svm(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                        double C, double tol = 1e-4);

// objective of one binary subproblem at the fitted (w,b)
double svm_binary_objective(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                            int positive_class, const std::vector<double>& w, double b, double C);

// ---- PCA ----

struct PcaResult {
    std::vector<std::vector<double>> scores;     // n x k
    std::vector<std::vector<double>> components; // k x d, orthonormal rows
    std::vector<double> explained_variance;      // k, descending
    std::vector<double> mean;                    // d
};

// mean-centered projection onto the top eigenvectors of the covariance;
// uses the Gram-matrix route when d > n
PcaResult pca_fit_transform(const std::vector<std::vector<double>>& X, int n_components);

// symmetric eigendecomposition by cyclic Jacobi sweeps; returns pairs
// sorted by descending eigenvalue, eigenvectors as rows
void jacobi_eigh(std::vector<std::vector<double>> A, std::vector<double>& eigenvalues,
                 std::vector<std::vector<double>>& eigenvectors);

// ---- cross-validation protocol ----

enum class CvScheme { KFold, Loocv, FixedSplit };

struct EvalTask {
    std::string name;
    std::string label_field; // subject_id | stimulus_id | dataset_id
    CvScheme scheme = CvScheme::KFold;
    int k = 5;
    uint64_t seed = 0;
    std::vector<int> fixed_train; // FixedSplit only
    std::vector<int> fixed_test;
};

struct EvalReport {
    std::string task_name;
    std::string representation;
    std::string cv_desc;
    std::vector<std::string> class_names;
    std::vector<double> fold_accuracies;
    std::vector<double> chosen_c; // per fold
    double mean_accuracy = 0.0;
    std::vector<std::vector<int>> confusion; // summed over folds
    std::vector<std::pair<std::string, int>> importance_counts; // optional

    std::string to_text() const;
};

// Stratified fold assignment, deterministic in (seed, sample order). Inner
// C selection on a held-out stratified 20% of each training split over
// C in {0.1, 1, 10}, ties to the smaller C; refit on the full split.
EvalReport cross_validate(const EvalTask& task, const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y, const std::vector<std::string>& class_names);

std::vector<double> c_grid(); // {0.1, 1, 10}

// deterministic stratified fold ids (0..k-1 per sample)
std::vector<int> stratified_folds(const std::vector<int>& y, int k, uint64_t seed);

// ---- feature importance ----

struct FeatureGroup {
    std::string name;
    int begin = 0; // [begin, end)
    int end = 0;
};

// rank columns by max-over-classes |weight|, count the top ceil(0.2*dim)
// per group; groups must partition the columns
std::vector<std::pair<std::string, int>> feature_importance(
    const std::vector<std::vector<double>>& weights, const std::vector<FeatureGroup>& groups);

std::vector<FeatureGroup> zpv_groups(); // pos-micro/pos-macro/vel-micro/vel-macro

// ---- representation extraction ----

struct ReprTable {
    std::vector<std::string> trial_ids;
    std::vector<std::string> subject_ids;
    std::vector<std::string> stimulus_ids;
    std::vector<std::string> dataset_ids;
    std::vector<std::vector<float>> rows;
    int dim = 0;
};

// Encodes full-length signals in eval mode (no destroy, running stats).
// With both models rows are [z_p; z_v]; with one, that model's z.
ReprTable extract_representations(Autoencoder* position_model, Autoencoder* velocity_model,
                                  const std::vector<GazeTrial>& trials);

// flattened raw-signal PCA baseline: per modality, signals equalized to
// max(1000, shortest trial) samples, 128 components each, concatenated
std::vector<std::vector<double>> pca_signal_features(const std::vector<GazeTrial>& trials,
                                                     int n_components = 128);

void write_repr_csv(const std::string& path, const ReprTable& table);
ReprTable read_repr_csv(const std::string& path);

// label vector for a task field; fills class_names with sorted uniques
std::vector<int> labels_for_field(const ReprTable& table, const std::string& field,
                                  std::vector<std::string>& class_names);

} // namespace gazerep
