#include "gazerep/cli.hpp"
#include "gazerep/eval.hpp"
#include "gazerep/model.hpp"
#include "gazerep/signal.hpp"
#include "gazerep/synth.hpp"
#include "gazerep/train.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace gazerep;

namespace {

Modality modality_from_string(const std::string& s) {
    if (s == "pos" || s == "position") return Modality::Position;
    if (s == "vel" || s == "velocity") return Modality::Velocity;
    throw std::invalid_argument("unknown modality: " + s);
}

ModelConfig make_config(const std::string& modality, int enc_filters, int z_dim) {
    if (enc_filters <= 0)
        return modality_from_string(modality) == Modality::Position ? ModelConfig::position()
                                                                    : ModelConfig::velocity();
    return ModelConfig::reduced(modality_from_string(modality), enc_filters, z_dim);
}

} // namespace

PYBIND11_MODULE(_gazerep, m) {
    m.doc() = "micro-macro temporal-convolutional autoencoder for eye-movement signals";

    py::class_<GazeTrial>(m, "GazeTrial")
        .def_readonly("trial_id", &GazeTrial::trial_id)
        .def_readonly("timestamps_ms", &GazeTrial::timestamps_ms)
        .def_readonly("x_px", &GazeTrial::x_px)
        .def_readonly("y_px", &GazeTrial::y_px)
        .def_readonly("rate_hz", &GazeTrial::rate_hz)
        .def_property_readonly("subject_id",
                               [](const GazeTrial& t) { return t.meta.subject_id; })
        .def_property_readonly("stimulus_id",
                               [](const GazeTrial& t) { return t.meta.stimulus_id; })
        .def("__len__", [](const GazeTrial& t) { return t.length(); });

    m.def("generate_dataset", &generate_dataset, py::arg("n_subjects"), py::arg("n_classes"),
          py::arg("trials_per_cell"), py::arg("seed"), py::arg("duration_s") = 3.0,
          py::arg("rate_hz") = 500.0, py::arg("inject_blinks") = false);
    m.def("write_trial", &write_trial, py::arg("trial"), py::arg("dir"));
    m.def("read_trial", &read_trial, py::arg("csv_path"));

    m.def("zero_blinks", &zero_blinks);
    m.def("resample", &resample, py::arg("trial"), py::arg("target_hz"));
    m.def("normalize_coords", &normalize_coords);
    m.def("scale_to_dva", &scale_to_dva);
    m.def("preprocess", &preprocess_pipeline, py::arg("trial"), py::arg("target_hz") = 500.0);
    m.def("derive_velocity",
          [](const std::vector<float>& channels, int length, double rate_hz) {
              return derive_velocity(channels, length, rate_hz);
          });
    m.def("window_count", [](const GazeTrial& trial) {
        return window_slices(trial).size();
    });

    m.def("receptive_fields", [](int layers) {
        ModelConfig cfg = ModelConfig::position();
        std::vector<int> out;
        for (int l = 1; l <= layers; ++l) out.push_back(receptive_field(cfg.dilations, l));
        return out;
    }, py::arg("layers") = 8);

    m.def("audit", [](const std::string& modality) {
        ModelConfig cfg = modality_from_string(modality) == Modality::Position
                              ? ModelConfig::position()
                              : ModelConfig::velocity();
        AuditReport report = audit_config(cfg);
        py::dict out;
        for (const auto& row : report.rows) out[py::str(row.component)] = row.count;
        out["total"] = report.total;
        out["receptive_fields"] = report.receptive_fields;
        return out;
    }, py::arg("modality"));

    m.def("train_autoencoder",
          [](const std::string& data_dir, const std::string& modality, int enc_filters, int z_dim,
             int epochs, int batch_size, uint64_t seed, const std::string& out_ckpt) {
              RunConfig cfg;
              cfg.modality = modality_from_string(modality);
              cfg.model = make_config(modality, enc_filters, z_dim);
              cfg.model_customized = enc_filters > 0;
              if (!cfg.model_customized) cfg.apply_modality_defaults();
              cfg.data_dir = data_dir;
              cfg.train.epochs = epochs;
              cfg.train.batch_size = batch_size;
              cfg.train.seed = seed;
              auto lines = cmd_train(cfg, out_ckpt);
              std::vector<double> losses;
              for (const auto& line : lines)
                  losses.push_back(std::stod(line.substr(line.find(',') + 1)));
              return losses;
          },
          py::arg("data_dir"), py::arg("modality"), py::arg("enc_filters") = 0,
          py::arg("z_dim") = 64, py::arg("epochs") = 5, py::arg("batch_size") = 16,
          py::arg("seed") = 0, py::arg("out_ckpt") = std::string("model.ckpt"));

    m.def("encode_trials",
          [](const std::string& ckpt_pos, const std::string& ckpt_vel, const std::string& in_dir,
             const std::string& out_csv) {
              cmd_encode(ckpt_pos, ckpt_vel, in_dir, out_csv);
          },
          py::arg("ckpt_pos") = std::string(), py::arg("ckpt_vel") = std::string(),
          py::arg("in_dir"), py::arg("out_csv"));

    m.def("encode_signal",
          [](const std::string& ckpt, const std::vector<float>& channels, int length) {
              Autoencoder model = load_model(ckpt);
              return model.represent(channels, length).z;
          },
          py::arg("ckpt"), py::arg("channels"), py::arg("length"));

    m.def("cross_validate_csv",
          [](const std::string& repr_csv, const std::string& task, const std::string& cv,
             uint64_t seed) {
              ReprTable table = read_repr_csv(repr_csv);
              std::vector<std::vector<double>> X;
              for (const auto& row : table.rows) X.emplace_back(row.begin(), row.end());
              std::vector<std::string> class_names;
              std::vector<int> y = labels_for_field(table, task, class_names);
              EvalTask eval_task;
              eval_task.name = task;
              eval_task.seed = seed;
              if (cv == "loocv") eval_task.scheme = CvScheme::Loocv;
              else {
                  eval_task.scheme = CvScheme::KFold;
                  eval_task.k = std::stoi(cv.substr(cv.find(':') + 1));
              }
              EvalReport report = cross_validate(eval_task, X, y, class_names);
              py::dict out;
              out["mean_accuracy"] = report.mean_accuracy;
              out["fold_accuracies"] = report.fold_accuracies;
              out["chosen_c"] = report.chosen_c;
              return out;
          },
          py::arg("repr_csv"), py::arg("task"), py::arg("cv") = std::string("kfold:5"),
          py::arg("seed") = 0);

    m.def("fit_linear_svm",
          [](const std::vector<std::vector<double>>& X, const std::vector<int>& y, double C) {
              SvmModel model = fit_linear_svm(X, y, C);
              py::dict out;
              out["weights"] = model.weights;
              out["biases"] = model.biases;
              std::vector<int> preds;
              for (const auto& row : X) preds.push_back(model.predict(row));
              out["train_predictions"] = preds;
              return out;
          },
          py::arg("X"), py::arg("y"), py::arg("C") = 1.0);

    m.def("pca",
          [](const std::vector<std::vector<double>>& X, int n_components) {
              PcaResult r = pca_fit_transform(X, n_components);
              py::dict out;
              out["scores"] = r.scores;
              out["components"] = r.components;
              out["explained_variance"] = r.explained_variance;
              return out;
          },
          py::arg("X"), py::arg("n_components"));
}
