#include "gazerep/cli.hpp"

#include "gazerep/eval.hpp"
#include "gazerep/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace gazerep {

namespace {

Modality parse_modality(const std::string& s) {
    if (s == "pos" || s == "position") return Modality::Position;
    if (s == "vel" || s == "velocity") return Modality::Velocity;
    throw std::invalid_argument("unknown modality: " + s + " (expected pos|vel)");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<DecoderStage> parse_dec_spec(const std::string& s) {
    // "128x4,64x4"
    std::vector<DecoderStage> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto x = item.find('x');
        if (x == std::string::npos)
            throw std::invalid_argument("dec_spec stage '" + item + "' is not FILTERSxLAYERS");
        out.push_back({std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
    }
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected boolean, got: " + s);
}

} // namespace

void RunConfig::apply_modality_defaults() {
    if (!model_customized) {
        model = modality == Modality::Position ? ModelConfig::position() : ModelConfig::velocity();
        train.batch_size = modality == Modality::Position ? 256 : 128;
    } else {
        model.modality = modality;
    }
}

RunConfig RunConfig::from_file(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::string line;
    int lineno = 0;
    bool enc_set = false, dec_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key: value");
        std::string key = line.substr(0, colon);
        std::string val = line.substr(colon + 1);
        auto trim = [](std::string& s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
        };
        trim(key);
        trim(val);
        if (key == "data_dir") cfg.data_dir = val;
        else if (key == "modality") { cfg.modality = parse_modality(val); cfg.modality_set = true; }
        else if (key == "epochs") cfg.train.epochs = std::stoi(val);
        else if (key == "batch_size") cfg.train.batch_size = std::stoi(val);
        else if (key == "seed") cfg.train.seed = std::stoull(val);
        else if (key == "shuffle") cfg.train.shuffle = parse_bool(val);
        else if (key == "enc_filters") { cfg.model.enc_filters = std::stoi(val); enc_set = true; }
        else if (key == "dec_spec") { cfg.model.dec_spec = parse_dec_spec(val); dec_set = true; }
        else if (key == "dilations") {
            cfg.model.dilations = parse_int_list(val);
            cfg.model.enc_layers = static_cast<int>(cfg.model.dilations.size());
            cfg.model_customized = true;
        }
        else if (key == "z1_dim") { cfg.model.z1_dim = std::stoi(val); cfg.model_customized = true; }
        else if (key == "z2_dim") { cfg.model.z2_dim = std::stoi(val); cfg.model_customized = true; }
        else if (key == "destroy_p") { cfg.model.destroy_p = std::stof(val); cfg.model_customized = true; }
        else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    }
    if (enc_set || dec_set) {
        cfg.model_customized = true;
        if (enc_set && !dec_set) cfg.model.dec_spec = {{cfg.model.enc_filters, 8}};
    }
    return cfg;
}

std::vector<SignalWindow> modality_windows(const std::vector<GazeTrial>& trials,
                                           Modality modality) {
    std::vector<SignalWindow> windows;
    for (const auto& trial : trials) {
        int length = static_cast<int>(trial.length());
        std::vector<float> sig = trial_signal(trial);
        if (modality == Modality::Velocity)
            sig = derive_velocity(sig, length, trial.rate_hz);
        auto ws = window_slices_signal(sig, length, trial.rate_hz, modality, trial.trial_id);
        windows.insert(windows.end(), ws.begin(), ws.end());
    }
    return windows;
}

void cmd_synth(int subjects, int classes, int trials, uint64_t seed, const std::string& out_dir,
               double rate_hz, double duration_s, bool blinks) {
    auto dataset = generate_dataset(subjects, classes, trials, seed, duration_s, rate_hz, blinks);
    for (const auto& trial : dataset) write_trial(trial, out_dir);
    std::cout << "wrote " << dataset.size() << " trials to " << out_dir << "\n";
}

void cmd_prep(const std::string& in_dir, const std::string& out_dir) {
    auto trials = read_trial_dir(in_dir);
    if (trials.empty()) throw std::runtime_error("no trials found in " + in_dir);
    for (auto& trial : trials) {
        GazeTrial prepped = preprocess_pipeline(trial);
        write_trial(prepped, out_dir);
    }
    std::cout << "prepared " << trials.size() << " trials into " << out_dir << "\n";
}

std::vector<std::string> cmd_train(const RunConfig& cfg, const std::string& out_ckpt) {
    if (cfg.data_dir.empty()) throw std::runtime_error("train: no data_dir configured");
    auto trials = read_trial_dir(cfg.data_dir);
    if (trials.empty()) throw std::runtime_error("train: no trials in " + cfg.data_dir);
    auto windows = modality_windows(trials, cfg.modality);

    Autoencoder model(cfg.model, cfg.train.seed);
    AdamState adam = AdamState::create(model.params());
    auto logs = train_model(model, windows, cfg.train, adam);
    save_checkpoint(out_ckpt, model, &adam);

    std::vector<std::string> lines;
    char buf[96];
    for (const auto& log : logs) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.3f", log.epoch, log.mean_loss, log.wall_s);
        lines.emplace_back(buf);
    }
    return lines;
}

void cmd_encode(const std::string& ckpt_pos, const std::string& ckpt_vel,
                const std::string& in_dir, const std::string& out_csv) {
    if (ckpt_pos.empty() && ckpt_vel.empty())
        throw std::runtime_error("encode: need at least one of --ckpt-pos / --ckpt-vel");
    std::optional<Autoencoder> pos, vel;
    if (!ckpt_pos.empty()) pos.emplace(load_model(ckpt_pos));
    if (!ckpt_vel.empty()) vel.emplace(load_model(ckpt_vel));
    auto trials = read_trial_dir(in_dir);
    if (trials.empty()) throw std::runtime_error("encode: no trials in " + in_dir);
    ReprTable table =
        extract_representations(pos ? &*pos : nullptr, vel ? &*vel : nullptr, trials);
    write_repr_csv(out_csv, table);
    std::cout << "encoded " << table.rows.size() << " trials (" << table.dim
              << "-dim) into " << out_csv << "\n";
}

void cmd_eval(const std::string& repr_csv, const std::string& task, const std::string& cv,
              uint64_t seed, const std::string& out_report, const std::string& pca_signals_dir,
              int pca_components) {
    EvalTask eval_task;
    eval_task.name = task;
    eval_task.label_field = task;
    eval_task.seed = seed;
    if (cv == "loocv") {
        eval_task.scheme = CvScheme::Loocv;
    } else if (cv.rfind("kfold:", 0) == 0) {
        eval_task.scheme = CvScheme::KFold;
        eval_task.k = std::stoi(cv.substr(6));
    } else {
        throw std::runtime_error("eval: unknown cv scheme " + cv + " (kfold:K or loocv)");
    }

    std::vector<std::vector<double>> X;
    std::vector<int> y;
    std::vector<std::string> class_names;
    std::string repr_name;
    std::vector<std::vector<double>>* svm_weights_source = nullptr;
    ReprTable table;
    if (!pca_signals_dir.empty()) {
        auto trials = read_trial_dir(pca_signals_dir);
        X = pca_signal_features(trials, pca_components);
        table.dim = static_cast<int>(X.empty() ? 0 : X[0].size());
        for (const auto& t : trials) {
            table.trial_ids.push_back(t.trial_id);
            table.subject_ids.push_back(t.meta.subject_id);
            table.stimulus_ids.push_back(t.meta.stimulus_id);
            table.dataset_ids.push_back(t.meta.dataset_id);
        }
        repr_name = "pca_pv";
    } else {
        table = read_repr_csv(repr_csv);
        X.reserve(table.rows.size());
        for (const auto& row : table.rows) X.emplace_back(row.begin(), row.end());
        repr_name = table.dim == 256 ? "z_pv" : "z";
    }
    (void)svm_weights_source;
    y = labels_for_field(table, task, class_names);

    EvalReport report = cross_validate(eval_task, X, y, class_names);
    report.representation = repr_name;
    if (table.dim == 256 && repr_name == "z_pv") {
        // refit on everything for the importance readout
        double chosen = report.chosen_c.empty() ? 1.0 : report.chosen_c.front();
        SvmModel model = fit_linear_svm(X, y, chosen);
        report.importance_counts = feature_importance(model.weights, zpv_groups());
    }
    std::ofstream out(out_report);
    if (!out) throw std::runtime_error("cannot write " + out_report);
    out << report.to_text();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", report.mean_accuracy);
    std::cout << "task " << task << " (" << repr_name << ", " << report.cv_desc
              << "): mean accuracy " << buf << "\n";
}

std::string cmd_audit(const std::string& ckpt, const std::string& modality) {
    ModelConfig cfg;
    if (!ckpt.empty()) {
        Autoencoder model = load_model(ckpt);
        return model.audit().to_text(model.config().modality);
    }
    if (modality.empty()) throw std::runtime_error("audit: need --ckpt or --modality");
    cfg = parse_modality(modality) == Modality::Position ? ModelConfig::position()
                                                         : ModelConfig::velocity();
    return audit_config(cfg).to_text(cfg.modality);
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"stimuli-agnostic eye-movement representation learning"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic gaze dataset");
    int subjects = 4, classes = 3, trials = 10;
    uint64_t synth_seed = 0;
    std::string synth_out;
    double rate = 500.0, duration = 3.0;
    bool blinks = false;
    synth->add_option("--subjects", subjects, "number of synthetic subjects");
    synth->add_option("--classes", classes, "number of stimulus classes");
    synth->add_option("--trials", trials, "trials per (subject, class) cell");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--rate", rate, "sampling rate in Hz (250/500/1000)");
    synth->add_option("--duration", duration, "trial duration in seconds");
    synth->add_flag("--blinks", blinks, "inject blink segments (negative coordinates)");

    // prep
    auto* prep = app.add_subcommand("prep", "normalize raw trials to canonical 500 Hz files");
    std::string prep_in, prep_out;
    prep->add_option("--in", prep_in, "input trial directory")->required();
    prep->add_option("--out", prep_out, "output trial directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train an autoencoder on prepared trials");
    std::string train_modality, train_config, train_out, train_data;
    int train_epochs = -1;
    int64_t train_seed = -1;
    train->add_option("--modality", train_modality, "pos|vel")->required();
    train->add_option("--config", train_config, "key: value training manifest");
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--data", train_data, "trial directory (overrides config data_dir)");
    train->add_option("--epochs", train_epochs, "override epoch count");
    train->add_option("--seed", train_seed, "override seed");

    // encode
    auto* encode = app.add_subcommand("encode", "extract representations for full-length trials");
    std::string ckpt_pos, ckpt_vel, encode_in, encode_out;
    encode->add_option("--ckpt-pos", ckpt_pos, "position model checkpoint");
    encode->add_option("--ckpt-vel", ckpt_vel, "velocity model checkpoint");
    encode->add_option("--in", encode_in, "trial directory")->required();
    encode->add_option("--out", encode_out, "output representation CSV")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "linear-probe evaluation of representations");
    std::string repr_csv, task, cv = "kfold:5", report_out, pca_dir;
    uint64_t eval_seed = 0;
    int pca_components = 128;
    eval->add_option("--repr", repr_csv, "representation CSV from encode");
    eval->add_option("--task", task, "label field: subject|stimulus|dataset")->required();
    eval->add_option("--cv", cv, "kfold:5 | kfold:4 | loocv");
    eval->add_option("--seed", eval_seed, "fold-assignment seed");
    eval->add_option("--out", report_out, "report path")->required();
    eval->add_option("--pca-signals", pca_dir, "trial directory for the raw-signal PCA baseline");
    eval->add_option("--pca-components", pca_components, "PCA components per modality");

    // audit
    auto* audit = app.add_subcommand("audit", "parameter-count and receptive-field audit");
    std::string audit_ckpt, audit_modality;
    audit->add_option("--ckpt", audit_ckpt, "checkpoint to audit");
    audit->add_option("--modality", audit_modality, "audit the pos|vel paper configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            cmd_synth(subjects, classes, trials, synth_seed, synth_out, rate, duration, blinks);
        } else if (prep->parsed()) {
            cmd_prep(prep_in, prep_out);
        } else if (train->parsed()) {
            RunConfig cfg = RunConfig::from_file(train_config);
            cfg.modality = parse_modality(train_modality); // flag wins over file
            cfg.apply_modality_defaults();
            if (!train_data.empty()) cfg.data_dir = train_data;
            if (train_epochs > 0) cfg.train.epochs = train_epochs;
            if (train_seed >= 0) cfg.train.seed = static_cast<uint64_t>(train_seed);
            std::cout << "config: modality="
                      << (cfg.modality == Modality::Position ? "position" : "velocity")
                      << " epochs=" << cfg.train.epochs << " batch_size=" << cfg.train.batch_size
                      << " seed=" << cfg.train.seed << " enc_filters=" << cfg.model.enc_filters
                      << " destroy_p=" << cfg.model.destroy_p << " data_dir=" << cfg.data_dir
                      << "\n";
            std::cout << "epoch,mean_loss,wall_s\n";
            for (const auto& line : cmd_train(cfg, train_out)) std::cout << line << "\n";
            std::cout << "checkpoint: " << train_out << "\n";
        } else if (encode->parsed()) {
            cmd_encode(ckpt_pos, ckpt_vel, encode_in, encode_out);
        } else if (eval->parsed()) {
            if (repr_csv.empty() && pca_dir.empty())
                throw std::runtime_error("eval: need --repr or --pca-signals");
            cmd_eval(repr_csv, task, cv, eval_seed, report_out, pca_dir, pca_components);
        } else if (audit->parsed()) {
            std::cout << cmd_audit(audit_ckpt, audit_modality);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace gazerep
