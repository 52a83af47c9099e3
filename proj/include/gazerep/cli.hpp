#pragma once

#include "gazerep/model.hpp"
#include "gazerep/signal.hpp"
#include "gazerep/train.hpp"

#include <map>
#include <string>
#include <vector>

namespace gazerep {

// key: value config file merged with command-line overrides; unknown keys
// are rejected by name
struct RunConfig {
    std::string data_dir;
    Modality modality = Modality::Position;
    bool modality_set = false;
    TrainConfig train;
    ModelConfig model;
    bool model_customized = false;

    static RunConfig from_file(const std::string& path); // empty path -> defaults
    void apply_modality_defaults(); // paper presets for filters/batch/p
};

// entry point behind the gazerep binary; returns the process exit code
// (0 ok, 1 runtime failure, 2 usage error)
int cli_main(int argc, const char* const* argv);

// individual commands, exposed for tests and bindings
void cmd_synth(int subjects, int classes, int trials, uint64_t seed, const std::string& out_dir,
               double rate_hz, double duration_s, bool blinks);
void cmd_prep(const std::string& in_dir, const std::string& out_dir);
// returns per-epoch "epoch,mean_loss,wall_s" lines after writing the checkpoint
std::vector<std::string> cmd_train(const RunConfig& cfg, const std::string& out_ckpt);
void cmd_encode(const std::string& ckpt_pos, const std::string& ckpt_vel,
                const std::string& in_dir, const std::string& out_csv);
void cmd_eval(const std::string& repr_csv, const std::string& task, const std::string& cv,
              uint64_t seed, const std::string& out_report, const std::string& pca_signals_dir,
              int pca_components);
std::string cmd_audit(const std::string& ckpt, const std::string& modality);

// training windows for one modality from canonical 500 Hz trials
std::vector<SignalWindow> modality_windows(const std::vector<GazeTrial>& trials,
                                           Modality modality);

} // namespace gazerep
