#pragma once

#include <string>

#include "nucleonet/config.hpp"
#include "nucleonet/eval.hpp"
#include "nucleonet/synth.hpp"

namespace nucleo {

void run_gen_synth(const SynthParams& params, const std::string& out_dir);

void run_extract_features(const std::string& manifest_path, const std::string& image_root,
                          const std::string& out_file, size_t dim);

// CAE checkpoint path for a config (encodes w, c and filter_div).
std::string cae_checkpoint_path(const RunConfig& cfg);

// Pretrain (or reuse an existing) CAE for the config; returns its path.
std::string run_pretrain_cae(const RunConfig& cfg);

// Full per-round pipeline: split, CAE init, two-cycle training, checkpoints
// under <out>/<variant>/round<r>.nnck.
void run_train(const RunConfig& cfg);

// Two-pass predictions for every manifest row; CSV with one probability
// column per class score.
void run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& out_csv);

// Per-round test-split evaluation reports + ROC point files.
void run_eval(const RunConfig& cfg);

// Aggregate every evaluated variant under <out> into report.csv/report.json.
void run_report(const RunConfig& cfg);

}  // namespace nucleo
