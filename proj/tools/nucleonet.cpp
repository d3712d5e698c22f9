#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nucleonet/error.hpp"
#include "nucleonet/gradcheck.hpp"
#include "nucleonet/pipeline.hpp"

using namespace nucleo;

namespace {

struct CommonFlags {
    std::string config;
    std::string variant;
    std::string out;
    uint64_t seed = 0;
    bool seed_set = false;
    long rounds = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON configuration file");
    cmd->add_option("--variant", f.variant, "default, w, wf, wfm or combo");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "random seed override")
        ->each([&f](const std::string&) { f.seed_set = true; });
    cmd->add_option("--rounds", f.rounds, "number of train/test rounds");
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    if (!f.variant.empty()) cfg.variant = f.variant;
    if (!f.out.empty()) cfg.out = f.out;
    if (f.seed_set) cfg.exp.seed = f.seed;
    if (f.rounds >= 0) cfg.exp.rounds = static_cast<size_t>(f.rounds);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nucleus-attribute network pipeline"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic labeled dataset");
    SynthParams synth;
    std::string gen_out;
    gen->add_option("--seed", synth.seed, "generator seed");
    gen->add_option("--count", synth.count, "number of images");
    gen->add_option("--side", synth.side, "image side in pixels");
    gen->add_option("--out", gen_out, "output directory")->required();

    // extract-features
    auto* ext = app.add_subcommand("extract-features", "write stand-in injected features");
    std::string ext_manifest, ext_root, ext_out;
    size_t ext_dim = 64;
    ext->add_option("--manifest", ext_manifest, "dataset manifest CSV")->required();
    ext->add_option("--image-root", ext_root, "directory containing the image paths")->required();
    ext->add_option("--out", ext_out, "output feature file")->required();
    ext->add_option("--dim", ext_dim, "feature vector width");

    CommonFlags cae_f, train_f, eval_f, report_f;
    auto* cae = app.add_subcommand("pretrain-cae", "pretrain the autoencoder");
    add_common(cae, cae_f);
    auto* train = app.add_subcommand("train", "split, pretrain-init and two-cycle train");
    add_common(train, train_f);
    auto* eval = app.add_subcommand("eval", "evaluate round checkpoints on their test splits");
    add_common(eval, eval_f);
    auto* report = app.add_subcommand("report", "aggregate round reports across variants");
    add_common(report, report_f);

    // predict
    auto* pred = app.add_subcommand("predict", "two-pass predictions for a manifest");
    CommonFlags pred_f;
    std::string pred_ck, pred_out;
    add_common(pred, pred_f);
    pred->add_option("--checkpoint", pred_ck, "model checkpoint")->required();
    pred->add_option("--predictions", pred_out, "output CSV path")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    bool gc_all = false;
    gc->add_flag("--all", gc_all, "check every layer, loss and variant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            run_gen_synth(synth, gen_out);
        } else if (ext->parsed()) {
            run_extract_features(ext_manifest, ext_root, ext_out, ext_dim);
        } else if (cae->parsed()) {
            std::cout << run_pretrain_cae(resolve(cae_f)) << "\n";
        } else if (train->parsed()) {
            run_train(resolve(train_f));
        } else if (eval->parsed()) {
            run_eval(resolve(eval_f));
        } else if (report->parsed()) {
            run_report(resolve(report_f));
        } else if (pred->parsed()) {
            run_predict(resolve(pred_f), pred_ck, pred_out);
        } else if (gc->parsed()) {
            if (!gc_all) throw UsageError("gradcheck: pass --all");
            if (!gradcheck_all(std::cout)) return 3;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
