#include "nucleonet/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nucleonet/error.hpp"
#include "nucleonet/features.hpp"

namespace nucleo {

namespace fs = std::filesystem;

namespace {

bool variant_uses_cae(Variant v) { return v != Variant::Default; }
bool variant_uses_features(Variant v) { return v == Variant::WF || v == Variant::WFM; }

Variant parse_train_variant(const std::string& name) {
    if (name == "combo")
        throw UsageError("variant 'combo' is evaluation-only; train wf and wfm instead");
    return variant_from_name(name);
}

void make_dirs(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

Dataset load_for(const RunConfig& cfg, Variant v, const DatasetManifest& manifest) {
    std::string feats;
    if (variant_uses_features(v)) feats = cfg.require("features");
    return load_dataset(manifest, cfg.require("image_root"), cfg.input_side, feats);
}

std::string round_ck_path(const RunConfig& cfg, const std::string& variant, size_t round) {
    return cfg.out + "/" + variant + "/round" + std::to_string(round) + ".nnck";
}

std::string round_report_path(const RunConfig& cfg, const std::string& variant, size_t round) {
    return cfg.out + "/" + variant + "/round" + std::to_string(round) + "_report.json";
}

}  // namespace

void run_gen_synth(const SynthParams& params, const std::string& out_dir) {
    gen_synthetic(params, out_dir);
}

void run_extract_features(const std::string& manifest_path, const std::string& image_root,
                          const std::string& out_file, size_t dim) {
    if (dim < 1) throw UsageError("feature dim must be >= 1");
    DatasetManifest manifest = load_manifest(manifest_path);
    Tensor matrix({manifest.rows.size(), dim});
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        Tensor img = load_ppm(image_root + "/" + manifest.rows[i].path);
        Tensor f = standin_features(img, dim);
        for (size_t j = 0; j < dim; ++j) matrix.at2(i, j) = f[j];
    }
    save_feature_file(matrix, out_file);
}

std::string cae_checkpoint_path(const RunConfig& cfg) {
    char name[64];
    std::snprintf(name, sizeof(name), "cae_w%g_c%zu_div%zu.nnck", cfg.exp.w, cfg.exp.c,
                  cfg.exp.filter_div);
    return cfg.out + "/" + name;
}

std::string run_pretrain_cae(const RunConfig& cfg) {
    cfg.exp.validate();
    make_dirs(cfg.require("out"));
    std::string path = cae_checkpoint_path(cfg);
    if (fs::exists(path)) return path;

    DatasetManifest manifest = load_manifest(cfg.require("manifest"));
    Dataset data = load_dataset(manifest, cfg.require("image_root"), cfg.input_side);
    std::vector<const Tensor*> images;
    images.reserve(data.samples.size());
    for (const auto& s : data.samples) images.push_back(&s.image);

    ModelSpec spec = ModelSpec::make(Variant::W, cfg.exp.filter_div);
    spec.input_side = cfg.input_side;
    std::ofstream log(cfg.out + "/cae_train.tsv");
    Checkpoint ck = pretrain_cae(images, spec, cfg.exp, &log);
    ck.save(path);
    return path;
}

void run_train(const RunConfig& cfg) {
    cfg.exp.validate();
    Variant v = parse_train_variant(cfg.variant);
    std::string vdir = cfg.require("out") + "/" + cfg.variant;
    make_dirs(vdir);
    cfg.write_resolved(vdir);

    DatasetManifest manifest = load_manifest(cfg.require("manifest"));
    Dataset data = load_for(cfg, v, manifest);

    Checkpoint cae_ck;
    bool have_cae = false;
    if (variant_uses_cae(v)) {
        cae_ck = Checkpoint::load(run_pretrain_cae(cfg));
        have_cae = true;
    }

    size_t inj = variant_uses_features(v) ? data.injected_dim : 0;
    for (size_t r = 0; r < cfg.exp.rounds; ++r) {
        Split split = split_dataset(data.samples.size(), cfg.exp.seed, cfg.exp.split_fraction, r);
        ModelSpec spec = ModelSpec::make(v, cfg.exp.filter_div, inj);
        spec.input_side = cfg.input_side;
        Rng init(mix_seed(cfg.exp.seed, 0xC11, r));
        CnnNetwork net(spec, init);
        if (have_cae) {
            auto cae = restore_cae(cae_ck);
            transfer_weights(*cae, net);
        }
        if (inj > 0) fit_standardizer(net, data, split.train);
        std::ofstream log(vdir + "/round" + std::to_string(r) + "_train.tsv");
        Checkpoint ck = train_two_cycle(net, data, split.train, cfg.exp, &log);
        ck.meta["round"] = std::to_string(r);
        ck.meta["seed"] = std::to_string(cfg.exp.seed);
        ck.save(round_ck_path(cfg, cfg.variant, r));
    }
}

void run_predict(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& out_csv) {
    Checkpoint ck = Checkpoint::load(checkpoint_path);
    auto net = restore(ck);
    DatasetManifest manifest = load_manifest(cfg.require("manifest"));
    Dataset data = load_for(cfg, net->spec().variant, manifest);
    if (net->spec().injected_dim > 0 && data.injected_dim != net->spec().injected_dim)
        throw DataError("feature dim does not match checkpoint injected_dim");

    std::ofstream os(out_csv);
    if (!os) throw DataError("predict: cannot open '" + out_csv + "' for writing");
    os << "path";
    for (size_t k = 0; k < kNumAttrs; ++k) os << "," << kAttrNames[k];
    for (size_t k = 0; k < kNumShapes; ++k) os << ",shape_" << kShapeNames[k];
    os << "\n";
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const Sample& s = data.samples[i];
        const Tensor* injp = net->spec().injected_dim > 0 ? &s.injected : nullptr;
        Prediction p = predict_two_pass(*net, s.image, injp);
        os << manifest.rows[i].path;
        for (size_t k = 0; k < kNumAttrs; ++k) os << "," << p.attr[k];
        for (size_t k = 0; k < kNumShapes; ++k) os << "," << p.shape[k];
        os << "\n";
    }
    if (!os) throw DataError("predict: write failed for '" + out_csv + "'");
}

void run_eval(const RunConfig& cfg) {
    cfg.exp.validate();
    bool combo = cfg.variant == "combo";
    std::string vdir = cfg.require("out") + "/" + cfg.variant;
    make_dirs(vdir);
    cfg.write_resolved(vdir);

    DatasetManifest manifest = load_manifest(cfg.require("manifest"));
    Variant data_variant = combo ? Variant::WF : variant_from_name(cfg.variant);
    Dataset data = load_for(cfg, data_variant, manifest);

    for (size_t r = 0; r < cfg.exp.rounds; ++r) {
        Split split = split_dataset(data.samples.size(), cfg.exp.seed, cfg.exp.split_fraction, r);

        std::unique_ptr<CnnNetwork> net, net2;
        if (combo) {
            net = restore(Checkpoint::load(round_ck_path(cfg, "wf", r)));
            net2 = restore(Checkpoint::load(round_ck_path(cfg, "wfm", r)));
            if (net->spec().variant != Variant::WF || net2->spec().variant != Variant::WFM)
                throw DataError("combo evaluation needs a wf and a wfm checkpoint");
        } else {
            net = restore(Checkpoint::load(round_ck_path(cfg, cfg.variant, r)));
        }

        std::vector<Prediction> preds;
        std::vector<LabelVector> truths;
        preds.reserve(split.test.size());
        for (size_t idx : split.test) {
            const Sample& s = data.samples[idx];
            const Tensor* injp = net->spec().injected_dim > 0 ? &s.injected : nullptr;
            Prediction p = predict_two_pass(*net, s.image, injp);
            if (combo) {
                Prediction pm = predict_two_pass(*net2, s.image, injp);
                p = combine_predictions(p, pm);
            }
            preds.push_back(std::move(p));
            truths.push_back(s.labels);
        }

        EvaluationReport report = evaluate(preds, truths, r, &std::cerr);
        std::ofstream os(round_report_path(cfg, cfg.variant, r));
        if (!os) throw DataError("eval: cannot write round report");
        os << report_to_json(report) << "\n";

        std::string roc_dir = vdir + "/roc/round" + std::to_string(r);
        make_dirs(roc_dir);
        for (size_t k = 0; k < kNumClasses; ++k) {
            if (!report.has_class[k]) continue;
            std::vector<ScoredLabel> scored;
            for (size_t i = 0; i < preds.size(); ++i)
                scored.push_back({class_score(preds[i], k), truths[i].class_truth(k)});
            write_roc_csv(roc_curve(scored), roc_dir + "/" + LabelVector::class_name(k) + ".csv");
        }
    }
}

void run_report(const RunConfig& cfg) {
    static const char* kVariants[] = {"default", "w", "wf", "wfm", "combo"};
    std::vector<std::string> variants;
    std::vector<std::vector<EvaluationReport>> rounds;
    for (const char* v : kVariants) {
        std::vector<EvaluationReport> rr;
        for (size_t r = 0;; ++r) {
            std::string path = round_report_path(cfg, v, r);
            if (!fs::exists(path)) break;
            std::ifstream is(path);
            std::ostringstream ss;
            ss << is.rdbuf();
            rr.push_back(report_from_json(ss.str()));
        }
        if (!rr.empty()) {
            variants.push_back(v);
            rounds.push_back(std::move(rr));
        }
    }
    if (variants.empty())
        throw DataError("report: no round reports found under '" + cfg.require("out") + "'");
    write_aggregate_report(variants, rounds, cfg.out);
}

}  // namespace nucleo
