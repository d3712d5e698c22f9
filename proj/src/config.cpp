#include "nucleonet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nucleonet/error.hpp"

namespace nucleo {

RunConfig RunConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config: top level must be a JSON object");

    static const std::set<std::string> known = {
        "seed",       "split_fraction", "rounds",     "cae_epochs", "cycle_epochs",
        "lr",         "cae_lr",         "momentum",   "lr_decay",   "lr_decay_every",
        "w",          "c",              "m",          "batch_size", "filter_div",
        "injected_dim", "variant",      "input_side", "manifest",   "image_root",
        "features",   "out"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw UsageError("config: unknown key '" + it.key() + "'");

    RunConfig c;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        get("seed", c.exp.seed);
        get("split_fraction", c.exp.split_fraction);
        get("rounds", c.exp.rounds);
        get("cae_epochs", c.exp.cae_epochs);
        get("cycle_epochs", c.exp.cycle_epochs);
        get("lr", c.exp.lr);
        get("cae_lr", c.exp.cae_lr);
        get("momentum", c.exp.momentum);
        get("lr_decay", c.exp.lr_decay);
        get("lr_decay_every", c.exp.lr_decay_every);
        get("w", c.exp.w);
        get("c", c.exp.c);
        get("m", c.exp.m);
        get("batch_size", c.exp.batch_size);
        get("filter_div", c.exp.filter_div);
        get("injected_dim", c.exp.injected_dim);
        get("variant", c.variant);
        get("input_side", c.input_side);
        get("manifest", c.manifest);
        get("image_root", c.image_root);
        get("features", c.features);
        get("out", c.out);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = exp.seed;
    j["split_fraction"] = exp.split_fraction;
    j["rounds"] = exp.rounds;
    j["cae_epochs"] = exp.cae_epochs;
    j["cycle_epochs"] = exp.cycle_epochs;
    j["lr"] = exp.lr;
    j["cae_lr"] = exp.cae_lr;
    j["momentum"] = exp.momentum;
    j["lr_decay"] = exp.lr_decay;
    j["lr_decay_every"] = exp.lr_decay_every;
    j["w"] = exp.w;
    j["c"] = exp.c;
    j["m"] = exp.m;
    j["batch_size"] = exp.batch_size;
    j["filter_div"] = exp.filter_div;
    j["injected_dim"] = exp.injected_dim;
    j["variant"] = variant;
    j["input_side"] = input_side;
    j["manifest"] = manifest;
    j["image_root"] = image_root;
    j["features"] = features;
    j["out"] = out;
    return j.dump(2);
}

void RunConfig::write_resolved(const std::string& dir) const {
    std::ofstream os(dir + "/resolved_config.json");
    if (!os) throw DataError("config: cannot write '" + dir + "/resolved_config.json'");
    os << to_json() << "\n";
    if (!os) throw DataError("config: write failed for '" + dir + "/resolved_config.json'");
}

const std::string& RunConfig::require(const std::string& key) const {
    const std::string* v = nullptr;
    if (key == "manifest") v = &manifest;
    else if (key == "image_root") v = &image_root;
    else if (key == "features") v = &features;
    else if (key == "out") v = &out;
    if (!v || v->empty()) throw UsageError("config: missing required key '" + key + "'");
    return *v;
}

}  // namespace nucleo
