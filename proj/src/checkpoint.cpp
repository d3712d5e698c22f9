#include "nucleonet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "nucleonet/error.hpp"
#include "nucleonet/rng.hpp"

namespace nucleo {

static void write_u32(std::ostream& os, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    os.write(b, 4);
}

static void write_u64(std::ostream& os, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    os.write(b, 8);
}

static uint32_t read_u32(std::istream& is) {
    char b[4];
    is.read(b, 4);
    if (!is) throw DataError("checkpoint: truncated file");
    uint32_t v;
    std::memcpy(&v, b, 4);
    return v;
}

static uint64_t read_u64(std::istream& is) {
    char b[8];
    is.read(b, 8);
    if (!is) throw DataError("checkpoint: truncated file");
    uint64_t v;
    std::memcpy(&v, b, 8);
    return v;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write("NNCK", 4);
    write_u32(os, 1);
    std::string text = spec.canonical_text();
    for (const auto& [k, v] : meta) text += "meta." + k + "=" + v + "\n";
    write_u32(os, static_cast<uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.rank()));
        for (size_t e : t.shape()) write_u64(os, e);
        std::vector<float> buf(t.size());
        for (size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "NNCK", 4) != 0)
        throw DataError("checkpoint: bad magic in '" + path + "'");
    uint32_t version = read_u32(is);
    if (version != 1)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    uint32_t text_len = read_u32(is);
    std::string text(text_len, '\0');
    is.read(text.data(), text_len);
    if (!is) throw DataError("checkpoint: truncated spec text");

    Checkpoint ck;
    ck.spec = ModelSpec::parse(text);
    std::istringstream ts(text);
    std::string line;
    while (std::getline(ts, line)) {
        if (line.rfind("meta.", 0) == 0) {
            auto eq = line.find('=');
            ck.meta[line.substr(5, eq - 5)] = line.substr(eq + 1);
        }
    }
    uint32_t n = read_u32(is);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint32_t rank = read_u32(is);
        std::vector<size_t> shape;
        size_t count = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            shape.push_back(static_cast<size_t>(read_u64(is)));
            count *= shape.back();
        }
        std::vector<float> buf(count);
        is.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!is) throw DataError("checkpoint: truncated payload for '" + name + "'");
        Tensor t(shape);
        for (size_t j = 0; j < count; ++j) t[j] = static_cast<double>(buf[j]);
        ck.params.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

int Checkpoint::meta_int(const std::string& key, int fallback) const {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : std::stoi(it->second);
}

static Tensor f32_round(const Tensor& t) {
    Tensor out(t.shape());
    for (size_t i = 0; i < t.size(); ++i) out[i] = static_cast<double>(static_cast<float>(t[i]));
    return out;
}

Checkpoint snapshot(CnnNetwork& net) {
    Checkpoint ck;
    ck.spec = net.spec();
    for (Param* p : net.params()) ck.params.emplace_back(p->name, f32_round(*p->value));
    if (net.spec().injected_dim > 0) {
        ck.params.emplace_back("inject.mean", f32_round(net.feat_mean));
        ck.params.emplace_back("inject.std", f32_round(net.feat_std));
    }
    return ck;
}

Checkpoint snapshot_cae(CaeNetwork& net) {
    Checkpoint ck;
    ck.spec = net.spec();
    ck.meta["kind"] = "cae";
    for (Param* p : net.params()) ck.params.emplace_back(p->name, f32_round(*p->value));
    return ck;
}

template <typename Net>
static void restore_params(Net& net, const Checkpoint& ck) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : ck.params) by_name[name] = &t;
    for (Param* p : net.params()) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw DataError("checkpoint: missing parameter '" + p->name + "'");
        if (!it->second->same_shape(*p->value))
            throw DataError("checkpoint: parameter '" + p->name + "' shape mismatch " +
                            shape_str(it->second->shape()) + " vs " + shape_str(p->value->shape()));
        std::copy(it->second->data(), it->second->data() + it->second->size(), p->value->data());
    }
}

std::unique_ptr<CnnNetwork> restore(const Checkpoint& ck) {
    Rng dummy(0);
    auto net = std::make_unique<CnnNetwork>(ck.spec, dummy);
    restore_params(*net, ck);
    if (ck.spec.injected_dim > 0) {
        for (const auto& [name, t] : ck.params) {
            if (name == "inject.mean") net->feat_mean = t;
            if (name == "inject.std") net->feat_std = t;
        }
    }
    return net;
}

std::unique_ptr<CaeNetwork> restore_cae(const Checkpoint& ck) {
    Rng dummy(0);
    auto net = std::make_unique<CaeNetwork>(ck.spec, dummy);
    restore_params(*net, ck);
    return net;
}

}  // namespace nucleo
