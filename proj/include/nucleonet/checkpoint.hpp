#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nucleonet/network.hpp"
#include "nucleonet/tensor.hpp"

namespace nucleo {

// On-disk model state. Format: magic "NNCK", u32 version, u32 text length,
// canonical ModelSpec text plus "meta.*" lines, u32 parameter count, then per
// parameter: u32 name length, name bytes, u32 rank, u64 extents, f32 values
// (little-endian).
struct Checkpoint {
    ModelSpec spec;
    std::vector<std::pair<std::string, Tensor>> params;  // values already f32-rounded
    std::map<std::string, std::string> meta;             // epoch, cycle, ...

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    int meta_int(const std::string& key, int fallback) const;
};

Checkpoint snapshot(CnnNetwork& net);
Checkpoint snapshot_cae(CaeNetwork& net);

// Build a network from a checkpoint (params restored, f32 widened to f64).
std::unique_ptr<CnnNetwork> restore(const Checkpoint& ck);
std::unique_ptr<CaeNetwork> restore_cae(const Checkpoint& ck);

}  // namespace nucleo
