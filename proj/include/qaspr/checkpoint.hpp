#pragma once
// Binary checkpoint:
//   "QASPR\x01"
//   u64 length + UTF-8 JSON metadata
//   per tensor: u64 length + name, u32 rank, u64 dims[rank], f64 payload
// All integers and floats little-endian. Tensors run to end of file.

#include <filesystem>
#include <iosfwd>
#include "json.hpp"

#include "qaspr/numerics.hpp"

namespace qaspr {

struct Checkpoint {
    nlohmann::json metadata;
    nn::ParamStore params;
};

void write_checkpoint(std::ostream& out, const nlohmann::json& metadata, const nn::ParamStore& params);
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata, const nn::ParamStore& params);

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qaspr
