#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leafnet/tensor.hpp"

namespace leafnet {

// File layout: magic "LNCK", u16 version (little-endian), u32 LE length of
// a UTF-8 JSON header, the header, then raw little-endian 32-bit floats.
// The header lists tensors as {name, shape, dtype:"f32", offset} plus a
// free-form "meta" object.
struct Checkpoint {
    static constexpr uint16_t kVersion = 1;
    std::string meta_json = "{}";   // config echo, build manifest, counters
    std::vector<Tensor> tensors;    // named; stored at f32 precision
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws std::runtime_error with messages distinguishing a corrupt header,
// an unknown version, and a tensor shape inconsistency.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace leafnet
