#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vague/tensor.hpp"

namespace vague {

// Versioned binary container for model parameters plus a JSON config header.
//
// Byte layout (all integers little-endian; see docs/checkpoint-format.md):
//   magic           8 bytes  "VAGCKPT1"
//   config_len      u32
//   config          config_len bytes of UTF-8 JSON
//   param_count     u32
//   per parameter:
//     name_len      u16
//     name          name_len bytes
//     ndim          u8
//     dims          ndim x u64
//     values        product(dims) x f64 (IEEE 754)
struct Checkpoint {
    nlohmann::json config;
    std::vector<std::pair<std::string, nn::Tensor>> params; // insertion-ordered

    void add(const std::string& name, nn::Tensor t);
    bool has(const std::string& name) const;
    const nn::Tensor& get(const std::string& name) const; // DataError if absent

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // The "kind" config entry identifies the model family a checkpoint holds.
    std::string kind() const;
};

} // namespace vague
