#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pgnd/tensor.hpp"

namespace pgnd::tg {

// Checkpoint container: little-endian binary.
//   magic "PGND" | u32 version (=1) | u32 tensor count |
//   per tensor: u32 name length | name bytes | u32 rank | u32 dims[rank] |
//               f64 data[prod(dims)]
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace pgnd::tg
