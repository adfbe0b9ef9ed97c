#pragma once

#include <string>

#include "graphdoc/model.hpp"

namespace graphdoc {

/// Binary model snapshot: "GDM1" magic, u32 version, u32 header length, a
/// JSON header (model config + parameter manifest with path/shape/offset),
/// then every parameter as little-endian 32-bit floats in manifest order.
/// Training runs in 64-bit; storage rounds to 32-bit, so save(load(p)) is
/// byte-identical even though load(save(m)) rounds once.
void save_checkpoint(const GraphDocModel& model, const std::string& path);

GraphDocModel load_checkpoint(const std::string& path);

} // namespace graphdoc
