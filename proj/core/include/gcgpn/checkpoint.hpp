#pragma once

#include <filesystem>

#include "gcgpn/model.hpp"

namespace gcgpn {

// Text checkpoint: config echo, class universe, seen classes, the semantic
// matrix, then every parameter as "tensor <name> <rows> <cols>" followed by
// one line per row. Values are printed in shortest round-trip form, so a
// reload reproduces the model bit for bit.
void save_checkpoint(const Model& m, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gcgpn
