#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gcgpn/model.hpp"
#include "gcgpn/operators.hpp"

namespace gcgpn {

// Named model variants. Each preset only replaces the operator set, theta
// form and special case of `base`; extractor, d, layers and temperatures are
// kept. `semantic` selects which side-information kind plays the role of B.
ModelConfig apply_preset(std::string_view name, ModelConfig base,
                         OperatorKind semantic = OperatorKind::attribute_cosine);

// Canonical names in ablation order; "gcgpn-aux-fcθ" is also accepted as an
// alias of "gcgpn-aux-fctheta".
const std::vector<std::string>& preset_names();
bool is_preset(std::string_view name);

}  // namespace gcgpn
