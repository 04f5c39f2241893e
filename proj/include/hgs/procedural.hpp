#pragma once

#include "hgs/body.hpp"

namespace hgs {

// Capsule-limb humanoid used by tests and demos: 13 joints, ~2k vertices,
// one UV chart per capsule in a 4x4 atlas grid. Deterministic.
SkinnedTemplate make_test_humanoid(int segments = 14);

}  // namespace hgs
