#pragma once

#include <cstdint>

#include "svflow/grid.hpp"

namespace svf {

// Procedural base volume: smooth blobs plus membrane-like sheets, normalized
// to [0,1]. Deterministic in (geometry, seed); stands in for clinical data so
// the in-silico pipeline runs out of the box.
ScalarVolume make_phantom(const GridGeometry& geometry, std::uint64_t seed = 0x5eedf00d);

}  // namespace svf
