#pragma once

#include <cstdint>
#include <span>

namespace smc {

// Particle and path indices are 0-based throughout.
using Index = std::uint32_t;

// A state point: `state_dim` contiguous coordinates.
using StateView = std::span<const double>;
using StateOut = std::span<double>;

}  // namespace smc
