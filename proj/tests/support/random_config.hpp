#pragma once

#include <random>

#include "analogc/machine.hpp"

namespace analogc::test {

/// Uniform integer in [lo, hi] that does not depend on the standard library's distributions.
inline int uniform(std::mt19937_64& rng, int lo, int hi)
{
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// A configuration that passes validate_config: each lane is either unused
/// (code 0) or wired from a bound out-row to an in-row with an in-range code.
inline machine::MachineConfig random_config(const machine::MachineSpec& spec, std::mt19937_64& rng,
                                            int active_percent = 50)
{
    auto config = machine::MachineConfig::empty(spec);
    const int bound_out = spec.n_integrators + spec.n_multipliers + (spec.has_const_row ? 1 : 0);
    for (int k = 0; k < spec.n_lanes; ++k) {
        auto& lane = config.lanes[static_cast<std::size_t>(k)];
        if (uniform(rng, 0, 99) >= active_percent)
            continue;
        lane.source = uniform(rng, 0, bound_out - 1);
        lane.dest = uniform(rng, 0, spec.in_rows - 1);
        lane.coeff.code = spec.is_lowres(k) ? uniform(rng, 0, machine::kLowResCodes - 1)
                                            : uniform(rng, machine::kHighResMin, machine::kHighResMax);
    }
    return config;
}

} // namespace analogc::test
