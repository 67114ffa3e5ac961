#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace xcorr {

// Identifies one random stream: the same lineage always yields the same draws.
struct SeedLineage {
    std::uint64_t master = 0;
    std::uint64_t replicate = 0;
    std::string stream = "input";
};

std::mt19937_64 make_engine(const SeedLineage& lineage);

}  // namespace xcorr
