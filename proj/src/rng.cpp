#include "xcorr/rng.hpp"

namespace xcorr {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::mt19937_64 make_engine(const SeedLineage& lineage) {
    const std::uint64_t a = splitmix(lineage.master);
    const std::uint64_t b = splitmix(a ^ splitmix(lineage.replicate + 1));
    const std::uint64_t c = splitmix(b ^ fnv1a(lineage.stream));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace xcorr
