#include "steerlab/numcore/rng.hpp"

#include "steerlab/util/common.hpp"

namespace steerlab::numcore {

SeededRng SeededRng::derive(std::uint64_t seed, const std::string& label) {
    return SeededRng(fnv1a64(label.data(), label.size(), seed ^ 0x5851f42d4c957f2dull));
}

}  // namespace steerlab::numcore
