#include "nvgan/rng.hpp"

#include <cinttypes>
#include <cstdio>

namespace nvgan {

std::string Pcg32::serialize() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "pcg32:%016" PRIx64 ":%016" PRIx64, state_, inc_);
    return buf;
}

Pcg32 Pcg32::deserialize(const std::string& text) {
    uint64_t state = 0, inc = 0;
    if (std::sscanf(text.c_str(), "pcg32:%" SCNx64 ":%" SCNx64, &state, &inc) != 2) {
        throw StateError("unparseable RNG state: " + text);
    }
    Pcg32 rng;
    rng.state_ = state;
    rng.inc_ = inc;
    return rng;
}

}  // namespace nvgan
