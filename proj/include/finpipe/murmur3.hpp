#pragma once

#include <cstdint>
#include <string_view>

namespace finpipe {

struct Hash128 {
    std::uint64_t h1 = 0;
    std::uint64_t h2 = 0;

    friend bool operator==(const Hash128&, const Hash128&) = default;
    friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

// MurmurHash3 x64 128-bit variant.
Hash128 murmur3_x64_128(std::string_view data, std::uint32_t seed = 0);

// Low 64 bits, used for n-gram shingles.
std::uint64_t murmur3_x64_64(std::string_view data, std::uint32_t seed = 0);

}  // namespace finpipe
