#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace avcap {

// SHA-256, used for response-cache keys and template checksum pinning.
// Output is the usual lowercase hex digest.
std::string sha256_hex(std::string_view data);

}  // namespace avcap
