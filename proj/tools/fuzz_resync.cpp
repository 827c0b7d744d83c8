// Fuzz target: resync_and_parse must terminate and never abort on any byte
// stream. Build with -DAIRNET_FUZZERS=ON under clang.

#include "airnet/frame.hpp"

#include <cstddef>
#include <cstdint>

extern "C" int LLVMFuzzerTestOneInput(const std::uint8_t* data, std::size_t size) {
    const auto results = airnet::pms::resync_and_parse({data, size});
    (void)results;
    return 0;
}
