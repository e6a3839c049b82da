#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace f2b {

struct TransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    uint64_t warmup = 1000;
    uint64_t default_iters = 1000000;
};

struct Result {
    std::string source;
    // (base symbol, optimized symbol) in first-appearance order
    std::vector<std::pair<std::string, std::string>> pairs;
};

// Pure text transformation of a libFuzzer differential harness into a
// standalone timed microbenchmark. Throws TransformError when the entry
// point or the function pairs cannot be located.
Result fuzz_to_bench(const std::string& harness,
                     const std::string& prelude_skeleton,
                     const std::string& main_skeleton,
                     const Options& opts = {});

std::string load_skeleton(const std::string& dir, const std::string& name);

}  // namespace f2b
