// fuzz2bench: turn a libFuzzer differential harness into a standalone
// microbenchmark with per-call timing of each (base, opt) function pair.

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "transform.h"

namespace {

void usage(const char* argv0) {
    std::cerr << "Usage: " << argv0
              << " <harness.cc> [-o <bench.cc>] [--iters N] [--warmup N]"
                 " [--skeleton-dir DIR]\n";
}

std::string exe_dir() {
    char buf[4096];
    ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return ".";
    buf[n] = '\0';
    std::string path(buf);
    size_t slash = path.rfind('/');
    return slash == std::string::npos ? "." : path.substr(0, slash);
}

std::string find_skeleton_dir(const std::string& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (const char* env = std::getenv("F2B_SKELETON_DIR")) return env;
    std::string exe = exe_dir();
    for (const std::string& candidate : {exe + "/harness", exe + "/../harness"}) {
        std::ifstream probe(candidate + "/prelude.cc.in");
        if (probe) return candidate;
    }
    return exe + "/harness";
}

}  // namespace

int main(int argc, char** argv) {
    std::string input_path, output_path, skeleton_dir;
    f2b::Options opts;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "-o" && i + 1 < argc) {
            output_path = argv[++i];
        } else if (arg == "--iters" && i + 1 < argc) {
            opts.default_iters = strtoull(argv[++i], nullptr, 10);
        } else if (arg == "--warmup" && i + 1 < argc) {
            opts.warmup = strtoull(argv[++i], nullptr, 10);
        } else if (arg == "--skeleton-dir" && i + 1 < argc) {
            skeleton_dir = argv[++i];
        } else if (arg == "-h" || arg == "--help") {
            usage(argv[0]);
            return 0;
        } else if (!arg.empty() && arg[0] == '-') {
            std::cerr << "unknown option: " << arg << "\n";
            usage(argv[0]);
            return 2;
        } else if (input_path.empty()) {
            input_path = arg;
        } else {
            usage(argv[0]);
            return 2;
        }
    }
    if (input_path.empty()) {
        usage(argv[0]);
        return 2;
    }

    std::ifstream ifs(input_path);
    if (!ifs) {
        std::cerr << "cannot read " << input_path << "\n";
        return 1;
    }
    std::stringstream ss;
    ss << ifs.rdbuf();

    try {
        std::string dir = find_skeleton_dir(skeleton_dir);
        f2b::Result result = f2b::fuzz_to_bench(
            ss.str(), f2b::load_skeleton(dir, "prelude.cc.in"),
            f2b::load_skeleton(dir, "main.cc.in"), opts);
        if (output_path.empty()) {
            std::cout << result.source;
        } else {
            std::ofstream ofs(output_path);
            if (!ofs) {
                std::cerr << "cannot write " << output_path << "\n";
                return 1;
            }
            ofs << result.source;
        }
        for (const auto& pair : result.pairs) {
            std::cerr << "timed pair: " << pair.first << " / " << pair.second
                      << "\n";
        }
    } catch (const f2b::TransformError& err) {
        std::cerr << "transform error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
