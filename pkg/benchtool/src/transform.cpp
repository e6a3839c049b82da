#include "transform.h"

#include <fstream>
#include <regex>
#include <sstream>

namespace f2b {

namespace {

std::string replace_all(std::string text, const std::string& from,
                        const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

struct Accumulators {
    std::string t_base, t_opt, n_base, n_opt;
};

// Pair 0 keeps the canonical names; later pairs get a _p<k> suffix so each
// pair is timed independently.
Accumulators accumulators_for(size_t k) {
    std::string sfx = k == 0 ? "" : "_p" + std::to_string(k);
    return {"g_t_baseline_ns" + sfx, "g_t_opt_ns" + sfx,
            "g_n_baseline" + sfx, "g_n_opt" + sfx};
}

// A call to `name(` not embedded in a longer identifier.
bool line_calls(const std::string& line, const std::string& name) {
    std::regex re("(^|[^A-Za-z0-9_])" + name + "\\s*\\(");
    return std::regex_search(line, re);
}

// Variable receiving the call result, if the statement assigns one.
std::string result_var(const std::string& line, const std::string& name) {
    std::regex re("([A-Za-z_][A-Za-z0-9_]*)\\s*=\\s*" + name + "\\s*\\(");
    std::smatch m;
    if (std::regex_search(line, m, re)) return m[1];
    return "";
}

std::string indent_of(const std::string& line) {
    size_t i = line.find_first_not_of(" \t");
    return i == std::string::npos ? line : line.substr(0, i);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

}  // namespace

std::string load_skeleton(const std::string& dir, const std::string& name) {
    std::ifstream ifs(dir + "/" + name);
    if (!ifs) throw TransformError("cannot read skeleton " + dir + "/" + name);
    std::stringstream ss;
    ss << ifs.rdbuf();
    return ss.str();
}

Result fuzz_to_bench(const std::string& harness,
                     const std::string& prelude_skeleton,
                     const std::string& main_skeleton, const Options& opts) {
    // 1. Rename the fuzzing entry point.
    std::regex entry_re(
        "(extern\\s*\"C\"\\s*)?int\\s+LLVMFuzzerTestOneInput\\s*\\(");
    std::smatch entry_match;
    if (!std::regex_search(harness, entry_match, entry_re)) {
        throw TransformError("fuzzing entry point LLVMFuzzerTestOneInput not found");
    }
    std::string text = std::regex_replace(
        harness, entry_re, "static int decode_input(",
        std::regex_constants::format_first_only);

    // 2. Discover function pairs from <name>_opt call sites.
    std::vector<std::pair<std::string, std::string>> pairs;
    std::regex opt_call_re("\\b([A-Za-z_][A-Za-z0-9_]*)_opt\\s*\\(");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), opt_call_re);
         it != std::sregex_iterator(); ++it) {
        std::string base = (*it)[1];
        bool seen = false;
        for (const auto& p : pairs) seen = seen || p.first == base;
        if (!seen) pairs.emplace_back(base, base + "_opt");
    }
    if (pairs.empty()) {
        throw TransformError("no <name>_opt call sites found in the harness");
    }

    // 3. Locate the decode_input body (brace counting).
    size_t sig = text.find("static int decode_input(");
    size_t body_open = text.find('{', sig);
    if (body_open == std::string::npos) {
        throw TransformError("cannot locate the entry point body");
    }
    int depth = 0;
    size_t body_close = std::string::npos;
    for (size_t i = body_open; i < text.size(); ++i) {
        if (text[i] == '{') depth++;
        if (text[i] == '}' && --depth == 0) {
            body_close = i;
            break;
        }
    }
    if (body_close == std::string::npos) {
        throw TransformError("unbalanced braces in the entry point body");
    }

    // 4. Wrap every base/opt call statement in the body with timestamps
    //    and append the dead-code-elimination sink.
    std::string body = text.substr(body_open + 1, body_close - body_open - 1);
    std::vector<std::string> lines = split_lines(body);
    std::vector<std::string> out;
    int clock_id = 0;
    for (const auto& line : lines) {
        int matched_pair = -1;
        bool is_opt_side = false;
        for (size_t k = 0; k < pairs.size(); ++k) {
            if (line_calls(line, pairs[k].second)) {
                matched_pair = (int)k;
                is_opt_side = true;
                break;
            }
            if (line_calls(line, pairs[k].first)) {
                matched_pair = (int)k;
                break;
            }
        }
        if (matched_pair < 0) {
            out.push_back(line);
            continue;
        }
        Accumulators acc = accumulators_for((size_t)matched_pair);
        const std::string& callee =
            is_opt_side ? pairs[matched_pair].second : pairs[matched_pair].first;
        std::string t_acc = is_opt_side ? acc.t_opt : acc.t_base;
        std::string n_acc = is_opt_side ? acc.n_opt : acc.n_base;
        std::string ind = indent_of(line);
        std::string t0 = "__t" + std::to_string(clock_id++);
        std::string t1 = "__t" + std::to_string(clock_id++);
        out.push_back(ind + "uint64_t " + t0 + " = now_ns();");
        out.push_back(line);
        out.push_back(ind + "uint64_t " + t1 + " = now_ns();");
        out.push_back(ind + t_acc + " += (" + t1 + " - " + t0 + ");");
        out.push_back(ind + n_acc + "++;");
        std::string var = result_var(line, callee);
        if (!var.empty()) {
            out.push_back(ind + "g_sink ^= (uintptr_t)(const void*)&" + var + ";");
        }
    }
    std::string new_body;
    for (const auto& line : out) new_body += line + "\n";
    text = text.substr(0, body_open + 1) + "\n" + new_body +
           text.substr(body_close);

    // 5. Accumulator declarations for the prelude.
    std::string decls;
    for (size_t k = 0; k < pairs.size(); ++k) {
        Accumulators acc = accumulators_for(k);
        decls += "static uint64_t " + acc.t_base + " = 0;\n";
        decls += "static uint64_t " + acc.t_opt + "      = 0;\n";
        decls += "static uint64_t " + acc.n_base + "    = 0;\n";
        decls += "static uint64_t " + acc.n_opt + "        = 0;\n";
    }
    while (!decls.empty() && decls.back() == '\n') decls.pop_back();
    std::string prelude = replace_all(prelude_skeleton, "@ACCUMULATORS@", decls);

    // 6. Warmup save/restore and the report block for the driver.
    std::string save, restore, report;
    for (size_t k = 0; k < pairs.size(); ++k) {
        Accumulators acc = accumulators_for(k);
        std::string i = std::to_string(k);
        save += "    uint64_t sb" + i + "=" + acc.t_base + ", so" + i + "=" +
                acc.t_opt + ", nb" + i + "=" + acc.n_base + ", no" + i + "=" +
                acc.n_opt + ";\n";
        restore += "    " + acc.t_base + "=sb" + i + "; " + acc.t_opt + "=so" +
                   i + "; " + acc.n_base + "=nb" + i + "; " + acc.n_opt +
                   "=no" + i + ";\n";
    }
    while (!save.empty() && save.back() == '\n') save.pop_back();
    while (!restore.empty() && restore.back() == '\n') restore.pop_back();

    report += "    uint64_t tb = 0, to = 0, nb = 0, no = 0;\n";
    for (size_t k = 0; k < pairs.size(); ++k) {
        Accumulators acc = accumulators_for(k);
        report += "    tb += " + acc.t_base + "; to += " + acc.t_opt +
                  "; nb += " + acc.n_base + "; no += " + acc.n_opt + ";\n";
    }
    report +=
        "    double avg_b = nb ? (double)tb / (double)nb : 0.0;\n"
        "    double avg_o = no ? (double)to / (double)no : 0.0;\n"
        "    std::cout << \"iters=\" << iters << \"\\n\";\n"
        "    std::cout << \"baseline calls=\" << nb"
        " << \" avg(ns/call)=\" << avg_b << \"\\n\";\n"
        "    std::cout << \"opt      calls=\" << no"
        " << \" avg(ns/call)=\" << avg_o << \"\\n\";\n"
        "    if (avg_o > 0) std::cout << \"speedup=\" << (avg_b / avg_o)"
        " << \"x\\n\";\n";
    if (pairs.size() > 1) {
        for (size_t k = 0; k < pairs.size(); ++k) {
            Accumulators acc = accumulators_for(k);
            report += "    std::cout << \"pair " + pairs[k].first +
                      ": baseline avg(ns/call)=\" << (" + acc.n_base +
                      " ? (double)" + acc.t_base + " / (double)" + acc.n_base +
                      " : 0.0) << \" opt avg(ns/call)=\" << (" + acc.n_opt +
                      " ? (double)" + acc.t_opt + " / (double)" + acc.n_opt +
                      " : 0.0) << \"\\n\";\n";
        }
    }
    while (!report.empty() && report.back() == '\n') report.pop_back();

    std::string driver = main_skeleton;
    driver = replace_all(driver, "@DEFAULT_ITERS@", std::to_string(opts.default_iters));
    driver = replace_all(driver, "@WARMUP@", std::to_string(opts.warmup));
    driver = replace_all(driver, "@SAVE@", save);
    driver = replace_all(driver, "@RESTORE@", restore);
    driver = replace_all(driver, "@REPORT@", report);

    Result result;
    result.source = prelude + "\n" + text + "\n" + driver;
    result.pairs = pairs;
    return result;
}

}  // namespace f2b
