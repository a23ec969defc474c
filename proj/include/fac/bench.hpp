#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fac/diag.hpp"
#include "fac/subprocess.hpp"
#include "fac/vm.hpp"

namespace fac {

struct BenchConfig {
    // The toolchain binary used to launch programs; invoked as `<runner> facrun ...`.
    std::filesystem::path runner;
};

inline std::filesystem::path self_exe() {
    std::error_code ec;
    auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) throw Error("cannot resolve /proc/self/exe");
    return p;
}

struct OptionalLib {
    std::string name; // library name, file is <name>.facl
    std::filesystem::path file;
};

struct Combo {
    std::string label;
    std::vector<OptionalLib> present;
    std::uintmax_t totalBytes = 0;
};

inline std::string combo_label(const std::vector<OptionalLib>& present) {
    if (present.empty()) return "none";
    std::string s;
    for (const auto& l : present) {
        if (!s.empty()) s += '+';
        s += l.name;
    }
    return s;
}

// All 2^n subsets, ordered by decreasing total library byte size, ties broken
// by label.
inline std::vector<Combo> enumerate_combos(const std::vector<OptionalLib>& libs) {
    if (libs.size() > 16) throw Error("too many optional libraries");
    std::vector<Combo> out;
    for (std::uint32_t mask = 0; mask < (1u << libs.size()); ++mask) {
        Combo c;
        for (std::size_t i = 0; i < libs.size(); ++i) {
            if (mask & (1u << i)) {
                c.present.push_back(libs[i]);
                c.totalBytes += std::filesystem::file_size(libs[i].file);
            }
        }
        c.label = combo_label(c.present);
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const Combo& a, const Combo& b) {
        if (a.totalBytes != b.totalBytes) return a.totalBytes > b.totalBytes;
        return a.label < b.label;
    });
    return out;
}

namespace detail {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(path_, ec)) return;
        }
        throw Error("cannot create staging directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void stage_combo(const Combo& combo, const std::filesystem::path& dir) {
    for (const auto& lib : combo.present)
        std::filesystem::copy_file(lib.file, dir / (lib.name + ".facl"),
                                   std::filesystem::copy_options::overwrite_existing);
}

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

struct MatrixRow {
    std::string comboLabel;
    std::vector<std::string> presentLibs;
    std::string stdoutText;
    int exitCode = 0;
    bool pass = false;
};

struct MatrixReport {
    std::vector<MatrixRow> rows;

    bool all_pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }

    std::string to_csv() const {
        std::string out = "combo,present,exit_code,pass,stdout\n";
        for (const auto& r : rows) {
            std::string present;
            for (const auto& l : r.presentLibs) {
                if (!present.empty()) present += '+';
                present += l;
            }
            out += r.comboLabel + "," + present + "," + std::to_string(r.exitCode) + "," +
                   (r.pass ? "true" : "false") + "," + detail::csv_quote(r.stdoutText) + "\n";
        }
        return out;
    }
};

// Runs the executable once per presence combination, each in an isolated
// staging directory, without relinking anything in between. A program trap is
// a failing row, not a harness error.
inline MatrixReport run_matrix(const std::filesystem::path& exec,
                               const std::vector<OptionalLib>& optionalLibs,
                               const std::map<std::string, std::string>& expectations,
                               const BenchConfig& cfg) {
    if (!std::filesystem::exists(exec)) throw MissingExecutable(exec.string());
    MatrixReport rep;
    for (const Combo& combo : enumerate_combos(optionalLibs)) {
        detail::TempDir stage("facmatrix");
        detail::stage_combo(combo, stage.path());
        RunResult res = run_process(
            {cfg.runner.string(), "facrun", "--path", stage.path().string(), exec.string()},
            {{"FAC_LIBRARY_PATH", std::nullopt}, {"FAC_BENCH", std::nullopt}});
        MatrixRow row;
        row.comboLabel = combo.label;
        for (const auto& l : combo.present) row.presentLibs.push_back(l.name);
        row.stdoutText = res.out;
        row.exitCode = res.exitCode;
        auto it = expectations.find(combo.label);
        row.pass = it != expectations.end() && res.exitCode == 0 && res.out == it->second;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

struct TimingRow {
    std::string variant; // FAC or DYN
    std::string comboLabel;
    std::string policy; // eager or lazy
    int reps = 0;
    std::vector<double> initMicros;
    double medianUs = 0;
    double meanUs = 0;
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n == 0) return 0;
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Launch-to-main cost: the harness stamps the monotonic clock just before
// spawning, the runtime stamps it again at entry to main (FAC_BENCH=1), and
// the sample is the difference. Repetitions run strictly sequentially.
inline TimingRow measure_init(const std::filesystem::path& exec, const Combo& combo,
                              BindPolicy policy, int reps, const std::string& variant,
                              const BenchConfig& cfg) {
    if (reps < 100) throw Error("measure_init requires at least 100 repetitions");
    if (!std::filesystem::exists(exec)) throw MissingExecutable(exec.string());
    TimingRow row;
    row.variant = variant;
    row.comboLabel = combo.label;
    row.policy = policy == BindPolicy::Eager ? "eager" : "lazy";
    row.reps = reps;

    detail::TempDir stage("facinit");
    detail::stage_combo(combo, stage.path());
    std::vector<std::string> argv = {cfg.runner.string(), "facrun",
                                     "--path",           stage.path().string(),
                                     "--bind",           row.policy,
                                     exec.string()};
    for (int i = 0; i < reps; ++i) {
        std::uint64_t t0 = detail::monotonic_ns();
        RunResult res = run_process(argv, {{"FAC_BENCH", std::string("1")},
                                           {"FAC_LIBRARY_PATH", std::nullopt}});
        if (res.exitCode != 0)
            throw Error("bench target exited with " + std::to_string(res.exitCode) + ": " +
                        res.err);
        auto at = res.err.find("FAC_BENCH_PROBE_NS ");
        if (at == std::string::npos) throw Error("bench target emitted no probe");
        std::uint64_t probe = std::strtoull(res.err.c_str() + at + 19, nullptr, 10);
        if (probe < t0) throw Error("probe precedes launch; clocks inconsistent");
        row.initMicros.push_back(static_cast<double>(probe - t0) / 1000.0);
    }
    row.medianUs = median_of(row.initMicros);
    double sum = 0;
    for (double v : row.initMicros) sum += v;
    row.meanUs = sum / static_cast<double>(reps);
    return row;
}

inline std::string timing_csv_header() { return "variant,combo,policy,reps,median_us,mean_us\n"; }

inline std::string timing_csv_row(const TimingRow& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3f,%.3f", r.medianUs, r.meanUs);
    return r.variant + "," + r.comboLabel + "," + r.policy + "," + std::to_string(r.reps) +
           "," + buf + "\n";
}

struct LocReport {
    std::string fileA, fileB;
    std::size_t linesA = 0, linesB = 0;
    bool ratioDefined = false;
    double ratio = 0;
};

// Non-blank, non-comment lines; `//` starts a comment running to end of line.
inline std::size_t count_loc(const std::string& text) {
    std::size_t count = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto cut = line.find("//");
        if (cut != std::string::npos) line.erase(cut);
        if (line.find_first_not_of(" \t\r") != std::string::npos) ++count;
    }
    return count;
}

inline LocReport compare_loc(const std::filesystem::path& fileA,
                             const std::filesystem::path& fileB) {
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        if (!in) throw Error("cannot read " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    LocReport rep;
    rep.fileA = fileA.string();
    rep.fileB = fileB.string();
    rep.linesA = count_loc(slurp(fileA));
    rep.linesB = count_loc(slurp(fileB));
    if (rep.linesB > 0) {
        rep.ratioDefined = true;
        rep.ratio = static_cast<double>(rep.linesA) / static_cast<double>(rep.linesB);
    }
    return rep;
}

inline std::string loc_csv(const LocReport& r) {
    std::string out = "fileA,fileB,linesA,linesB,ratio\n";
    char buf[64];
    if (r.ratioDefined)
        std::snprintf(buf, sizeof buf, "%.4f", r.ratio);
    else
        std::snprintf(buf, sizeof buf, "undefined");
    out += r.fileA + "," + r.fileB + "," + std::to_string(r.linesA) + "," +
           std::to_string(r.linesB) + "," + buf + "\n";
    return out;
}

// Expectation files map combo labels to verbatim stdout blocks:
//   [libjpeg+libpng]
//   jpeg:handled
//   ...
// A block runs until the next [label] or end of file; trailing blank lines are
// trimmed and every content line contributes itself plus a newline. Lines
// starting with '#' outside a block are comments.
inline std::map<std::string, std::string>
parse_expect_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read " + file.string());
    std::map<std::string, std::string> out;
    std::string line, label;
    std::vector<std::string> block;
    auto flush = [&] {
        if (label.empty()) return;
        while (!block.empty() && block.back().empty()) block.pop_back();
        std::string text;
        for (const auto& l : block) text += l + "\n";
        out[label] = text;
        block.clear();
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() == '[') {
            auto close = line.find(']');
            if (close == std::string::npos) throw Error("unterminated label in " + file.string());
            flush();
            label = line.substr(1, close - 1);
            continue;
        }
        if (label.empty()) {
            if (line.empty() || line.front() == '#') continue;
            throw Error("content before first label in " + file.string());
        }
        block.push_back(line);
    }
    flush();
    return out;
}

} // namespace fac
