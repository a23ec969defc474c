#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fac/bench.hpp"
#include "fac/classify.hpp"
#include "fac/codegen.hpp"
#include "fac/format.hpp"
#include "fac/linker.hpp"
#include "fac/loader.hpp"
#include "fac/parser.hpp"
#include "fac/vm.hpp"

namespace fac::cli {

namespace fs = std::filesystem;

inline std::string slurp_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::uint8_t> slurp_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// --path flags first, then FAC_LIBRARY_PATH entries at lower precedence.
inline std::vector<fs::path> search_path_from(const std::vector<std::string>& pathFlags) {
    std::vector<fs::path> dirs;
    for (const auto& d : pathFlags) dirs.emplace_back(d);
    if (const char* env = std::getenv("FAC_LIBRARY_PATH")) {
        std::string_view rest(env);
        while (!rest.empty()) {
            auto colon = rest.find(':');
            std::string_view part = rest.substr(0, colon);
            if (!part.empty()) dirs.emplace_back(std::string(part));
            if (colon == std::string_view::npos) break;
            rest.remove_prefix(colon + 1);
        }
    }
    return dirs;
}

inline int parse_with(CLI::App& app, std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << app.get_name() << ": " << e.what() << "\n";
        std::cerr << "run '" << app.get_name() << " --help' for usage\n";
        return 2;
    }
    return -1; // parsed, run the tool
}

inline BindPolicy bind_from(const std::string& s) {
    if (s == "eager") return BindPolicy::Eager;
    if (s == "lazy") return BindPolicy::Lazy;
    throw CLI::ValidationError("--bind", "must be 'eager' or 'lazy'");
}

inline int tool_facc(std::vector<std::string> args) {
    CLI::App app{"compile a .mc source file to a relocatable object", "facc"};
    std::string mode = "fac", input, output;
    app.add_option("--mode", mode, "codegen mode: fac or weak")
        ->check(CLI::IsMember({"fac", "weak"}));
    app.add_option("-o,--output", output, "output file (default: input with .faco)");
    app.add_option("input", input, "source file (.mc)")->required();
    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;

    fs::path in(input);
    fs::path out = output.empty() ? fs::path(in).replace_extension(".faco") : fs::path(output);
    try {
        SourceUnit unit{in.stem().string(), slurp_text(in)};
        std::vector<Diagnostic> warnings;
        Ast ast = classify_conditions(parse(unit), &warnings);
        for (const auto& w : warnings) std::cerr << w.str() << "\n";
        CodegenOptions opts;
        opts.mode = mode == "weak" ? CodegenMode::WeakAlias : CodegenMode::FacNative;
        ObjectModule m = compile_unit(ast, opts);
        write_bytes(out, encode_module(m));
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int tool_facld(std::vector<std::string> args) {
    CLI::App app{"link relocatables into an executable or shared library", "facld"};
    bool strict = false, tolerant = false, shared = false;
    std::string output;
    std::vector<std::string> neededFlags, inputs;
    app.add_flag("--strict", strict, "fail on undefined hard references (default)");
    app.add_flag("--tolerant", tolerant, "assign slots to undefined references");
    app.add_flag("--shared", shared, "produce a shared library");
    app.add_option("--needed", neededFlags, "declare a needed library without a file");
    app.add_option("-o,--output", output, "output file")->required();
    app.add_option("inputs", inputs, "input files (.faco objects, .facl library promises)")
        ->required();
    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;
    if (strict && tolerant) {
        std::cerr << "facld: --strict and --tolerant are mutually exclusive\n";
        return 2;
    }

    try {
        std::vector<ObjectModule> objects, libs;
        for (const auto& f : inputs) {
            fs::path p(f);
            ObjectModule m = decode_module(slurp_bytes(p), p.stem().string());
            if (m.kind == ModuleKind::Relocatable)
                objects.push_back(std::move(m));
            else if (m.kind == ModuleKind::SharedLib)
                libs.push_back(std::move(m));
            else
                throw KindMismatch("'" + f + "' is an executable; expected .faco or .facl");
        }
        fs::path out(output);
        ObjectModule linked =
            link(objects, shared ? ModuleKind::SharedLib : ModuleKind::Executable,
                 tolerant ? LinkMode::Tolerant : LinkMode::Strict, libs, neededFlags,
                 out.stem().string());
        write_bytes(out, encode_module(linked));
    } catch (const Error& e) {
        std::cerr << "facld: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// Stub spec files: one declaration per line, `func name/arity` or `var name`.
// Blank lines and lines starting with '#' are ignored.
inline StubSpec parse_stub_spec(const fs::path& file, std::string libName) {
    StubSpec spec;
    spec.libName = std::move(libName);
    std::ifstream in(file);
    if (!in) throw Error("cannot read " + file.string());
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::string kind, rest;
        ls >> kind >> rest;
        std::string extra;
        if (ls >> extra || rest.empty())
            throw Error(file.string() + ":" + std::to_string(lineNo) + ": malformed line");
        if (kind == "func") {
            auto slash = rest.find('/');
            if (slash == std::string::npos)
                throw Error(file.string() + ":" + std::to_string(lineNo) +
                            ": expected 'func name/arity'");
            std::string name = rest.substr(0, slash);
            char* end = nullptr;
            unsigned long arity = std::strtoul(rest.c_str() + slash + 1, &end, 10);
            if (name.empty() || end == rest.c_str() + slash + 1 || *end != '\0')
                throw Error(file.string() + ":" + std::to_string(lineNo) + ": bad arity");
            spec.functions.emplace_back(name, static_cast<std::uint32_t>(arity));
        } else if (kind == "var") {
            spec.variables.push_back(rest);
        } else {
            throw Error(file.string() + ":" + std::to_string(lineNo) +
                        ": expected 'func' or 'var'");
        }
    }
    return spec;
}

inline int tool_facstub(std::vector<std::string> args) {
    CLI::App app{"generate a dummy library satisfying strict link checks", "facstub"};
    std::string specFile, output;
    app.add_option("--spec", specFile, "stub spec file: 'func name/arity' or 'var name' lines")
        ->required();
    app.add_option("-o,--output", output, "output library (.facl); its stem names the library")
        ->required();
    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;

    try {
        fs::path out(output);
        StubSpec spec = parse_stub_spec(specFile, out.stem().string());
        write_bytes(out, encode_module(gen_stub(spec)));
    } catch (const Error& e) {
        std::cerr << "facstub: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int tool_facrun(std::vector<std::string> args) {
    CLI::App app{"load and execute a program, tolerating missing libraries", "facrun"};
    std::vector<std::string> pathFlags;
    std::string bind = "lazy", exe;
    std::vector<std::int64_t> progArgs;
    app.add_option("--path", pathFlags, "library search directory (repeatable, ordered)");
    app.add_option("--bind", bind, "binding policy: eager or lazy (default lazy)")
        ->check(CLI::IsMember({"eager", "lazy"}));
    app.add_option("executable", exe, "program file (.facx)")->required();
    app.add_option("args", progArgs, "integer arguments passed to main");
    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;

    try {
        fs::path exePath(exe);
        if (!fs::exists(exePath)) throw MissingExecutable(exe);
        ExecutableImage image = make_image(decode_module(slurp_bytes(exePath),
                                                         exePath.stem().string()));
        ProcessImage p = load(std::move(image), search_path_from(pathFlags), bind_from(bind));
        RunOptions opts;
        const char* benchEnv = std::getenv("FAC_BENCH");
        if (benchEnv && std::string_view(benchEnv) == "1") opts.probeStream = stderr;
        ExitReport rep = run(p, progArgs, opts);
        std::fwrite(rep.stdoutText.data(), 1, rep.stdoutText.size(), stdout);
        std::fflush(stdout);
        if (rep.trap)
            std::cerr << "facrun: trap " << trap_name(rep.trap->code) << " at "
                      << rep.trap->location << "\n";
        return rep.exitCode;
    } catch (const FormatError& e) {
        std::cerr << "facrun: error: " << e.what() << "\n";
        return static_cast<int>(TrapCode::FormatTrap);
    } catch (const Error& e) {
        std::cerr << "facrun: error: " << e.what() << "\n";
        return 1;
    }
}

inline int tool_facinspect(std::vector<std::string> args) {
    CLI::App app{"inspect GOT state, disassembly, or module statistics", "facinspect"};
    std::string gotExe, codeMod, statsMod, bind = "lazy";
    std::vector<std::string> pathFlags;
    auto* gotOpt = app.add_option("--got", gotExe, "load an executable and report GOT slots");
    auto* codeOpt = app.add_option("--code", codeMod, "disassemble a module");
    auto* statsOpt = app.add_option("--stats", statsMod, "print module statistics");
    app.add_option("--path", pathFlags, "library search directory (repeatable)");
    app.add_option("--bind", bind, "binding policy for --got (default lazy)")
        ->check(CLI::IsMember({"eager", "lazy"}));
    gotOpt->excludes(codeOpt)->excludes(statsOpt);
    codeOpt->excludes(statsOpt);
    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;
    if (gotExe.empty() && codeMod.empty() && statsMod.empty()) {
        std::cerr << "facinspect: one of --got, --code, --stats is required\n";
        return 2;
    }

    try {
        if (!gotExe.empty()) {
            fs::path exePath(gotExe);
            if (!fs::exists(exePath)) throw MissingExecutable(gotExe);
            ExecutableImage image = make_image(decode_module(slurp_bytes(exePath),
                                                             exePath.stem().string()));
            ProcessImage p =
                load(std::move(image), search_path_from(pathFlags), bind_from(bind));
            std::cout << inspect(p).to_tsv();
            return 0;
        }
        fs::path modPath(codeMod.empty() ? statsMod : codeMod);
        ObjectModule m = decode_module(slurp_bytes(modPath), modPath.stem().string());
        if (!codeMod.empty()) {
            for (std::uint32_t fi = 0; fi < m.code.size(); ++fi) {
                const FuncBody& f = m.code[fi];
                std::string fname = "?";
                for (const auto& s : m.symbols)
                    if (s.kind == SymKind::Func && s.defined() && s.location == fi)
                        fname = std::string(m.symbol_name(s));
                std::cout << "func " << fname << " (params=" << f.paramCount
                          << " locals=" << f.localCount << ")\n";
                for (std::uint32_t i = 0; i < f.code.size(); ++i)
                    std::cout << "  " << i << ": " << disasm(f.code[i]) << "\n";
            }
        } else {
            SlotLayouts layouts = derive_layouts(m);
            std::cout << "kind\t" << module_kind_name(m.kind) << "\n"
                      << "functions\t" << m.code.size() << "\n"
                      << "instructions\t" << m.instruction_count() << "\n"
                      << "got_slots\t" << layouts.gotSyms.size() << "\n"
                      << "plt_slots\t" << layouts.pltSyms.size() << "\n"
                      << "needed\t" << m.needed.size() << "\n";
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "facinspect: error: " << e.what() << "\n";
        return 1;
    }
}

inline int tool_facbench(std::vector<std::string> args) {
    CLI::App app{"availability-matrix, init-cost, and line-count reports", "facbench"};
    app.require_subcommand(1);

    auto* matrix = app.add_subcommand("matrix", "run all presence combinations");
    std::string mExec, mLibs, mExpect;
    matrix->add_option("--exec", mExec, "program to run")->required();
    matrix->add_option("--libs", mLibs, "directory holding the optional .facl files")
        ->required();
    matrix->add_option("--expect", mExpect, "expected-stdout file")->required();

    auto* init = app.add_subcommand("init", "measure launch-to-main cost");
    std::string iExec, iCombo, iBind = "lazy", iLibs, iVariant;
    int iReps = 100;
    init->add_option("--exec", iExec, "program to run")->required();
    init->add_option("--combo", iCombo, "comma-separated present libraries, or 'none'")
        ->required();
    init->add_option("--bind", iBind, "binding policy (default lazy)")
        ->check(CLI::IsMember({"eager", "lazy"}));
    init->add_option("--reps", iReps, "repetitions (>= 100)");
    init->add_option("--libs", iLibs, "directory holding .facl files (default: FAC_LIBRARY_PATH)");
    init->add_option("--variant", iVariant, "row label: FAC or DYN (default from exec name)");

    auto* loc = app.add_subcommand("loc", "count non-blank, non-comment lines");
    std::string locA, locB;
    loc->add_option("fileA", locA, "numerator file")->required();
    loc->add_option("fileB", locB, "denominator file")->required();

    if (int rc = parse_with(app, std::move(args)); rc >= 0) return rc;

    try {
        BenchConfig cfg{self_exe()};
        if (matrix->parsed()) {
            std::vector<OptionalLib> libs;
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(mLibs))
                if (entry.path().extension() == ".facl") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) libs.push_back({f.stem().string(), f});
            MatrixReport rep =
                run_matrix(mExec, libs, parse_expect_file(mExpect), cfg);
            std::cout << rep.to_csv();
            return rep.all_pass() ? 0 : 1;
        }
        if (init->parsed()) {
            Combo combo;
            if (iCombo != "none" && !iCombo.empty()) {
                std::istringstream ss(iCombo);
                std::string name;
                while (std::getline(ss, name, ',')) {
                    std::vector<fs::path> dirs;
                    if (!iLibs.empty()) dirs.emplace_back(iLibs);
                    auto env = search_path_from({});
                    dirs.insert(dirs.end(), env.begin(), env.end());
                    auto found = detail::find_library(name, dirs);
                    if (!found) throw Error("library '" + name + "' not found");
                    combo.present.push_back({name, *found});
                    combo.totalBytes += fs::file_size(*found);
                }
            }
            combo.label = combo_label(combo.present);
            std::string variant = iVariant;
            if (variant.empty()) {
                std::string stem = fs::path(iExec).stem().string();
                variant = stem.find("dyn") != std::string::npos ? "DYN" : "FAC";
            }
            TimingRow row = measure_init(iExec, combo, bind_from(iBind), iReps, variant, cfg);
            std::cout << timing_csv_header() << timing_csv_row(row);
            return 0;
        }
        LocReport rep = compare_loc(locA, locB);
        std::cout << loc_csv(rep);
        return 0;
    } catch (const Error& e) {
        std::cerr << "facbench: error: " << e.what() << "\n";
        return 1;
    }
}

inline const std::vector<std::string>& tool_names() {
    static const std::vector<std::string> names = {"facc",   "facld",      "facstub",
                                                   "facrun", "facinspect", "facbench"};
    return names;
}

// Routes to a tool by name. args[0] is the tool name.
inline int dispatch(std::vector<std::string> args) {
    if (args.empty()) {
        std::cerr << "usage: fac TOOL [ARGS...]\n";
        return 2;
    }
    std::string tool = fs::path(args[0]).stem().string();
    std::vector<std::string> rest(args.begin() + 1, args.end());
    if (tool == "facc") return tool_facc(std::move(rest));
    if (tool == "facld") return tool_facld(std::move(rest));
    if (tool == "facstub") return tool_facstub(std::move(rest));
    if (tool == "facrun") return tool_facrun(std::move(rest));
    if (tool == "facinspect") return tool_facinspect(std::move(rest));
    if (tool == "facbench") return tool_facbench(std::move(rest));
    std::cerr << "fac: unknown tool '" << tool << "'\n";
    return 2;
}

// Entry point shared by the multiplexed `fac` binary and the per-tool names:
// the executable's own name selects the tool, falling back to argv[1].
inline int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.empty()) return 2;
    std::string self = fs::path(args[0]).stem().string();
    for (const auto& t : tool_names())
        if (self == t) return dispatch({args.begin(), args.end()});
    if (args.size() < 2 || args[1] == "--help" || args[1] == "-h") {
        std::printf("usage: fac TOOL [ARGS...]\n\ntools:\n");
        std::printf("  facc        compile .mc source to a relocatable object\n");
        std::printf("  facld       link objects into an executable or shared library\n");
        std::printf("  facstub     generate a dummy library for strict linking\n");
        std::printf("  facrun      load and execute a program\n");
        std::printf("  facinspect  report GOT state, disassembly, statistics\n");
        std::printf("  facbench    availability matrix, init cost, line counts\n");
        return (args.size() >= 2) ? 0 : 2;
    }
    return dispatch({args.begin() + 1, args.end()});
}

} // namespace fac::cli
