#pragma once

// Shared pipeline helpers for the unit suites: compile source text, link,
// place libraries in temp directories, and load images.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fac/bench.hpp" // detail::TempDir
#include "fac/classify.hpp"
#include "fac/codegen.hpp"
#include "fac/format.hpp"
#include "fac/linker.hpp"
#include "fac/loader.hpp"
#include "fac/parser.hpp"
#include "fac/vm.hpp"

namespace testutil {

namespace fs = std::filesystem;
using fac::detail::TempDir;

inline fac::ObjectModule compile_source(const std::string& name, const std::string& src,
                                        fac::CodegenOptions opts = {}) {
    fac::Ast ast = fac::classify_conditions(fac::parse(fac::SourceUnit{name, src}));
    return fac::compile_unit(ast, opts);
}

inline fs::path write_module(const fs::path& dir, const fac::ObjectModule& m,
                             const std::string& ext) {
    fs::path out = dir / (m.name + ext);
    auto bytes = fac::encode_module(m);
    std::ofstream f(out, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    return out;
}

inline fs::path make_lib(const fs::path& dir, const std::string& name, const std::string& src) {
    fac::ObjectModule lib =
        fac::link({compile_source(name, src)}, fac::ModuleKind::SharedLib,
                  fac::LinkMode::Tolerant, {}, {}, name);
    return write_module(dir, lib, ".facl");
}

inline fac::ObjectModule link_exe(const std::string& name, const std::string& src,
                                  const std::vector<std::string>& needed,
                                  fac::CodegenOptions opts = {}) {
    return fac::link({compile_source(name, src)}, fac::ModuleKind::Executable,
                     fac::LinkMode::Tolerant, {}, needed, name);
}

inline fac::ProcessImage load_exe(const fac::ObjectModule& exe,
                                  const std::vector<fs::path>& dirs,
                                  fac::BindPolicy policy = fac::BindPolicy::Eager) {
    return fac::load(fac::make_image(exe), dirs, policy);
}

} // namespace testutil
