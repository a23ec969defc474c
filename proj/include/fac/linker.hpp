#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fac/diag.hpp"
#include "fac/format.hpp"
#include "fac/object.hpp"

namespace fac {

// STRICT enforces referential completeness: every hard undefined symbol must
// be defined by one of the libraries named on the link line. TOLERANT assigns
// slots regardless and leaves resolution to the loader.
enum class LinkMode { Strict, Tolerant };

struct StubSpec {
    std::string libName;
    std::vector<std::pair<std::string, std::uint32_t>> functions; // (name, arity)
    std::vector<std::string> variables;
};

// Combines relocatables into an executable or shared library. `libs` are the
// shared libraries given on the link line: they promise definitions for STRICT
// checking and are recorded in `needed` (in order), followed by `extraNeeded`
// names declared without a file. Nothing from `libs` is copied into the output.
inline ObjectModule link(const std::vector<ObjectModule>& inputs, ModuleKind kind,
                         LinkMode mode, const std::vector<ObjectModule>& libs = {},
                         const std::vector<std::string>& extraNeeded = {},
                         std::string outName = "out") {
    if (kind == ModuleKind::Relocatable)
        throw KindMismatch("link output must be a shared library or executable");
    for (const auto& in : inputs)
        if (in.kind != ModuleKind::Relocatable)
            throw KindMismatch("link input '" + in.name + "' is not relocatable");
    for (const auto& lib : libs)
        if (lib.kind != ModuleKind::SharedLib)
            throw KindMismatch("'" + lib.name + "' is not a shared library");

    ObjectModule out;
    out.name = std::move(outName);
    out.kind = kind;

    // Merge symbol tables in first-appearance order.
    std::map<std::string, std::uint32_t> mergedIdx;
    std::vector<std::uint32_t> funcBase(inputs.size()), dataBase(inputs.size());
    {
        std::uint32_t fb = 0, db = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            funcBase[i] = fb;
            dataBase[i] = db;
            fb += static_cast<std::uint32_t>(inputs[i].code.size());
            db += static_cast<std::uint32_t>(inputs[i].dataInit.size());
        }
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (const auto& s : inputs[i].symbols) {
            std::string name(inputs[i].symbol_name(s));
            std::uint32_t rebased =
                !s.defined() ? kNoLocation
                : s.kind == SymKind::Func ? s.location + funcBase[i]
                                          : s.location + dataBase[i];
            auto it = mergedIdx.find(name);
            if (it == mergedIdx.end()) {
                mergedIdx[name] = static_cast<std::uint32_t>(out.symbols.size());
                out.symbols.push_back({out.intern(name), s.kind, s.binding, rebased});
                continue;
            }
            SymbolEntry& e = out.symbols[it->second];
            if (e.kind != s.kind)
                throw KindMismatch("symbol '" + name + "' referenced as both FUNC and DATA");
            if (e.defined() && s.defined()) throw DuplicateSymbol(name);
            if (s.defined()) {
                e.binding = SymBinding::Defined;
                e.location = rebased;
            } else if (!e.defined() && s.binding == SymBinding::Undefined) {
                e.binding = SymBinding::Undefined; // hard reference beats weak
            }
        }
    }

    // Referential completeness (STRICT): hard undefined symbols must be
    // promised by a library on the link line. Weak references never fail.
    if (mode == LinkMode::Strict) {
        for (const auto& s : out.symbols) {
            if (s.binding != SymBinding::Undefined) continue;
            std::string name(out.symbol_name(s));
            bool promised = false;
            for (const auto& lib : libs) {
                const SymbolEntry* def = lib.find_symbol(name);
                if (def && def->defined()) {
                    if (def->kind != s.kind)
                        throw KindMismatch("symbol '" + name + "' has kind " +
                                           sym_kind_name(def->kind) + " in '" + lib.name +
                                           "' but is referenced as " + sym_kind_name(s.kind));
                    promised = true;
                    break;
                }
            }
            if (!promised) throw UndefinedReference(name);
        }
    }

    SlotLayouts layouts = derive_layouts(out);
    auto got_of = [&](std::string_view sym) { return *got_slot_of(out, layouts, sym); };
    auto plt_of = [&](std::string_view sym) { return *plt_slot_of(out, layouts, sym); };

    // Concatenate code and data, then resolve relocation sites: references to
    // symbols now defined in the output become direct calls (a FAC on one
    // folds to a fall-through jump), everything else gets its canonical slot.
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (const auto& f : inputs[i].code) {
            FuncBody nf = f;
            for (auto& in : nf.code) {
                if (in.op == Op::LOADS)
                    in.a = out.intern(inputs[i].str(in.a));
                else if (in.op == Op::CALLI)
                    in.a += funcBase[i];
            }
            out.code.push_back(std::move(nf));
        }
        for (auto v : inputs[i].dataInit) out.dataInit.push_back(v);

        for (const auto& r : inputs[i].relocations) {
            std::string name(inputs[i].str(r.symNameIdx));
            const SymbolEntry& sym = out.symbols[mergedIdx.at(name)];
            std::uint32_t gfunc = r.funcIdx + funcBase[i];
            Instruction& in = out.code[gfunc].code[r.instrIdx];
            if (sym.defined() && sym.kind == SymKind::Func) {
                if (in.op == Op::CALLX) {
                    in = {Op::CALLI, sym.location, 0};
                } else if (in.op == Op::FACJZ) {
                    in = {Op::JMP, r.instrIdx + 1, 0};
                }
                continue; // resolved internally; relocation dropped
            }
            std::uint32_t slot =
                r.kind == RelocKind::GotSlot ? got_of(name) : plt_of(name);
            if (r.operandIdx == 0)
                in.a = slot;
            else
                in.b = slot;
            out.relocations.push_back({gfunc, r.instrIdx, r.operandIdx,
                                       out.intern(name), r.kind});
        }
    }

    std::set<std::string> seenNeeded;
    for (const auto& lib : libs)
        if (seenNeeded.insert(lib.name).second) out.needed.push_back(out.intern(lib.name));
    for (const auto& n : extraNeeded)
        if (seenNeeded.insert(n).second) out.needed.push_back(out.intern(n));

    if (kind == ModuleKind::Executable) {
        const SymbolEntry* entry = out.find_symbol("main");
        if (!entry || entry->kind != SymKind::Func || !entry->defined())
            throw UndefinedReference("main");
    }
    validate_module(out);
    return out;
}

// Builds a dummy shared library whose functions trap with STUB_CALLED if they
// ever execute. Satisfies STRICT referential-completeness checks in place of a
// not-yet-available real library.
inline ObjectModule gen_stub(const StubSpec& spec) {
    ObjectModule m;
    m.name = spec.libName;
    m.kind = ModuleKind::SharedLib;
    std::set<std::string> names;
    for (std::size_t i = 0; i < spec.functions.size(); ++i) {
        const auto& [fname, arity] = spec.functions[i];
        if (!names.insert(fname).second) throw DuplicateSymbol(fname);
        if (arity > kMaxArity) throw EncodeError("stub arity too large for '" + fname + "'");
        m.symbols.push_back({m.intern(fname), SymKind::Func, SymBinding::Defined,
                             static_cast<std::uint32_t>(i)});
        FuncBody body;
        body.paramCount = arity;
        body.localCount = arity;
        body.code.push_back({Op::TRAP, static_cast<std::uint32_t>(TrapCode::StubCalled), 0});
        m.code.push_back(std::move(body));
    }
    for (std::size_t i = 0; i < spec.variables.size(); ++i) {
        const auto& vname = spec.variables[i];
        if (!names.insert(vname).second) throw DuplicateSymbol(vname);
        m.symbols.push_back({m.intern(vname), SymKind::Data, SymBinding::Defined,
                             static_cast<std::uint32_t>(i)});
        m.dataInit.push_back(0);
    }
    validate_module(m);
    return m;
}

} // namespace fac
