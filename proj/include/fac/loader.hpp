#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fac/diag.hpp"
#include "fac/format.hpp"
#include "fac/object.hpp"
#include "fac/value.hpp"

namespace fac {

enum class BindPolicy { Eager, Lazy };

enum class SlotState : std::uint8_t { Bound, NullSentinel, LazyStub, PoisonedData };

inline const char* slot_state_name(SlotState s) {
    switch (s) {
    case SlotState::Bound: return "BOUND";
    case SlotState::NullSentinel: return "NULL_SENTINEL";
    case SlotState::LazyStub: return "LAZY_STUB";
    case SlotState::PoisonedData: return "POISONED_DATA";
    }
    return "BAD";
}

struct RuntimeModule;

// One GOT entry. Bound slots address a function or data slot in a loaded
// module; the null sentinel marks a function whose definition was nowhere to
// be found at load time and is exactly what a FAC tests.
struct GotSlot {
    SlotState state = SlotState::NullSentinel;
    RuntimeModule* mod = nullptr; // Bound
    std::uint32_t index = 0;      // Bound: function index or data slot
    bool isData = false;
    std::uint32_t pltIdx = 0;     // LazyStub
};

struct RuntimeModule {
    std::string name;
    ObjectModule obj;
    SlotLayouts layouts;
    std::vector<GotSlot> got;           // one per layouts.gotSyms entry
    std::vector<RuntimeValue> data;     // initialized from obj.dataInit
    std::vector<std::uint32_t> pltGotIdx;  // plt index -> got index

    std::string_view func_name(std::uint32_t funcIdx) const {
        for (const auto& s : obj.symbols)
            if (s.kind == SymKind::Func && s.defined() && s.location == funcIdx)
                return obj.symbol_name(s);
        return "?";
    }
};

struct ProcessImage {
    std::unique_ptr<RuntimeModule> exe;
    std::vector<std::unique_ptr<RuntimeModule>> libs; // breadth-first load order
    std::vector<std::string> absentLibs;              // first-encounter order
    BindPolicy policy = BindPolicy::Eager;
    std::vector<std::filesystem::path> searchPath;

    // Runtime-opened libraries live in a namespace disjoint from the startup
    // GOT: they can never satisfy a FAC.
    struct DlLib {
        std::string name;
        std::unique_ptr<RuntimeModule> mod;
        int refs = 0;
        bool alive = true;
    };
    struct DlHandle {
        std::uint32_t libIdx = 0;
        bool open = false;
    };
    std::vector<DlLib> dlLibs;
    std::vector<DlHandle> dlHandles;

    RuntimeModule* find_loaded(std::string_view name) const {
        for (const auto& l : libs)
            if (l->name == name) return l.get();
        return nullptr;
    }

    // Symbol resolution scope: executable first, then libraries in load order.
    std::vector<RuntimeModule*> scope() const {
        std::vector<RuntimeModule*> s;
        s.push_back(exe.get());
        for (const auto& l : libs) s.push_back(l.get());
        return s;
    }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline std::optional<std::filesystem::path>
find_library(std::string_view name, const std::vector<std::filesystem::path>& searchPath) {
    for (const auto& dir : searchPath) {
        std::filesystem::path cand = dir / (std::string(name) + ".facl");
        std::error_code ec;
        if (std::filesystem::exists(cand, ec)) return cand;
    }
    return std::nullopt;
}

inline std::unique_ptr<RuntimeModule> make_runtime_module(ObjectModule obj) {
    auto rm = std::make_unique<RuntimeModule>();
    rm->name = obj.name;
    rm->layouts = derive_layouts(obj);
    rm->obj = std::move(obj);
    rm->data.reserve(rm->obj.dataInit.size());
    for (auto v : rm->obj.dataInit) rm->data.emplace_back(v);
    rm->got.resize(rm->layouts.gotSyms.size());
    for (std::uint32_t i = 0; i < rm->layouts.pltSyms.size(); ++i) {
        const auto& sym = rm->obj.symbols[rm->layouts.pltSyms[i]];
        auto slot = got_slot_of(rm->obj, rm->layouts, rm->obj.symbol_name(sym));
        rm->pltGotIdx.push_back(*slot);
    }
    return rm;
}

struct Definition {
    RuntimeModule* mod;
    const SymbolEntry* sym;
};

inline std::optional<Definition> find_definition(const std::vector<RuntimeModule*>& scope,
                                                 std::string_view name) {
    for (RuntimeModule* m : scope) {
        const SymbolEntry* s = m->obj.find_symbol(name);
        if (s && s->defined()) return Definition{m, s};
    }
    return std::nullopt;
}

// Resolves every GOT slot of `rm` against `scope`. Functions found under the
// lazy policy defer binding behind a non-null lazy stub; data binds eagerly.
// Unresolved functions get the null sentinel, unresolved data is poisoned.
inline void resolve_got(RuntimeModule& rm, const std::vector<RuntimeModule*>& scope,
                        BindPolicy policy) {
    for (std::uint32_t i = 0; i < rm.layouts.gotSyms.size(); ++i) {
        const SymbolEntry& sym = rm.obj.symbols[rm.layouts.gotSyms[i]];
        std::string_view name = rm.obj.symbol_name(sym);
        GotSlot& slot = rm.got[i];
        if (sym.defined()) { // own data keeps a GOT slot
            slot = {SlotState::Bound, &rm, sym.location, true, 0};
            continue;
        }
        auto def = find_definition(scope, name);
        if (!def) {
            slot.state = sym.kind == SymKind::Func ? SlotState::NullSentinel
                                                   : SlotState::PoisonedData;
            slot.isData = sym.kind == SymKind::Data;
            continue;
        }
        if (def->sym->kind != sym.kind)
            throw KindMismatch("symbol '" + std::string(name) + "' resolved to " +
                               sym_kind_name(def->sym->kind) + " in '" + def->mod->name +
                               "' but is referenced as " + sym_kind_name(sym.kind));
        if (sym.kind == SymKind::Data) {
            slot = {SlotState::Bound, def->mod, def->sym->location, true, 0};
        } else if (policy == BindPolicy::Eager) {
            slot = {SlotState::Bound, def->mod, def->sym->location, false, 0};
        } else {
            auto plt = plt_slot_of(rm.obj, rm.layouts, name);
            slot = {SlotState::LazyStub, nullptr, 0, false, *plt};
        }
    }
}

} // namespace detail

// Loads an executable image and its needed libraries, breadth-first over the
// needed graph. A missing library is never fatal: its functions get null
// sentinels and its data slots are poisoned.
inline ProcessImage load(ExecutableImage image,
                         std::vector<std::filesystem::path> searchPath,
                         BindPolicy policy) {
    ProcessImage p;
    p.policy = policy;
    p.searchPath = std::move(searchPath);

    p.exe = detail::make_runtime_module(std::move(image.module));

    std::deque<std::string> queue;
    std::set<std::string> enqueued;
    for (const auto& n : p.exe->obj.needed_names())
        if (enqueued.insert(n).second) queue.push_back(n);

    std::set<std::string> absent;
    while (!queue.empty()) {
        std::string name = queue.front();
        queue.pop_front();
        auto path = detail::find_library(name, p.searchPath);
        if (!path) {
            if (absent.insert(name).second) p.absentLibs.push_back(name);
            continue;
        }
        ObjectModule obj = decode_module(detail::read_file(*path), name);
        if (obj.kind != ModuleKind::SharedLib)
            throw KindMismatch("'" + path->string() + "' is not a shared library");
        auto rm = detail::make_runtime_module(std::move(obj));
        for (const auto& n : rm->obj.needed_names())
            if (enqueued.insert(n).second) queue.push_back(n);
        p.libs.push_back(std::move(rm));
    }

    auto scope = p.scope();
    for (RuntimeModule* m : scope) detail::resolve_got(*m, scope, policy);
    return p;
}

// Binds one lazily-deferred slot of `rm` and returns the bound slot. Failure
// to find the symbol at this point means the image was corrupted after load:
// absent-library functions are null sentinels, never lazy stubs.
inline const GotSlot& lazy_resolve_in(ProcessImage& p, RuntimeModule& rm,
                                      std::uint32_t pltIdx) {
    if (pltIdx >= rm.layouts.pltSyms.size())
        throw Trap(TrapCode::UnresolvedCall, rm.name + ":plt+" + std::to_string(pltIdx));
    const SymbolEntry& sym = rm.obj.symbols[rm.layouts.pltSyms[pltIdx]];
    std::string_view name = rm.obj.symbol_name(sym);
    GotSlot& slot = rm.got[rm.pltGotIdx[pltIdx]];
    if (slot.state == SlotState::Bound) return slot; // already resolved
    auto def = detail::find_definition(p.scope(), name);
    if (!def || def->sym->kind != SymKind::Func)
        throw Trap(TrapCode::UnresolvedCall, rm.name + ":" + std::string(name));
    slot = {SlotState::Bound, def->mod, def->sym->location, false, 0};
    return slot;
}

inline const GotSlot& lazy_resolve(ProcessImage& p, std::uint32_t pltIdx) {
    return lazy_resolve_in(p, *p.exe, pltIdx);
}

// Per-slot availability report for the executable's GOT.
struct GotReport {
    struct Row {
        std::uint32_t slot;
        std::string symbol;
        SymKind kind;
        std::string lib; // defining module name, or "ABSENT"
        SlotState state;
    };
    std::vector<Row> rows;
    std::vector<std::string> loaded;
    std::vector<std::string> absent;

    std::string to_tsv() const {
        std::string out = "slot\tsymbol\tkind\tlib\tstate\n";
        for (const auto& r : rows) {
            out += std::to_string(r.slot);
            out += '\t';
            out += r.symbol;
            out += '\t';
            out += sym_kind_name(r.kind);
            out += '\t';
            out += r.lib;
            out += '\t';
            out += slot_state_name(r.state);
            out += '\n';
        }
        for (const auto& l : loaded) out += "loaded\t" + l + "\n";
        for (const auto& a : absent) out += "absent\t" + a + "\n";
        return out;
    }
};

inline GotReport inspect(const ProcessImage& p) {
    GotReport rep;
    auto scope = p.scope();
    for (std::uint32_t i = 0; i < p.exe->got.size(); ++i) {
        const SymbolEntry& sym = p.exe->obj.symbols[p.exe->layouts.gotSyms[i]];
        std::string_view name = p.exe->obj.symbol_name(sym);
        const GotSlot& slot = p.exe->got[i];
        GotReport::Row row{i, std::string(name), sym.kind, "ABSENT", slot.state};
        if (slot.state == SlotState::Bound) {
            row.lib = slot.mod->name;
        } else if (slot.state == SlotState::LazyStub) {
            auto def = detail::find_definition(scope, name);
            row.lib = def ? def->mod->name : "ABSENT";
        }
        rep.rows.push_back(std::move(row));
    }
    for (const auto& l : p.libs) rep.loaded.push_back(l->name);
    rep.absent = p.absentLibs;
    return rep;
}

} // namespace fac
