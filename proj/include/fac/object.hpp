#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fac/diag.hpp"
#include "fac/isa.hpp"

namespace fac {

enum class ModuleKind : std::uint8_t { Relocatable = 0, SharedLib = 1, Executable = 2 };

inline const char* module_kind_name(ModuleKind k) {
    switch (k) {
    case ModuleKind::Relocatable: return "RELOCATABLE";
    case ModuleKind::SharedLib: return "SHARED_LIB";
    case ModuleKind::Executable: return "EXECUTABLE";
    }
    return "BAD";
}

enum class SymKind : std::uint8_t { Func = 0, Data = 1 };

inline const char* sym_kind_name(SymKind k) { return k == SymKind::Func ? "FUNC" : "DATA"; }

enum class SymBinding : std::uint8_t { Defined = 0, Undefined = 1, WeakUndefined = 2 };

inline constexpr std::uint32_t kNoLocation = 0xFFFFFFFFu;

// Defined FUNC: location is a function index into `code`.
// Defined DATA: location is a slot index into `dataInit`.
struct SymbolEntry {
    std::uint32_t nameIdx = 0; // string pool index
    SymKind kind = SymKind::Func;
    SymBinding binding = SymBinding::Defined;
    std::uint32_t location = kNoLocation;

    bool defined() const { return binding == SymBinding::Defined; }
    bool operator==(const SymbolEntry&) const = default;
};

enum class RelocKind : std::uint8_t { GotSlot = 0, PltSlot = 1 };

// A fix-up site: one operand of one instruction referring to a symbol by name.
// In linked modules the operand already carries the canonical slot index; the
// relocation is retained so slot assignments stay inspectable and decodable.
struct Relocation {
    std::uint32_t funcIdx = 0;
    std::uint32_t instrIdx = 0;
    std::uint8_t operandIdx = 0;
    std::uint32_t symNameIdx = 0; // string pool index
    RelocKind kind = RelocKind::GotSlot;

    bool operator==(const Relocation&) const = default;
};

struct FuncBody {
    std::uint32_t paramCount = 0;
    std::uint32_t localCount = 0; // includes params
    std::vector<Instruction> code;

    bool operator==(const FuncBody&) const = default;
};

// Relocatable unit, shared library, or executable. All names other than the
// module's own are indices into stringPool. The module name itself is not part
// of the serialized form; it travels as the file name (<name>.faco/.facl/.facx).
struct ObjectModule {
    std::string name;
    ModuleKind kind = ModuleKind::Relocatable;
    std::vector<std::string> stringPool;
    std::vector<std::uint32_t> needed; // string pool indices, search precedence order
    std::vector<SymbolEntry> symbols;
    std::vector<Relocation> relocations;
    std::vector<std::int64_t> dataInit;
    std::vector<FuncBody> code;

    bool operator==(const ObjectModule&) const = default;

    std::string_view str(std::uint32_t idx) const { return stringPool.at(idx); }

    std::uint32_t intern(std::string_view s) {
        for (std::uint32_t i = 0; i < stringPool.size(); ++i)
            if (stringPool[i] == s) return i;
        stringPool.emplace_back(s);
        return static_cast<std::uint32_t>(stringPool.size() - 1);
    }

    std::string_view symbol_name(const SymbolEntry& e) const { return str(e.nameIdx); }

    const SymbolEntry* find_symbol(std::string_view name) const {
        for (const auto& s : symbols)
            if (symbol_name(s) == name) return &s;
        return nullptr;
    }

    std::vector<std::string> needed_names() const {
        std::vector<std::string> out;
        out.reserve(needed.size());
        for (auto idx : needed) out.emplace_back(str(idx));
        return out;
    }

    std::size_t instruction_count() const {
        std::size_t n = 0;
        for (const auto& f : code) n += f.code.size();
        return n;
    }
};

// Canonical slot assignment, derived from the symbol table alone so that
// GOT/PLT layouts survive serialization without a dedicated section:
//   GOT: every symbol that is undefined or is DATA, in symbol-table order.
//   PLT: every undefined FUNC symbol, in symbol-table order.
struct SlotLayouts {
    std::vector<std::uint32_t> gotSyms; // symbol-table indices
    std::vector<std::uint32_t> pltSyms;

    bool operator==(const SlotLayouts&) const = default;
};

inline SlotLayouts derive_layouts(const ObjectModule& m) {
    SlotLayouts out;
    for (std::uint32_t i = 0; i < m.symbols.size(); ++i) {
        const auto& s = m.symbols[i];
        if (!s.defined() || s.kind == SymKind::Data) out.gotSyms.push_back(i);
        if (!s.defined() && s.kind == SymKind::Func) out.pltSyms.push_back(i);
    }
    return out;
}

inline std::optional<std::uint32_t> got_slot_of(const ObjectModule& m, const SlotLayouts& l,
                                                std::string_view symbol) {
    for (std::uint32_t i = 0; i < l.gotSyms.size(); ++i)
        if (m.symbol_name(m.symbols[l.gotSyms[i]]) == symbol) return i;
    return std::nullopt;
}

inline std::optional<std::uint32_t> plt_slot_of(const ObjectModule& m, const SlotLayouts& l,
                                                std::string_view symbol) {
    for (std::uint32_t i = 0; i < l.pltSyms.size(); ++i)
        if (m.symbol_name(m.symbols[l.pltSyms[i]]) == symbol) return i;
    return std::nullopt;
}

// Linked program ready for loading.
struct ExecutableImage {
    ObjectModule module;
    SlotLayouts layouts;
    std::uint32_t entryFunc = 0;

    std::vector<std::string> got_layout_names() const {
        std::vector<std::string> out;
        for (auto si : layouts.gotSyms) out.emplace_back(module.symbol_name(module.symbols[si]));
        return out;
    }
};

inline ExecutableImage make_image(ObjectModule m) {
    if (m.kind != ModuleKind::Executable)
        throw KindMismatch("not an executable: " + m.name);
    const SymbolEntry* entry = m.find_symbol("main");
    if (!entry || entry->kind != SymKind::Func || !entry->defined())
        throw UndefinedReference("main");
    ExecutableImage img;
    img.entryFunc = entry->location;
    img.layouts = derive_layouts(m);
    img.module = std::move(m);
    return img;
}

} // namespace fac
