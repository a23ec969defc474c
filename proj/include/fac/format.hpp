#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fac/diag.hpp"
#include "fac/object.hpp"

// FACM container, version 1. Little-endian throughout.
//
//   offset 0: magic "FACM" (46 41 43 4D)
//   offset 4: u16 version (= 1)
//   offset 6: u8 module kind (0 relocatable, 1 shared library, 2 executable)
//   then six length-prefixed sections in fixed order:
//     STRS, NEED, SYMS, RELS, DATA, CODE
//   each section is a u32 payload byte length followed by the payload.
//
// Section payloads (all counts and indices u32 unless noted):
//   STRS: count, then per string: byte length + raw UTF-8 bytes
//   NEED: count, then one string index per needed library
//   SYMS: count, then per symbol: nameIdx, u8 kind, u8 binding, location
//   RELS: count, then per reloc: funcIdx, instrIdx, u8 operandIdx, symNameIdx, u8 kind
//   DATA: count, then one u64 (two's-complement i64) initial value per slot
//   CODE: count, then per function: paramCount, localCount, instrCount,
//         then instructions as u8 opcode + one u32 per operand
//
// The module name is not serialized; it is carried by the file name.

namespace fac {

inline constexpr std::uint8_t kFacmMagic[4] = {0x46, 0x41, 0x43, 0x4D};
inline constexpr std::uint16_t kFacmVersion = 1;
inline constexpr std::uint32_t kMaxArity = 64;

namespace detail {

struct ByteWriter {
    std::vector<std::uint8_t> out;

    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
};

struct ByteReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > size) throw FormatError(pos, std::string("truncated ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data[pos++];
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data + pos), n);
        pos += n;
        return s;
    }
};

} // namespace detail

// Shared semantic checks. `strict` distinguishes linked modules, whose
// GOT/PLT operands must already match the canonical slot assignment.
inline void validate_module(const ObjectModule& m) {
    auto fail = [](const std::string& msg) { throw EncodeError(msg); };
    const std::uint32_t poolSize = static_cast<std::uint32_t>(m.stringPool.size());
    const bool linked = m.kind != ModuleKind::Relocatable;

    std::set<std::string_view> names;
    std::set<std::uint32_t> funcLocs, dataLocs;
    for (const auto& s : m.symbols) {
        if (s.nameIdx >= poolSize) fail("symbol name index out of range");
        if (!names.insert(m.symbol_name(s)).second)
            fail("duplicate symbol name '" + std::string(m.symbol_name(s)) + "'");
        if (s.defined()) {
            if (s.location == kNoLocation) fail("defined symbol without location");
            if (s.kind == SymKind::Func) {
                if (s.location >= m.code.size()) fail("function location out of range");
                if (!funcLocs.insert(s.location).second) fail("two symbols define one function");
            } else {
                if (s.location >= m.dataInit.size()) fail("data location out of range");
                if (!dataLocs.insert(s.location).second) fail("two symbols define one data slot");
            }
        } else if (s.location != kNoLocation) {
            fail("undefined symbol with location");
        }
    }
    if (funcLocs.size() != m.code.size()) fail("function without defining symbol");
    if (dataLocs.size() != m.dataInit.size()) fail("data slot without defining symbol");

    std::set<std::uint32_t> seenNeeded;
    for (auto idx : m.needed) {
        if (idx >= poolSize) fail("needed index out of range");
        if (!seenNeeded.insert(idx).second) fail("duplicate needed entry");
    }

    for (const auto& f : m.code) {
        if (f.paramCount > kMaxArity) fail("parameter count too large");
        if (f.paramCount > f.localCount) fail("paramCount exceeds localCount");
        const auto n = static_cast<std::uint32_t>(f.code.size());
        for (const auto& in : f.code) {
            switch (in.op) {
            case Op::LOADS:
                if (in.a >= poolSize) fail("LOADS index out of range");
                break;
            case Op::LOADL:
            case Op::STOREL:
                if (in.a >= f.localCount) fail("local slot out of range");
                break;
            case Op::JZ:
            case Op::JMP:
                if (in.a >= n) fail("jump target out of range");
                break;
            case Op::FACJZ:
                if (in.b >= n) fail("FACJZ target out of range");
                break;
            case Op::CALLI:
                if (in.a >= m.code.size()) fail("CALLI target out of range");
                break;
            case Op::CALLD:
                if (in.a > kMaxArity) fail("CALLD arity too large");
                break;
            case Op::TRAP:
                if (in.a < 10 || in.a > 15) fail("TRAP code out of range");
                break;
            default:
                break;
            }
        }
    }

    // Every slot-referencing site must carry exactly one relocation, and in
    // linked modules its operand must equal the canonical slot index.
    SlotLayouts layouts = derive_layouts(m);
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint8_t>, const Relocation*> sites;
    for (const auto& r : m.relocations) {
        if (r.funcIdx >= m.code.size()) fail("relocation function index out of range");
        const auto& f = m.code[r.funcIdx];
        if (r.instrIdx >= f.code.size()) fail("relocation instruction index out of range");
        const Instruction& in = f.code[r.instrIdx];
        if (r.operandIdx >= operand_count(in.op)) fail("relocation operand index out of range");
        if (r.symNameIdx >= poolSize) fail("relocation symbol name out of range");
        std::string_view sym = m.str(r.symNameIdx);
        const SymbolEntry* e = m.find_symbol(sym);
        if (!e) fail("relocation names unknown symbol '" + std::string(sym) + "'");
        bool siteIsGot = (in.op == Op::FACJZ && r.operandIdx == 0) ||
                         ((in.op == Op::LOADG || in.op == Op::STOREG) && r.operandIdx == 0);
        bool siteIsPlt = in.op == Op::CALLX && r.operandIdx == 0;
        if (r.kind == RelocKind::GotSlot && !siteIsGot) fail("GOT relocation on non-GOT site");
        if (r.kind == RelocKind::PltSlot && !siteIsPlt) fail("PLT relocation on non-PLT site");
        if (in.op == Op::CALLX || in.op == Op::FACJZ) {
            if (e->kind != SymKind::Func) fail("call/FAC site relocated to DATA symbol");
        } else {
            if (e->kind != SymKind::Data) fail("data site relocated to FUNC symbol");
        }
        if (!sites.emplace(std::tuple{r.funcIdx, r.instrIdx, r.operandIdx}, &r).second)
            fail("duplicate relocation for one site");
        if (linked) {
            auto slot = r.kind == RelocKind::GotSlot ? got_slot_of(m, layouts, sym)
                                                     : plt_slot_of(m, layouts, sym);
            if (!slot) fail("relocated symbol has no slot");
            std::uint32_t operand = r.operandIdx == 0 ? in.a : in.b;
            if (operand != *slot) fail("relocation not slot-assigned");
        }
    }
    for (std::uint32_t fi = 0; fi < m.code.size(); ++fi) {
        const auto& f = m.code[fi];
        for (std::uint32_t ii = 0; ii < f.code.size(); ++ii) {
            Op op = f.code[ii].op;
            if (op == Op::CALLX || op == Op::FACJZ || op == Op::LOADG || op == Op::STOREG) {
                if (!sites.count(std::tuple{fi, ii, std::uint8_t{0}}))
                    fail("slot-referencing instruction without relocation");
            }
        }
    }

    if (m.kind == ModuleKind::Executable) {
        const SymbolEntry* e = m.find_symbol("main");
        if (!e || e->kind != SymKind::Func || !e->defined())
            fail("executable does not define main");
    }
}

inline std::vector<std::uint8_t> encode_module(const ObjectModule& m) {
    validate_module(m);

    detail::ByteWriter w;
    w.bytes(kFacmMagic, 4);
    w.u16(kFacmVersion);
    w.u8(static_cast<std::uint8_t>(m.kind));

    auto section = [&w](const detail::ByteWriter& payload) {
        w.u32(static_cast<std::uint32_t>(payload.out.size()));
        w.bytes(payload.out.data(), payload.out.size());
    };

    detail::ByteWriter strs;
    strs.u32(static_cast<std::uint32_t>(m.stringPool.size()));
    for (const auto& s : m.stringPool) {
        strs.u32(static_cast<std::uint32_t>(s.size()));
        strs.bytes(s.data(), s.size());
    }
    section(strs);

    detail::ByteWriter need;
    need.u32(static_cast<std::uint32_t>(m.needed.size()));
    for (auto idx : m.needed) need.u32(idx);
    section(need);

    detail::ByteWriter syms;
    syms.u32(static_cast<std::uint32_t>(m.symbols.size()));
    for (const auto& s : m.symbols) {
        syms.u32(s.nameIdx);
        syms.u8(static_cast<std::uint8_t>(s.kind));
        syms.u8(static_cast<std::uint8_t>(s.binding));
        syms.u32(s.location);
    }
    section(syms);

    detail::ByteWriter rels;
    rels.u32(static_cast<std::uint32_t>(m.relocations.size()));
    for (const auto& r : m.relocations) {
        rels.u32(r.funcIdx);
        rels.u32(r.instrIdx);
        rels.u8(r.operandIdx);
        rels.u32(r.symNameIdx);
        rels.u8(static_cast<std::uint8_t>(r.kind));
    }
    section(rels);

    detail::ByteWriter data;
    data.u32(static_cast<std::uint32_t>(m.dataInit.size()));
    for (auto v : m.dataInit) data.u64(static_cast<std::uint64_t>(v));
    section(data);

    detail::ByteWriter codesec;
    codesec.u32(static_cast<std::uint32_t>(m.code.size()));
    for (const auto& f : m.code) {
        codesec.u32(f.paramCount);
        codesec.u32(f.localCount);
        codesec.u32(static_cast<std::uint32_t>(f.code.size()));
        for (const auto& in : f.code) {
            codesec.u8(static_cast<std::uint8_t>(in.op));
            int n = operand_count(in.op);
            if (n >= 1) codesec.u32(in.a);
            if (n >= 2) codesec.u32(in.b);
        }
    }
    section(codesec);

    return w.out;
}

inline ObjectModule decode_module(const std::vector<std::uint8_t>& bytes,
                                  std::string name = "") {
    detail::ByteReader r{bytes.data(), bytes.size()};

    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kFacmMagic, 4) != 0) throw FormatError(0, "bad magic");
    r.pos = 4;
    if (r.u16("version") != kFacmVersion) throw FormatError(4, "unsupported version");
    std::uint8_t kindByte = r.u8("module kind");
    if (kindByte > 2) throw FormatError(6, "bad module kind");

    ObjectModule m;
    m.name = std::move(name);
    m.kind = static_cast<ModuleKind>(kindByte);

    auto openSection = [&r](const char* what) {
        std::uint32_t len = r.u32(what);
        r.need(len, what);
        return r.pos + len;
    };
    auto closeSection = [&r](std::size_t end, const char* what) {
        if (r.pos != end)
            throw FormatError(r.pos, std::string("section length mismatch in ") + what);
    };

    std::size_t end = openSection("STRS section");
    std::uint32_t count = r.u32("string count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = r.u32("string length");
        m.stringPool.push_back(r.str(len, "string bytes"));
    }
    closeSection(end, "STRS");
    const auto poolSize = static_cast<std::uint32_t>(m.stringPool.size());

    end = openSection("NEED section");
    count = r.u32("needed count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::size_t at = r.pos;
        std::uint32_t idx = r.u32("needed entry");
        if (idx >= poolSize) throw FormatError(at, "needed index out of range");
        m.needed.push_back(idx);
    }
    closeSection(end, "NEED");

    std::size_t symsOffset = r.pos;
    end = openSection("SYMS section");
    count = r.u32("symbol count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::size_t at = r.pos;
        SymbolEntry s;
        s.nameIdx = r.u32("symbol name");
        if (s.nameIdx >= poolSize) throw FormatError(at, "symbol name index out of range");
        std::uint8_t k = r.u8("symbol kind");
        if (k > 1) throw FormatError(at, "bad symbol kind");
        s.kind = static_cast<SymKind>(k);
        std::uint8_t b = r.u8("symbol binding");
        if (b > 2) throw FormatError(at, "bad symbol binding");
        s.binding = static_cast<SymBinding>(b);
        s.location = r.u32("symbol location");
        m.symbols.push_back(s);
    }
    closeSection(end, "SYMS");

    std::size_t relsOffset = r.pos;
    end = openSection("RELS section");
    count = r.u32("relocation count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::size_t at = r.pos;
        Relocation rel;
        rel.funcIdx = r.u32("relocation function");
        rel.instrIdx = r.u32("relocation instruction");
        rel.operandIdx = r.u8("relocation operand");
        rel.symNameIdx = r.u32("relocation symbol");
        if (rel.symNameIdx >= poolSize) throw FormatError(at, "relocation symbol out of range");
        std::uint8_t k = r.u8("relocation kind");
        if (k > 1) throw FormatError(at, "bad relocation kind");
        rel.kind = static_cast<RelocKind>(k);
        m.relocations.push_back(rel);
    }
    closeSection(end, "RELS");

    end = openSection("DATA section");
    count = r.u32("data count");
    for (std::uint32_t i = 0; i < count; ++i)
        m.dataInit.push_back(static_cast<std::int64_t>(r.u64("data value")));
    closeSection(end, "DATA");

    std::size_t codeOffset = r.pos;
    end = openSection("CODE section");
    count = r.u32("function count");
    for (std::uint32_t i = 0; i < count; ++i) {
        FuncBody f;
        f.paramCount = r.u32("paramCount");
        f.localCount = r.u32("localCount");
        std::uint32_t instrCount = r.u32("instruction count");
        for (std::uint32_t j = 0; j < instrCount; ++j) {
            std::size_t at = r.pos;
            std::uint8_t opByte = r.u8("opcode");
            if (opByte >= kOpCount) throw FormatError(at, "bad opcode");
            Instruction in;
            in.op = static_cast<Op>(opByte);
            int n = operand_count(in.op);
            if (n >= 1) in.a = r.u32("operand");
            if (n >= 2) in.b = r.u32("operand");
            f.code.push_back(in);
        }
        m.code.push_back(std::move(f));
    }
    closeSection(end, "CODE");

    if (r.pos != r.size) throw FormatError(r.pos, "trailing bytes after CODE section");

    // Cross-section checks; attribute failures to the most relevant section.
    try {
        validate_module(m);
    } catch (const EncodeError& e) {
        std::string what = e.what();
        std::size_t at = codeOffset;
        if (what.find("symbol") != std::string::npos) at = symsOffset;
        if (what.find("relocation") != std::string::npos ||
            what.find("slot") != std::string::npos)
            at = relsOffset;
        throw FormatError(at, what);
    }
    return m;
}

} // namespace fac
