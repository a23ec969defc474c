#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace fac {

// Stack machine opcodes. Encoding is one u8 opcode byte followed by a fixed
// number of u32 operands (see operand_count). Jump operands are absolute
// instruction indices within the containing function.
enum class Op : std::uint8_t {
    LOADI = 0,   // push immediate (operand is an i32 bit pattern, sign-extended)
    LOADS = 1,   // push string-pool entry
    LOADL = 2,   // push local slot
    STOREL = 3,  // pop into local slot
    LOADG = 4,   // push global through GOT slot
    STOREG = 5,  // pop into global through GOT slot
    ADD = 6,
    SUB = 7,
    EQ = 8,
    NE = 9,
    JZ = 10,     // pop; jump if falsy
    JMP = 11,
    CALLI = 12,  // direct call, function index
    CALLX = 13,  // external call through PLT slot
    CALLD = 14,  // indirect call, callee value on stack; operand is the arity
    FACJZ = 15,  // jump iff GOT slot holds the null sentinel
    RET = 16,    // pop result, pop frame, push result to caller
    PRINT_INT = 17,
    PRINT_STR = 18,
    DYN_OPEN = 19,
    DYN_SYM = 20,
    DYN_CLOSE = 21,
    HALT = 22,
    TRAP = 23,   // raise the trap code given as operand (stub bodies)
};

inline constexpr std::uint8_t kOpCount = 24;

inline constexpr int operand_count(Op op) {
    switch (op) {
    case Op::LOADI:
    case Op::LOADS:
    case Op::LOADL:
    case Op::STOREL:
    case Op::LOADG:
    case Op::STOREG:
    case Op::JZ:
    case Op::JMP:
    case Op::CALLI:
    case Op::CALLX:
    case Op::CALLD:
    case Op::TRAP:
        return 1;
    case Op::FACJZ:
        return 2;
    default:
        return 0;
    }
}

inline const char* op_name(Op op) {
    static constexpr std::array<const char*, kOpCount> names = {
        "LOADI", "LOADS", "LOADL", "STOREL", "LOADG", "STOREG",
        "ADD", "SUB", "EQ", "NE", "JZ", "JMP",
        "CALLI", "CALLX", "CALLD", "FACJZ", "RET",
        "PRINT_INT", "PRINT_STR", "DYN_OPEN", "DYN_SYM", "DYN_CLOSE",
        "HALT", "TRAP",
    };
    auto i = static_cast<std::size_t>(op);
    return i < names.size() ? names[i] : "BAD";
}

struct Instruction {
    Op op{};
    std::uint32_t a = 0;
    std::uint32_t b = 0;

    bool operator==(const Instruction&) const = default;
};

inline Instruction insn(Op op, std::uint32_t a = 0, std::uint32_t b = 0) {
    return Instruction{op, a, b};
}

// Immediate operands are stored as u32 bit patterns of an i32.
inline std::int64_t decode_imm(std::uint32_t raw) {
    return static_cast<std::int64_t>(static_cast<std::int32_t>(raw));
}

inline std::string disasm(const Instruction& in) {
    std::string s = op_name(in.op);
    int n = operand_count(in.op);
    if (n >= 1) {
        s += ' ';
        s += in.op == Op::LOADI ? std::to_string(decode_imm(in.a)) : std::to_string(in.a);
    }
    if (n >= 2) {
        s += ' ';
        s += std::to_string(in.b);
    }
    return s;
}

} // namespace fac
