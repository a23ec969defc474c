#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace fac {

// Null handles and null function references are ordinary guest values. They
// are unrelated to the loader's GOT null sentinel, which is slot state and
// never appears on the operand stack.
struct HandleVal {
    std::uint32_t id = 0; // 0 = null; otherwise 1 + index into the handle table

    bool operator==(const HandleVal&) const = default;
};

struct FuncRefVal {
    std::uint32_t libId = 0; // 0 = null; otherwise 1 + index into the dl-library table
    std::uint32_t funcIdx = 0;

    bool operator==(const FuncRefVal&) const = default;
};

struct Unit {
    bool operator==(const Unit&) const = default;
};

using RuntimeValue = std::variant<std::int64_t, std::string, HandleVal, FuncRefVal, Unit>;

inline bool truthy(const RuntimeValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i != 0;
    if (const auto* s = std::get_if<std::string>(&v)) return !s->empty();
    if (const auto* h = std::get_if<HandleVal>(&v)) return h->id != 0;
    if (const auto* f = std::get_if<FuncRefVal>(&v)) return f->libId != 0;
    return false; // Unit
}

// Same-kind values compare by content; values of different kinds are unequal.
inline bool values_equal(const RuntimeValue& a, const RuntimeValue& b) {
    if (a.index() != b.index()) return false;
    return a == b;
}

} // namespace fac
