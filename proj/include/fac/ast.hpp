#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fac/diag.hpp"

namespace fac {

struct SourceUnit {
    std::string name; // module name; becomes the object module name
    std::string body; // UTF-8 source text
};

enum class BinOp { Eq, Ne, Add, Sub };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { IntLit, StrLit, VarRef, Call, Binary };

    Kind kind;
    SourceLoc loc;
    std::int64_t intValue = 0;   // IntLit
    std::string text;            // StrLit value / VarRef name / Call callee
    BinOp op = BinOp::Eq;        // Binary
    ExprPtr lhs, rhs;            // Binary
    std::vector<ExprPtr> args;   // Call
};

// How an if-condition executes: a FAC on an external function, an ordinary
// truthiness test, or a constant-true fold for internal functions.
struct CondClass {
    enum class Kind { Fac, Traditional, ConstTrue };

    Kind kind = Kind::Traditional;
    std::string funcName; // Fac / ConstTrue target

    bool operator==(const CondClass&) const = default;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
    enum class Kind { If, Block, Return, LocalDecl, Assign, ExprStmt };

    Kind kind;
    SourceLoc loc;
    ExprPtr expr;                        // If cond / Return value / Assign rhs / ExprStmt / LocalDecl init
    std::string name;                    // LocalDecl / Assign target
    StmtPtr thenBranch, elseBranch;      // If
    std::vector<StmtPtr> stmts;          // Block
    std::optional<CondClass> condClass;  // If annotation, set by classify_conditions
};

struct FuncDef {
    std::string name;
    bool returnsInt = false;
    std::vector<std::string> params; // integer parameters
    std::vector<StmtPtr> body;
    SourceLoc loc;
};

struct ExternFuncDecl {
    std::string name;
    std::uint32_t arity = 0;
    bool weak = false;
    bool returnsInt = false;
    SourceLoc loc;
};

struct ExternVarDecl {
    std::string name;
    SourceLoc loc;
};

struct GlobalVarDecl {
    std::string name;
    std::int64_t init = 0;
    SourceLoc loc;
};

struct Ast {
    std::string unitName;
    std::vector<FuncDef> functions;
    std::vector<ExternFuncDecl> externFuncs;
    std::vector<ExternVarDecl> externVars;
    std::vector<GlobalVarDecl> globals;

    const FuncDef* find_function(const std::string& n) const {
        for (const auto& f : functions)
            if (f.name == n) return &f;
        return nullptr;
    }
    const ExternFuncDecl* find_extern_func(const std::string& n) const {
        for (const auto& f : externFuncs)
            if (f.name == n) return &f;
        return nullptr;
    }
    const ExternVarDecl* find_extern_var(const std::string& n) const {
        for (const auto& v : externVars)
            if (v.name == n) return &v;
        return nullptr;
    }
    const GlobalVarDecl* find_global(const std::string& n) const {
        for (const auto& g : globals)
            if (g.name == n) return &g;
        return nullptr;
    }
};

// Builtins are call-only names baked into the language.
struct BuiltinInfo {
    const char* name;
    int argc;
};

inline constexpr BuiltinInfo kBuiltins[] = {
    {"print_int", 1}, {"print_str", 1}, {"dyn_open", 1},  {"dyn_sym", 2},
    {"dyn_call0", 1}, {"dyn_call1", 2}, {"dyn_close", 1},
};

inline const BuiltinInfo* find_builtin(std::string_view name) {
    for (const auto& b : kBuiltins)
        if (name == b.name) return &b;
    return nullptr;
}

} // namespace fac
