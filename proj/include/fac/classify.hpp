#pragma once

#include <string>
#include <vector>

#include "fac/ast.hpp"
#include "fac/diag.hpp"

namespace fac {

namespace detail {

inline bool local_declared(const std::vector<StmtPtr>& body, const std::string& name);
inline bool local_declared_in(const Stmt& s, const std::string& name);

// Classification looks only at the condition's shape and the symbol's kind,
// never at a function's signature: a FAC is typeless.
inline CondClass classify_one(const Ast& ast, const Expr& cond, const std::string& file,
                              std::vector<Diagnostic>* warnings) {
    if (cond.kind != Expr::Kind::VarRef) return {CondClass::Kind::Traditional, ""};

    const std::string& name = cond.text;
    if (ast.find_extern_func(name)) return {CondClass::Kind::Fac, name};
    if (ast.find_function(name)) {
        if (warnings)
            warnings->push_back({Severity::Warning, file, cond.loc,
                                 "condition on internal function '" + name +
                                     "' is always true"});
        return {CondClass::Kind::ConstTrue, name};
    }
    if (ast.find_extern_var(name) || ast.find_global(name))
        return {CondClass::Kind::Traditional, ""};
    // Locals and parameters are resolved per function by the caller.
    throw UndeclaredIdentifier(file, cond.loc, "undeclared identifier '" + name + "'");
}

inline void classify_stmt(const Ast& ast, const FuncDef& fn, Stmt& s, const std::string& file,
                          std::vector<Diagnostic>* warnings) {
    switch (s.kind) {
    case Stmt::Kind::If: {
        const Expr& cond = *s.expr;
        bool isLocal = false;
        if (cond.kind == Expr::Kind::VarRef) {
            for (const auto& p : fn.params)
                if (p == cond.text) isLocal = true;
            // A local declared anywhere in the function counts; declaration
            // order was already checked during name resolution.
            if (!isLocal) isLocal = local_declared(fn.body, cond.text);
        }
        s.condClass = isLocal ? CondClass{CondClass::Kind::Traditional, ""}
                              : classify_one(ast, cond, file, warnings);
        classify_stmt(ast, fn, *s.thenBranch, file, warnings);
        if (s.elseBranch) classify_stmt(ast, fn, *s.elseBranch, file, warnings);
        break;
    }
    case Stmt::Kind::Block:
        for (auto& st : s.stmts) classify_stmt(ast, fn, *st, file, warnings);
        break;
    default:
        break;
    }
}

inline bool local_declared(const std::vector<StmtPtr>& body, const std::string& name) {
    for (const auto& st : body) {
        switch (st->kind) {
        case Stmt::Kind::LocalDecl:
            if (st->name == name) return true;
            break;
        case Stmt::Kind::If:
            if (local_declared_in(*st->thenBranch, name)) return true;
            if (st->elseBranch && local_declared_in(*st->elseBranch, name)) return true;
            break;
        case Stmt::Kind::Block:
            if (local_declared(st->stmts, name)) return true;
            break;
        default:
            break;
        }
    }
    return false;
}

inline bool local_declared_in(const Stmt& s, const std::string& name) {
    switch (s.kind) {
    case Stmt::Kind::LocalDecl:
        return s.name == name;
    case Stmt::Kind::Block:
        return local_declared(s.stmts, name);
    case Stmt::Kind::If:
        return local_declared_in(*s.thenBranch, name) ||
               (s.elseBranch && local_declared_in(*s.elseBranch, name));
    default:
        return false;
    }
}

} // namespace detail

// Annotates every if-condition in the unit. Bare identifiers naming an
// external function become FACs; internal functions fold to constant true
// with a warning; everything else is a traditional test. Idempotent.
inline Ast classify_conditions(Ast ast, std::vector<Diagnostic>* warnings = nullptr) {
    for (auto& fn : ast.functions)
        for (auto& st : fn.body)
            detail::classify_stmt(ast, fn, *st, ast.unitName, warnings);
    return ast;
}

} // namespace fac
