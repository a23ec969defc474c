#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fac/ast.hpp"
#include "fac/diag.hpp"
#include "fac/object.hpp"

namespace fac {

// FAC_NATIVE lowers FACs directly. WEAK_ALIAS models the weak-reference
// route: identical lowering, plus one table-setup instruction per function
// standing in for the position-independent-code prologue, so its size
// overhead shows up as an instruction-count delta.
enum class CodegenMode { FacNative, WeakAlias };

struct CodegenOptions {
    CodegenMode mode = CodegenMode::FacNative;
    bool optimize = true; // constant-true fold for internal-function conditions
};

struct SlotIds {
    std::uint32_t got = kNoLocation;
    std::uint32_t plt = kNoLocation;
};

using SlotMap = std::map<std::string, SlotIds>;

namespace detail {

// Emits one function body. The environment callbacks differ between whole-unit
// compilation and the standalone FAC lowering entry point.
class FunctionEmitter {
public:
    FunctionEmitter(const Ast* ast, const FuncDef* fn, const SlotMap& slots,
                    const std::map<std::string, std::uint32_t>& funcIdx,
                    ObjectModule* module, std::uint32_t thisFuncIdx,
                    const CodegenOptions& opts, bool standalone)
        : ast_(ast), fn_(fn), slots_(slots), funcIdx_(funcIdx), module_(module),
          thisFunc_(thisFuncIdx), opts_(opts), standalone_(standalone) {
        if (fn_) {
            file_ = ast_ ? ast_->unitName : "";
            for (const auto& p : fn_->params) locals_[p] = nextLocal_++;
            std::uint32_t declared = 0;
            for (const auto& st : fn_->body) count_locals(*st, declared);
            scratch_ = nextLocal_ + declared;
        }
    }

    FuncBody run() {
        FuncBody out;
        out.paramCount = fn_ ? static_cast<std::uint32_t>(fn_->params.size()) : 0;
        if (opts_.mode == CodegenMode::WeakAlias) emit(Op::JMP, 1);
        for (const auto& st : fn_->body) stmt(*st);
        emit(Op::LOADI, 0);
        emit(Op::RET);
        out.localCount = scratch_ + 1;
        out.code = std::move(code_);
        return out;
    }

    // Standalone lowering of a single classified FAC if-statement.
    std::vector<Instruction> lower_one(const Stmt& node) {
        stmt(node);
        return std::move(code_);
    }

private:
    [[noreturn]] void err(SourceLoc loc, const std::string& msg) const {
        throw CodegenError(file_, loc, msg);
    }

    std::uint32_t emit(Op op, std::uint32_t a = 0, std::uint32_t b = 0) {
        code_.push_back({op, a, b});
        return static_cast<std::uint32_t>(code_.size() - 1);
    }

    void patch_target(std::uint32_t at, std::uint32_t target) {
        if (code_[at].op == Op::FACJZ)
            code_[at].b = target;
        else
            code_[at].a = target;
    }

    std::uint32_t here() const { return static_cast<std::uint32_t>(code_.size()); }

    void add_reloc(std::uint32_t instrIdx, std::uint8_t operandIdx, const std::string& sym,
                   RelocKind kind) {
        if (module_)
            module_->relocations.push_back(
                {thisFunc_, instrIdx, operandIdx, module_->intern(sym), kind});
    }

    void count_locals(const Stmt& s, std::uint32_t& n) {
        switch (s.kind) {
        case Stmt::Kind::LocalDecl: ++n; break;
        case Stmt::Kind::Block:
            for (const auto& st : s.stmts) count_locals(*st, n);
            break;
        case Stmt::Kind::If:
            count_locals(*s.thenBranch, n);
            if (s.elseBranch) count_locals(*s.elseBranch, n);
            break;
        default: break;
        }
    }

    // Allocates slots for locals inside a branch dropped by the constant-true
    // fold, so later uses still resolve.
    void declare_only(const Stmt& s) {
        switch (s.kind) {
        case Stmt::Kind::LocalDecl:
            if (!locals_.count(s.name)) locals_[s.name] = nextLocal_++;
            break;
        case Stmt::Kind::Block:
            for (const auto& st : s.stmts) declare_only(*st);
            break;
        case Stmt::Kind::If:
            declare_only(*s.thenBranch);
            if (s.elseBranch) declare_only(*s.elseBranch);
            break;
        default: break;
        }
    }

    SlotIds slot_for(const std::string& name, SourceLoc loc) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) {
            if (standalone_) throw MissingSlot(name);
            err(loc, "no slot for symbol '" + name + "'");
        }
        return it->second;
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
        case Stmt::Kind::If: emit_if(s); break;
        case Stmt::Kind::Block:
            for (const auto& st : s.stmts) stmt(*st);
            break;
        case Stmt::Kind::Return:
            if (s.expr) {
                if (fn_ && !fn_->returnsInt)
                    err(s.loc, "void function returns a value");
                expr_value(*s.expr);
            } else {
                emit(Op::LOADI, 0);
            }
            emit(Op::RET);
            break;
        case Stmt::Kind::LocalDecl: {
            if (s.expr)
                expr_value(*s.expr);
            else
                emit(Op::LOADI, 0);
            if (!locals_.count(s.name)) locals_[s.name] = nextLocal_++;
            emit(Op::STOREL, locals_.at(s.name));
            break;
        }
        case Stmt::Kind::Assign: {
            expr_value(*s.expr);
            auto it = locals_.find(s.name);
            if (it != locals_.end()) {
                emit(Op::STOREL, it->second);
                break;
            }
            if (standalone_) err(s.loc, "unknown identifier in standalone lowering");
            if (ast_->find_function(s.name) || ast_->find_extern_func(s.name))
                err(s.loc, "cannot assign to function '" + s.name + "'");
            if (ast_->find_global(s.name) || ast_->find_extern_var(s.name)) {
                SlotIds ids = slot_for(s.name, s.loc);
                std::uint32_t at = emit(Op::STOREG, ids.got);
                add_reloc(at, 0, s.name, RelocKind::GotSlot);
                break;
            }
            err(s.loc, "undeclared identifier '" + s.name + "'");
            break;
        }
        case Stmt::Kind::ExprStmt:
            // Discard the value, if the expression produced one.
            if (expr(*s.expr, /*wantValue=*/false)) emit(Op::STOREL, scratch_);
            break;
        }
    }

    void emit_if(const Stmt& s) {
        if (!s.condClass)
            err(s.loc, "unclassified condition; classify_conditions must run first");
        switch (s.condClass->kind) {
        case CondClass::Kind::Fac: {
            const std::string& target = s.condClass->funcName;
            SlotIds ids = slot_for(target, s.loc);
            std::uint32_t fac = emit(Op::FACJZ, ids.got, 0);
            add_reloc(fac, 0, target, RelocKind::GotSlot);
            stmt(*s.thenBranch);
            if (s.elseBranch) {
                std::uint32_t jend = emit(Op::JMP, 0);
                patch_target(fac, here());
                stmt(*s.elseBranch);
                patch_target(jend, here());
            } else {
                patch_target(fac, here());
            }
            break;
        }
        case CondClass::Kind::ConstTrue:
            if (opts_.optimize) {
                stmt(*s.thenBranch);
                if (s.elseBranch) declare_only(*s.elseBranch);
                break;
            }
            emit(Op::LOADI, 1);
            emit_branches(s);
            break;
        case CondClass::Kind::Traditional:
            expr_value(*s.expr);
            emit_branches(s);
            break;
        }
    }

    // Shared if/else shape for a condition value already on the stack.
    void emit_branches(const Stmt& s) {
        std::uint32_t jz = emit(Op::JZ, 0);
        stmt(*s.thenBranch);
        if (s.elseBranch) {
            std::uint32_t jend = emit(Op::JMP, 0);
            patch_target(jz, here());
            stmt(*s.elseBranch);
            patch_target(jend, here());
        } else {
            patch_target(jz, here());
        }
    }

    void expr_value(const Expr& e) { expr(e, /*wantValue=*/true); }

    // Returns whether a value was pushed; only the print and close builtins
    // produce none.
    bool expr(const Expr& e, bool wantValue) {
        switch (e.kind) {
        case Expr::Kind::IntLit:
            emit(Op::LOADI, static_cast<std::uint32_t>(static_cast<std::int32_t>(e.intValue)));
            return true;
        case Expr::Kind::StrLit: {
            std::uint32_t idx = module_ ? module_->intern(e.text) : pool_intern(e.text);
            emit(Op::LOADS, idx);
            return true;
        }
        case Expr::Kind::VarRef: {
            auto it = locals_.find(e.text);
            if (it != locals_.end()) {
                emit(Op::LOADL, it->second);
                return true;
            }
            if (standalone_) err(e.loc, "unknown identifier in standalone lowering");
            if (ast_->find_extern_func(e.text) || ast_->find_function(e.text))
                err(e.loc, "bare function identifier '" + e.text + "' in a value position");
            if (ast_->find_global(e.text) || ast_->find_extern_var(e.text)) {
                SlotIds ids = slot_for(e.text, e.loc);
                std::uint32_t at = emit(Op::LOADG, ids.got);
                add_reloc(at, 0, e.text, RelocKind::GotSlot);
                return true;
            }
            err(e.loc, "undeclared identifier '" + e.text + "'");
        }
        case Expr::Kind::Call:
            return emit_call(e, wantValue);
        case Expr::Kind::Binary:
            expr_value(*e.lhs);
            expr_value(*e.rhs);
            switch (e.op) {
            case BinOp::Eq: emit(Op::EQ); break;
            case BinOp::Ne: emit(Op::NE); break;
            case BinOp::Add: emit(Op::ADD); break;
            case BinOp::Sub: emit(Op::SUB); break;
            }
            return true;
        }
        return true;
    }

    bool emit_call(const Expr& e, bool wantValue) {
        const std::string& callee = e.text;
        if (const BuiltinInfo* b = find_builtin(callee)) {
            if (static_cast<int>(e.args.size()) != b->argc)
                err(e.loc, "builtin '" + callee + "' takes " + std::to_string(b->argc) +
                               " argument(s)");
            if (callee == "print_int" || callee == "print_str" || callee == "dyn_close") {
                if (wantValue) err(e.loc, "'" + callee + "' does not produce a value");
                expr_value(*e.args[0]);
                emit(callee == "print_int"  ? Op::PRINT_INT
                     : callee == "print_str" ? Op::PRINT_STR
                                             : Op::DYN_CLOSE);
                return false;
            }
            if (callee == "dyn_open") {
                expr_value(*e.args[0]);
                emit(Op::DYN_OPEN);
            } else if (callee == "dyn_sym") {
                expr_value(*e.args[0]);
                expr_value(*e.args[1]);
                emit(Op::DYN_SYM);
            } else if (callee == "dyn_call0") {
                expr_value(*e.args[0]); // callee ref on top
                emit(Op::CALLD, 0);
            } else { // dyn_call1: argument first, then callee ref on top
                expr_value(*e.args[1]);
                expr_value(*e.args[0]);
                emit(Op::CALLD, 1);
            }
            return true;
        }
        if (standalone_) {
            SlotIds ids = slot_for(callee, e.loc);
            for (const auto& a : e.args) expr_value(*a);
            std::uint32_t at = emit(Op::CALLX, ids.plt);
            add_reloc(at, 0, callee, RelocKind::PltSlot);
            return true;
        }
        if (const ExternFuncDecl* xf = ast_->find_extern_func(callee)) {
            if (e.args.size() != xf->arity)
                err(e.loc, "'" + callee + "' declared with " + std::to_string(xf->arity) +
                               " parameter(s), called with " + std::to_string(e.args.size()));
            if (wantValue && !xf->returnsInt)
                err(e.loc, "void function '" + callee + "' used as a value");
            SlotIds ids = slot_for(callee, e.loc);
            for (const auto& a : e.args) expr_value(*a);
            std::uint32_t at = emit(Op::CALLX, ids.plt);
            add_reloc(at, 0, callee, RelocKind::PltSlot);
            return true;
        }
        if (const FuncDef* f = ast_->find_function(callee)) {
            if (e.args.size() != f->params.size())
                err(e.loc, "'" + callee + "' takes " + std::to_string(f->params.size()) +
                               " parameter(s), called with " + std::to_string(e.args.size()));
            if (wantValue && !f->returnsInt)
                err(e.loc, "void function '" + callee + "' used as a value");
            for (const auto& a : e.args) expr_value(*a);
            emit(Op::CALLI, funcIdx_.at(callee));
            return true;
        }
        if (ast_->find_global(callee) || ast_->find_extern_var(callee))
            err(e.loc, "'" + callee + "' is not a function");
        err(e.loc, "undeclared identifier '" + callee + "'");
    }

    std::uint32_t pool_intern(const std::string& s) {
        for (std::uint32_t i = 0; i < localPool_.size(); ++i)
            if (localPool_[i] == s) return i;
        localPool_.push_back(s);
        return static_cast<std::uint32_t>(localPool_.size() - 1);
    }

    const Ast* ast_;
    const FuncDef* fn_;
    const SlotMap& slots_;
    const std::map<std::string, std::uint32_t>& funcIdx_;
    ObjectModule* module_;
    std::uint32_t thisFunc_;
    CodegenOptions opts_;
    bool standalone_;

    std::string file_;
    std::vector<Instruction> code_;
    std::map<std::string, std::uint32_t> locals_;
    std::uint32_t nextLocal_ = 0;
    std::uint32_t scratch_ = 0;
    std::vector<std::string> localPool_;
};

} // namespace detail

// Slot assignment for a single unit: externals in declaration-category order,
// matching derive_layouts on the unit's symbol table.
inline SlotMap unit_slot_map(const ObjectModule& m) {
    SlotMap slots;
    SlotLayouts layouts = derive_layouts(m);
    for (std::uint32_t i = 0; i < layouts.gotSyms.size(); ++i) {
        const auto& sym = m.symbols[layouts.gotSyms[i]];
        slots[std::string(m.symbol_name(sym))].got = i;
    }
    for (std::uint32_t i = 0; i < layouts.pltSyms.size(); ++i) {
        const auto& sym = m.symbols[layouts.pltSyms[i]];
        slots[std::string(m.symbol_name(sym))].plt = i;
    }
    return slots;
}

// Lowers a classified Ast to a relocatable object module. GOT/PLT operands are
// provisional unit-local slot indices; the link editor reassigns them.
inline ObjectModule compile_unit(const Ast& ast, const CodegenOptions& opts = {}) {
    ObjectModule m;
    m.name = ast.unitName;
    m.kind = ModuleKind::Relocatable;

    std::map<std::string, std::uint32_t> funcIdx;
    for (std::uint32_t i = 0; i < ast.functions.size(); ++i) {
        const auto& fn = ast.functions[i];
        m.symbols.push_back({m.intern(fn.name), SymKind::Func, SymBinding::Defined, i});
        funcIdx[fn.name] = i;
    }
    for (const auto& xf : ast.externFuncs)
        m.symbols.push_back({m.intern(xf.name), SymKind::Func,
                             xf.weak ? SymBinding::WeakUndefined : SymBinding::Undefined,
                             kNoLocation});
    for (const auto& xv : ast.externVars)
        m.symbols.push_back({m.intern(xv.name), SymKind::Data, SymBinding::Undefined,
                             kNoLocation});
    for (std::uint32_t i = 0; i < ast.globals.size(); ++i) {
        const auto& g = ast.globals[i];
        m.symbols.push_back({m.intern(g.name), SymKind::Data, SymBinding::Defined, i});
        m.dataInit.push_back(g.init);
    }

    SlotMap slots = unit_slot_map(m);
    for (std::uint32_t i = 0; i < ast.functions.size(); ++i) {
        detail::FunctionEmitter em(&ast, &ast.functions[i], slots, funcIdx, &m, i, opts,
                                   /*standalone=*/false);
        m.code.push_back(em.run());
    }
    return m;
}

// Standalone lowering of one classified FAC if-statement against an explicit
// slot map. Bodies may contain literals, builtins, and external calls; the
// whole-unit path above handles everything else.
inline std::vector<Instruction> lower_fac_if(const Stmt& node, const SlotMap& slots) {
    if (node.kind != Stmt::Kind::If || !node.condClass ||
        node.condClass->kind != CondClass::Kind::Fac)
        throw Error("lower_fac_if expects a classified FAC if-statement");
    std::map<std::string, std::uint32_t> noFuncs;
    detail::FunctionEmitter em(nullptr, nullptr, slots, noFuncs, nullptr, 0, {},
                               /*standalone=*/true);
    return em.lower_one(node);
}

} // namespace fac
