#pragma once

#include <cctype>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fac/ast.hpp"
#include "fac/diag.hpp"

namespace fac {

namespace detail {

enum class Tok {
    Ident, Int, Str,
    LParen, RParen, LBrace, RBrace, Comma, Semi,
    Assign, EqEq, NotEq, Plus, Minus,
    KwInt, KwVoid, KwExtern, KwWeak, KwIf, KwElse, KwReturn,
    Eof,
};

struct Token {
    Tok kind;
    SourceLoc loc;
    std::string text;       // identifier / string value
    std::int64_t value = 0; // integer literal
};

class Lexer {
public:
    Lexer(std::string file, std::string_view src) : file_(std::move(file)), src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_ws();
            SourceLoc loc{line_, col_};
            if (eof()) {
                out.push_back({Tok::Eof, loc, "", 0});
                return out;
            }
            char c = peek();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string id;
                while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
                    id += take();
                out.push_back({keyword(id), loc, id, 0});
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string num;
                while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) num += take();
                std::int64_t v = 0;
                for (char d : num) {
                    v = v * 10 + (d - '0');
                    if (v > 0x7FFFFFFFLL)
                        throw SyntaxError(file_, loc, "integer literal out of range");
                }
                out.push_back({Tok::Int, loc, num, v});
            } else if (c == '"') {
                take();
                std::string s;
                for (;;) {
                    if (eof() || peek() == '\n')
                        throw SyntaxError(file_, loc, "unterminated string literal");
                    char d = take();
                    if (d == '"') break;
                    if (d == '\\') {
                        if (eof()) throw SyntaxError(file_, loc, "unterminated string literal");
                        char e = take();
                        switch (e) {
                        case 'n': s += '\n'; break;
                        case 't': s += '\t'; break;
                        case '"': s += '"'; break;
                        case '\\': s += '\\'; break;
                        default:
                            throw SyntaxError(file_, {line_, col_ - 2},
                                              std::string("unknown escape '\\") + e + "'");
                        }
                    } else {
                        s += d;
                    }
                }
                out.push_back({Tok::Str, loc, s, 0});
            } else {
                switch (take()) {
                case '(': out.push_back({Tok::LParen, loc, "(", 0}); break;
                case ')': out.push_back({Tok::RParen, loc, ")", 0}); break;
                case '{': out.push_back({Tok::LBrace, loc, "{", 0}); break;
                case '}': out.push_back({Tok::RBrace, loc, "}", 0}); break;
                case ',': out.push_back({Tok::Comma, loc, ",", 0}); break;
                case ';': out.push_back({Tok::Semi, loc, ";", 0}); break;
                case '+': out.push_back({Tok::Plus, loc, "+", 0}); break;
                case '-': out.push_back({Tok::Minus, loc, "-", 0}); break;
                case '=':
                    if (!eof() && peek() == '=') {
                        take();
                        out.push_back({Tok::EqEq, loc, "==", 0});
                    } else {
                        out.push_back({Tok::Assign, loc, "=", 0});
                    }
                    break;
                case '!':
                    if (!eof() && peek() == '=') {
                        take();
                        out.push_back({Tok::NotEq, loc, "!=", 0});
                    } else {
                        throw SyntaxError(file_, loc, "unexpected character '!'");
                    }
                    break;
                default:
                    throw SyntaxError(file_, loc,
                                      std::string("unexpected character '") + src_[pos_ - 1] + "'");
                }
            }
        }
    }

private:
    static Tok keyword(const std::string& id) {
        if (id == "int") return Tok::KwInt;
        if (id == "void") return Tok::KwVoid;
        if (id == "extern") return Tok::KwExtern;
        if (id == "weak") return Tok::KwWeak;
        if (id == "if") return Tok::KwIf;
        if (id == "else") return Tok::KwElse;
        if (id == "return") return Tok::KwReturn;
        return Tok::Ident;
    }

    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }
    char take() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }
    void skip_ws() {
        for (;;) {
            while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) take();
            if (!eof() && peek() == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (!eof() && peek() != '\n') take();
                continue;
            }
            return;
        }
    }

    std::string file_;
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(const SourceUnit& unit)
        : file_(unit.name), toks_(Lexer(unit.name, unit.body).run()) {}

    Ast run() {
        Ast ast;
        ast.unitName = file_;
        while (!at(Tok::Eof)) top_level(ast);
        resolve(ast);
        return ast;
    }

private:
    [[noreturn]] void err(SourceLoc loc, const std::string& msg) const {
        throw SyntaxError(file_, loc, msg);
    }

    const Token& cur() const { return toks_[pos_]; }
    bool at(Tok k) const { return cur().kind == k; }
    Token take() { return toks_[pos_++]; }
    Token expect(Tok k, const char* what) {
        if (!at(k)) err(cur().loc, std::string("expected ") + what);
        return take();
    }

    void top_level(Ast& ast) {
        if (at(Tok::KwWeak) || at(Tok::KwExtern)) {
            bool weak = false;
            if (at(Tok::KwWeak)) {
                take();
                weak = true;
            }
            expect(Tok::KwExtern, "'extern'");
            bool returnsInt;
            if (at(Tok::KwInt)) {
                take();
                returnsInt = true;
            } else if (at(Tok::KwVoid)) {
                take();
                returnsInt = false;
            } else {
                err(cur().loc, "expected 'int' or 'void'");
            }
            Token nameTok = expect(Tok::Ident, "identifier");
            if (at(Tok::LParen)) {
                take();
                std::uint32_t arity = 0;
                if (!at(Tok::RParen)) {
                    for (;;) {
                        expect(Tok::KwInt, "'int' parameter type");
                        if (at(Tok::Ident)) take(); // parameter names optional in externs
                        ++arity;
                        if (at(Tok::Comma)) {
                            take();
                            continue;
                        }
                        break;
                    }
                }
                expect(Tok::RParen, "')'");
                expect(Tok::Semi, "';'");
                ast.externFuncs.push_back({nameTok.text, arity, weak, returnsInt, nameTok.loc});
            } else {
                if (weak) err(nameTok.loc, "'weak extern' applies to functions only");
                if (!returnsInt) err(nameTok.loc, "extern variables must have type 'int'");
                expect(Tok::Semi, "';'");
                ast.externVars.push_back({nameTok.text, nameTok.loc});
            }
            declare_top(ast, nameTok.text, nameTok.loc);
            return;
        }

        bool returnsInt;
        if (at(Tok::KwInt)) {
            take();
            returnsInt = true;
        } else if (at(Tok::KwVoid)) {
            take();
            returnsInt = false;
        } else {
            err(cur().loc, "expected declaration");
        }
        Token nameTok = expect(Tok::Ident, "identifier");
        if (at(Tok::LParen)) {
            take();
            FuncDef fn;
            fn.name = nameTok.text;
            fn.returnsInt = returnsInt;
            fn.loc = nameTok.loc;
            if (!at(Tok::RParen)) {
                for (;;) {
                    expect(Tok::KwInt, "'int' parameter type");
                    Token p = expect(Tok::Ident, "parameter name");
                    fn.params.push_back(p.text);
                    if (at(Tok::Comma)) {
                        take();
                        continue;
                    }
                    break;
                }
            }
            expect(Tok::RParen, "')'");
            expect(Tok::LBrace, "'{'");
            while (!at(Tok::RBrace)) fn.body.push_back(statement());
            take();
            declare_top(ast, fn.name, fn.loc);
            ast.functions.push_back(std::move(fn));
        } else {
            if (!returnsInt) err(nameTok.loc, "global variables must have type 'int'");
            GlobalVarDecl g{nameTok.text, 0, nameTok.loc};
            if (at(Tok::Assign)) {
                take();
                bool neg = false;
                if (at(Tok::Minus)) {
                    take();
                    neg = true;
                }
                Token v = expect(Tok::Int, "integer initializer");
                g.init = neg ? -v.value : v.value;
            }
            expect(Tok::Semi, "';'");
            declare_top(ast, g.name, g.loc);
            ast.globals.push_back(g);
        }
    }

    void declare_top(Ast&, const std::string& name, SourceLoc loc) {
        if (find_builtin(name)) err(loc, "'" + name + "' is a reserved builtin name");
        if (!topNames_.insert(name).second) err(loc, "duplicate top-level name '" + name + "'");
    }

    StmtPtr statement() {
        auto s = std::make_unique<Stmt>();
        s->loc = cur().loc;
        if (at(Tok::KwIf)) {
            take();
            expect(Tok::LParen, "'('");
            s->kind = Stmt::Kind::If;
            s->expr = expression();
            expect(Tok::RParen, "')'");
            s->thenBranch = statement();
            if (at(Tok::KwElse)) {
                take();
                s->elseBranch = statement();
            }
            return s;
        }
        if (at(Tok::LBrace)) {
            take();
            s->kind = Stmt::Kind::Block;
            while (!at(Tok::RBrace)) s->stmts.push_back(statement());
            take();
            return s;
        }
        if (at(Tok::KwReturn)) {
            take();
            s->kind = Stmt::Kind::Return;
            if (!at(Tok::Semi)) s->expr = expression();
            expect(Tok::Semi, "';'");
            return s;
        }
        if (at(Tok::KwInt)) {
            take();
            Token nameTok = expect(Tok::Ident, "identifier");
            s->kind = Stmt::Kind::LocalDecl;
            s->name = nameTok.text;
            s->loc = nameTok.loc;
            if (at(Tok::Assign)) {
                take();
                s->expr = expression();
            }
            expect(Tok::Semi, "';'");
            return s;
        }
        // assignment or expression statement
        if (at(Tok::Ident) && pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == Tok::Assign) {
            Token nameTok = take();
            take(); // '='
            s->kind = Stmt::Kind::Assign;
            s->name = nameTok.text;
            s->loc = nameTok.loc;
            s->expr = expression();
            expect(Tok::Semi, "';'");
            return s;
        }
        s->kind = Stmt::Kind::ExprStmt;
        s->expr = expression();
        expect(Tok::Semi, "';'");
        return s;
    }

    // expression := additive (('=='|'!=') additive)*
    ExprPtr expression() {
        ExprPtr e = additive();
        while (at(Tok::EqEq) || at(Tok::NotEq)) {
            Token opTok = take();
            auto bin = std::make_unique<Expr>();
            bin->kind = Expr::Kind::Binary;
            bin->loc = opTok.loc;
            bin->op = opTok.kind == Tok::EqEq ? BinOp::Eq : BinOp::Ne;
            bin->lhs = std::move(e);
            bin->rhs = additive();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr additive() {
        ExprPtr e = primary();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            Token opTok = take();
            auto bin = std::make_unique<Expr>();
            bin->kind = Expr::Kind::Binary;
            bin->loc = opTok.loc;
            bin->op = opTok.kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
            bin->lhs = std::move(e);
            bin->rhs = primary();
            e = std::move(bin);
        }
        return e;
    }

    ExprPtr primary() {
        auto e = std::make_unique<Expr>();
        e->loc = cur().loc;
        if (at(Tok::Int)) {
            Token t = take();
            e->kind = Expr::Kind::IntLit;
            e->intValue = t.value;
            return e;
        }
        if (at(Tok::Str)) {
            Token t = take();
            e->kind = Expr::Kind::StrLit;
            e->text = t.text;
            return e;
        }
        if (at(Tok::LParen)) {
            take();
            ExprPtr inner = expression();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (at(Tok::Ident)) {
            Token t = take();
            if (at(Tok::LParen)) {
                take();
                e->kind = Expr::Kind::Call;
                e->text = t.text;
                if (!at(Tok::RParen)) {
                    for (;;) {
                        e->args.push_back(expression());
                        if (at(Tok::Comma)) {
                            take();
                            continue;
                        }
                        break;
                    }
                }
                expect(Tok::RParen, "')'");
                return e;
            }
            e->kind = Expr::Kind::VarRef;
            e->text = t.text;
            return e;
        }
        err(cur().loc, "expected expression");
    }

    // Name resolution: every identifier must name exactly one declaration in
    // scope. Locals are function-scoped, must be declared before use, and may
    // not shadow parameters, other locals, or top-level names.
    void resolve(const Ast& ast) {
        for (const auto& fn : ast.functions) {
            std::set<std::string> locals;
            for (const auto& p : fn.params) {
                if (find_builtin(p)) err(fn.loc, "'" + p + "' is a reserved builtin name");
                if (topNames_.count(p)) err(fn.loc, "parameter '" + p + "' shadows a top-level name");
                if (!locals.insert(p).second) err(fn.loc, "duplicate parameter '" + p + "'");
            }
            for (const auto& st : fn.body) resolve_stmt(ast, *st, locals);
        }
    }

    void resolve_stmt(const Ast& ast, const Stmt& s, std::set<std::string>& locals) {
        switch (s.kind) {
        case Stmt::Kind::If:
            resolve_expr(ast, *s.expr, locals);
            resolve_stmt(ast, *s.thenBranch, locals);
            if (s.elseBranch) resolve_stmt(ast, *s.elseBranch, locals);
            break;
        case Stmt::Kind::Block:
            for (const auto& st : s.stmts) resolve_stmt(ast, *st, locals);
            break;
        case Stmt::Kind::Return:
            if (s.expr) resolve_expr(ast, *s.expr, locals);
            break;
        case Stmt::Kind::LocalDecl:
            if (s.expr) resolve_expr(ast, *s.expr, locals);
            if (find_builtin(s.name)) err(s.loc, "'" + s.name + "' is a reserved builtin name");
            if (topNames_.count(s.name))
                err(s.loc, "local '" + s.name + "' shadows a top-level name");
            if (!locals.insert(s.name).second)
                err(s.loc, "duplicate local '" + s.name + "'");
            break;
        case Stmt::Kind::Assign:
            resolve_expr(ast, *s.expr, locals);
            if (!locals.count(s.name) && !topNames_.count(s.name))
                throw UndeclaredIdentifier(file_, s.loc, "undeclared identifier '" + s.name + "'");
            break;
        case Stmt::Kind::ExprStmt:
            resolve_expr(ast, *s.expr, locals);
            break;
        }
    }

    void resolve_expr(const Ast& ast, const Expr& e, const std::set<std::string>& locals) {
        switch (e.kind) {
        case Expr::Kind::IntLit:
        case Expr::Kind::StrLit:
            break;
        case Expr::Kind::VarRef:
            if (!locals.count(e.text) && !topNames_.count(e.text)) {
                if (find_builtin(e.text))
                    throw UndeclaredIdentifier(file_, e.loc,
                                               "builtin '" + e.text + "' can only be called");
                throw UndeclaredIdentifier(file_, e.loc,
                                           "undeclared identifier '" + e.text + "'");
            }
            break;
        case Expr::Kind::Call:
            if (!find_builtin(e.text) && !topNames_.count(e.text))
                throw UndeclaredIdentifier(file_, e.loc,
                                           "undeclared identifier '" + e.text + "'");
            for (const auto& a : e.args) resolve_expr(ast, *a, locals);
            break;
        case Expr::Kind::Binary:
            resolve_expr(ast, *e.lhs, locals);
            resolve_expr(ast, *e.rhs, locals);
            break;
        }
    }

    std::string file_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string> topNames_;
};

} // namespace detail

inline Ast parse(const SourceUnit& unit) { return detail::Parser(unit).run(); }

} // namespace fac
