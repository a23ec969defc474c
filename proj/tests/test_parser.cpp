#include <catch2/catch_amalgamated.hpp>

#include "fac/parser.hpp"

using namespace fac;

namespace {
Ast parse_src(const std::string& body) { return parse(SourceUnit{"test", body}); }
} // namespace

TEST_CASE("container function with extern declaration parses") {
    Ast ast = parse_src("extern void foo();\n"
                        "void container_function()\n"
                        "{\n"
                        "    if (foo)\n"
                        "        foo();\n"
                        "}\n");
    REQUIRE(ast.externFuncs.size() == 1);
    CHECK(ast.externFuncs[0].name == "foo");
    CHECK(ast.externFuncs[0].arity == 0);
    CHECK_FALSE(ast.externFuncs[0].weak);
    REQUIRE(ast.functions.size() == 1);
    CHECK(ast.functions[0].name == "container_function");
    REQUIRE(ast.functions[0].body.size() == 1);
    CHECK(ast.functions[0].body[0]->kind == Stmt::Kind::If);
}

TEST_CASE("empty body yields empty lists") {
    Ast ast = parse_src("");
    CHECK(ast.functions.empty());
    CHECK(ast.externFuncs.empty());
    CHECK(ast.externVars.empty());
    CHECK(ast.globals.empty());
}

TEST_CASE("unclosed if condition reports the offending token") {
    try {
        parse_src("extern void foo();\n"
                  "void f()\n"
                  "{\n"
                  "    if (foo\n"
                  "}\n");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.loc().line == 5);
        CHECK(e.loc().col == 1);
    }
}

TEST_CASE("declarations") {
    SECTION("weak extern function") {
        Ast ast = parse_src("weak extern int maybe(int, int);\n");
        REQUIRE(ast.externFuncs.size() == 1);
        CHECK(ast.externFuncs[0].weak);
        CHECK(ast.externFuncs[0].arity == 2);
        CHECK(ast.externFuncs[0].returnsInt);
    }
    SECTION("extern variable") {
        Ast ast = parse_src("extern int gamma;\n");
        REQUIRE(ast.externVars.size() == 1);
        CHECK(ast.externVars[0].name == "gamma");
    }
    SECTION("globals with and without initializers") {
        Ast ast = parse_src("int a;\nint b = 7;\nint c = -3;\n");
        REQUIRE(ast.globals.size() == 3);
        CHECK(ast.globals[0].init == 0);
        CHECK(ast.globals[1].init == 7);
        CHECK(ast.globals[2].init == -3);
    }
    SECTION("weak extern variable is rejected") {
        REQUIRE_THROWS_AS(parse_src("weak extern int v;\n"), SyntaxError);
    }
    SECTION("duplicate top-level name") {
        REQUIRE_THROWS_AS(parse_src("int a;\nvoid a() {}\n"), SyntaxError);
    }
    SECTION("builtin names are reserved") {
        REQUIRE_THROWS_AS(parse_src("void print_int(int x) {}\n"), SyntaxError);
        REQUIRE_THROWS_AS(parse_src("int dyn_open;\n"), SyntaxError);
    }
}

TEST_CASE("string literals and escapes") {
    Ast ast = parse_src("void f()\n{\n    print_str(\"a\\n\\t\\\"b\\\\\");\n}\n");
    const Stmt& st = *ast.functions[0].body[0];
    REQUIRE(st.kind == Stmt::Kind::ExprStmt);
    REQUIRE(st.expr->kind == Expr::Kind::Call);
    CHECK(st.expr->args[0]->text == "a\n\t\"b\\");

    REQUIRE_THROWS_AS(parse_src("void f() { print_str(\"open; }\n"), SyntaxError);
    REQUIRE_THROWS_AS(parse_src("void f() { print_str(\"bad\\q\"); }\n"), SyntaxError);
}

TEST_CASE("operator precedence: equality binds looser than additive") {
    Ast ast = parse_src("int f(int a, int b)\n{\n    return a == b + 1;\n}\n");
    const Expr& e = *ast.functions[0].body[0]->expr;
    REQUIRE(e.kind == Expr::Kind::Binary);
    CHECK(e.op == BinOp::Eq);
    REQUIRE(e.rhs->kind == Expr::Kind::Binary);
    CHECK(e.rhs->op == BinOp::Add);
}

TEST_CASE("name resolution") {
    SECTION("use before declaration is rejected") {
        REQUIRE_THROWS_AS(parse_src("void f()\n{\n    x = 1;\n    int x;\n}\n"),
                          UndeclaredIdentifier);
    }
    SECTION("undeclared identifier in expression") {
        REQUIRE_THROWS_AS(parse_src("void f()\n{\n    print_int(ghost);\n}\n"),
                          UndeclaredIdentifier);
    }
    SECTION("duplicate local") {
        REQUIRE_THROWS_AS(parse_src("void f()\n{\n    int x;\n    int x;\n}\n"), SyntaxError);
    }
    SECTION("local shadowing a top-level name") {
        REQUIRE_THROWS_AS(parse_src("int g;\nvoid f()\n{\n    int g;\n}\n"), SyntaxError);
    }
    SECTION("bare builtin reference") {
        REQUIRE_THROWS_AS(parse_src("void f()\n{\n    if (print_int) {}\n}\n"),
                          UndeclaredIdentifier);
    }
    SECTION("locals resolve after declaration, parameters always") {
        Ast ast = parse_src("int f(int p)\n{\n    int x = p + 1;\n    return x - p;\n}\n");
        CHECK(ast.functions.size() == 1);
    }
}

TEST_CASE("integer literal range") {
    CHECK_NOTHROW(parse_src("int g = 2147483647;\n"));
    REQUIRE_THROWS_AS(parse_src("int g = 2147483648;\n"), SyntaxError);
}

TEST_CASE("calls, blocks, if/else shapes") {
    Ast ast = parse_src("extern int add2(int, int);\n"
                        "int main()\n"
                        "{\n"
                        "    int r = add2(1, 2 + 3);\n"
                        "    if (r == 6) {\n"
                        "        print_int(r);\n"
                        "    } else\n"
                        "        print_int(0 - r);\n"
                        "    return r;\n"
                        "}\n");
    const FuncDef& mainFn = ast.functions[0];
    REQUIRE(mainFn.body.size() == 3);
    const Stmt& ifStmt = *mainFn.body[1];
    REQUIRE(ifStmt.kind == Stmt::Kind::If);
    CHECK(ifStmt.thenBranch->kind == Stmt::Kind::Block);
    REQUIRE(ifStmt.elseBranch);
    CHECK(ifStmt.elseBranch->kind == Stmt::Kind::ExprStmt);
}
