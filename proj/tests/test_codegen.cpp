#include <catch2/catch_amalgamated.hpp>

#include "fac/classify.hpp"
#include "fac/codegen.hpp"
#include "fac/format.hpp"
#include "fac/parser.hpp"

using namespace fac;

namespace {

ObjectModule compile_src(const std::string& body, CodegenOptions opts = {}) {
    Ast ast = classify_conditions(parse(SourceUnit{"unit", body}));
    return compile_unit(ast, opts);
}

std::vector<Instruction> body_of(const ObjectModule& m, std::string_view fn) {
    const SymbolEntry* s = m.find_symbol(fn);
    REQUIRE(s != nullptr);
    REQUIRE(s->defined());
    return m.code[s->location].code;
}

} // namespace

TEST_CASE("FAC guarding a single call lowers to FACJZ over the guarded region") {
    ObjectModule m = compile_src("extern void foo();\n"
                                 "void container_function()\n"
                                 "{\n    if (foo)\n        foo();\n}\n");
    // Hand trace: scratch local is slot 0 in a function without params/locals.
    std::vector<Instruction> expected = {
        {Op::FACJZ, 0, 3}, // got slot of foo; skip call and discard
        {Op::CALLX, 0, 0}, // plt slot of foo
        {Op::STOREL, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "container_function") == expected);
    REQUIRE(m.relocations.size() == 2);
    CHECK(m.relocations[0].kind == RelocKind::GotSlot);
    CHECK(m.relocations[1].kind == RelocKind::PltSlot);
}

TEST_CASE("constant-true fold emits the body with no branch") {
    ObjectModule m = compile_src("void local_fn() {}\n"
                                 "void f()\n{\n    if (local_fn)\n        local_fn();\n}\n");
    std::vector<Instruction> expected = {
        {Op::CALLI, 0, 0},
        {Op::STOREL, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "f") == expected);
}

TEST_CASE("unoptimized constant-true keeps a real branch") {
    CodegenOptions opts;
    opts.optimize = false;
    ObjectModule m = compile_src("void local_fn() {}\n"
                                 "void f()\n{\n    if (local_fn)\n        local_fn();\n}\n",
                                 opts);
    std::vector<Instruction> expected = {
        {Op::LOADI, 1, 0},
        {Op::JZ, 4, 0},
        {Op::CALLI, 0, 0},
        {Op::STOREL, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "f") == expected);
}

TEST_CASE("compound FAC emits one FACJZ skipping every guarded statement") {
    ObjectModule m = compile_src("extern void h();\n"
                                 "void f()\n{\n    if (h) {\n        h();\n        h();\n"
                                 "        h();\n    }\n}\n");
    auto code = body_of(m, "f");
    REQUIRE(code.size() == 9);
    CHECK(code[0] == Instruction{Op::FACJZ, 0, 7});
    int facCount = 0;
    for (const auto& in : code)
        if (in.op == Op::FACJZ) ++facCount;
    CHECK(facCount == 1);
}

TEST_CASE("if/else FAC takes the else branch when unavailable") {
    ObjectModule m = compile_src("extern void p();\n"
                                 "void f()\n{\n    if (p)\n        p();\n"
                                 "    else\n        print_str(\"no\");\n}\n");
    std::vector<Instruction> expected = {
        {Op::FACJZ, 0, 4}, // to the else branch, past the join jump
        {Op::CALLX, 0, 0},
        {Op::STOREL, 0, 0},
        {Op::JMP, 6, 0},
        {Op::LOADS, 2, 0}, // string pool holds the symbol names first
        {Op::PRINT_STR, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "f") == expected);
}

TEST_CASE("empty guarded block jumps to the next instruction") {
    ObjectModule m = compile_src("extern void foo();\nvoid f()\n{\n    if (foo) {}\n}\n");
    std::vector<Instruction> expected = {
        {Op::FACJZ, 0, 1},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "f") == expected);
}

TEST_CASE("nested FACs on distinct externs use distinct GOT slots") {
    ObjectModule m = compile_src("extern void a();\nextern void b();\n"
                                 "void f()\n{\n    if (a) {\n        a();\n"
                                 "        if (b)\n            b();\n    }\n}\n");
    std::vector<Instruction> expected = {
        {Op::FACJZ, 0, 6}, {Op::CALLX, 0, 0}, {Op::STOREL, 0, 0},
        {Op::FACJZ, 1, 6}, {Op::CALLX, 1, 0}, {Op::STOREL, 0, 0},
        {Op::LOADI, 0, 0}, {Op::RET, 0, 0},
    };
    CHECK(body_of(m, "f") == expected);
}

TEST_CASE("standalone FAC lowering") {
    Ast ast = classify_conditions(parse(SourceUnit{
        "u", "extern void foo();\nvoid f()\n{\n    if (foo)\n        foo();\n}\n"}));
    const Stmt& node = *ast.functions[0].body[0];

    SECTION("uses the provided slot indices") {
        SlotMap slots{{"foo", {5, 2}}};
        auto code = lower_fac_if(node, slots);
        std::vector<Instruction> expected = {
            {Op::FACJZ, 5, 3},
            {Op::CALLX, 2, 0},
            {Op::STOREL, 0, 0},
        };
        CHECK(code == expected);
    }
    SECTION("missing slot") {
        REQUIRE_THROWS_AS(lower_fac_if(node, SlotMap{}), MissingSlot);
    }
}

TEST_CASE("value-position and arity errors") {
    CHECK_THROWS_AS(compile_src("extern void foo();\nvoid f()\n{\n    int x = foo;\n}\n"),
                    CodegenError);
    CHECK_THROWS_AS(compile_src("extern void foo();\nvoid f()\n{\n    print_int(foo + 1);\n}\n"),
                    CodegenError);
    CHECK_THROWS_AS(compile_src("extern void foo();\nint x;\nvoid f()\n{\n    foo = 3;\n}\n"),
                    CodegenError);
    CHECK_THROWS_AS(compile_src("void g() {}\nvoid f()\n{\n    int x = g();\n}\n"),
                    CodegenError);
    CHECK_THROWS_AS(compile_src("extern void foo(int);\nvoid f()\n{\n    foo();\n}\n"),
                    CodegenError);
    CHECK_THROWS_AS(compile_src("void f()\n{\n    return 1;\n}\n"), CodegenError);
    CHECK_THROWS_AS(compile_src("int x;\nvoid f()\n{\n    x();\n}\n"), CodegenError);
}

TEST_CASE("a complex condition containing a bare extern function is rejected") {
    // Classified TRADITIONAL first, then the operand itself is the error.
    CHECK_THROWS_AS(compile_src("extern void foo();\nint x;\n"
                                "void f()\n{\n    if (foo == x) {}\n}\n"),
                    CodegenError);
}

TEST_CASE("compiling an unclassified unit fails") {
    Ast ast = parse(SourceUnit{"u", "extern void foo();\nvoid f()\n{\n    if (foo) {}\n}\n"});
    REQUIRE_THROWS_AS(compile_unit(ast, {}), CodegenError);
}

TEST_CASE("weak mode adds one table-setup instruction per function") {
    std::string src = "extern void foo();\n"
                      "void container_function()\n{\n    if (foo)\n        foo();\n}\n"
                      "void other() {}\n";
    ObjectModule facMode = compile_src(src);
    CodegenOptions weak;
    weak.mode = CodegenMode::WeakAlias;
    ObjectModule weakMode = compile_src(src, weak);
    CHECK(weakMode.instruction_count() == facMode.instruction_count() + 2);
    auto code = body_of(weakMode, "container_function");
    CHECK(code[0] == Instruction{Op::JMP, 1, 0});
    CHECK(code[1] == Instruction{Op::FACJZ, 0, 4});
}

TEST_CASE("bindings: weak extern stays weak, plain extern stays a hard requirement") {
    for (CodegenMode mode : {CodegenMode::FacNative, CodegenMode::WeakAlias}) {
        CodegenOptions opts;
        opts.mode = mode;
        ObjectModule m = compile_src("extern void hard();\nweak extern void soft();\n"
                                     "void f()\n{\n    if (hard) hard();\n"
                                     "    if (soft) soft();\n}\n",
                                     opts);
        CHECK(m.find_symbol("hard")->binding == SymBinding::Undefined);
        CHECK(m.find_symbol("soft")->binding == SymBinding::WeakUndefined);
    }
}

TEST_CASE("every FACJZ and CALLX of one symbol agrees on its slot") {
    ObjectModule m = compile_src("extern void a();\nextern void b();\n"
                                 "void f()\n{\n    if (a) a();\n    if (b) b();\n"
                                 "    if (a) a();\n}\n");
    SlotLayouts layouts = derive_layouts(m);
    for (const auto& r : m.relocations) {
        const Instruction& in = m.code[r.funcIdx].code[r.instrIdx];
        std::string_view sym = m.str(r.symNameIdx);
        std::uint32_t operand = r.operandIdx == 0 ? in.a : in.b;
        if (r.kind == RelocKind::GotSlot)
            CHECK(operand == *got_slot_of(m, layouts, sym));
        else
            CHECK(operand == *plt_slot_of(m, layouts, sym));
    }
}

TEST_CASE("globals and extern variables route through GOT slots") {
    ObjectModule m = compile_src("int g = 5;\nextern int xv;\n"
                                 "void f()\n{\n    g = xv + 1;\n    print_int(g);\n}\n");
    auto code = body_of(m, "f");
    // xv load, add, store g, load g, print
    std::vector<Instruction> expected = {
        {Op::LOADG, 0, 0},  // xv: first GOT slot (undefined data precedes defined)
        {Op::LOADI, 1, 0},
        {Op::ADD, 0, 0},
        {Op::STOREG, 1, 0}, // g
        {Op::LOADG, 1, 0},
        {Op::PRINT_INT, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(code == expected);
    CHECK(m.dataInit == std::vector<std::int64_t>{5});
}

TEST_CASE("compilation is deterministic") {
    std::string src = "extern void a();\nint g = 2;\n"
                      "void f()\n{\n    if (a) a();\n    print_int(g);\n}\n"
                      "int main()\n{\n    f();\n    return 0;\n}\n";
    auto once = encode_module(compile_src(src));
    auto twice = encode_module(compile_src(src));
    CHECK(once == twice);
}
