#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace fac;
using testutil::compile_source;

namespace {

ObjectModule mime_core() {
    return compile_source("mime_core",
                          "extern void png_handler(int);\n"
                          "int main()\n{\n    if (png_handler)\n        png_handler(1);\n"
                          "    return 0;\n}\n");
}

std::vector<std::string> got_names(const ObjectModule& m) {
    std::vector<std::string> out;
    SlotLayouts layouts = derive_layouts(m);
    for (auto si : layouts.gotSyms) out.emplace_back(m.symbol_name(m.symbols[si]));
    return out;
}

} // namespace

TEST_CASE("tolerant link assigns a GOT slot to the optional handler") {
    ObjectModule exe = link({mime_core()}, ModuleKind::Executable, LinkMode::Tolerant, {},
                            {"libpng"}, "mime");
    CHECK(exe.kind == ModuleKind::Executable);
    CHECK(got_names(exe) == std::vector<std::string>{"png_handler"});
    CHECK(exe.needed_names() == std::vector<std::string>{"libpng"});
}

TEST_CASE("strict link without a definition or stub fails") {
    try {
        link({mime_core()}, ModuleKind::Executable, LinkMode::Strict, {}, {"libpng"}, "mime");
        FAIL("expected UndefinedReference");
    } catch (const UndefinedReference& e) {
        CHECK(e.symbol() == "png_handler");
    }
}

TEST_CASE("closed program links with empty GOT and PLT") {
    ObjectModule exe = link({compile_source("solo", "int main()\n{\n    return 7;\n}\n")},
                            ModuleKind::Executable, LinkMode::Strict, {}, {}, "solo");
    SlotLayouts layouts = derive_layouts(exe);
    CHECK(layouts.gotSyms.empty());
    CHECK(layouts.pltSyms.empty());
}

TEST_CASE("a generated stub satisfies the strict link that failed without it") {
    StubSpec spec;
    spec.libName = "libpng";
    spec.functions = {{"png_handler", 1}};
    ObjectModule stub = gen_stub(spec);
    CHECK(stub.kind == ModuleKind::SharedLib);
    const SymbolEntry* fn = stub.find_symbol("png_handler");
    REQUIRE(fn != nullptr);
    CHECK(fn->defined());
    CHECK(stub.code[fn->location].code == std::vector<Instruction>{{Op::TRAP, 12, 0}});

    ObjectModule exe =
        link({mime_core()}, ModuleKind::Executable, LinkMode::Strict, {stub}, {}, "mime");
    CHECK(exe.needed_names() == std::vector<std::string>{"libpng"});
}

TEST_CASE("stub variables are zero-initialized data") {
    StubSpec spec;
    spec.libName = "libvars";
    spec.variables = {"a", "b"};
    ObjectModule stub = gen_stub(spec);
    CHECK(stub.dataInit == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("empty stub spec yields an empty valid library") {
    StubSpec spec;
    spec.libName = "empty";
    ObjectModule stub = gen_stub(spec);
    CHECK(stub.symbols.empty());
    CHECK_NOTHROW(encode_module(stub));
}

TEST_CASE("duplicate stub names are rejected") {
    StubSpec spec;
    spec.libName = "dup";
    spec.functions = {{"x", 0}};
    spec.variables = {"x"};
    REQUIRE_THROWS_AS(gen_stub(spec), DuplicateSymbol);
}

TEST_CASE("duplicate defined symbols across inputs are rejected") {
    ObjectModule a = compile_source("a", "void f() {}\n");
    ObjectModule b = compile_source("b", "void f() {}\nint main() { return 0; }\n");
    REQUIRE_THROWS_AS(link({a, b}, ModuleKind::Executable, LinkMode::Tolerant, {}, {}, "x"),
                      DuplicateSymbol);
}

TEST_CASE("kind mismatches are rejected") {
    SECTION("referenced as FUNC, defined as DATA across units") {
        ObjectModule a = compile_source(
            "a",
            "extern void thing();\nint main()\n{\n    if (thing) thing();\n    return 0;\n}\n");
        ObjectModule b = compile_source("b", "int thing = 1;\n");
        REQUIRE_THROWS_AS(link({a, b}, ModuleKind::Executable, LinkMode::Tolerant, {}, {}, "x"),
                          KindMismatch);
    }
    SECTION("promised by a library with the wrong kind") {
        ObjectModule a = compile_source(
            "a",
            "extern int shared_v;\nint main()\n{\n    print_int(shared_v);\n    return 0;\n}\n");
        ObjectModule lib =
            link({compile_source("libv", "void shared_v() {}\n")}, ModuleKind::SharedLib,
                 LinkMode::Strict, {}, {}, "libv");
        REQUIRE_THROWS_AS(link({a}, ModuleKind::Executable, LinkMode::Strict, {lib}, {}, "x"),
                          KindMismatch);
    }
    SECTION("non-relocatable input") {
        ObjectModule a = compile_source("a", "int main() { return 0; }\n");
        ObjectModule exe = link({a}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "e");
        REQUIRE_THROWS_AS(link({exe}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "x"),
                          KindMismatch);
    }
}

TEST_CASE("weak undefined references never fail a strict link") {
    ObjectModule a = compile_source(
        "a",
        "weak extern void maybe();\nint main()\n{\n    if (maybe) maybe();\n    return 0;\n}\n");
    CHECK_NOTHROW(link({a}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "x"));
}

TEST_CASE("a strict-mode success links byte-identically in tolerant mode") {
    StubSpec spec;
    spec.libName = "libpng";
    spec.functions = {{"png_handler", 1}};
    ObjectModule stub = gen_stub(spec);
    auto strict = encode_module(
        link({mime_core()}, ModuleKind::Executable, LinkMode::Strict, {stub}, {}, "mime"));
    auto tolerant = encode_module(
        link({mime_core()}, ModuleKind::Executable, LinkMode::Tolerant, {stub}, {}, "mime"));
    CHECK(strict == tolerant);
}

TEST_CASE("needed order is preserved exactly") {
    StubSpec s1;
    s1.libName = "libb";
    StubSpec s2;
    s2.libName = "liba";
    ObjectModule exe =
        link({compile_source("m", "int main() { return 0; }\n")}, ModuleKind::Executable,
             LinkMode::Strict, {gen_stub(s1), gen_stub(s2)}, {"libz", "liba"}, "m");
    // command-line library order first, then extra declarations, de-duplicated
    CHECK(exe.needed_names() == std::vector<std::string>{"libb", "liba", "libz"});
}

TEST_CASE("cross-unit references resolve to direct calls") {
    ObjectModule a = compile_source(
        "a", "extern void helper();\nint main()\n{\n    if (helper)\n        helper();\n"
             "    return 0;\n}\n");
    ObjectModule b = compile_source("b", "void helper()\n{\n    print_str(\"hi\");\n}\n");
    ObjectModule exe = link({a, b}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "joined");

    // helper became internal: the FAC folds to a fall-through jump, the call goes direct.
    const SymbolEntry* mainSym = exe.find_symbol("main");
    REQUIRE(mainSym);
    const auto& code = exe.code[mainSym->location].code;
    std::vector<Instruction> expected = {
        {Op::JMP, 1, 0},
        {Op::CALLI, 1, 0},
        {Op::STOREL, 0, 0},
        {Op::LOADI, 0, 0},
        {Op::RET, 0, 0},
    };
    CHECK(code == expected);
    CHECK(exe.relocations.empty());
    CHECK(derive_layouts(exe).gotSyms.empty());
}

TEST_CASE("cross-unit data references keep GOT routing") {
    ObjectModule a = compile_source(
        "a", "extern int shared_v;\nint main()\n{\n    print_int(shared_v);\n    return 0;\n}\n");
    ObjectModule b = compile_source("b", "int shared_v = 9;\n");
    ObjectModule exe = link({a, b}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "joined");
    CHECK(got_names(exe) == std::vector<std::string>{"shared_v"});
    REQUIRE(exe.relocations.size() == 1);
    CHECK(exe.relocations[0].kind == RelocKind::GotSlot);
    const SymbolEntry* v = exe.find_symbol("shared_v");
    REQUIRE(v);
    CHECK(v->defined());
    CHECK(exe.dataInit == std::vector<std::int64_t>{9});
}

TEST_CASE("slot uniqueness across several referencing units") {
    ObjectModule a = compile_source(
        "a", "extern void shared_fn(int);\nvoid fa()\n{\n    if (shared_fn) shared_fn(1);\n}\n");
    ObjectModule b = compile_source(
        "b", "extern void shared_fn(int);\nvoid fb()\n{\n    if (shared_fn) shared_fn(2);\n}\n"
             "int main()\n{\n    fb();\n    return 0;\n}\n");
    ObjectModule exe = link({a, b}, ModuleKind::Executable, LinkMode::Tolerant, {}, {}, "x");
    SlotLayouts layouts = derive_layouts(exe);
    REQUIRE(layouts.gotSyms.size() == 1);
    REQUIRE(layouts.pltSyms.size() == 1);
    for (const auto& r : exe.relocations) {
        const Instruction& in = exe.code[r.funcIdx].code[r.instrIdx];
        CHECK((r.operandIdx == 0 ? in.a : in.b) == 0); // single slot, index 0
    }
}

TEST_CASE("an executable must define main") {
    ObjectModule a = compile_source("a", "void not_main() {}\n");
    REQUIRE_THROWS_AS(link({a}, ModuleKind::Executable, LinkMode::Strict, {}, {}, "x"),
                      UndefinedReference);
    CHECK_NOTHROW(link({a}, ModuleKind::SharedLib, LinkMode::Strict, {}, {}, "x"));
}

TEST_CASE("hard references win over weak ones when merging") {
    ObjectModule a =
        compile_source("a", "weak extern void f();\nvoid ua()\n{\n    if (f) f();\n}\n");
    ObjectModule b =
        compile_source("b", "extern void f();\nint main()\n{\n    f();\n    return 0;\n}\n");
    ObjectModule exe = link({a, b}, ModuleKind::Executable, LinkMode::Tolerant, {}, {}, "x");
    CHECK(exe.find_symbol("f")->binding == SymBinding::Undefined);
}
