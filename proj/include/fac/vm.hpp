#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include "fac/diag.hpp"
#include "fac/loader.hpp"
#include "fac/value.hpp"

namespace fac {

struct ExitReport {
    int exitCode = 0;
    std::string stdoutText;
    struct TrapInfo {
        TrapCode code;
        std::string location;
    };
    std::optional<TrapInfo> trap;
};

struct RunOptions {
    std::uint64_t maxSteps = 200'000'000; // runaway guard
    std::FILE* probeStream = nullptr;     // start-of-main timestamp, for the bench harness
};

namespace detail {

inline std::uint64_t monotonic_ns() {
    timespec ts{};
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ull +
           static_cast<std::uint64_t>(ts.tv_nsec);
}

class Vm {
public:
    Vm(ProcessImage& p, const RunOptions& opts) : p_(p), opts_(opts) {}

    ExitReport run(const std::vector<std::int64_t>& entryArgs) {
        ExitReport rep;
        try {
            const SymbolEntry* entry = p_.exe->obj.find_symbol("main");
            if (!entry || entry->kind != SymKind::Func || !entry->defined())
                throw Trap(TrapCode::UnresolvedCall, p_.exe->name + ":main");
            const FuncBody& mainFn = p_.exe->obj.code[entry->location];
            if (mainFn.paramCount != entryArgs.size())
                throw Trap(TrapCode::StackFault, p_.exe->name + ":main (argument count)");
            for (auto v : entryArgs) push(v);
            enter(p_.exe.get(), entry->location);
            if (opts_.probeStream) {
                std::fprintf(opts_.probeStream, "FAC_BENCH_PROBE_NS %" PRIu64 "\n",
                             monotonic_ns());
                std::fflush(opts_.probeStream);
            }
            rep.exitCode = loop();
        } catch (const Trap& t) {
            rep.exitCode = static_cast<int>(t.code());
            rep.trap = ExitReport::TrapInfo{t.code(), t.location()};
        }
        rep.stdoutText = std::move(out_);
        return rep;
    }

private:
    static constexpr std::size_t kMaxFrames = 512;
    static constexpr std::size_t kMaxStack = 1 << 16;

    struct Frame {
        RuntimeModule* mod;
        std::uint32_t funcIdx;
        std::uint32_t ip = 0;
        std::size_t floor = 0;
        std::vector<RuntimeValue> locals;
    };

    ProcessImage& p_;
    RunOptions opts_;
    std::vector<RuntimeValue> stack_;
    std::vector<Frame> frames_;
    std::string out_;
    std::uint64_t steps_ = 0;

    std::string loc() const {
        if (frames_.empty()) return "?";
        const Frame& fr = frames_.back();
        return fr.mod->name + ":" + std::string(fr.mod->func_name(fr.funcIdx)) + "+" +
               std::to_string(fr.ip);
    }

    [[noreturn]] void fault(const std::string& why) const {
        throw Trap(TrapCode::StackFault, loc() + " (" + why + ")");
    }

    void push(RuntimeValue v) {
        if (stack_.size() >= kMaxStack) fault("operand stack overflow");
        stack_.push_back(std::move(v));
    }

    RuntimeValue pop() {
        if (frames_.empty() || stack_.size() <= frames_.back().floor)
            fault("operand stack underflow");
        RuntimeValue v = std::move(stack_.back());
        stack_.pop_back();
        return v;
    }

    std::int64_t pop_int(const char* what) {
        RuntimeValue v = pop();
        if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
        fault(std::string(what) + " expects an integer");
    }

    void enter(RuntimeModule* mod, std::uint32_t funcIdx) {
        if (funcIdx >= mod->obj.code.size()) fault("call target out of range");
        const FuncBody& f = mod->obj.code[funcIdx];
        if (frames_.size() >= kMaxFrames) fault("call depth exceeded");
        std::size_t callerFloor = frames_.empty() ? 0 : frames_.back().floor;
        if (stack_.size() < callerFloor + f.paramCount) fault("not enough arguments");
        Frame fr;
        fr.mod = mod;
        fr.funcIdx = funcIdx;
        fr.locals.assign(f.localCount, RuntimeValue(std::int64_t{0}));
        for (std::uint32_t i = 0; i < f.paramCount; ++i) {
            fr.locals[f.paramCount - 1 - i] = std::move(stack_.back());
            stack_.pop_back();
        }
        fr.floor = stack_.size();
        frames_.push_back(std::move(fr));
    }

    const GotSlot& got_slot(std::uint32_t idx) {
        Frame& fr = frames_.back();
        if (idx >= fr.mod->got.size()) fault("GOT index out of range");
        return fr.mod->got[idx];
    }

    int loop() {
        while (!frames_.empty()) {
            Frame& fr = frames_.back();
            const auto& codeVec = fr.mod->obj.code[fr.funcIdx].code;
            if (fr.ip >= codeVec.size()) fault("fell off function end");
            if (++steps_ > opts_.maxSteps) fault("step limit exceeded");
            const Instruction in = codeVec[fr.ip];
            switch (in.op) {
            case Op::LOADI:
                push(decode_imm(in.a));
                ++fr.ip;
                break;
            case Op::LOADS:
                push(std::string(fr.mod->obj.str(in.a)));
                ++fr.ip;
                break;
            case Op::LOADL:
                if (in.a >= fr.locals.size()) fault("local index out of range");
                push(fr.locals[in.a]);
                ++fr.ip;
                break;
            case Op::STOREL:
                if (in.a >= fr.locals.size()) fault("local index out of range");
                fr.locals[in.a] = pop();
                ++fr.ip;
                break;
            case Op::LOADG: {
                const GotSlot& slot = got_slot(in.a);
                if (slot.state == SlotState::PoisonedData)
                    throw Trap(TrapCode::PoisonedDataAccess, loc());
                if (slot.state != SlotState::Bound || !slot.isData)
                    fault("LOADG on a non-data slot");
                push(slot.mod->data[slot.index]);
                ++fr.ip;
                break;
            }
            case Op::STOREG: {
                RuntimeValue v = pop();
                const GotSlot& slot = got_slot(in.a);
                if (slot.state == SlotState::PoisonedData)
                    throw Trap(TrapCode::PoisonedDataAccess, loc());
                if (slot.state != SlotState::Bound || !slot.isData)
                    fault("STOREG on a non-data slot");
                slot.mod->data[slot.index] = std::move(v);
                ++fr.ip;
                break;
            }
            case Op::ADD:
            case Op::SUB: {
                std::int64_t b = pop_int("arithmetic");
                std::int64_t a = pop_int("arithmetic");
                push(in.op == Op::ADD ? a + b : a - b);
                ++fr.ip;
                break;
            }
            case Op::EQ:
            case Op::NE: {
                RuntimeValue b = pop();
                RuntimeValue a = pop();
                bool eq = values_equal(a, b);
                push(std::int64_t{(in.op == Op::EQ) == eq ? 1 : 0});
                ++fr.ip;
                break;
            }
            case Op::JZ: {
                RuntimeValue v = pop();
                fr.ip = truthy(v) ? fr.ip + 1 : in.a;
                break;
            }
            case Op::JMP:
                fr.ip = in.a;
                break;
            case Op::CALLI:
                ++fr.ip;
                enter(fr.mod, in.a);
                break;
            case Op::CALLX: {
                RuntimeModule* mod = fr.mod;
                if (in.a >= mod->pltGotIdx.size()) fault("PLT index out of range");
                const GotSlot* slot = &mod->got[mod->pltGotIdx[in.a]];
                if (slot->state == SlotState::LazyStub)
                    slot = &lazy_resolve_in(p_, *mod, slot->pltIdx);
                if (slot->state == SlotState::NullSentinel)
                    throw Trap(TrapCode::UnresolvedCall, loc());
                if (slot->state != SlotState::Bound || slot->isData)
                    fault("CALLX through a non-function slot");
                ++fr.ip;
                enter(slot->mod, slot->index);
                break;
            }
            case Op::CALLD: {
                RuntimeValue v = pop();
                const auto* ref = std::get_if<FuncRefVal>(&v);
                if (!ref) fault("indirect call on a non-function value");
                if (ref->libId == 0) throw Trap(TrapCode::UnresolvedCall, loc());
                ProcessImage::DlLib& lib = p_.dlLibs[ref->libId - 1];
                if (!lib.alive) throw Trap(TrapCode::StaleHandle, loc());
                if (ref->funcIdx >= lib.mod->obj.code.size())
                    fault("indirect call target out of range");
                if (lib.mod->obj.code[ref->funcIdx].paramCount != in.a)
                    fault("indirect call arity mismatch");
                ++fr.ip;
                enter(lib.mod.get(), ref->funcIdx);
                break;
            }
            case Op::FACJZ: {
                const GotSlot& slot = got_slot(in.a);
                fr.ip = slot.state == SlotState::NullSentinel ? in.b : fr.ip + 1;
                break;
            }
            case Op::RET: {
                RuntimeValue result = pop();
                if (stack_.size() != fr.floor) fault("frame imbalance at return");
                frames_.pop_back();
                if (frames_.empty()) {
                    const auto* i = std::get_if<std::int64_t>(&result);
                    return i ? static_cast<int>(*i) : 0;
                }
                push(std::move(result));
                break;
            }
            case Op::PRINT_INT:
                out_ += std::to_string(pop_int("print_int"));
                out_ += '\n';
                ++fr.ip;
                break;
            case Op::PRINT_STR: {
                RuntimeValue v = pop();
                const auto* s = std::get_if<std::string>(&v);
                if (!s) fault("print_str expects a string");
                out_ += *s;
                out_ += '\n';
                ++fr.ip;
                break;
            }
            case Op::DYN_OPEN: {
                RuntimeValue v = pop();
                const auto* name = std::get_if<std::string>(&v);
                if (!name) fault("dyn_open expects a string");
                push(dyn_open_value(*name));
                ++fr.ip;
                break;
            }
            case Op::DYN_SYM: {
                RuntimeValue nameV = pop();
                RuntimeValue handleV = pop();
                const auto* name = std::get_if<std::string>(&nameV);
                if (!name) fault("dyn_sym expects a string name");
                const auto* h = std::get_if<HandleVal>(&handleV);
                if (!h) fault("dyn_sym expects a handle");
                push(dyn_sym_value(*h, *name));
                ++fr.ip;
                break;
            }
            case Op::DYN_CLOSE: {
                RuntimeValue v = pop();
                const auto* h = std::get_if<HandleVal>(&v);
                if (!h) fault("dyn_close expects a handle");
                dyn_close_value(*h);
                ++fr.ip;
                break;
            }
            case Op::TRAP:
                throw Trap(static_cast<TrapCode>(in.a), loc());
            case Op::HALT:
                return 0;
            }
        }
        return 0;
    }

    // Opens into the dl namespace, never into the startup GOT. Repeated opens
    // of one library share a single loaded copy under a reference count.
    RuntimeValue dyn_open_value(const std::string& name) {
        for (std::uint32_t i = 0; i < p_.dlLibs.size(); ++i) {
            if (p_.dlLibs[i].alive && p_.dlLibs[i].name == name) {
                p_.dlLibs[i].refs += 1;
                p_.dlHandles.push_back({i, true});
                return HandleVal{static_cast<std::uint32_t>(p_.dlHandles.size())};
            }
        }
        auto path = detail::find_library(name, p_.searchPath);
        if (!path) return HandleVal{0};
        ObjectModule obj;
        try {
            obj = decode_module(detail::read_file(*path), name);
        } catch (const FormatError& e) {
            throw Trap(TrapCode::FormatTrap, loc() + " (" + e.what() + ")");
        }
        if (obj.kind != ModuleKind::SharedLib)
            throw Trap(TrapCode::FormatTrap, loc() + " (not a shared library)");
        auto rm = detail::make_runtime_module(std::move(obj));
        // dl libraries bind eagerly against themselves, the startup scope, and
        // previously opened dl libraries.
        std::vector<RuntimeModule*> scope;
        scope.push_back(rm.get());
        for (RuntimeModule* m : p_.scope()) scope.push_back(m);
        for (auto& dl : p_.dlLibs)
            if (dl.alive) scope.push_back(dl.mod.get());
        detail::resolve_got(*rm, scope, BindPolicy::Eager);
        p_.dlLibs.push_back({name, std::move(rm), 1, true});
        p_.dlHandles.push_back({static_cast<std::uint32_t>(p_.dlLibs.size() - 1), true});
        return HandleVal{static_cast<std::uint32_t>(p_.dlHandles.size())};
    }

    RuntimeValue dyn_sym_value(HandleVal h, const std::string& name) {
        ProcessImage::DlLib& lib = checked_lib(h);
        const SymbolEntry* sym = lib.mod->obj.find_symbol(name);
        if (!sym || !sym->defined() || sym->kind != SymKind::Func) return FuncRefVal{0, 0};
        std::uint32_t libId = p_.dlHandles[h.id - 1].libIdx + 1;
        return FuncRefVal{libId, sym->location};
    }

    void dyn_close_value(HandleVal h) {
        ProcessImage::DlLib& lib = checked_lib(h);
        p_.dlHandles[h.id - 1].open = false;
        lib.refs -= 1;
        if (lib.refs <= 0) lib.alive = false;
    }

    ProcessImage::DlLib& checked_lib(HandleVal h) {
        if (h.id == 0 || h.id > p_.dlHandles.size())
            throw Trap(TrapCode::StaleHandle, loc());
        const ProcessImage::DlHandle& handle = p_.dlHandles[h.id - 1];
        if (!handle.open) throw Trap(TrapCode::StaleHandle, loc());
        return p_.dlLibs[handle.libIdx];
    }
};

} // namespace detail

// Executes from `main`. FACJZ jumps exactly when its GOT slot holds the null
// sentinel; calls through the null sentinel trap; prints accumulate into the
// report and the exit code is main's return value or the trap code.
inline ExitReport run(ProcessImage& p, const std::vector<std::int64_t>& entryArgs = {},
                      const RunOptions& opts = {}) {
    return detail::Vm(p, opts).run(entryArgs);
}

} // namespace fac
