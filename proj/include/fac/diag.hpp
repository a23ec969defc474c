#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fac {

struct SourceLoc {
    int line = 0;
    int col = 0;

    bool operator==(const SourceLoc&) const = default;
};

enum class Severity { Warning, Error };

// Printed as "file:line:col: severity: message".
struct Diagnostic {
    Severity severity = Severity::Error;
    std::string file;
    SourceLoc loc;
    std::string message;

    std::string str() const {
        std::string s = file;
        s += ':';
        s += std::to_string(loc.line);
        s += ':';
        s += std::to_string(loc.col);
        s += severity == Severity::Warning ? ": warning: " : ": error: ";
        s += message;
        return s;
    }
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Compile-time diagnostics carry a source position.
class CompileError : public Error {
public:
    CompileError(std::string file, SourceLoc loc, const std::string& msg)
        : Error(file + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.col) +
                ": error: " + msg),
          file_(std::move(file)), loc_(loc), message_(msg) {}

    const std::string& file() const { return file_; }
    SourceLoc loc() const { return loc_; }
    const std::string& message() const { return message_; }

private:
    std::string file_;
    SourceLoc loc_;
    std::string message_;
};

class SyntaxError : public CompileError {
public:
    using CompileError::CompileError;
};

class UndeclaredIdentifier : public CompileError {
public:
    using CompileError::CompileError;
};

class CodegenError : public CompileError {
public:
    using CompileError::CompileError;
};

class MissingSlot : public Error {
public:
    explicit MissingSlot(const std::string& name)
        : Error("no GOT slot for symbol '" + name + "'"), symbol_(name) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

// Link-time failures.
class LinkError : public Error {
public:
    using Error::Error;
};

class DuplicateSymbol : public LinkError {
public:
    explicit DuplicateSymbol(const std::string& name)
        : LinkError("duplicate symbol '" + name + "'"), symbol_(name) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class UndefinedReference : public LinkError {
public:
    explicit UndefinedReference(const std::string& name)
        : LinkError("undefined reference to '" + name + "'"), symbol_(name) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class KindMismatch : public LinkError {
public:
    explicit KindMismatch(const std::string& msg) : LinkError(msg) {}
};

class EncodeError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(std::size_t offset, const std::string& reason)
        : Error("offset " + std::to_string(offset) + ": " + reason),
          offset_(offset), reason_(reason) {}

    std::size_t offset() const { return offset_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

class MissingExecutable : public Error {
public:
    explicit MissingExecutable(const std::string& path)
        : Error("executable not found: " + path) {}
};

// Runtime trap codes double as process exit codes.
enum class TrapCode : int {
    UnresolvedCall = 10,
    PoisonedDataAccess = 11,
    StubCalled = 12,
    StaleHandle = 13,
    StackFault = 14,
    FormatTrap = 15,
};

inline const char* trap_name(TrapCode c) {
    switch (c) {
    case TrapCode::UnresolvedCall: return "UNRESOLVED_CALL";
    case TrapCode::PoisonedDataAccess: return "POISONED_DATA_ACCESS";
    case TrapCode::StubCalled: return "STUB_CALLED";
    case TrapCode::StaleHandle: return "STALE_HANDLE";
    case TrapCode::StackFault: return "STACK_FAULT";
    case TrapCode::FormatTrap: return "FORMAT_ERROR";
    }
    return "UNKNOWN";
}

// Thrown inside the VM and by lazy_resolve; run() converts it into an ExitReport.
class Trap : public Error {
public:
    Trap(TrapCode code, std::string location)
        : Error(std::string("trap ") + trap_name(code) + " at " + location),
          code_(code), location_(std::move(location)) {}

    TrapCode code() const { return code_; }
    const std::string& location() const { return location_; }

private:
    TrapCode code_;
    std::string location_;
};

} // namespace fac
