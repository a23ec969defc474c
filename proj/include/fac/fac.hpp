#pragma once

// Umbrella header for the FAC toolchain library.

#include "fac/ast.hpp"
#include "fac/bench.hpp"
#include "fac/classify.hpp"
#include "fac/codegen.hpp"
#include "fac/diag.hpp"
#include "fac/format.hpp"
#include "fac/isa.hpp"
#include "fac/linker.hpp"
#include "fac/loader.hpp"
#include "fac/object.hpp"
#include "fac/parser.hpp"
#include "fac/subprocess.hpp"
#include "fac/value.hpp"
#include "fac/vm.hpp"
