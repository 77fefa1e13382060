#pragma once

#include "semtrans/interp.hpp"
#include "semtrans/syntax.hpp"

namespace semtrans::testing {

// An independent big-step evaluator over arbitrary (not necessarily ANF)
// terms, used as the oracle the abstract machine is checked against. It
// shares the value representation and delta with interp but none of the
// machine's step/stack logic.
struct RefResult {
    interp::ValuePtr value;
    std::optional<interp::RuntimeError> error;
    bool outOfFuel = false;

    bool ok() const { return value != nullptr; }
};

RefResult referenceRun(const syntax::Program& program,
                       const std::vector<interp::ValuePtr>& args, long maxCalls = 100000);

}  // namespace semtrans::testing
