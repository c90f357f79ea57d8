#pragma once

#include <functional>
#include <string>

#include "fingerloc/error.hpp"

namespace fingerloc::test {

/// Error code thrown by f, or "" when it returns normally.
inline std::string code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace fingerloc::test
