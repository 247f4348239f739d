#pragma once

#include <stdexcept>
#include <string>

namespace rlev {

// Error taxonomy shared by the library and the CLI exit codes:
// config=2, data=3, budget=4. Check failures (exit 5) are a CLI outcome,
// not an exception.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

struct budget_error : std::runtime_error {
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rlev
