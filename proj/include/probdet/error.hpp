#pragma once

#include <stdexcept>
#include <string>

namespace probdet {

// Data or model error. The CLI maps this to exit code 1; usage problems
// (bad flags) are handled by the argument parser and exit with 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace probdet
