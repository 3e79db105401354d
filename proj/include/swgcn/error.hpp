#pragma once

#include <stdexcept>
#include <string>

namespace swgcn {

// Error with a stable machine-parsable category ("parse", "config", "split", ...).
// The CLI prints errors as "error/<category>: <message>" and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

} // namespace swgcn
