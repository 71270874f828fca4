#ifndef LATPARK_ERROR_HPP
#define LATPARK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace latpark {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (bad ordering, invalid parameters).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Configuration could not be parsed or failed validation. `key` is the dotted
// path of the offending entry when one is known.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace latpark

#endif  // LATPARK_ERROR_HPP
