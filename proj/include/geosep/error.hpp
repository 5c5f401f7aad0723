#ifndef GEOSEP_ERROR_HPP
#define GEOSEP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace geosep {

// A caller broke a precondition or an input file broke its format.
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// The environment failed us (unreadable file, failed write).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geosep

#endif  // GEOSEP_ERROR_HPP
