#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oac3 {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A coordinate lies outside the divergence domain by more than domain_floor.
struct DomainError : Error { using Error::Error; };
// A dual coordinate lies outside the range of the gradient map, or a
// threshold/fraction lies outside its allowed interval.
struct RangeError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct EmptyEnsembleError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct MissingClassError : Error { using Error::Error; };
struct UnsupportedDivergence : Error { using Error::Error; };
struct InsufficientTrace : Error { using Error::Error; };
struct DivisionDegenerate : Error { using Error::Error; };

struct ParseError : Error {
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what),
          file(std::move(file)), line(line) {}
    std::string file;
    std::size_t line;
};

} // namespace oac3
