#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace qcs {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Every failure carries a short machine-readable kind ("branch-ambiguity",
// "no-safe-copy", ...) next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

inline cplx infinity_point() {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
}

inline bool is_infinite(cplx z) { return std::isinf(z.real()) || std::isinf(z.imag()); }
inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace qcs
