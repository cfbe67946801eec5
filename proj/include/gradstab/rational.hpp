#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <string>

namespace gradstab {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return boost::rational_cast<double>(r);
}

inline double to_double(double x) { return x; }

/// "p/q", or "p" when the denominator is one.
inline std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace gradstab
