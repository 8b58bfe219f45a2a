#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace coxbvs {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 - exp(-q)) for q > 0; returns -inf at q <= 0.
inline double log1mexp(double q) {
    if (!(q > 0.0)) return neg_inf;
    if (q > 0.6931471805599453) return std::log1p(-std::exp(-q));
    return std::log(-std::expm1(-q));
}

inline double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.9189385332046727417803297364056;
}

// q / (e^q - 1), the derivative kernel of log(1 - e^{-q}); -> 1 as q -> 0.
inline double expm1_ratio(double q) {
    if (q < 1e-8) return 1.0 - 0.5 * q;
    return q / std::expm1(q);
}

namespace detail {

inline void str_append(std::ostringstream&) {}

template <class T, class... Rest>
void str_append(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    str_append(os, rest...);
}

// Compact message builder for error reporting.
template <class... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    os.precision(17);
    str_append(os, args...);
    return os.str();
}

}  // namespace detail
}  // namespace coxbvs
