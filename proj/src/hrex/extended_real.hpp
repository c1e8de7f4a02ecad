#pragma once

#include <cmath>
#include <compare>
#include <cstdio>
#include <limits>
#include <string>

namespace hrex {

/// A value in [0, +inf] (or any real, when used as a plain finite number)
/// where +inf is a distinct state rather than a float sentinel.
class ExtendedReal {
  public:
    constexpr ExtendedReal() = default;
    constexpr ExtendedReal(double value) : value_(value) {}  // NOLINT: implicit from finite values

    static constexpr ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    constexpr bool is_infinite() const { return infinite_; }
    constexpr bool is_finite() const { return !infinite_; }

    /// Finite payload; only meaningful when is_finite().
    constexpr double value() const { return value_; }

    /// IEEE view, +inf for the infinite state.
    double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

    static ExtendedReal from_double(double v) {
        return std::isinf(v) && v > 0 ? infinity() : ExtendedReal(v);
    }

    friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
        if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
        return a.value_ == b.value_;
    }

    friend constexpr std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) {
        if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
        if (a.infinite_) return std::partial_ordering::greater;
        if (b.infinite_) return std::partial_ordering::less;
        return a.value_ <=> b.value_;
    }

  private:
    bool infinite_ = false;
    double value_ = 0.0;
};

inline std::string to_string(const ExtendedReal& v) {
    if (v.is_infinite()) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.value());
    return buf;
}

}  // namespace hrex
