// Closed-form expression language for exterior data and coefficient fields:
// arithmetic, x_i components, |x|, exp/log/sqrt/abs/sin/cos, min/max,
// piecewise(t, a, b) = (t >= 0 ? a : b). Parse once, evaluate many.
#pragma once

#include <memory>
#include <string>

#include "ipde/common.hpp"

namespace ipde {

struct ExprParseError : std::runtime_error {
    std::size_t position;
    ExprParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

class Expr {
public:
    /// Throws ExprParseError with the offending position.
    static Expr parse(const std::string& text);

    /// Deterministic evaluation; NaN results are an evaluation error.
    double eval(const Vec& x) const;

    /// Two-point form for kernel multipliers m(x, z): identifiers z1..z4 and
    /// |z| refer to the second argument.
    double eval2(const Vec& x, const Vec& z) const;

    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace ipde
