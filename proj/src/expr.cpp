#include "ipde/expr.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace ipde {

namespace {

enum class Op {
    Const,
    Coord,   // x_i (axis >= 0); axis -2 means bare 'x' (d = 1 only)
    Norm,
    CoordZ,  // z_i of the second evaluation point
    NormZ,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Log, Sqrt, Abs, Sin, Cos,
    Min, Max,
    Piecewise,
};

}  // namespace

struct Expr::Node {
    Op op;
    double value = 0;
    int axis = 0;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Op op, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->args = std::move(args);
    return n;
}

struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
        skip();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    char peek() {
        skip();
        return pos < s.size() ? s[pos] : '\0';
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        while (true) {
            skip();
            if (eat('+')) {
                lhs = make(Op::Add, {lhs, parse_term()});
            } else if (eat('-')) {
                lhs = make(Op::Sub, {lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        while (true) {
            skip();
            if (eat('*')) {
                lhs = make(Op::Mul, {lhs, parse_factor()});
            } else if (eat('/')) {
                lhs = make(Op::Div, {lhs, parse_factor()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_factor() {
        NodePtr base = parse_unary();
        if (eat('^')) return make(Op::Pow, {base, parse_factor()});  // right associative
        return base;
    }

    NodePtr parse_unary() {
        if (eat('-')) return make(Op::Neg, {parse_unary()});
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    NodePtr parse_args(Op op, std::size_t min_args, std::size_t max_args) {
        if (!eat('(')) throw ExprParseError("expected '('", pos);
        std::vector<NodePtr> args;
        args.push_back(parse_expr());
        while (eat(',')) args.push_back(parse_expr());
        if (!eat(')')) throw ExprParseError("expected ')'", pos);
        if (args.size() < min_args || args.size() > max_args)
            throw ExprParseError("wrong argument count", pos);
        // fold n-ary min/max left
        if ((op == Op::Min || op == Op::Max) && args.size() > 2) {
            NodePtr acc = args[0];
            for (std::size_t i = 1; i < args.size(); ++i) acc = make(op, {acc, args[i]});
            return acc;
        }
        return make(op, std::move(args));
    }

    NodePtr parse_primary() {
        skip();
        if (pos >= s.size()) throw ExprParseError("unexpected end of expression", pos);
        char c = s[pos];
        if (c == '(') {
            ++pos;
            NodePtr e = parse_expr();
            if (!eat(')')) throw ExprParseError("expected ')'", pos);
            return e;
        }
        if (c == '|') {
            ++pos;
            skip();
            if (pos < s.size() && (s[pos] == 'x' || s[pos] == 'z') &&
                (pos + 1 >= s.size() || !std::isalnum(static_cast<unsigned char>(s[pos + 1])))) {
                char which = s[pos];
                ++pos;
                if (!eat('|')) throw ExprParseError("expected closing '|'", pos);
                return make(which == 'x' ? Op::Norm : Op::NormZ);
            }
            throw ExprParseError("only |x| and |z| are supported between bars", pos);
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t start = pos;
            char* end = nullptr;
            double v = std::strtod(s.c_str() + start, &end);
            if (end == s.c_str() + start) throw ExprParseError("bad number", pos);
            pos = std::size_t(end - s.c_str());
            auto n = std::make_shared<Expr::Node>();
            n->op = Op::Const;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos;
            while (pos < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            std::string name = s.substr(start, pos - start);
            if (name == "x") {
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Coord;
                n->axis = -2;  // x1 in d = 1, error otherwise
                return n;
            }
            if (name.size() == 2 && name[0] == 'x' && name[1] >= '1' && name[1] <= '4') {
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Coord;
                n->axis = name[1] - '1';
                return n;
            }
            if (name.size() == 2 && name[0] == 'z' && name[1] >= '1' && name[1] <= '4') {
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::CoordZ;
                n->axis = name[1] - '1';
                return n;
            }
            if (name == "pi") {
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Const;
                n->value = M_PI;
                return n;
            }
            if (name == "exp") return parse_args(Op::Exp, 1, 1);
            if (name == "log") return parse_args(Op::Log, 1, 1);
            if (name == "sqrt") return parse_args(Op::Sqrt, 1, 1);
            if (name == "abs") return parse_args(Op::Abs, 1, 1);
            if (name == "sin") return parse_args(Op::Sin, 1, 1);
            if (name == "cos") return parse_args(Op::Cos, 1, 1);
            if (name == "min") return parse_args(Op::Min, 2, 8);
            if (name == "max") return parse_args(Op::Max, 2, 8);
            if (name == "piecewise") return parse_args(Op::Piecewise, 3, 3);
            throw ExprParseError("unknown identifier '" + name + "'", start);
        }
        throw ExprParseError(std::string("unexpected character '") + c + "'", pos);
    }
};

double eval_node(const Expr::Node& n, const Vec& x, const Vec* z) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Coord:
            if (n.axis == -2) {
                if (x.dim() != 1)
                    throw std::domain_error("expression: bare 'x' only valid in d = 1");
                return x[0];
            }
            if (n.axis >= x.dim()) throw std::domain_error("expression: coordinate out of range");
            return x[n.axis];
        case Op::Norm: return x.norm();
        case Op::CoordZ:
            if (!z || n.axis >= z->dim())
                throw std::domain_error("expression: z-variable outside a multiplier context");
            return (*z)[n.axis];
        case Op::NormZ:
            if (!z) throw std::domain_error("expression: |z| outside a multiplier context");
            return z->norm();
        case Op::Add: return eval_node(*n.args[0], x, z) + eval_node(*n.args[1], x, z);
        case Op::Sub: return eval_node(*n.args[0], x, z) - eval_node(*n.args[1], x, z);
        case Op::Mul: return eval_node(*n.args[0], x, z) * eval_node(*n.args[1], x, z);
        case Op::Div: return eval_node(*n.args[0], x, z) / eval_node(*n.args[1], x, z);
        case Op::Pow: return std::pow(eval_node(*n.args[0], x, z), eval_node(*n.args[1], x, z));
        case Op::Neg: return -eval_node(*n.args[0], x, z);
        case Op::Exp: return std::exp(eval_node(*n.args[0], x, z));
        case Op::Log: return std::log(eval_node(*n.args[0], x, z));
        case Op::Sqrt: return std::sqrt(eval_node(*n.args[0], x, z));
        case Op::Abs: return std::abs(eval_node(*n.args[0], x, z));
        case Op::Sin: return std::sin(eval_node(*n.args[0], x, z));
        case Op::Cos: return std::cos(eval_node(*n.args[0], x, z));
        case Op::Min: return std::min(eval_node(*n.args[0], x, z), eval_node(*n.args[1], x, z));
        case Op::Max: return std::max(eval_node(*n.args[0], x, z), eval_node(*n.args[1], x, z));
        case Op::Piecewise:
            return eval_node(*n.args[0], x, z) >= 0 ? eval_node(*n.args[1], x, z)
                                                 : eval_node(*n.args[2], x, z);
    }
    return 0;
}

}  // namespace

Expr Expr::parse(const std::string& text) {
    Parser p(text);
    Expr e;
    e.text_ = text;
    e.root_ = p.parse_expr();
    p.skip();
    if (p.pos != text.size()) throw ExprParseError("trailing input", p.pos);
    return e;
}

double Expr::eval(const Vec& x) const {
    double v = eval_node(*root_, x, nullptr);
    if (std::isnan(v)) throw std::domain_error("expression evaluated to NaN: " + text_);
    return v;
}

double Expr::eval2(const Vec& x, const Vec& z) const {
    double v = eval_node(*root_, x, &z);
    if (std::isnan(v)) throw std::domain_error("expression evaluated to NaN: " + text_);
    return v;
}

}  // namespace ipde
