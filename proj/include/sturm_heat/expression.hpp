#ifndef STURM_HEAT_EXPRESSION_HPP
#define STURM_HEAT_EXPRESSION_HPP

#include <cctype>
#include <cstdlib>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "sturm_heat/errors.hpp"
#include "sturm_heat/heat_spectral.hpp"
#include "sturm_heat/regularization.hpp"

// Closed-form expressions for config specs:
//   numbers, pi, the variables x and t, + - * / ^, parentheses,
//   sin cos exp sqrt abs step, and at the top level of a spatial spec
//   delta(x0[, mass]) and dL2(expr), each optionally scaled by a constant.

namespace sturm_heat {

namespace expr {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Number, VarX, VarT, Neg, Add, Sub, Mul, Div, Pow, Call, Delta, DL2 };
    Kind kind = Kind::Number;
    double value = 0.0;
    std::string name;  // function name for Call
    std::vector<NodePtr> args;

    double eval(double x, double t) const {
        switch (kind) {
            case Kind::Number: return value;
            case Kind::VarX: return x;
            case Kind::VarT: return t;
            case Kind::Neg: return -args[0]->eval(x, t);
            case Kind::Add: return args[0]->eval(x, t) + args[1]->eval(x, t);
            case Kind::Sub: return args[0]->eval(x, t) - args[1]->eval(x, t);
            case Kind::Mul: return args[0]->eval(x, t) * args[1]->eval(x, t);
            case Kind::Div: return args[0]->eval(x, t) / args[1]->eval(x, t);
            case Kind::Pow: return std::pow(args[0]->eval(x, t), args[1]->eval(x, t));
            case Kind::Call: {
                const double a = args[0]->eval(x, t);
                if (name == "sin") return std::sin(a);
                if (name == "cos") return std::cos(a);
                if (name == "exp") return std::exp(a);
                if (name == "sqrt") return std::sqrt(a);
                if (name == "abs") return std::abs(a);
                return a >= 0.0 ? 1.0 : 0.0;  // step
            }
            case Kind::Delta:
            case Kind::DL2: break;
        }
        throw ConfigError("delta(...) and dL2(...) cannot be evaluated pointwise");
    }

    bool uses(Kind k) const {
        if (kind == k) return true;
        for (const auto& a : args) {
            if (a->uses(k)) return true;
        }
        return false;
    }

    bool is_constant() const { return !uses(Kind::VarX) && !uses(Kind::VarT) && !is_singular(); }
    bool is_singular() const { return uses(Kind::Delta) || uses(Kind::DL2); }
};

class Parser {
public:
    explicit Parser(std::string text) : s_(std::move(text)) {}

    NodePtr parse() {
        NodePtr n = sum();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    static NodePtr make(Node::Kind k, std::vector<NodePtr> args = {}, double v = 0.0, std::string name = {}) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->args = std::move(args);
        n->value = v;
        n->name = std::move(name);
        return n;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr sum() {
        NodePtr lhs = product();
        for (;;) {
            if (accept('+')) {
                lhs = make(Node::Kind::Add, {lhs, product()});
            } else if (accept('-')) {
                lhs = make(Node::Kind::Sub, {lhs, product()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr product() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Node::Kind::Mul, {lhs, unary()});
            } else if (accept('/')) {
                lhs = make(Node::Kind::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Node::Kind::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Node::Kind::Pow, {base, unary()});  // right associative
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (accept('(')) {
            NodePtr n = sum();
            expect(')');
            return n;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        return make(Node::Kind::Number, {}, v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string id = s_.substr(start, pos_ - start);
        if (id == "x") return make(Node::Kind::VarX);
        if (id == "t") return make(Node::Kind::VarT);
        if (id == "pi") return make(Node::Kind::Number, {}, std::numbers::pi);
        if (id == "sin" || id == "cos" || id == "exp" || id == "sqrt" || id == "abs" || id == "step") {
            expect('(');
            NodePtr arg = sum();
            expect(')');
            return make(Node::Kind::Call, {arg}, 0.0, id);
        }
        if (id == "delta") {
            expect('(');
            std::vector<NodePtr> args{sum()};
            if (accept(',')) args.push_back(sum());
            expect(')');
            for (const auto& a : args) {
                if (!a->is_constant()) fail("delta arguments must be constants");
            }
            return make(Node::Kind::Delta, std::move(args));
        }
        if (id == "dL2") {
            expect('(');
            NodePtr arg = sum();
            expect(')');
            if (arg->is_singular()) fail("dL2 needs a function argument");
            return make(Node::Kind::DL2, {arg});
        }
        pos_ = start;
        fail("unknown name '" + id + "'");
    }

    std::string s_;
    std::size_t pos_ = 0;
};

inline NodePtr parse(const std::string& text) { return Parser(text).parse(); }

/// Zeros of step(...) arguments, assumed affine in the variable; they become quadrature breakpoints.
inline void collect_breakpoints(const NodePtr& n, std::vector<double>& out, char variable = 'x') {
    if (n->kind == Node::Kind::Call && n->name == "step") {
        const auto& a = n->args[0];
        auto at = [&](double s) { return variable == 'x' ? a->eval(s, 0.0) : a->eval(0.0, s); };
        const double a0 = at(0.0), a1 = at(1.0), ah = at(0.5);
        if (std::abs(0.5 * (a0 + a1) - ah) > 1e-12 * (1.0 + std::abs(a0) + std::abs(a1))) {
            throw ConfigError("step(...) argument must be affine in " + std::string(1, variable));
        }
        if (a1 != a0) out.push_back(-a0 / (a1 - a0));
    }
    for (const auto& c : n->args) collect_breakpoints(c, out, variable);
}

/// Splits a top-level sum into signed terms.
inline void flatten_sum(const NodePtr& n, double sign, std::vector<std::pair<double, NodePtr>>& out) {
    if (n->kind == Node::Kind::Add) {
        flatten_sum(n->args[0], sign, out);
        flatten_sum(n->args[1], sign, out);
    } else if (n->kind == Node::Kind::Sub) {
        flatten_sum(n->args[0], sign, out);
        flatten_sum(n->args[1], -sign, out);
    } else if (n->kind == Node::Kind::Neg) {
        flatten_sum(n->args[0], -sign, out);
    } else {
        out.emplace_back(sign, n);
    }
}

}  // namespace expr

/// Parses a spatial (variable x) or temporal (variable t, written as x or t) spec.
/// Function parts are combined into one smooth or bounded term; delta and dL2
/// terms stay separate.
inline DistributionSpec parse_spec(const std::string& text, char variable = 'x') {
    using expr::Node;
    if (text.find_first_not_of(" \t") == std::string::npos) throw ConfigError("empty expression");
    const expr::NodePtr root = expr::parse(text);
    const Node::Kind other = variable == 'x' ? Node::Kind::VarT : Node::Kind::VarX;
    if (root->uses(other)) {
        throw ConfigError("expression '" + text + "' may only use the variable " + std::string(1, variable));
    }
    std::vector<std::pair<double, expr::NodePtr>> terms;
    expr::flatten_sum(root, 1.0, terms);

    std::vector<DistributionSpec> singular;
    std::vector<std::pair<double, expr::NodePtr>> regular;
    for (const auto& [sign, term] : terms) {
        if (!term->is_singular()) {
            regular.emplace_back(sign, term);
            continue;
        }
        // c * delta(...), delta(...) * c, c * dL2(...) with constant c
        double scale = sign;
        expr::NodePtr core = term;
        if (term->kind == Node::Kind::Mul) {
            const auto& l = term->args[0];
            const auto& r = term->args[1];
            if (l->is_constant() && r->is_singular()) {
                scale *= l->eval(0.0, 0.0);
                core = r;
            } else if (r->is_constant() && l->is_singular()) {
                scale *= r->eval(0.0, 0.0);
                core = l;
            }
        }
        if (core->kind == Node::Kind::Delta) {
            const double x0 = core->args[0]->eval(0.0, 0.0);
            const double mass = core->args.size() > 1 ? core->args[1]->eval(0.0, 0.0) : 1.0;
            singular.push_back(DistributionSpec::delta(x0, scale * mass));
        } else if (core->kind == Node::Kind::DL2) {
            const expr::NodePtr nu = core->args[0];
            std::vector<double> bp;
            expr::collect_breakpoints(nu, bp, variable);
            singular.push_back(DistributionSpec::derivative_of(
                [nu, scale, variable](double s) { return scale * (variable == 'x' ? nu->eval(s, 0.0) : nu->eval(0.0, s)); },
                {}, bp));
        } else {
            throw ConfigError("expression '" + text + "': delta and dL2 may only be scaled by a constant and summed");
        }
    }

    std::vector<DistributionSpec> parts;
    if (!regular.empty()) {
        std::vector<double> bp;
        for (const auto& r : regular) expr::collect_breakpoints(r.second, bp, variable);
        auto f = [regular, variable](double s) {
            double v = 0.0;
            for (const auto& [sign, n] : regular) v += sign * (variable == 'x' ? n->eval(s, 0.0) : n->eval(0.0, s));
            return v;
        };
        parts.push_back(bp.empty() ? DistributionSpec::smooth(f) : DistributionSpec::bounded(f, bp));
    }
    parts.insert(parts.end(), singular.begin(), singular.end());
    DistributionSpec out = parts.size() == 1 ? parts.front() : DistributionSpec::sum(std::move(parts));
    out.text = text;
    return out;
}

/// Source term f(t, x); empty text means no source.
inline Source parse_source(const std::string& text) {
    if (text.find_first_not_of(" \t") == std::string::npos) return {};
    const expr::NodePtr root = expr::parse(text);
    if (root->is_singular()) throw ConfigError("source '" + text + "' must be a function of t and x");
    return [root](double t, double x) { return root->eval(x, t); };
}

}  // namespace sturm_heat

#endif
