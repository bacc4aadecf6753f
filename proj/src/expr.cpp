#include "liouville/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace liouville {

Eigen::VectorXd Jet2::gradient() const {
    Eigen::VectorXd g(n_);
    for (int i = 0; i < n_; ++i) g[i] = grad(i);
    return g;
}

Eigen::MatrixXd Jet2::hessian() const {
    Eigen::MatrixXd h(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j) h(i, j) = h(j, i) = hess(i, j);
    return h;
}

ExprTree::ExprTree(std::vector<ExprNode> nodes, int arity) : nodes_(std::move(nodes)), arity_(arity) {}

bool ExprTree::depends_on_variables() const {
    return std::any_of(nodes_.begin(), nodes_.end(), [](const ExprNode& n) { return n.kind == NodeKind::Var; });
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

const char* function_name(NodeKind k) {
    switch (k) {
    case NodeKind::Sin: return "sin";
    case NodeKind::Cos: return "cos";
    case NodeKind::Sqrt: return "sqrt";
    case NodeKind::Exp: return "exp";
    case NodeKind::Log: return "log";
    default: return nullptr;
    }
}

const char* binary_symbol(NodeKind k) {
    switch (k) {
    case NodeKind::Add: return " + ";
    case NodeKind::Sub: return " - ";
    case NodeKind::Mul: return " * ";
    case NodeKind::Div: return " / ";
    case NodeKind::Pow: return " ^ ";
    default: return nullptr;
    }
}

// ---------------------------------------------------------------- parser

class Parser {
public:
    Parser(std::string_view src, int arity, const std::vector<std::string>& names)
        : src_(src), arity_(arity), names_(names) {}

    ExprTree run() {
        if (arity_ < 1) throw ParseError("arity must be positive", 0);
        skip_ws();
        if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
        parse_expr();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return ExprTree(std::move(nodes_), arity_);
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                      src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    int push(ExprNode n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Children are parsed before parents, so appending keeps postorder.
    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (accept('+'))
                lhs = push({NodeKind::Add, 0.0, -1, lhs, parse_term()});
            else if (accept('-'))
                lhs = push({NodeKind::Sub, 0.0, -1, lhs, parse_term()});
            else
                return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = push({NodeKind::Mul, 0.0, -1, lhs, parse_unary()});
            else if (accept('/'))
                lhs = push({NodeKind::Div, 0.0, -1, lhs, parse_unary()});
            else
                return lhs;
        }
    }

    int parse_unary() {
        if (accept('-')) {
            int operand = parse_unary();
            return push({NodeKind::Neg, 0.0, -1, operand, -1});
        }
        return parse_power();
    }

    int parse_power() {
        int base = parse_primary();
        skip_ws();
        if (!accept('^')) return base;
        std::size_t at = pos_;
        int first = static_cast<int>(nodes_.size());
        int exponent = parse_unary();
        for (int i = first; i <= exponent; ++i)
            if (nodes_[i].kind == NodeKind::Var) throw ParseError("exponent must be constant", at);
        std::vector<ExprNode> sub(nodes_.begin() + first, nodes_.begin() + exponent + 1);
        for (ExprNode& n : sub) {
            if (n.lhs >= 0) n.lhs -= first;
            if (n.rhs >= 0) n.rhs -= first;
        }
        double value = 0.0;
        try {
            value = ExprTree(std::move(sub), arity_).eval(std::vector<double>(arity_, 0.0));
        } catch (const DomainError& e) {
            throw ParseError(std::string("exponent: ") + e.what(), at);
        }
        if (!std::isfinite(value)) throw ParseError("exponent is not finite", at);
        return push({NodeKind::Pow, value, -1, base, exponent});
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    int parse_number() {
        std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9')
                digits();
            else
                pos_ = save;  // a trailing 'e' belongs to the next token
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(v))
            throw ParseError("malformed number", start);
        return push({NodeKind::Const, v, -1, -1, -1});
    }

    int parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string_view id = src_.substr(start, pos_ - start);

        static constexpr std::pair<std::string_view, NodeKind> functions[] = {
            {"sin", NodeKind::Sin}, {"cos", NodeKind::Cos}, {"sqrt", NodeKind::Sqrt},
            {"exp", NodeKind::Exp}, {"log", NodeKind::Log},
        };
        for (auto [name, kind] : functions) {
            if (id == name) {
                if (!accept('(')) throw ParseError("expected '(' after " + std::string(id), pos_);
                int arg = parse_expr();
                if (!accept(')')) throw ParseError("expected ')'", pos_);
                return push({kind, 0.0, -1, arg, -1});
            }
        }
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (id == names_[i]) return make_var(static_cast<int>(i), start);
        if (id == "pi") return push({NodeKind::Const, std::numbers::pi, -1, -1, -1});
        if (id == "e") return push({NodeKind::Const, std::numbers::e, -1, -1, -1});
        if (id.size() > 1 && id[0] == 'v' &&
            std::all_of(id.begin() + 1, id.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
            int index = 0;
            auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), index);
            if (ec != std::errc() || index < 1) throw ParseError("bad variable " + std::string(id), start);
            return make_var(index - 1, start);
        }
        throw ParseError("unknown identifier '" + std::string(id) + "'", start);
    }

    int make_var(int index, std::size_t at) {
        if (index >= arity_)
            throw ParseError("variable index " + std::to_string(index + 1) + " exceeds arity " +
                                 std::to_string(arity_),
                             at);
        return push({NodeKind::Var, 0.0, index, -1, -1});
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int arity_;
    const std::vector<std::string>& names_;
    std::vector<ExprNode> nodes_;
};

// ---------------------------------------------------------------- evaluation

double ipow(double base, long long n) {
    bool invert = n < 0;
    unsigned long long m = invert ? static_cast<unsigned long long>(-n) : static_cast<unsigned long long>(n);
    double result = 1.0;
    while (m) {
        if (m & 1ULL) result *= base;
        base *= base;
        m >>= 1;
    }
    return invert ? 1.0 / result : result;
}

bool is_integer(double v) { return std::nearbyint(v) == v && std::abs(v) < 1e15; }

struct Scalar3 {
    double f, d1, d2;  // value, first and second derivative of a unary map
};

}  // namespace

ExprTree parse_expr(std::string_view src, int arity, const std::vector<std::string>& names) {
    return Parser(src, arity, names).run();
}

std::string ExprTree::to_string() const { return nodes_.empty() ? std::string() : to_string(root()); }

std::string ExprTree::to_string(int k) const {
    const ExprNode& n = nodes_.at(k);
    switch (n.kind) {
    case NodeKind::Const: return format_double(n.value);
    case NodeKind::Var: return "v" + std::to_string(n.var + 1);
    case NodeKind::Neg: return "(-" + to_string(n.lhs) + ")";
    default: break;
    }
    if (const char* fn = function_name(n.kind)) return std::string(fn) + "(" + to_string(n.lhs) + ")";
    return "(" + to_string(n.lhs) + binary_symbol(n.kind) + to_string(n.rhs) + ")";
}

double ExprTree::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != arity_)
        throw std::invalid_argument("point has " + std::to_string(x.size()) + " coordinates, expected " +
                                    std::to_string(arity_));
    std::vector<double> v(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const ExprNode& n = nodes_[k];
        auto fail = [&](const char* what) { throw DomainError(what, to_string(static_cast<int>(k))); };
        double a = n.lhs >= 0 ? v[n.lhs] : 0.0;
        double b = n.rhs >= 0 ? v[n.rhs] : 0.0;
        switch (n.kind) {
        case NodeKind::Const: v[k] = n.value; break;
        case NodeKind::Var: v[k] = x[n.var]; break;
        case NodeKind::Add: v[k] = a + b; break;
        case NodeKind::Sub: v[k] = a - b; break;
        case NodeKind::Mul: v[k] = a * b; break;
        case NodeKind::Div:
            if (b == 0.0) fail("division by zero");
            v[k] = a / b;
            break;
        case NodeKind::Pow:
            if (is_integer(n.value)) {
                if (a == 0.0 && n.value < 0) fail("zero raised to a negative power");
                v[k] = ipow(a, static_cast<long long>(n.value));
            } else {
                if (a <= 0.0) fail("non-integer power of a non-positive base");
                v[k] = std::pow(a, n.value);
            }
            break;
        case NodeKind::Neg: v[k] = -a; break;
        case NodeKind::Sin: v[k] = std::sin(a); break;
        case NodeKind::Cos: v[k] = std::cos(a); break;
        case NodeKind::Sqrt:
            if (a < 0.0) fail("sqrt of a negative value");
            v[k] = std::sqrt(a);
            break;
        case NodeKind::Exp: v[k] = std::exp(a); break;
        case NodeKind::Log:
            if (a <= 0.0) fail("log of a non-positive value");
            v[k] = std::log(a);
            break;
        }
    }
    return v.back();
}

Jet2 ExprTree::eval_jet2(std::span<const double> x) const {
    const int n = arity_;
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("point has " + std::to_string(x.size()) + " coordinates, expected " +
                                    std::to_string(n));
    const int ng = n;
    const int nh = n * (n + 1) / 2;
    const int stride = 1 + ng + nh;
    thread_local std::vector<double> arena;
    arena.assign(nodes_.size() * static_cast<std::size_t>(stride), 0.0);

    auto slot = [&](int k) { return arena.data() + static_cast<std::size_t>(k) * stride; };

    // out = phi(a) by the chain rule: g = phi' g_a, H = phi' H_a + phi'' g_a g_a^T.
    auto unary = [&](double* out, const double* a, Scalar3 phi) {
        out[0] = phi.f;
        const double* ga = a + 1;
        const double* ha = a + 1 + ng;
        double* go = out + 1;
        double* ho = out + 1 + ng;
        for (int i = 0; i < ng; ++i) go[i] = phi.d1 * ga[i];
        int p = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j, ++p) ho[p] = phi.d1 * ha[p] + phi.d2 * ga[i] * ga[j];
    };

    for (std::size_t kk = 0; kk < nodes_.size(); ++kk) {
        const int k = static_cast<int>(kk);
        const ExprNode& nd = nodes_[kk];
        double* out = slot(k);
        const double* a = nd.lhs >= 0 ? slot(nd.lhs) : nullptr;
        const double* b = nd.rhs >= 0 ? slot(nd.rhs) : nullptr;
        auto fail = [&](const char* what) { throw DomainError(what, to_string(k)); };
        switch (nd.kind) {
        case NodeKind::Const: out[0] = nd.value; break;
        case NodeKind::Var:
            out[0] = x[nd.var];
            out[1 + nd.var] = 1.0;
            break;
        case NodeKind::Add:
            for (int i = 0; i < stride; ++i) out[i] = a[i] + b[i];
            break;
        case NodeKind::Sub:
            for (int i = 0; i < stride; ++i) out[i] = a[i] - b[i];
            break;
        case NodeKind::Neg:
            for (int i = 0; i < stride; ++i) out[i] = -a[i];
            break;
        case NodeKind::Mul: {
            const double av = a[0], bv = b[0];
            out[0] = av * bv;
            for (int i = 0; i < ng; ++i) out[1 + i] = av * b[1 + i] + bv * a[1 + i];
            int p = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j, ++p)
                    out[1 + ng + p] = av * b[1 + ng + p] + bv * a[1 + ng + p] + a[1 + i] * b[1 + j] +
                                      b[1 + i] * a[1 + j];
            break;
        }
        case NodeKind::Div: {
            const double bv = b[0];
            if (bv == 0.0) fail("division by zero");
            // q = a/b: g = (g_a - q g_b)/b, H = (H_a - q H_b - g_q g_b^T - g_b g_q^T)/b
            const double q = a[0] / bv;
            out[0] = q;
            for (int i = 0; i < ng; ++i) out[1 + i] = (a[1 + i] - q * b[1 + i]) / bv;
            int p = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j, ++p)
                    out[1 + ng + p] = (a[1 + ng + p] - q * b[1 + ng + p] - out[1 + i] * b[1 + j] -
                                       b[1 + i] * out[1 + j]) /
                                      bv;
            break;
        }
        case NodeKind::Pow: {
            const double av = a[0], r = nd.value;
            if (is_integer(r)) {
                const long long m = static_cast<long long>(r);
                if (av == 0.0 && m < 0) fail("zero raised to a negative power");
                Scalar3 phi{ipow(av, m), 0.0, 0.0};
                if (m != 0) phi.d1 = static_cast<double>(m) * ipow(av, m - 1);
                if (m != 0 && m != 1) phi.d2 = static_cast<double>(m) * static_cast<double>(m - 1) * ipow(av, m - 2);
                unary(out, a, phi);
            } else {
                if (av <= 0.0) fail("non-integer power of a non-positive base");
                const double f = std::pow(av, r);
                unary(out, a, {f, r * f / av, r * (r - 1.0) * f / (av * av)});
            }
            break;
        }
        case NodeKind::Sin: {
            const double s = std::sin(a[0]), c = std::cos(a[0]);
            unary(out, a, {s, c, -s});
            break;
        }
        case NodeKind::Cos: {
            const double s = std::sin(a[0]), c = std::cos(a[0]);
            unary(out, a, {c, -s, -c});
            break;
        }
        case NodeKind::Sqrt: {
            if (a[0] <= 0.0) fail(a[0] < 0.0 ? "sqrt of a negative value" : "sqrt is not differentiable at zero");
            const double s = std::sqrt(a[0]);
            unary(out, a, {s, 0.5 / s, -0.25 / (s * a[0])});
            break;
        }
        case NodeKind::Exp: {
            const double e = std::exp(a[0]);
            unary(out, a, {e, e, e});
            break;
        }
        case NodeKind::Log: {
            if (a[0] <= 0.0) fail("log of a non-positive value");
            const double inv = 1.0 / a[0];
            unary(out, a, {std::log(a[0]), inv, -inv * inv});
            break;
        }
        }
    }

    Jet2 result(n);
    const double* last = slot(root());
    std::copy(last, last + stride, result.raw().begin());
    return result;
}

ExprTree compose(const ExprTree& outer, const std::vector<ExprTree>& inner) {
    if (static_cast<int>(inner.size()) != outer.arity())
        throw std::invalid_argument("compose: expected " + std::to_string(outer.arity()) + " inner fields");
    const int arity = inner.front().arity();
    if (outer.nodes().back().kind == NodeKind::Var) return inner[outer.nodes().back().var];
    std::vector<ExprNode> nodes;
    std::vector<int> roots;
    for (const ExprTree& t : inner) {
        if (t.arity() != arity) throw std::invalid_argument("compose: inner fields differ in arity");
        const int offset = static_cast<int>(nodes.size());
        for (ExprNode n : t.nodes()) {
            if (n.lhs >= 0) n.lhs += offset;
            if (n.rhs >= 0) n.rhs += offset;
            nodes.push_back(n);
        }
        roots.push_back(static_cast<int>(nodes.size()) - 1);
    }
    std::vector<int> remap(outer.nodes().size());
    for (std::size_t k = 0; k < outer.nodes().size(); ++k) {
        ExprNode n = outer.nodes()[k];
        if (n.kind == NodeKind::Var) {
            remap[k] = roots[n.var];
            continue;
        }
        if (n.lhs >= 0) n.lhs = remap[n.lhs];
        if (n.rhs >= 0) n.rhs = remap[n.rhs];
        nodes.push_back(n);
        remap[k] = static_cast<int>(nodes.size()) - 1;
    }
    return ExprTree(std::move(nodes), arity);
}

ExprTree constant_expr(double c, int arity) { return ExprTree({{NodeKind::Const, c, -1, -1, -1}}, arity); }

}  // namespace liouville
