#pragma once

// Scalar-field expressions over variables v1..vN with second-order
// forward-mode differentiation. See docs/expression-grammar.md for the
// accepted grammar.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace liouville {

/// Raised by the parser. `offset()` is the byte offset into the source.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Raised when an evaluation point leaves the domain of a subexpression
/// (sqrt/log of a non-positive value, division by zero, ...).
class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& what, std::string subexpr)
        : std::runtime_error(what + " in " + subexpr), subexpr_(std::move(subexpr)) {}
    const std::string& subexpression() const noexcept { return subexpr_; }

private:
    std::string subexpr_;
};

enum class NodeKind {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sin,
    Cos,
    Sqrt,
    Exp,
    Log,
};

struct ExprNode {
    NodeKind kind = NodeKind::Const;
    double value = 0.0;  // Const: the literal; Pow: the (constant) exponent
    int var = -1;        // Var: zero-based variable index
    int lhs = -1;        // child node indices (postorder, always < own index)
    int rhs = -1;

    bool operator==(const ExprNode&) const = default;
};

/// Value, gradient and Hessian of a scalar field at a point. The Hessian is
/// stored as the packed upper triangle, so it is symmetric by construction.
class Jet2 {
public:
    Jet2() = default;
    explicit Jet2(int n) : n_(n), data_(1 + n + n * (n + 1) / 2, 0.0) {}

    int size() const noexcept { return n_; }
    double value() const noexcept { return data_[0]; }
    double grad(int i) const { return data_[1 + i]; }
    double hess(int i, int j) const {
        if (i > j) std::swap(i, j);
        return data_[1 + n_ + packed_index(n_, i, j)];
    }

    Eigen::VectorXd gradient() const;
    Eigen::MatrixXd hessian() const;

    std::span<double> raw() noexcept { return data_; }
    std::span<const double> raw() const noexcept { return data_; }

    static int packed_index(int n, int i, int j) noexcept { return i * n - i * (i - 1) / 2 + (j - i); }

private:
    int n_ = 0;
    std::vector<double> data_;
};

/// Immutable expression AST stored as a postorder node list; the root is the
/// last node. Cheap to copy, safe to share across threads.
class ExprTree {
public:
    ExprTree() = default;
    ExprTree(std::vector<ExprNode> nodes, int arity);

    int arity() const noexcept { return arity_; }
    const std::vector<ExprNode>& nodes() const noexcept { return nodes_; }
    bool empty() const noexcept { return nodes_.empty(); }
    int root() const noexcept { return static_cast<int>(nodes_.size()) - 1; }

    /// Fully parenthesised text that parses back to an identical tree.
    std::string to_string() const;
    std::string to_string(int node) const;

    double eval(std::span<const double> x) const;
    double eval(const Eigen::VectorXd& x) const { return eval(std::span<const double>(x.data(), x.size())); }
    Jet2 eval_jet2(std::span<const double> x) const;
    Jet2 eval_jet2(const Eigen::VectorXd& x) const {
        return eval_jet2(std::span<const double>(x.data(), x.size()));
    }

    bool depends_on_variables() const;
    bool operator==(const ExprTree&) const = default;

private:
    std::vector<ExprNode> nodes_;
    int arity_ = 0;
};

using ScalarField = ExprTree;

/// Parses `src` over variables v1..v`arity`. When `names` is non-empty the
/// i-th name is accepted as an alias for v(i+1).
ExprTree parse_expr(std::string_view src, int arity, const std::vector<std::string>& names = {});

/// Same as ExprTree::eval_jet2; kept as a free function for call sites that
/// read better without member syntax.
inline Jet2 eval_jet2(const ExprTree& e, std::span<const double> x) { return e.eval_jet2(x); }

/// Substitutes `inner[i]` for variable v(i+1) of `outer`. All inner trees must
/// share one arity, which becomes the arity of the result.
ExprTree compose(const ExprTree& outer, const std::vector<ExprTree>& inner);

/// Constant tree of the given arity.
ExprTree constant_expr(double c, int arity);

}  // namespace liouville
