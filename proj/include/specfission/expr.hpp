#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "specfission/value.hpp"

namespace specfission {

/// AST of the supported expression-language subset. Nodes are immutable
/// after parsing and freely shareable.
struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

enum class ExprKind {
    Literal,    // value
    Identifier, // name (signal reference or builtin constant; `datum` is special)
    Member,     // object.field
    Index,      // object[index]
    Unary,      // op: ! -
    Binary,     // op: + - * / % == != === !== < <= > >= && ||
    Ternary,    // cond ? then : else
    Call,       // name(args...)
    ArrayLit,   // [elements...]
};

struct ExprNode {
    ExprKind kind;
    Value literal;               // Literal
    std::string name;            // Identifier, Member field, Call function, Unary/Binary op
    ExprPtr object;              // Member/Index object; Unary operand; Binary lhs; Ternary cond
    ExprPtr index;               // Index subscript; Binary rhs; Ternary then
    ExprPtr third;               // Ternary else
    std::vector<ExprPtr> args;   // Call args, ArrayLit elements
};

/// Names classified out of an AST: signals it reads, datasets referenced via
/// data(...), and datum fields accessed.
struct RefSet {
    std::set<std::string> signals;
    std::set<std::string> datasets;
    std::set<std::string> datum_fields;

    bool operator==(const RefSet&) const = default;
};

/// Row context for `datum` lookups. Missing fields read as null.
class RowContext {
  public:
    virtual ~RowContext() = default;
    virtual Value field(const std::string& name) const = 0;
};

using SignalEnv = std::function<const Value*(const std::string&)>;

/// Parse expression text according to the subset grammar. Precedence,
/// tightest first: member/call/index, unary, * / %, + -, comparisons,
/// equality, &&, ||, ?:. Binary operators are left-associative, ?: is
/// right-associative. Throws SyntaxError with the byte offset of the
/// failure; a missing operand at end of input is reported at the operator
/// that required it.
ExprPtr parse_expression(const std::string& text);

/// Canonical text form: minimal parentheses, single spaces around binary
/// operators, double-quoted strings. parse(print(ast)) == ast.
std::string print_expression(const ExprPtr& ast);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

RefSet analyze(const ExprPtr& ast);

/// The frozen v1 function subset. Anything outside it fails is_supported and
/// plans the containing step to the client.
bool is_supported_function(const std::string& name);

/// True iff every construct is in the supported grammar, every call is in
/// the v1 function set, and the expression references no datasets.
bool is_supported(const ExprPtr& ast);

/// Evaluate against a row and signal environment. Deterministic. Arithmetic
/// on null yields null; order comparisons with null yield false; logical
/// operators require booleans and short-circuit.
Value evaluate(const ExprPtr& ast, const RowContext* datum, const SignalEnv& signals);

/// Convenience over a plain map.
Value evaluate(const ExprPtr& ast, const RowContext* datum,
               const std::map<std::string, Value>& signals);

} // namespace specfission
