#pragma once

// Algebraic expression trees for vertex capacitance and edge power-flow
// equations. Grammar (infix, ASCII):
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-'|'+')? power
//   power  := atom ('^' factor)?          right-associative, binds above unary minus
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//   ident  := [A-Za-z_][A-Za-z0-9_]*
//
// Builtin unary functions: sqrt, abs, sign. Any other ident '(' ... ')' is a
// table-lookup call resolved against parameter records at assembly time.
// Reserved symbols by convention: x, x_dot, x<k>, x<k>_dot (vertex states),
// xt, xh, xt<k>, xh<k> (edge tail/head states), u<k> (inputs).
//
// Expressions are immutable after construction and may be shared and
// evaluated concurrently with independent bindings.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace energraph {

/// Map from symbol name to a finite real value.
using Bindings = std::map<std::string, double>;

/// Runtime table of named functions for evaluating call nodes.
using FunctionTable =
    std::map<std::string, std::function<double(std::span<const double>)>>;

class ExprError : public std::runtime_error {
public:
  explicit ExprError(const std::string& what) : std::runtime_error(what) {}
};

/// Syntax error with a 0-based character position into the source text.
class ParseError : public ExprError {
public:
  ParseError(const std::string& what, std::size_t position)
      : ExprError(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

/// Thrown by differentiate() for forms that have no closed-form derivative
/// in this grammar (table calls, powers with the symbol in base and
/// exponent). Callers fall back to finite differences.
class UnsupportedDerivative : public ExprError {
public:
  using ExprError::ExprError;
};

enum class UnaryOp : std::uint8_t { Neg, Sqrt, Abs, Sign };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

class Expression {
public:
  enum class Kind : std::uint8_t { Constant, Symbol, Unary, Binary, Call };

  /// Constant zero.
  Expression();

  static Expression constant(double value);
  static Expression symbol(std::string name);
  static Expression unary(UnaryOp op, Expression operand);
  static Expression binary(BinaryOp op, Expression lhs, Expression rhs);
  static Expression call(std::string name, std::vector<Expression> args);

  /// Parses an equation string. Throws ParseError on malformed input.
  static Expression parse(std::string_view text);

  // Folding combinators: literal subtrees are folded and exact 0/1 identity
  // operands are dropped, so generated expressions (derivatives, design
  // scaling) stay compact. parse() never rewrites.
  static Expression add(Expression a, Expression b);
  static Expression sub(Expression a, Expression b);
  static Expression mul(Expression a, Expression b);
  static Expression div(Expression a, Expression b);
  static Expression pow(Expression base, Expression exponent);
  static Expression neg(Expression a);
  static Expression sqrt(Expression a);
  static Expression abs(Expression a);
  static Expression sign(Expression a);

  Kind kind() const;
  bool is_constant() const { return kind() == Kind::Constant; }
  bool is_constant(double value) const;
  bool is_symbol() const { return kind() == Kind::Symbol; }
  double constant_value() const;
  const std::string& symbol_name() const;

  /// Recursive IEEE-double evaluation. Every free symbol must be bound and
  /// every bound value finite. Domain errors (sqrt of a negative, division
  /// by zero) name the offending subexpression.
  double evaluate(const Bindings& bindings) const;
  double evaluate(const Bindings& bindings, const FunctionTable& functions) const;

  /// Symbolic partial derivative. sign/abs are treated as piecewise
  /// constant/linear with derivative chosen 0 at the kink. Differentiating
  /// with respect to an absent symbol yields the zero constant.
  Expression differentiate(std::string_view symbol) const;

  /// Simultaneous single-pass symbol replacement; replacement subtrees are
  /// not re-scanned and no folding is applied.
  Expression substitute(const std::map<std::string, Expression>& rules) const;

  /// Renames table-lookup call targets (symbols are untouched).
  Expression rename_calls(const std::map<std::string, std::string>& renames) const;

  /// Rebuilds the tree through the folding combinators: literal subtrees
  /// collapse and exact 0/1 identity operands drop out. No other rewriting.
  Expression folded() const;

  /// Exact set of symbol names in the tree (call names excluded).
  std::set<std::string> free_symbols() const;

  /// Names of table-lookup calls in the tree.
  std::set<std::string> call_names() const;

  /// Canonical serialization: the input grammar with explicit parentheses.
  /// parse(str()) reproduces a structurally identical tree.
  std::string str() const;

  bool same_structure(const Expression& other) const;

  struct Node;
  const Node& node() const { return *node_; }

private:
  explicit Expression(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

struct Expression::Node {
  Kind kind = Kind::Constant;
  double value = 0.0;                    // Constant
  std::string name;                      // Symbol, Call
  UnaryOp unary_op = UnaryOp::Neg;       // Unary
  BinaryOp binary_op = BinaryOp::Add;    // Binary
  std::vector<Expression> children;      // Unary(1), Binary(2), Call(n)
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);

// ---------------------------------------------------------------------------
// Compiled form for hot loops. Symbols resolve to slot indices into a flat
// value array; table calls resolve to an index into a lookup-table list.
// Evaluation is allocation-free and uses IEEE semantics (NaN/Inf propagate
// instead of throwing), so integrators can detect and report non-finite
// states themselves.
// ---------------------------------------------------------------------------

class LookupTable1D;
class LookupTable2D;

/// Resolves a call name to a bound table, or returns false.
struct CallResolver {
  std::function<const LookupTable1D*(const std::string&)> table1d;
  std::function<const LookupTable2D*(const std::string&)> table2d;
};

class CompiledExpr {
public:
  CompiledExpr() = default;

  /// Compiles against a symbol -> slot map. Unknown symbols throw ExprError.
  static CompiledExpr compile(const Expression& expr,
                              const std::map<std::string, int>& slots,
                              const CallResolver* calls = nullptr);

  double eval(std::span<const double> values) const;
  int max_stack() const { return max_stack_; }
  bool empty() const { return code_.empty(); }

private:
  enum class Op : std::uint8_t {
    PushConst, PushSlot, Add, Sub, Mul, Div, Pow, Neg, Sqrt, Abs, Sign,
    Table1, Table2
  };
  struct Instr {
    Op op;
    std::int32_t slot = 0;
    double value = 0.0;
    const void* table = nullptr;
  };
  std::vector<Instr> code_;
  int max_stack_ = 0;
};

}  // namespace energraph
