#include "energraph/expr.hpp"

#include "energraph/table.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

namespace energraph {

namespace {

std::shared_ptr<const Expression::Node> make_node(Expression::Node&& node) {
  return std::make_shared<const Expression::Node>(std::move(node));
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string format_constant(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

Expression::Expression() : Expression(constant(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expression Expression::constant(double value) {
  Node n;
  n.kind = Kind::Constant;
  n.value = value;
  return Expression(make_node(std::move(n)));
}

Expression Expression::symbol(std::string name) {
  if (name.empty() || !is_ident_start(name.front()))
    throw ExprError("invalid symbol name '" + name + "'");
  for (char c : name)
    if (!is_ident_char(c)) throw ExprError("invalid symbol name '" + name + "'");
  Node n;
  n.kind = Kind::Symbol;
  n.name = std::move(name);
  return Expression(make_node(std::move(n)));
}

Expression Expression::unary(UnaryOp op, Expression operand) {
  // Negative literals are canonically negative constants; a Neg node over a
  // constant could never round-trip through the grammar.
  if (op == UnaryOp::Neg && operand.is_constant())
    return constant(-operand.constant_value());
  Node n;
  n.kind = Kind::Unary;
  n.unary_op = op;
  n.children.push_back(std::move(operand));
  return Expression(make_node(std::move(n)));
}

Expression Expression::binary(BinaryOp op, Expression lhs, Expression rhs) {
  Node n;
  n.kind = Kind::Binary;
  n.binary_op = op;
  n.children.push_back(std::move(lhs));
  n.children.push_back(std::move(rhs));
  return Expression(make_node(std::move(n)));
}

Expression Expression::call(std::string name, std::vector<Expression> args) {
  if (args.empty()) throw ExprError("call '" + name + "' requires at least one argument");
  Node n;
  n.kind = Kind::Call;
  n.name = std::move(name);
  n.children = std::move(args);
  return Expression(make_node(std::move(n)));
}

Expression::Kind Expression::kind() const { return node_->kind; }

bool Expression::is_constant(double value) const {
  return is_constant() && node_->value == value;
}

double Expression::constant_value() const {
  if (!is_constant()) throw ExprError("expression is not a constant");
  return node_->value;
}

const std::string& Expression::symbol_name() const {
  if (!is_symbol()) throw ExprError("expression is not a symbol");
  return node_->name;
}

// ---------------------------------------------------------------------------
// Folding combinators
// ---------------------------------------------------------------------------

Expression Expression::add(Expression a, Expression b) {
  if (a.is_constant() && b.is_constant())
    return constant(a.constant_value() + b.constant_value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return binary(BinaryOp::Add, std::move(a), std::move(b));
}

Expression Expression::sub(Expression a, Expression b) {
  if (a.is_constant() && b.is_constant())
    return constant(a.constant_value() - b.constant_value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(std::move(b));
  return binary(BinaryOp::Sub, std::move(a), std::move(b));
}

Expression Expression::mul(Expression a, Expression b) {
  if (a.is_constant() && b.is_constant())
    return constant(a.constant_value() * b.constant_value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  return binary(BinaryOp::Mul, std::move(a), std::move(b));
}

Expression Expression::div(Expression a, Expression b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0) {
    double v = a.constant_value() / b.constant_value();
    if (std::isfinite(v)) return constant(v);
  }
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return constant(0.0);
  return binary(BinaryOp::Div, std::move(a), std::move(b));
}

Expression Expression::pow(Expression base, Expression exponent) {
  if (base.is_constant() && exponent.is_constant()) {
    double v = std::pow(base.constant_value(), exponent.constant_value());
    if (std::isfinite(v)) return constant(v);
  }
  if (exponent.is_constant(1.0)) return base;
  if (exponent.is_constant(0.0)) return constant(1.0);
  return binary(BinaryOp::Pow, std::move(base), std::move(exponent));
}

Expression Expression::neg(Expression a) {
  if (a.is_constant()) return constant(-a.constant_value());
  if (a.kind() == Kind::Unary && a.node().unary_op == UnaryOp::Neg)
    return a.node().children.front();
  return unary(UnaryOp::Neg, std::move(a));
}

Expression Expression::sqrt(Expression a) {
  if (a.is_constant() && a.constant_value() >= 0.0)
    return constant(std::sqrt(a.constant_value()));
  return unary(UnaryOp::Sqrt, std::move(a));
}

Expression Expression::abs(Expression a) {
  if (a.is_constant()) return constant(std::abs(a.constant_value()));
  return unary(UnaryOp::Abs, std::move(a));
}

Expression Expression::sign(Expression a) {
  if (a.is_constant()) {
    double v = a.constant_value();
    return constant(v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
  }
  return unary(UnaryOp::Sign, std::move(a));
}

Expression operator+(const Expression& a, const Expression& b) { return Expression::add(a, b); }
Expression operator-(const Expression& a, const Expression& b) { return Expression::sub(a, b); }
Expression operator*(const Expression& a, const Expression& b) { return Expression::mul(a, b); }
Expression operator/(const Expression& a, const Expression& b) { return Expression::div(a, b); }
Expression operator-(const Expression& a) { return Expression::neg(a); }

// ---------------------------------------------------------------------------
// Parser: recursive descent, no rewriting of the parsed structure
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expression run() {
    if (text_.empty()) throw ParseError("empty equation string", 0);
    Expression e = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++pos_;
        Expression rhs = parse_term();
        lhs = Expression::binary(c == '+' ? BinaryOp::Add : BinaryOp::Sub,
                                 std::move(lhs), std::move(rhs));
      } else {
        return lhs;
      }
    }
  }

  Expression parse_term() {
    Expression lhs = parse_factor();
    for (;;) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++pos_;
        Expression rhs = parse_factor();
        lhs = Expression::binary(c == '*' ? BinaryOp::Mul : BinaryOp::Div,
                                 std::move(lhs), std::move(rhs));
      } else {
        return lhs;
      }
    }
  }

  Expression parse_factor() {
    char c = peek();
    if (c == '-') {
      ++pos_;
      Expression operand = parse_factor();
      // Negative literals parse to negative constants so serialization
      // round-trips structurally.
      if (operand.is_constant()) return Expression::constant(-operand.constant_value());
      return Expression::unary(UnaryOp::Neg, std::move(operand));
    }
    if (c == '+') {
      ++pos_;
      return parse_factor();
    }
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_atom();
    if (peek() == '^') {
      ++pos_;
      // Exponent parses as a factor, so x^-2 works and a^b^c groups right.
      Expression exponent = parse_factor();
      return Expression::binary(BinaryOp::Pow, std::move(base), std::move(exponent));
    }
    return base;
  }

  Expression parse_atom() {
    char c = peek();
    std::size_t start = pos_;
    if (c == '(') {
      ++pos_;
      Expression inner = parse_expr();
      if (!consume(')')) throw ParseError("unbalanced parentheses", start);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (is_ident_start(c)) return parse_ident();
    if (c == '\0') throw ParseError("dangling operator at end of input", pos_);
    throw ParseError(std::string("illegal character '") + c + "'", pos_);
  }

  Expression parse_number() {
    std::size_t start = pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc()) throw ParseError("malformed number", start);
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return Expression::constant(value);
  }

  Expression parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    if (peek() != '(') return Expression::symbol(std::move(name));
    ++pos_;
    std::vector<Expression> args;
    args.push_back(parse_expr());
    while (consume(',')) args.push_back(parse_expr());
    if (!consume(')')) throw ParseError("unbalanced parentheses in call", start);
    if (name == "sqrt" || name == "abs" || name == "sign") {
      if (args.size() != 1)
        throw ParseError(name + " takes exactly one argument", start);
      UnaryOp op = name == "sqrt" ? UnaryOp::Sqrt : (name == "abs" ? UnaryOp::Abs : UnaryOp::Sign);
      return Expression::unary(op, std::move(args.front()));
    }
    return Expression::call(std::move(name), std::move(args));
  }
};

}  // namespace

Expression Expression::parse(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double eval_node(const Expression& e, const Bindings& b, const FunctionTable* fns) {
  const auto& n = e.node();
  switch (n.kind) {
    case Expression::Kind::Constant:
      return n.value;
    case Expression::Kind::Symbol: {
      auto it = b.find(n.name);
      if (it == b.end()) throw ExprError("unbound symbol '" + n.name + "'");
      if (!std::isfinite(it->second))
        throw ExprError("non-finite binding for symbol '" + n.name + "'");
      return it->second;
    }
    case Expression::Kind::Unary: {
      double v = eval_node(n.children[0], b, fns);
      switch (n.unary_op) {
        case UnaryOp::Neg: return -v;
        case UnaryOp::Sqrt:
          if (v < 0.0)
            throw ExprError("sqrt of negative value in '" + e.str() + "'");
          return std::sqrt(v);
        case UnaryOp::Abs: return std::abs(v);
        case UnaryOp::Sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      }
      break;
    }
    case Expression::Kind::Binary: {
      double a = eval_node(n.children[0], b, fns);
      double v = eval_node(n.children[1], b, fns);
      switch (n.binary_op) {
        case BinaryOp::Add: return a + v;
        case BinaryOp::Sub: return a - v;
        case BinaryOp::Mul: return a * v;
        case BinaryOp::Div:
          if (v == 0.0) throw ExprError("division by zero in '" + e.str() + "'");
          return a / v;
        case BinaryOp::Pow: {
          double r = std::pow(a, v);
          if (!std::isfinite(r))
            throw ExprError("domain error in power '" + e.str() + "'");
          return r;
        }
      }
      break;
    }
    case Expression::Kind::Call: {
      if (!fns) throw ExprError("unresolved function '" + n.name + "'");
      auto it = fns->find(n.name);
      if (it == fns->end()) throw ExprError("unresolved function '" + n.name + "'");
      std::vector<double> args;
      args.reserve(n.children.size());
      for (const auto& c : n.children) args.push_back(eval_node(c, b, fns));
      return it->second(args);
    }
  }
  throw ExprError("corrupt expression node");
}

}  // namespace

double Expression::evaluate(const Bindings& bindings) const {
  return eval_node(*this, bindings, nullptr);
}

double Expression::evaluate(const Bindings& bindings, const FunctionTable& functions) const {
  return eval_node(*this, bindings, &functions);
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expression Expression::differentiate(std::string_view symbol) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
      return constant(0.0);
    case Kind::Symbol:
      return constant(n.name == symbol ? 1.0 : 0.0);
    case Kind::Unary: {
      const Expression& u = n.children[0];
      Expression du = u.differentiate(symbol);
      switch (n.unary_op) {
        case UnaryOp::Neg: return neg(du);
        case UnaryOp::Sqrt:
          if (du.is_constant(0.0)) return constant(0.0);
          return div(du, mul(constant(2.0), sqrt(u)));
        case UnaryOp::Abs: return mul(sign(u), du);
        case UnaryOp::Sign: return constant(0.0);
      }
      break;
    }
    case Kind::Binary: {
      const Expression& a = n.children[0];
      const Expression& b = n.children[1];
      switch (n.binary_op) {
        case BinaryOp::Add: return add(a.differentiate(symbol), b.differentiate(symbol));
        case BinaryOp::Sub: return sub(a.differentiate(symbol), b.differentiate(symbol));
        case BinaryOp::Mul:
          return add(mul(a.differentiate(symbol), b), mul(a, b.differentiate(symbol)));
        case BinaryOp::Div: {
          Expression da = a.differentiate(symbol);
          Expression db = b.differentiate(symbol);
          if (db.is_constant(0.0)) return div(da, b);
          return div(sub(mul(da, b), mul(a, db)), pow(b, constant(2.0)));
        }
        case BinaryOp::Pow: {
          Expression db = b.differentiate(symbol);
          if (db.is_constant(0.0)) {
            // d(u^v)/ds = v * u^(v-1) * du when v does not depend on s.
            Expression da = a.differentiate(symbol);
            if (da.is_constant(0.0)) return constant(0.0);
            return mul(mul(b, pow(a, sub(b, constant(1.0)))), da);
          }
          if (a.is_constant() && a.constant_value() > 0.0) {
            // d(c^v)/ds = c^v * ln(c) * dv; ln(c) folds to a literal.
            return mul(mul(*this, constant(std::log(a.constant_value()))), db);
          }
          throw UnsupportedDerivative(
              "cannot differentiate power with symbol-dependent exponent: '" + str() + "'");
        }
      }
      break;
    }
    case Kind::Call: {
      bool depends = false;
      for (const auto& arg : n.children)
        if (arg.free_symbols().count(std::string(symbol))) depends = true;
      if (!depends) return constant(0.0);
      throw UnsupportedDerivative("cannot differentiate table call '" + n.name + "'");
    }
  }
  throw ExprError("corrupt expression node");
}

// ---------------------------------------------------------------------------
// Substitution, symbol sets, serialization
// ---------------------------------------------------------------------------

Expression Expression::substitute(const std::map<std::string, Expression>& rules) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
      return *this;
    case Kind::Symbol: {
      auto it = rules.find(n.name);
      return it == rules.end() ? *this : it->second;
    }
    case Kind::Unary:
    case Kind::Binary:
    case Kind::Call: {
      bool changed = false;
      std::vector<Expression> children;
      children.reserve(n.children.size());
      for (const auto& c : n.children) {
        Expression r = c.substitute(rules);
        if (r.node_ != c.node_) changed = true;
        children.push_back(std::move(r));
      }
      if (!changed) return *this;
      Node out = n;
      out.children = std::move(children);
      return Expression(make_node(std::move(out)));
    }
  }
  throw ExprError("corrupt expression node");
}

Expression Expression::rename_calls(const std::map<std::string, std::string>& renames) const {
  const Node& n = *node_;
  if (n.children.empty()) return *this;
  bool changed = false;
  std::vector<Expression> children;
  children.reserve(n.children.size());
  for (const auto& c : n.children) {
    Expression r = c.rename_calls(renames);
    if (r.node_ != c.node_) changed = true;
    children.push_back(std::move(r));
  }
  std::string name = n.name;
  if (n.kind == Kind::Call) {
    auto it = renames.find(n.name);
    if (it != renames.end()) {
      name = it->second;
      changed = true;
    }
  }
  if (!changed) return *this;
  Node out = n;
  out.name = std::move(name);
  out.children = std::move(children);
  return Expression(make_node(std::move(out)));
}

Expression Expression::folded() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Symbol:
      return *this;
    case Kind::Unary: {
      Expression child = n.children[0].folded();
      switch (n.unary_op) {
        case UnaryOp::Neg: return neg(std::move(child));
        case UnaryOp::Sqrt: return sqrt(std::move(child));
        case UnaryOp::Abs: return abs(std::move(child));
        case UnaryOp::Sign: return sign(std::move(child));
      }
      break;
    }
    case Kind::Binary: {
      Expression a = n.children[0].folded();
      Expression b = n.children[1].folded();
      switch (n.binary_op) {
        case BinaryOp::Add: return add(std::move(a), std::move(b));
        case BinaryOp::Sub: return sub(std::move(a), std::move(b));
        case BinaryOp::Mul: return mul(std::move(a), std::move(b));
        case BinaryOp::Div: return div(std::move(a), std::move(b));
        case BinaryOp::Pow: return pow(std::move(a), std::move(b));
      }
      break;
    }
    case Kind::Call: {
      std::vector<Expression> args;
      args.reserve(n.children.size());
      bool changed = false;
      for (const auto& c : n.children) {
        Expression r = c.folded();
        if (!r.same_structure(c)) changed = true;
        args.push_back(std::move(r));
      }
      if (!changed) return *this;
      return call(n.name, std::move(args));
    }
  }
  throw ExprError("corrupt expression node");
}

namespace {

void collect_symbols(const Expression& e, std::set<std::string>& out) {
  const auto& n = e.node();
  if (n.kind == Expression::Kind::Symbol) out.insert(n.name);
  for (const auto& c : n.children) collect_symbols(c, out);
}

void collect_calls(const Expression& e, std::set<std::string>& out) {
  const auto& n = e.node();
  if (n.kind == Expression::Kind::Call) out.insert(n.name);
  for (const auto& c : n.children) collect_calls(c, out);
}

void write_expr(const Expression& e, std::string& out) {
  const auto& n = e.node();
  switch (n.kind) {
    case Expression::Kind::Constant:
      if (n.value < 0.0) {
        out += '(';
        out += format_constant(n.value);
        out += ')';
      } else {
        out += format_constant(n.value);
      }
      return;
    case Expression::Kind::Symbol:
      out += n.name;
      return;
    case Expression::Kind::Unary:
      switch (n.unary_op) {
        case UnaryOp::Neg:
          out += "(-";
          write_expr(n.children[0], out);
          out += ')';
          return;
        case UnaryOp::Sqrt: out += "sqrt("; break;
        case UnaryOp::Abs: out += "abs("; break;
        case UnaryOp::Sign: out += "sign("; break;
      }
      write_expr(n.children[0], out);
      out += ')';
      return;
    case Expression::Kind::Binary: {
      char op = '+';
      switch (n.binary_op) {
        case BinaryOp::Add: op = '+'; break;
        case BinaryOp::Sub: op = '-'; break;
        case BinaryOp::Mul: op = '*'; break;
        case BinaryOp::Div: op = '/'; break;
        case BinaryOp::Pow: op = '^'; break;
      }
      out += '(';
      write_expr(n.children[0], out);
      out += op;
      write_expr(n.children[1], out);
      out += ')';
      return;
    }
    case Expression::Kind::Call:
      out += n.name;
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ',';
        write_expr(n.children[i], out);
      }
      out += ')';
      return;
  }
}

}  // namespace

std::set<std::string> Expression::free_symbols() const {
  std::set<std::string> out;
  collect_symbols(*this, out);
  return out;
}

std::set<std::string> Expression::call_names() const {
  std::set<std::string> out;
  collect_calls(*this, out);
  return out;
}

std::string Expression::str() const {
  std::string out;
  write_expr(*this, out);
  return out;
}

bool Expression::same_structure(const Expression& other) const {
  if (node_ == other.node_) return true;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Kind::Constant:
      return a.value == b.value;
    case Kind::Symbol:
      return a.name == b.name;
    case Kind::Unary:
      if (a.unary_op != b.unary_op) return false;
      break;
    case Kind::Binary:
      if (a.binary_op != b.binary_op) return false;
      break;
    case Kind::Call:
      if (a.name != b.name) return false;
      break;
  }
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!a.children[i].same_structure(b.children[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

CompiledExpr CompiledExpr::compile(const Expression& expr,
                                   const std::map<std::string, int>& slots,
                                   const CallResolver* calls) {
  CompiledExpr out;
  int depth = 0;
  const auto emit = [&](const auto& self, const Expression& e) -> void {
    const auto& n = e.node();
    switch (n.kind) {
      case Expression::Kind::Constant:
        out.code_.push_back({Op::PushConst, 0, n.value, nullptr});
        out.max_stack_ = std::max(out.max_stack_, ++depth);
        return;
      case Expression::Kind::Symbol: {
        auto it = slots.find(n.name);
        if (it == slots.end())
          throw ExprError("unresolvable symbol '" + n.name + "' during compilation");
        out.code_.push_back({Op::PushSlot, it->second, 0.0, nullptr});
        out.max_stack_ = std::max(out.max_stack_, ++depth);
        return;
      }
      case Expression::Kind::Unary: {
        self(self, n.children[0]);
        Op op = Op::Neg;
        switch (n.unary_op) {
          case UnaryOp::Neg: op = Op::Neg; break;
          case UnaryOp::Sqrt: op = Op::Sqrt; break;
          case UnaryOp::Abs: op = Op::Abs; break;
          case UnaryOp::Sign: op = Op::Sign; break;
        }
        out.code_.push_back({op, 0, 0.0, nullptr});
        return;
      }
      case Expression::Kind::Binary: {
        self(self, n.children[0]);
        self(self, n.children[1]);
        Op op = Op::Add;
        switch (n.binary_op) {
          case BinaryOp::Add: op = Op::Add; break;
          case BinaryOp::Sub: op = Op::Sub; break;
          case BinaryOp::Mul: op = Op::Mul; break;
          case BinaryOp::Div: op = Op::Div; break;
          case BinaryOp::Pow: op = Op::Pow; break;
        }
        out.code_.push_back({op, 0, 0.0, nullptr});
        --depth;
        return;
      }
      case Expression::Kind::Call: {
        if (!calls) throw ExprError("unresolved function '" + n.name + "'");
        if (n.children.size() == 1) {
          const LookupTable1D* t = calls->table1d ? calls->table1d(n.name) : nullptr;
          if (!t) throw ExprError("unresolved 1-D table '" + n.name + "'");
          self(self, n.children[0]);
          out.code_.push_back({Op::Table1, 0, 0.0, t});
          return;
        }
        if (n.children.size() == 2) {
          const LookupTable2D* t = calls->table2d ? calls->table2d(n.name) : nullptr;
          if (!t) throw ExprError("unresolved 2-D table '" + n.name + "'");
          self(self, n.children[0]);
          self(self, n.children[1]);
          out.code_.push_back({Op::Table2, 0, 0.0, t});
          --depth;
          return;
        }
        throw ExprError("table call '" + n.name + "' must take 1 or 2 arguments");
      }
    }
  };
  emit(emit, expr);
  if (out.max_stack_ > 64)
    throw ExprError("expression too deep to compile (stack > 64)");
  return out;
}

double CompiledExpr::eval(std::span<const double> values) const {
  double stack[64];
  int top = -1;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::PushConst: stack[++top] = in.value; break;
      case Op::PushSlot: stack[++top] = values[static_cast<std::size_t>(in.slot)]; break;
      case Op::Add: --top; stack[top] += stack[top + 1]; break;
      case Op::Sub: --top; stack[top] -= stack[top + 1]; break;
      case Op::Mul: --top; stack[top] *= stack[top + 1]; break;
      case Op::Div: --top; stack[top] /= stack[top + 1]; break;
      case Op::Pow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
      case Op::Neg: stack[top] = -stack[top]; break;
      case Op::Sqrt: stack[top] = std::sqrt(stack[top]); break;
      case Op::Abs: stack[top] = std::abs(stack[top]); break;
      case Op::Sign:
        stack[top] = stack[top] > 0.0 ? 1.0 : (stack[top] < 0.0 ? -1.0 : 0.0);
        break;
      case Op::Table1:
        stack[top] = static_cast<const LookupTable1D*>(in.table)->sample(stack[top]);
        break;
      case Op::Table2:
        --top;
        stack[top] = static_cast<const LookupTable2D*>(in.table)->sample(stack[top], stack[top + 1]);
        break;
    }
  }
  return top >= 0 ? stack[top] : 0.0;
}

}  // namespace energraph
