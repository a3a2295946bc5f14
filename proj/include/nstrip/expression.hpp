#pragma once

// Small arithmetic expression language for user-supplied surfaces and drifts.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Names resolve to variables supplied at compile time, or the constants pi, e.
// Functions: exp log sqrt sin cos tan tanh abs pow min max.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nstrip/types.hpp"

namespace nstrip {

class Expression {
 public:
  Expression() = default;

  Expression(std::string source, std::vector<std::string> variables)
      : source_(std::move(source)), variables_(std::move(variables)) {
    Parser p{source_, variables_, code_};
    p.parse();
  }

  double operator()(std::span<const double> vars) const {
    double stack[64] = {};
    int top = 0;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Const: stack[top++] = ins.value; break;
        case Op::Var: stack[top++] = vars[ins.index]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Add: --top; stack[top - 1] += stack[top]; break;
        case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
        case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
        case Op::Div: --top; stack[top - 1] /= stack[top]; break;
        case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
        case Op::Min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
        case Op::Max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
        case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
        case Op::Log: stack[top - 1] = std::log(stack[top - 1]); break;
        case Op::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
        case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        case Op::Tan: stack[top - 1] = std::tan(stack[top - 1]); break;
        case Op::Tanh: stack[top - 1] = std::tanh(stack[top - 1]); break;
        case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
      }
    }
    return stack[0];
  }

  double operator()(const Vec& vars) const {
    return (*this)(std::span<const double>(vars.data(), static_cast<std::size_t>(vars.size())));
  }

  const std::string& source() const { return source_; }
  const std::vector<std::string>& variables() const { return variables_; }

 private:
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Min, Max,
                  Exp, Log, Sqrt, Sin, Cos, Tan, Tanh, Abs };
  struct Instr {
    Op op;
    double value = 0.0;
    int index = 0;
  };

  struct Parser {
    const std::string& src;
    const std::vector<std::string>& vars;
    std::vector<Instr>& out;
    std::size_t pos = 0;
    int depth = 0;
    int max_depth = 0;

    [[noreturn]] void fail(const std::string& msg) const {
      throw ConfigError("expression '" + src + "': " + msg + " at offset " + std::to_string(pos));
    }

    void skip() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool accept(char c) {
      skip();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    void emit(Op op, double value = 0.0, int index = 0) {
      out.push_back({op, value, index});
      switch (op) {
        case Op::Const:
        case Op::Var: ++depth; break;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        case Op::Pow: case Op::Min: case Op::Max: --depth; break;
        default: break;
      }
      max_depth = std::max(max_depth, depth);
      if (max_depth > 60) fail("expression too deeply nested");
    }

    void parse() {
      if (src.empty()) fail("empty expression");
      expr();
      skip();
      if (pos != src.size()) fail("unexpected trailing input");
    }

    void expr() {
      term();
      for (;;) {
        if (accept('+')) { term(); emit(Op::Add); }
        else if (accept('-')) { term(); emit(Op::Sub); }
        else break;
      }
    }

    void term() {
      unary();
      for (;;) {
        if (accept('*')) { unary(); emit(Op::Mul); }
        else if (accept('/')) { unary(); emit(Op::Div); }
        else break;
      }
    }

    void unary() {
      if (accept('-')) {
        unary();
        emit(Op::Neg);
      } else if (accept('+')) {
        unary();
      } else {
        power();
      }
    }

    void power() {
      atom();
      if (accept('^')) {
        unary();
        emit(Op::Pow);
      }
    }

    void atom() {
      skip();
      if (pos >= src.size()) fail("unexpected end of input");
      const char c = src[pos];
      if (c == '(') {
        ++pos;
        expr();
        if (!accept(')')) fail("expected ')'");
        return;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = src.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos += static_cast<std::size_t>(end - begin);
        emit(Op::Const, v);
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
          ++pos;
        const std::string name = src.substr(start, pos - start);
        if (accept('(')) {
          function(name);
          return;
        }
        for (std::size_t i = 0; i < vars.size(); ++i) {
          if (vars[i] == name) {
            emit(Op::Var, 0.0, static_cast<int>(i));
            return;
          }
        }
        if (name == "pi") { emit(Op::Const, std::numbers::pi); return; }
        if (name == "e") { emit(Op::Const, std::numbers::e); return; }
        pos = start;
        fail("unknown name '" + name + "'");
      }
      fail(std::string("unexpected character '") + c + "'");
    }

    void function(const std::string& name) {
      struct Unary { const char* name; Op op; };
      static constexpr Unary unaries[] = {
          {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"sin", Op::Sin},
          {"cos", Op::Cos}, {"tan", Op::Tan}, {"tanh", Op::Tanh}, {"abs", Op::Abs}};
      for (const auto& u : unaries) {
        if (name == u.name) {
          expr();
          if (!accept(')')) fail("expected ')' after argument of " + name);
          emit(u.op);
          return;
        }
      }
      Op binary;
      if (name == "pow") binary = Op::Pow;
      else if (name == "min") binary = Op::Min;
      else if (name == "max") binary = Op::Max;
      else fail("unknown function '" + name + "'");
      expr();
      if (!accept(',')) fail("expected ',' in " + name);
      expr();
      if (!accept(')')) fail("expected ')' after arguments of " + name);
      emit(binary);
    }
  };

  std::string source_;
  std::vector<std::string> variables_;
  std::vector<Instr> code_;
};

}  // namespace nstrip
