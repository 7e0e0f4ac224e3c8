#pragma once

// Front end for the ODE description language:
//
//   fn X(t);
//   let diff[X, t] = 1.8 * Y - X;
//   let X(t: 0) = 0.1;
//   plot(x: X(t), y: Y(t));
//   out X(t);
//
// tokenize -> parse -> validate yields a checked Program.

#include <string>
#include <string_view>
#include <vector>

#include "analogc/error.hpp"

namespace analogc::dsl {

class LexError : public SourceError {
public:
    using SourceError::SourceError;
};

class ParseError : public SourceError {
public:
    ParseError(SourcePos pos, std::string expected, std::string found)
        : SourceError(pos, "expected " + expected + ", found " + found),
          expected_(std::move(expected)), found_(std::move(found)) {}

    const std::string& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    std::string expected_;
    std::string found_;
};

class ValidateError : public SourceError {
public:
    using SourceError::SourceError;
};

enum class TokenKind { Ident, Number, Keyword, Punct };

struct Token {
    TokenKind kind;
    std::string lexeme;
    SourcePos pos;

    friend bool operator==(const Token&, const Token&) = default;
};

enum class ExprKind { Const, Var, Add, Sub, Mul, Neg };

/// Expression tree node. Binary nodes hold two operands, Neg holds one.
struct Expr {
    ExprKind kind = ExprKind::Const;
    double value = 0.0;       // Const
    std::string name;         // Var
    std::vector<Expr> args;
    SourcePos pos;

    static Expr constant(double v, SourcePos p = {});
    static Expr var(std::string n, SourcePos p = {});
    static Expr add(Expr l, Expr r);
    static Expr sub(Expr l, Expr r);
    static Expr mul(Expr l, Expr r);
    static Expr neg(Expr e);

    const Expr& lhs() const { return args.at(0); }
    const Expr& rhs() const { return args.at(1); }

    /// Structural equality; source positions are ignored.
    friend bool operator==(const Expr& a, const Expr& b);
};

// Unvalidated syntax tree, one record per statement kind.

struct FnDecl {
    std::string name;
    SourcePos pos;
};

struct DiffDef {
    std::string state;
    Expr rhs;
    SourcePos pos;
};

struct InitDef {
    std::string state;
    double time = 0.0;
    double value = 0.0;
    SourcePos pos;
    SourcePos time_pos;
};

struct PlotAxis {
    std::string label;
    std::string state;
    SourcePos pos;
};

struct PlotStmt {
    std::vector<PlotAxis> axes;
    SourcePos pos;
};

struct OutStmt {
    std::string state;
    SourcePos pos;
};

struct SyntaxTree {
    std::string independent;  // empty if no statement named it
    std::vector<FnDecl> fns;
    std::vector<DiffDef> diffs;
    std::vector<InitDef> inits;
    std::vector<PlotStmt> plots;
    std::vector<OutStmt> outs;
};

struct StateDef {
    std::string name;
    Expr derivative;
    double initial_value = 0.0;

    friend bool operator==(const StateDef&, const StateDef&) = default;
};

struct Plot {
    std::string x;
    std::string y;
    std::vector<std::string> axis_labels;  // as written, e.g. {"x", "y"}
    std::vector<std::string> extra;        // states of axes beyond the first two

    friend bool operator==(const Plot&, const Plot&) = default;
};

/// Checked program: states in `fn` declaration order.
struct Program {
    std::string independent = "t";
    std::vector<StateDef> states;
    std::vector<std::string> outputs;
    std::vector<Plot> plots;

    const StateDef* find_state(std::string_view name) const;

    friend bool operator==(const Program&, const Program&) = default;
};

std::vector<Token> tokenize(std::string_view source);
SyntaxTree parse(const std::vector<Token>& tokens);
Program validate(const SyntaxTree& tree);

/// tokenize + parse + validate.
Program compile_source(std::string_view source);

/// Render an expression with the minimal parentheses needed to re-parse it identically.
std::string to_source(const Expr& expr);
/// Pretty-print a program in canonical statement order.
std::string to_source(const Program& program);

} // namespace analogc::dsl
