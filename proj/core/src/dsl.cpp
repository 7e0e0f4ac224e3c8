#include "analogc/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "analogc/format.hpp"

namespace analogc::dsl {

namespace {

constexpr std::string_view kKeywords[] = {"fn", "let", "diff", "plot", "out"};
constexpr std::string_view kPuncts = "()[],:;=+-*";

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

} // namespace

Expr Expr::constant(double v, SourcePos p)
{
    Expr e;
    e.kind = ExprKind::Const;
    e.value = v;
    e.pos = p;
    return e;
}

Expr Expr::var(std::string n, SourcePos p)
{
    Expr e;
    e.kind = ExprKind::Var;
    e.name = std::move(n);
    e.pos = p;
    return e;
}

static Expr binary(ExprKind kind, Expr l, Expr r)
{
    Expr e;
    e.kind = kind;
    e.pos = l.pos;
    e.args.push_back(std::move(l));
    e.args.push_back(std::move(r));
    return e;
}

Expr Expr::add(Expr l, Expr r) { return binary(ExprKind::Add, std::move(l), std::move(r)); }
Expr Expr::sub(Expr l, Expr r) { return binary(ExprKind::Sub, std::move(l), std::move(r)); }
Expr Expr::mul(Expr l, Expr r) { return binary(ExprKind::Mul, std::move(l), std::move(r)); }

Expr Expr::neg(Expr inner)
{
    Expr e;
    e.kind = ExprKind::Neg;
    e.pos = inner.pos;
    e.args.push_back(std::move(inner));
    return e;
}

bool operator==(const Expr& a, const Expr& b)
{
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case ExprKind::Const:
        return a.value == b.value;
    case ExprKind::Var:
        return a.name == b.name;
    default:
        return a.args == b.args;
    }
}

const StateDef* Program::find_state(std::string_view name) const
{
    for (const auto& s : states)
        if (s.name == name)
            return &s;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Lexer

std::vector<Token> tokenize(std::string_view source)
{
    std::vector<Token> tokens;
    int line = 1;
    int col = 1;
    std::size_t i = 0;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (source[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };

    while (i < source.size()) {
        char c = source[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < source.size() && source[i] != '\n')
                advance(1);
            continue;
        }
        SourcePos pos{line, col};
        if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < source.size() && is_ident_char(source[j]))
                ++j;
            std::string word(source.substr(i, j - i));
            bool kw = std::find(std::begin(kKeywords), std::end(kKeywords), word) != std::end(kKeywords);
            tokens.push_back({kw ? TokenKind::Keyword : TokenKind::Ident, word, pos});
            advance(j - i);
            continue;
        }
        if (is_digit(c)) {
            std::size_t j = i;
            while (j < source.size() && is_digit(source[j]))
                ++j;
            if (j < source.size() && source[j] == '.') {
                ++j;
                if (j >= source.size() || !is_digit(source[j])) {
                    advance(j - i);
                    throw LexError({line, col}, "expected digit after decimal point");
                }
                while (j < source.size() && is_digit(source[j]))
                    ++j;
            }
            if (j < source.size() && (source[j] == 'e' || source[j] == 'E')) {
                advance(j - i);
                throw LexError({line, col}, "exponent notation is not supported");
            }
            if (j < source.size() && (is_ident_char(source[j]) || source[j] == '.')) {
                advance(j - i);
                throw LexError({line, col}, std::string("unexpected character '") + source[j] +
                                                "' after number");
            }
            tokens.push_back({TokenKind::Number, std::string(source.substr(i, j - i)), pos});
            advance(j - i);
            continue;
        }
        if (kPuncts.find(c) != std::string_view::npos) {
            tokens.push_back({TokenKind::Punct, std::string(1, c), pos});
            advance(1);
            continue;
        }
        std::string shown = std::isprint(static_cast<unsigned char>(c))
                                ? std::string("'") + c + "'"
                                : "byte 0x" + [&] {
                                      std::ostringstream os;
                                      os << std::hex << (static_cast<unsigned>(c) & 0xffu);
                                      return os.str();
                                  }();
        throw LexError(pos, "unexpected character " + shown);
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

    SyntaxTree run()
    {
        while (!at_end())
            statement();
        return std::move(tree_);
    }

private:
    const std::vector<Token>& toks_;
    std::size_t at_ = 0;
    SyntaxTree tree_;

    bool at_end() const { return at_ >= toks_.size(); }

    SourcePos here() const
    {
        if (!at_end())
            return toks_[at_].pos;
        // Past the last token: report at the last token so the position stays in bounds.
        return toks_.empty() ? SourcePos{} : toks_.back().pos;
    }

    std::string found() const
    {
        if (at_end())
            return "end of input";
        return "'" + toks_[at_].lexeme + "'";
    }

    [[noreturn]] void fail(const std::string& expected) const
    {
        throw ParseError(here(), expected, found());
    }

    bool peek_punct(char p) const
    {
        return !at_end() && toks_[at_].kind == TokenKind::Punct && toks_[at_].lexeme[0] == p;
    }

    bool peek_keyword(std::string_view kw) const
    {
        return !at_end() && toks_[at_].kind == TokenKind::Keyword && toks_[at_].lexeme == kw;
    }

    const Token& expect_punct(char p)
    {
        if (!peek_punct(p))
            fail(std::string("'") + p + "'");
        return toks_[at_++];
    }

    const Token& expect_keyword(std::string_view kw)
    {
        if (!peek_keyword(kw))
            fail("'" + std::string(kw) + "'");
        return toks_[at_++];
    }

    const Token& expect_ident(const char* what = "identifier")
    {
        if (at_end() || toks_[at_].kind != TokenKind::Ident)
            fail(what);
        return toks_[at_++];
    }

    static double number_value(const Token& tok)
    {
        double v = 0.0;
        auto res = std::from_chars(tok.lexeme.data(), tok.lexeme.data() + tok.lexeme.size(), v);
        if (res.ec != std::errc{} || !std::isfinite(v))
            throw LexError(tok.pos, "number out of range: " + tok.lexeme);
        return v;
    }

    const Token& expect_number()
    {
        if (at_end() || toks_[at_].kind != TokenKind::Number)
            fail("number");
        return toks_[at_++];
    }

    // The independent variable is fixed by its first occurrence; later uses must match.
    void independent_var()
    {
        if (at_end() || toks_[at_].kind != TokenKind::Ident)
            fail("independent variable");
        const Token& tok = toks_[at_];
        if (tree_.independent.empty()) {
            tree_.independent = tok.lexeme;
        } else if (tok.lexeme != tree_.independent) {
            fail("independent variable '" + tree_.independent + "'");
        }
        ++at_;
    }

    void statement()
    {
        if (peek_keyword("fn")) {
            fn_stmt();
        } else if (peek_keyword("let")) {
            let_stmt();
        } else if (peek_keyword("plot")) {
            plot_stmt();
        } else if (peek_keyword("out")) {
            out_stmt();
        } else {
            fail("statement ('fn', 'let', 'plot' or 'out')");
        }
    }

    void fn_stmt()
    {
        SourcePos pos = expect_keyword("fn").pos;
        const Token& name = expect_ident("function name");
        expect_punct('(');
        independent_var();
        expect_punct(')');
        expect_punct(';');
        tree_.fns.push_back({name.lexeme, pos});
    }

    void let_stmt()
    {
        SourcePos pos = expect_keyword("let").pos;
        if (peek_keyword("diff")) {
            ++at_;
            expect_punct('[');
            const Token& name = expect_ident("function name");
            expect_punct(',');
            independent_var();
            expect_punct(']');
            expect_punct('=');
            Expr rhs = expression();
            expect_punct(';');
            tree_.diffs.push_back({name.lexeme, std::move(rhs), pos});
            return;
        }
        const Token& name = expect_ident("'diff' or function name");
        expect_punct('(');
        independent_var();
        expect_punct(':');
        const Token& time = expect_number();
        expect_punct(')');
        expect_punct('=');
        double sign = 1.0;
        if (peek_punct('-')) {
            sign = -1.0;
            ++at_;
        } else if (peek_punct('+')) {
            ++at_;
        }
        const Token& value = expect_number();
        expect_punct(';');
        tree_.inits.push_back({name.lexeme, number_value(time), sign * number_value(value), pos, time.pos});
    }

    PlotAxis plot_axis()
    {
        const Token& label = expect_ident("axis name");
        expect_punct(':');
        const Token& state = expect_ident("function name");
        expect_punct('(');
        independent_var();
        expect_punct(')');
        return {label.lexeme, state.lexeme, state.pos};
    }

    void plot_stmt()
    {
        PlotStmt stmt;
        stmt.pos = expect_keyword("plot").pos;
        expect_punct('(');
        stmt.axes.push_back(plot_axis());
        while (peek_punct(',')) {
            ++at_;
            stmt.axes.push_back(plot_axis());
        }
        expect_punct(')');
        expect_punct(';');
        tree_.plots.push_back(std::move(stmt));
    }

    void out_stmt()
    {
        expect_keyword("out");
        const Token& name = expect_ident("function name");
        expect_punct('(');
        independent_var();
        expect_punct(')');
        expect_punct(';');
        tree_.outs.push_back({name.lexeme, name.pos});
    }

    // expr   := term (('+' | '-') term)*
    // term   := unary ('*' unary)*
    // unary  := '-' unary | primary
    // primary:= Number | Ident | '(' expr ')'
    Expr expression()
    {
        Expr lhs = term();
        while (peek_punct('+') || peek_punct('-')) {
            char op = toks_[at_++].lexeme[0];
            Expr rhs = term();
            lhs = op == '+' ? Expr::add(std::move(lhs), std::move(rhs))
                            : Expr::sub(std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Expr term()
    {
        Expr lhs = unary();
        while (peek_punct('*')) {
            ++at_;
            lhs = Expr::mul(std::move(lhs), unary());
        }
        return lhs;
    }

    Expr unary()
    {
        if (peek_punct('-')) {
            SourcePos pos = toks_[at_++].pos;
            Expr e = Expr::neg(unary());
            e.pos = pos;
            return e;
        }
        return primary();
    }

    Expr primary()
    {
        if (at_end())
            fail("expression");
        const Token& tok = toks_[at_];
        if (tok.kind == TokenKind::Number) {
            ++at_;
            return Expr::constant(number_value(tok), tok.pos);
        }
        if (tok.kind == TokenKind::Ident) {
            ++at_;
            return Expr::var(tok.lexeme, tok.pos);
        }
        if (peek_punct('(')) {
            ++at_;
            Expr inner = expression();
            expect_punct(')');
            return inner;
        }
        fail("expression");
    }
};

void check_vars(const Expr& e, const std::set<std::string>& states)
{
    if (e.kind == ExprKind::Var) {
        if (!states.count(e.name))
            throw ValidateError(e.pos, "undeclared variable '" + e.name + "'");
        return;
    }
    for (const auto& a : e.args)
        check_vars(a, states);
}

} // namespace

SyntaxTree parse(const std::vector<Token>& tokens)
{
    return Parser(tokens).run();
}

Program validate(const SyntaxTree& tree)
{
    Program prog;
    if (!tree.independent.empty())
        prog.independent = tree.independent;

    std::set<std::string> declared;
    for (const auto& fn : tree.fns) {
        if (!declared.insert(fn.name).second)
            throw ValidateError(fn.pos, "duplicate declaration of '" + fn.name + "'");
        prog.states.push_back({fn.name, Expr{}, 0.0});
    }
    if (prog.states.empty())
        throw ValidateError({}, "no states declared");

    auto index_of = [&](const std::string& name) {
        for (std::size_t k = 0; k < prog.states.size(); ++k)
            if (prog.states[k].name == name)
                return static_cast<int>(k);
        return -1;
    };

    std::vector<bool> has_diff(prog.states.size(), false);
    for (const auto& d : tree.diffs) {
        int k = index_of(d.state);
        if (k < 0)
            throw ValidateError(d.pos, "derivative of unknown state '" + d.state + "'");
        if (has_diff[k])
            throw ValidateError(d.pos, "duplicate derivative for '" + d.state + "'");
        check_vars(d.rhs, declared);
        has_diff[k] = true;
        prog.states[k].derivative = d.rhs;
    }

    std::vector<bool> has_init(prog.states.size(), false);
    for (const auto& init : tree.inits) {
        int k = index_of(init.state);
        if (k < 0)
            throw ValidateError(init.pos, "initial condition for unknown state '" + init.state + "'");
        if (has_init[k])
            throw ValidateError(init.pos, "duplicate initial condition for '" + init.state + "'");
        if (init.time != 0.0)
            throw ValidateError(init.time_pos, "initial condition time must be 0");
        has_init[k] = true;
        prog.states[k].initial_value = init.value;
    }

    for (std::size_t k = 0; k < prog.states.size(); ++k) {
        SourcePos pos = tree.fns[k].pos;
        if (!has_diff[k])
            throw ValidateError(pos, "missing derivative for '" + prog.states[k].name + "'");
        if (!has_init[k])
            throw ValidateError(pos, "missing initial condition for '" + prog.states[k].name + "'");
    }

    for (const auto& p : tree.plots) {
        if (p.axes.size() < 2)
            throw ValidateError(p.pos, "plot needs at least two axes");
        Plot plot;
        for (const auto& axis : p.axes) {
            if (!declared.count(axis.state))
                throw ValidateError(axis.pos, "plot of unknown state '" + axis.state + "'");
            plot.axis_labels.push_back(axis.label);
        }
        plot.x = p.axes[0].state;
        plot.y = p.axes[1].state;
        for (std::size_t a = 2; a < p.axes.size(); ++a)
            plot.extra.push_back(p.axes[a].state);
        prog.plots.push_back(std::move(plot));
    }

    for (const auto& o : tree.outs) {
        if (!declared.count(o.state))
            throw ValidateError(o.pos, "output of unknown state '" + o.state + "'");
        prog.outputs.push_back(o.state);
    }
    return prog;
}

Program compile_source(std::string_view source)
{
    return validate(parse(tokenize(source)));
}

// ---------------------------------------------------------------------------
// Pretty printer

namespace {

// Binding strength: sums 1, products 2, unary minus 3, atoms 4.
int precedence(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Add:
    case ExprKind::Sub:
        return 1;
    case ExprKind::Mul:
        return 2;
    case ExprKind::Neg:
        return 3;
    default:
        return 4;
    }
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out)
{
    if (wrap)
        out += '(';
    print(e, out);
    if (wrap)
        out += ')';
}

void print(const Expr& e, std::string& out)
{
    switch (e.kind) {
    case ExprKind::Const:
        if (e.value < 0 || std::signbit(e.value)) {
            out += "-";
            out += format_fixed(-e.value);
        } else {
            out += format_fixed(e.value);
        }
        return;
    case ExprKind::Var:
        out += e.name;
        return;
    case ExprKind::Neg:
        out += '-';
        print_wrapped(e.args[0], precedence(e.args[0]) < 3, out);
        return;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul: {
        int p = precedence(e);
        // Left-associative: the left operand may share our level, the right must bind tighter.
        print_wrapped(e.lhs(), precedence(e.lhs()) < p, out);
        out += e.kind == ExprKind::Add ? " + " : e.kind == ExprKind::Sub ? " - " : " * ";
        print_wrapped(e.rhs(), precedence(e.rhs()) <= p, out);
        return;
    }
    }
}

} // namespace

std::string to_source(const Expr& expr)
{
    std::string out;
    print(expr, out);
    return out;
}

std::string to_source(const Program& program)
{
    const std::string& t = program.independent;
    std::ostringstream os;
    for (const auto& s : program.states)
        os << "fn " << s.name << "(" << t << ");\n";
    os << "\n";
    for (const auto& s : program.states)
        os << "let diff[" << s.name << ", " << t << "] = " << to_source(s.derivative) << ";\n";
    os << "\n";
    for (const auto& s : program.states) {
        os << "let " << s.name << "(" << t << ": 0) = ";
        if (std::signbit(s.initial_value))
            os << "-" << format_fixed(-s.initial_value);
        else
            os << format_fixed(s.initial_value);
        os << ";\n";
    }
    if (!program.plots.empty())
        os << "\n";
    for (const auto& p : program.plots) {
        std::vector<std::string> states{p.x, p.y};
        states.insert(states.end(), p.extra.begin(), p.extra.end());
        os << "plot(";
        for (std::size_t a = 0; a < states.size(); ++a) {
            std::string label = a < p.axis_labels.size() ? p.axis_labels[a] : "a" + std::to_string(a);
            os << (a ? ", " : "") << label << ": " << states[a] << "(" << t << ")";
        }
        os << ");\n";
    }
    if (!program.outputs.empty())
        os << "\n";
    for (const auto& o : program.outputs)
        os << "out " << o << "(" << t << ");\n";
    return os.str();
}

} // namespace analogc::dsl
