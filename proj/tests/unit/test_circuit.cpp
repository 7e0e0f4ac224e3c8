#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "analogc/circuit.hpp"
#include "analogc/dsl.hpp"
#include "corpus.hpp"

using namespace analogc;
using namespace analogc::circuit;
using dsl::Expr;

namespace {

using Env = std::map<std::string, double>;

double eval(const Expr& e, const Env& env)
{
    switch (e.kind) {
    case dsl::ExprKind::Const:
        return e.value;
    case dsl::ExprKind::Var:
        return env.at(e.name);
    case dsl::ExprKind::Add:
        return eval(e.lhs(), env) + eval(e.rhs(), env);
    case dsl::ExprKind::Sub:
        return eval(e.lhs(), env) - eval(e.rhs(), env);
    case dsl::ExprKind::Mul:
        return eval(e.lhs(), env) * eval(e.rhs(), env);
    case dsl::ExprKind::Neg:
        return -eval(e.args[0], env);
    }
    return 0.0;
}

double monomial_value(const Monomial& m, const Env& env)
{
    double v = 1.0;
    for (const auto& f : m.factors)
        v *= env.at(f);
    return v;
}

dsl::Program lorenz() { return dsl::compile_source(test::read_corpus("lorenz.odedsl")); }

PolySystem system_of(const std::string& src) { return normalize(dsl::compile_source(src)); }

bool has_term(const std::vector<Term>& terms, double w, std::vector<std::string> factors, double tol = 0.0)
{
    Monomial m(std::move(factors));
    for (const auto& t : terms)
        if (t.monomial == m && std::abs(t.weight - w) <= tol)
            return true;
    return false;
}

// Linear atom: constant, variable, or a small sum of them.
Expr random_atom(std::mt19937_64& rng, const std::vector<std::string>& vars)
{
    auto leaf = [&]() {
        if (rng() % 3 == 0)
            return Expr::constant(static_cast<double>(rng() % 1000) / 100.0);
        return Expr::var(vars[rng() % vars.size()]);
    };
    switch (rng() % 4) {
    case 0:
        return Expr::add(leaf(), leaf());
    case 1:
        return Expr::sub(leaf(), Expr::neg(leaf()));
    default:
        return leaf();
    }
}

// Sum of products of at most three linear atoms, so the degree stays <= 3.
Expr random_poly_expr(std::mt19937_64& rng, const std::vector<std::string>& vars)
{
    int terms = 1 + static_cast<int>(rng() % 4);
    Expr sum;
    for (int t = 0; t < terms; ++t) {
        int factors = 1 + static_cast<int>(rng() % 3);
        Expr prod = random_atom(rng, vars);
        for (int f = 1; f < factors; ++f)
            prod = Expr::mul(prod, random_atom(rng, vars));
        if (rng() % 4 == 0)
            prod = Expr::neg(prod);
        if (t == 0)
            sum = prod;
        else
            sum = rng() % 2 ? Expr::add(sum, prod) : Expr::sub(sum, prod);
    }
    return sum;
}

// Monomial each multiplier computes, recovered by walking its A and B inputs.
std::map<int, Monomial> multiplier_products(const CircuitGraph& g)
{
    std::map<int, Monomial> memo;
    std::function<std::vector<std::string>(int)> product_of = [&](int id) -> std::vector<std::string> {
        const Node& n = g.nodes.at(static_cast<std::size_t>(id));
        if (n.kind == NodeKind::Integrator)
            return {n.label};
        if (n.kind == NodeKind::ConstOne)
            return {};
        std::vector<std::string> f;
        for (const auto& e : g.edges) {
            if (e.dst != id)
                continue;
            auto sub = product_of(e.src);
            f.insert(f.end(), sub.begin(), sub.end());
        }
        return f;
    };
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::Multiplier)
            memo[n.id] = Monomial(product_of(n.id));
    return memo;
}

} // namespace

TEST_SUITE("normalize")
{
    TEST_CASE("Lorenz Y derivative expands with the folded product")
    {
        PolySystem sys = normalize(lorenz());
        REQUIRE(sys.rhs[1].size() == 3);
        CHECK(has_term(sys.rhs[1], 1.56, {"X"}));
        CHECK(has_term(sys.rhs[1], -0.1, {"Y"}));
        CHECK(has_term(sys.rhs[1], -4.17768, {"X", "Z"}, 1e-12));
    }

    TEST_CASE("Lorenz X derivative")
    {
        PolySystem sys = normalize(lorenz());
        REQUIRE(sys.rhs[0].size() == 2);
        CHECK(has_term(sys.rhs[0], 1.8, {"Y"}));
        CHECK(has_term(sys.rhs[0], -1.0, {"X"}));
        CHECK(sys.initial == std::vector<double>{0.1, 0.0, 0.0});
    }

    TEST_CASE("cancellation leaves an empty derivative")
    {
        PolySystem sys = system_of("fn Z(t); let diff[Z, t] = Z - Z; let Z(t: 0) = 1;");
        CHECK(sys.rhs[0].empty());
        CHECK(system_of("fn Z(t); let diff[Z, t] = 0 * Z + 0; let Z(t: 0) = 1;").rhs[0].empty());
    }

    TEST_CASE("duplicate monomials merge regardless of factor order")
    {
        PolySystem sys = system_of("fn A(t); fn B(t); let diff[A,t] = A*B + 2*B*A; let diff[B,t] = B;"
                                   "let A(t:0)=0; let B(t:0)=0;");
        REQUIRE(sys.rhs[0].size() == 1);
        CHECK(sys.rhs[0][0].weight == 3.0);
        CHECK(sys.rhs[0][0].monomial.factors == std::vector<std::string>{"A", "B"});
    }

    TEST_CASE("terms are sorted and unique, weights finite and nonzero")
    {
        std::mt19937_64 rng(99);
        const std::vector<std::string> vars{"A", "B", "C"};
        for (int n = 0; n < 300; ++n) {
            auto terms = expand(random_poly_expr(rng, vars));
            for (std::size_t i = 0; i < terms.size(); ++i) {
                CHECK(std::isfinite(terms[i].weight));
                CHECK(terms[i].weight != 0.0);
                CHECK(std::is_sorted(terms[i].monomial.factors.begin(), terms[i].monomial.factors.end()));
                if (i)
                    CHECK(terms[i - 1].monomial < terms[i].monomial);
            }
        }
    }

    TEST_CASE("idempotent on already expanded systems")
    {
        std::mt19937_64 rng(5);
        for (int n = 0; n < 200; ++n) {
            dsl::Program p;
            std::vector<std::string> vars{"P", "Q", "R"};
            for (const auto& v : vars)
                p.states.push_back({v, random_poly_expr(rng, vars), 0.5});
            PolySystem once = normalize(p);
            PolySystem twice = normalize(to_program(once));
            CHECK(twice == once);
            // And through the textual form as well.
            CHECK(normalize(dsl::compile_source(dsl::to_source(to_program(once)))) == once);
        }
    }

    TEST_CASE("expanded polynomial evaluates like the expression tree")
    {
        std::mt19937_64 rng(2024);
        int compared = 0;
        for (int prog = 0; prog < 1000; ++prog) {
            int n_states = 1 + static_cast<int>(rng() % 5);
            std::vector<std::string> vars;
            for (int i = 0; i < n_states; ++i)
                vars.push_back("V" + std::to_string(i));
            dsl::Program p;
            for (const auto& v : vars)
                p.states.push_back({v, random_poly_expr(rng, vars), 0.0});
            PolySystem sys = normalize(p);
            for (const auto& rhs : sys.rhs)
                for (const auto& t : rhs)
                    CHECK(t.monomial.degree() <= 3);
            for (int point = 0; point < 100; ++point) {
                Env env;
                for (const auto& v : vars)
                    env[v] = static_cast<double>(static_cast<std::int64_t>(rng() % 2000001) - 1000000) / 250000.0;
                for (std::size_t i = 0; i < vars.size(); ++i) {
                    double tree = eval(p.states[i].derivative, env);
                    double poly = 0.0;
                    double magnitude = 0.0;
                    for (const auto& t : sys.rhs[i]) {
                        double term = t.weight * monomial_value(t.monomial, env);
                        poly += term;
                        magnitude += std::abs(term);
                    }
                    double scale = std::max({std::abs(tree), magnitude, 1e-300});
                    if (std::abs(tree - poly) > 1e-12 * scale) {
                        INFO(dsl::to_source(p.states[i].derivative));
                        CHECK(tree == doctest::Approx(poly));
                    }
                    ++compared;
                }
            }
        }
        CHECK(compared > 100000);
    }
}

TEST_SUITE("build_circuit")
{
    TEST_CASE("Lorenz graph counts match a graph walk")
    {
        CircuitGraph g = build_circuit(normalize(lorenz()));
        CHECK(g.count(NodeKind::Integrator) == 3);
        CHECK(g.count(NodeKind::Multiplier) == 2);
        CHECK(g.count(NodeKind::ConstOne) == 0);
        CHECK(g.edges.size() == 11);

        std::map<int, int> inbound;
        std::map<std::pair<int, Port>, int> per_port;
        for (const auto& e : g.edges) {
            ++inbound[e.dst];
            ++per_port[{e.dst, e.port}];
        }
        CHECK(inbound[0] == 2);
        CHECK(inbound[1] == 3);
        CHECK(inbound[2] == 2);
        auto products = multiplier_products(g);
        std::set<Monomial> distinct;
        for (const auto& [id, m] : products) {
            CHECK(inbound[id] == 2);
            CHECK(per_port[{id, Port::MulA}] == 1);
            CHECK(per_port[{id, Port::MulB}] == 1);
            distinct.insert(m);
        }
        CHECK(distinct == std::set<Monomial>{Monomial({"X", "Y"}), Monomial({"X", "Z"})});
        for (const auto& n : g.nodes)
            CHECK(n.label != "summer");
        CHECK(g.nodes[0].initial == 0.1);
        CHECK(g.taps.size() == 3);
        CHECK_NOTHROW(detect_algebraic_loops(g));
    }

    TEST_CASE("exponential decay")
    {
        CircuitGraph g = build_circuit(system_of("fn X(t); let diff[X, t] = -X; let X(t: 0) = 1;"));
        REQUIRE(g.nodes.size() == 1);
        REQUIRE(g.edges.size() == 1);
        CHECK(g.edges[0] == Edge{0, 0, Port::IntegratorIn, -1.0});
        CHECK_NOTHROW(detect_algebraic_loops(g));
    }

    TEST_CASE("a(b+c) by expansion uses two shared-free products")
    {
        // Expansion turns a*(b+c) into a*b + a*c: two multipliers.
        PolySystem sys = system_of("fn X(t); fn A(t); fn B(t); fn C(t);"
                                   "let diff[X,t] = A*(B+C); let diff[A,t]=0; let diff[B,t]=0; let diff[C,t]=0;"
                                   "let X(t:0)=0; let A(t:0)=1; let B(t:0)=1; let C(t:0)=1;");
        CircuitGraph g = build_circuit(sys);
        CHECK(g.count(NodeKind::Multiplier) == 2);
    }

    TEST_CASE("a(b+c) as one multiplier with a summed port")
    {
        // The two-element structure: b and c sum as currents onto one multiplier port.
        CircuitGraph g;
        g.nodes = {{0, NodeKind::Integrator, 0.0, "X"},
                   {1, NodeKind::Integrator, 1.0, "A"},
                   {2, NodeKind::Integrator, 1.0, "B"},
                   {3, NodeKind::Integrator, 1.0, "C"},
                   {4, NodeKind::Multiplier, 0.0, "A*(B+C)"}};
        g.edges = {{1, 4, Port::MulA, 1.0}, {2, 4, Port::MulB, 1.0}, {3, 4, Port::MulB, 1.0},
                   {4, 0, Port::IntegratorIn, 1.0}};
        CHECK(g.count(NodeKind::Multiplier) == 1);
        int into_b = 0;
        for (const auto& e : g.edges)
            into_b += e.dst == 4 && e.port == Port::MulB;
        CHECK(into_b == 2);
        CHECK_NOTHROW(detect_algebraic_loops(g));
    }

    TEST_CASE("constant terms instantiate one ConstOne node last")
    {
        CircuitGraph g = build_circuit(system_of("fn X(t); fn Y(t); let diff[X,t] = 2 - X*Y; let diff[Y,t] = 0.5;"
                                                 "let X(t:0)=0; let Y(t:0)=0;"));
        CHECK(g.count(NodeKind::ConstOne) == 1);
        CHECK(g.nodes.back().kind == NodeKind::ConstOne);
        int from_const = 0;
        for (const auto& e : g.edges)
            from_const += e.src == g.nodes.back().id;
        CHECK(from_const == 2);
    }

    TEST_CASE("degree limit and chains")
    {
        const std::string head = "fn A(t); fn B(t); fn C(t); fn D(t); fn E(t);"
                                 "let diff[B,t]=0; let diff[C,t]=0; let diff[D,t]=0; let diff[E,t]=0;"
                                 "let A(t:0)=0; let B(t:0)=0; let C(t:0)=0; let D(t:0)=0; let E(t:0)=0;";
        CHECK_THROWS_AS(build_circuit(system_of(head + "let diff[A,t] = A*B*C*D*E;")), DegreeError);
        CHECK_NOTHROW(build_circuit(system_of(head + "let diff[A,t] = A*B*C*D*E;"), 5));

        // A*B*C and A*B*D share the A*B prefix; A*B itself is reused too.
        CircuitGraph g = build_circuit(system_of(head + "let diff[A,t] = A*B*C + A*B*D + A*B;"));
        CHECK(g.count(NodeKind::Multiplier) == 3);
        auto products = multiplier_products(g);
        std::set<Monomial> distinct;
        for (const auto& [id, m] : products)
            distinct.insert(m);
        CHECK(distinct == std::set<Monomial>{Monomial({"A", "B"}), Monomial({"A", "B", "C"}),
                                             Monomial({"A", "B", "D"})});
        for (const auto& e : g.edges)
            if (e.port != Port::IntegratorIn)
                CHECK(e.weight == 1.0);

        CircuitGraph sq = build_circuit(system_of(head + "let diff[A,t] = A*A*A*A;"));
        CHECK(sq.count(NodeKind::Multiplier) == 3);
    }

    TEST_CASE("multiplier count equals distinct subproducts")
    {
        std::mt19937_64 rng(31);
        for (int n = 0; n < 300; ++n) {
            std::vector<std::string> vars{"A", "B", "C", "D"};
            dsl::Program p;
            for (const auto& v : vars)
                p.states.push_back({v, random_poly_expr(rng, vars), 0.0});
            PolySystem sys = normalize(p);
            CircuitGraph g = build_circuit(sys);
            // Oracle: string keys for every left prefix of each sorted factor list.
            std::set<std::string> prefixes;
            bool constant = false;
            for (const auto& rhs : sys.rhs) {
                for (const auto& t : rhs) {
                    constant = constant || t.monomial.factors.empty();
                    std::string key;
                    for (std::size_t i = 0; i < t.monomial.factors.size(); ++i) {
                        key += t.monomial.factors[i] + ".";
                        if (i >= 1)
                            prefixes.insert(key);
                    }
                }
            }
            CHECK(g.count(NodeKind::Multiplier) == static_cast<int>(prefixes.size()));
            CHECK(g.count(NodeKind::ConstOne) == (constant ? 1 : 0));
            std::set<Monomial> computed;
            for (const auto& [id, m] : multiplier_products(g))
                computed.insert(m);
            CHECK(computed.size() == prefixes.size());
            CHECK_NOTHROW(detect_algebraic_loops(g));
        }
    }

    TEST_CASE("unknown factor is rejected")
    {
        PolySystem sys;
        sys.states = {"X"};
        sys.initial = {0.0};
        sys.rhs = {{Term{1.0, Monomial({"Q"})}}};
        CHECK_THROWS_AS(build_circuit(sys), Error);
    }
}

TEST_SUITE("algebraic loops")
{
    TEST_CASE("two multipliers feeding each other")
    {
        CircuitGraph g;
        g.nodes = {{0, NodeKind::Integrator, 0.0, "X"},
                   {1, NodeKind::Multiplier, 0.0, "m1"},
                   {2, NodeKind::Multiplier, 0.0, "m2"}};
        g.edges = {{0, 1, Port::MulA, 1.0}, {2, 1, Port::MulB, 1.0}, {0, 2, Port::MulA, 1.0},
                   {1, 2, Port::MulB, 1.0}, {2, 0, Port::IntegratorIn, 1.0}};
        try {
            detect_algebraic_loops(g);
            FAIL("expected LoopError");
        } catch (const LoopError& e) {
            CHECK(std::set<int>(e.cycle().begin(), e.cycle().end()) == std::set<int>{1, 2});
        }
    }

    TEST_CASE("multiplier self-loop")
    {
        CircuitGraph g;
        g.nodes = {{0, NodeKind::Multiplier, 0.0, "m"}};
        g.edges = {{0, 0, Port::MulA, 1.0}};
        CHECK_THROWS_AS(detect_algebraic_loops(g), LoopError);
    }

    TEST_CASE("integrator self-loop is fine")
    {
        CircuitGraph g;
        g.nodes = {{0, NodeKind::Integrator, 1.0, "X"}};
        g.edges = {{0, 0, Port::IntegratorIn, -1.0}};
        CHECK_NOTHROW(detect_algebraic_loops(g));
    }
}

TEST_CASE("IR dump")
{
    CircuitGraph g = build_circuit(system_of("fn X(t); let diff[X, t] = -X; let X(t: 0) = 1;"));
    CHECK(dump(g) == "NODE 0 integrator ic=1\nEDGE 0 -> 0.in w=-1\n");
    std::string lorenz_dump = dump(build_circuit(normalize(lorenz())));
    CHECK(lorenz_dump.find("NODE 3 multiplier\n") != std::string::npos);
    CHECK(lorenz_dump.find("EDGE 1 -> 0.in w=1.8\n") != std::string::npos);
    CHECK(lorenz_dump.find("summer") == std::string::npos);
}
