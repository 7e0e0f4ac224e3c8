#include "analogc/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <tuple>
#include <set>
#include <sstream>

#include "analogc/format.hpp"

namespace analogc::circuit {

using dsl::Expr;
using dsl::ExprKind;

Monomial::Monomial(std::vector<std::string> f) : factors(std::move(f))
{
    std::sort(factors.begin(), factors.end());
}

std::string to_string(const Monomial& m)
{
    if (m.factors.empty())
        return "1";
    std::string out;
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
        if (i)
            out += '*';
        out += m.factors[i];
    }
    return out;
}

int PolySystem::index_of(const std::string& state) const
{
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == state)
            return static_cast<int>(i);
    return -1;
}

namespace {

using Poly = std::map<Monomial, double>;

void drop_zeros(Poly& p)
{
    std::erase_if(p, [](const auto& kv) { return kv.second == 0.0; });
}

Poly product(const Poly& a, const Poly& b)
{
    Poly out;
    for (const auto& [ma, wa] : a) {
        for (const auto& [mb, wb] : b) {
            std::vector<std::string> f = ma.factors;
            f.insert(f.end(), mb.factors.begin(), mb.factors.end());
            out[Monomial(std::move(f))] += wa * wb;
        }
    }
    drop_zeros(out);
    return out;
}

Poly expand_poly(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Const: {
        Poly p;
        if (e.value != 0.0)
            p[Monomial{}] = e.value;
        return p;
    }
    case ExprKind::Var:
        return Poly{{Monomial({e.name}), 1.0}};
    case ExprKind::Neg: {
        Poly p = expand_poly(e.args[0]);
        for (auto& kv : p)
            kv.second = -kv.second;
        return p;
    }
    case ExprKind::Add:
    case ExprKind::Sub: {
        Poly p = expand_poly(e.lhs());
        Poly q = expand_poly(e.rhs());
        double sign = e.kind == ExprKind::Add ? 1.0 : -1.0;
        for (const auto& [m, w] : q) {
            auto it = p.find(m);
            if (it == p.end())
                p.emplace(m, sign * w);
            else
                it->second += sign * w;
        }
        drop_zeros(p);
        return p;
    }
    case ExprKind::Mul:
        return product(expand_poly(e.lhs()), expand_poly(e.rhs()));
    }
    return {};
}

} // namespace

std::vector<Term> expand(const Expr& expr)
{
    std::vector<Term> terms;
    for (auto& [m, w] : expand_poly(expr))
        terms.push_back({w, m});
    return terms;
}

PolySystem normalize(const dsl::Program& program)
{
    PolySystem sys;
    for (const auto& s : program.states) {
        sys.states.push_back(s.name);
        sys.rhs.push_back(expand(s.derivative));
        sys.initial.push_back(s.initial_value);
    }
    return sys;
}

dsl::Program to_program(const PolySystem& system)
{
    dsl::Program prog;
    for (std::size_t i = 0; i < system.states.size(); ++i) {
        std::optional<Expr> sum;
        for (const auto& term : system.rhs[i]) {
            Expr e = Expr::constant(std::abs(term.weight));
            for (const auto& f : term.monomial.factors)
                e = Expr::mul(std::move(e), Expr::var(f));
            bool negative = term.weight < 0;
            if (!sum)
                sum = negative ? Expr::neg(std::move(e)) : std::move(e);
            else
                sum = negative ? Expr::sub(std::move(*sum), std::move(e))
                               : Expr::add(std::move(*sum), std::move(e));
        }
        prog.states.push_back({system.states[i], sum ? *sum : Expr::constant(0.0), system.initial[i]});
    }
    return prog;
}

const char* to_string(NodeKind kind)
{
    switch (kind) {
    case NodeKind::Integrator:
        return "integrator";
    case NodeKind::Multiplier:
        return "multiplier";
    case NodeKind::ConstOne:
        return "const";
    }
    return "?";
}

const char* to_string(Port port)
{
    switch (port) {
    case Port::IntegratorIn:
        return "in";
    case Port::MulA:
        return "a";
    case Port::MulB:
        return "b";
    }
    return "?";
}

int CircuitGraph::count(NodeKind kind) const
{
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                          [kind](const Node& n) { return n.kind == kind; }));
}

DegreeError::DegreeError(std::string state, Monomial monomial, int max_degree)
    : Error("term " + to_string(monomial) + " in derivative of " + state + " has degree " +
            std::to_string(monomial.degree()) + " (maximum " + std::to_string(max_degree) + ")"),
      monomial_(std::move(monomial))
{
}

static std::string cycle_text(const std::vector<int>& cycle)
{
    std::string s = "algebraic loop through nodes";
    for (int id : cycle)
        s += " " + std::to_string(id);
    return s;
}

LoopError::LoopError(std::vector<int> cycle) : Error(cycle_text(cycle)), cycle_(std::move(cycle)) {}

CircuitGraph build_circuit(const PolySystem& system, int max_degree)
{
    CircuitGraph g;
    const int n = static_cast<int>(system.states.size());

    std::map<std::string, int> integrator_of;
    for (int i = 0; i < n; ++i) {
        g.nodes.push_back({i, NodeKind::Integrator, system.initial[i], system.states[i]});
        integrator_of[system.states[i]] = i;
    }

    std::set<Monomial> products;
    bool needs_const = false;
    for (int i = 0; i < n; ++i) {
        for (const auto& term : system.rhs[i]) {
            const auto& f = term.monomial.factors;
            if (static_cast<int>(f.size()) > max_degree)
                throw DegreeError(system.states[i], term.monomial, max_degree);
            for (const auto& name : f)
                if (!integrator_of.count(name))
                    throw Error("term refers to unknown state '" + name + "'");
            if (f.empty())
                needs_const = true;
            for (std::size_t len = 2; len <= f.size(); ++len)
                products.insert(Monomial(std::vector<std::string>(f.begin(), f.begin() + len)));
        }
    }

    std::map<Monomial, int> multiplier_of;
    for (const auto& m : products) {
        int id = static_cast<int>(g.nodes.size());
        g.nodes.push_back({id, NodeKind::Multiplier, 0.0, to_string(m)});
        multiplier_of[m] = id;
    }
    int const_id = -1;
    if (needs_const) {
        const_id = static_cast<int>(g.nodes.size());
        g.nodes.push_back({const_id, NodeKind::ConstOne, 0.0, "1"});
    }

    auto source_of = [&](const Monomial& m) {
        if (m.factors.empty())
            return const_id;
        if (m.factors.size() == 1)
            return integrator_of.at(m.factors[0]);
        return multiplier_of.at(m);
    };

    for (const auto& [m, id] : multiplier_of) {
        Monomial head(std::vector<std::string>(m.factors.begin(), m.factors.end() - 1));
        g.edges.push_back({source_of(head), id, Port::MulA, 1.0});
        g.edges.push_back({integrator_of.at(m.factors.back()), id, Port::MulB, 1.0});
    }
    for (int i = 0; i < n; ++i)
        for (const auto& term : system.rhs[i])
            g.edges.push_back({source_of(term.monomial), i, Port::IntegratorIn, term.weight});

    std::stable_sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.dst, a.port, a.src) < std::tie(b.dst, b.port, b.src);
    });

    for (int i = 0; i < n; ++i)
        g.taps.push_back({system.states[i], i});
    return g;
}

void detect_algebraic_loops(const CircuitGraph& graph)
{
    const std::size_t n = graph.nodes.size();
    std::vector<std::vector<int>> succ(n);
    for (const auto& e : graph.edges) {
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n ||
            static_cast<std::size_t>(e.dst) >= n)
            throw Error("edge refers to missing node");
        // Integrators break every loop they sit on, so they are left out of the search.
        if (graph.nodes[e.src].kind == NodeKind::Integrator || graph.nodes[e.dst].kind == NodeKind::Integrator)
            continue;
        succ[e.src].push_back(e.dst);
    }

    enum class Mark { White, Grey, Black };
    std::vector<Mark> mark(n, Mark::White);
    std::vector<int> stack;

    // Iterative DFS keeping the grey path in `stack`.
    for (std::size_t root = 0; root < n; ++root) {
        if (mark[root] != Mark::White)
            continue;
        std::vector<std::pair<int, std::size_t>> frames{{static_cast<int>(root), 0}};
        mark[root] = Mark::Grey;
        stack.push_back(static_cast<int>(root));
        while (!frames.empty()) {
            auto& [node, next] = frames.back();
            if (next < succ[node].size()) {
                int to = succ[node][next++];
                if (mark[to] == Mark::Grey) {
                    auto it = std::find(stack.begin(), stack.end(), to);
                    throw LoopError(std::vector<int>(it, stack.end()));
                }
                if (mark[to] == Mark::White) {
                    mark[to] = Mark::Grey;
                    stack.push_back(to);
                    frames.push_back({to, 0});
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop_back();
                frames.pop_back();
            }
        }
    }
}

std::string dump(const CircuitGraph& graph)
{
    std::ostringstream os;
    for (const auto& node : graph.nodes) {
        os << "NODE " << node.id << ' ' << to_string(node.kind);
        if (node.kind == NodeKind::Integrator)
            os << " ic=" << format_real(node.initial);
        os << '\n';
    }
    std::vector<Edge> edges = graph.edges;
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.src, a.dst, a.port) < std::tie(b.src, b.dst, b.port);
    });
    for (const auto& e : edges)
        os << "EDGE " << e.src << " -> " << e.dst << '.' << to_string(e.port)
           << " w=" << format_real(e.weight) << '\n';
    return os.str();
}

} // namespace analogc::circuit
