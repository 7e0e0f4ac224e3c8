#pragma once

#include <string>
#include <vector>

#include "analogc/dsl.hpp"
#include "analogc/error.hpp"

namespace analogc::circuit {

/// Product of state variables, factors kept in lexicographic order.
/// An empty monomial is the constant one.
struct Monomial {
    std::vector<std::string> factors;

    Monomial() = default;
    explicit Monomial(std::vector<std::string> f);

    std::size_t degree() const { return factors.size(); }

    friend auto operator<=>(const Monomial&, const Monomial&) = default;
    friend bool operator==(const Monomial&, const Monomial&) = default;
};

std::string to_string(const Monomial& m);

struct Term {
    double weight = 0.0;
    Monomial monomial;

    friend bool operator==(const Term&, const Term&) = default;
};

/// Expanded ODE system: each derivative is a sum of weighted monomials.
/// Terms per state are sorted by monomial and no monomial repeats.
struct PolySystem {
    std::vector<std::string> states;
    std::vector<std::vector<Term>> rhs;
    std::vector<double> initial;

    int index_of(const std::string& state) const;

    friend bool operator==(const PolySystem&, const PolySystem&) = default;
};

/// Expand an expression into merged weighted monomials (zero weights dropped).
std::vector<Term> expand(const dsl::Expr& expr);

PolySystem normalize(const dsl::Program& program);

/// Rebuild a program whose derivatives are the sums of the system's terms.
dsl::Program to_program(const PolySystem& system);

enum class NodeKind { Integrator, Multiplier, ConstOne };
enum class Port { IntegratorIn, MulA, MulB };

const char* to_string(NodeKind kind);
const char* to_string(Port port);

struct Node {
    int id = 0;
    NodeKind kind = NodeKind::Integrator;
    double initial = 0.0;  // Integrator only
    std::string label;

    friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
    int src = 0;
    int dst = 0;
    Port port = Port::IntegratorIn;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Tap {
    std::string name;
    int node = 0;

    friend bool operator==(const Tap&, const Tap&) = default;
};

/// Summer-free circuit: integrators, multipliers and at most one constant source,
/// connected by weighted edges. Node ids equal their index in `nodes`.
struct CircuitGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<Tap> taps;

    int count(NodeKind kind) const;

    friend bool operator==(const CircuitGraph&, const CircuitGraph&) = default;
};

class DegreeError : public Error {
public:
    DegreeError(std::string state, Monomial monomial, int max_degree);

    const Monomial& monomial() const { return monomial_; }

private:
    Monomial monomial_;
};

class LoopError : public Error {
public:
    explicit LoopError(std::vector<int> cycle);

    const std::vector<int>& cycle() const { return cycle_; }

private:
    std::vector<int> cycle_;
};

inline constexpr int kDefaultMaxDegree = 4;

/// One integrator per state (ids 0..n-1 in state order), then one multiplier per
/// distinct product prefix of length >= 2 in canonical order, then ConstOne if
/// any term is constant. Higher-degree monomials become left-deep multiplier chains.
CircuitGraph build_circuit(const PolySystem& system, int max_degree = kDefaultMaxDegree);

/// Throws LoopError when some cycle avoids every integrator.
void detect_algebraic_loops(const CircuitGraph& graph);

/// NODE/EDGE text dump, deterministic order.
std::string dump(const CircuitGraph& graph);

} // namespace analogc::circuit
