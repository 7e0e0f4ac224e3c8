#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "analogc/circuit.hpp"
#include "analogc/dsl.hpp"
#include "analogc/place_route.hpp"
#include "corpus.hpp"

using namespace analogc;
using namespace analogc::circuit;
using namespace analogc::machine;
using namespace analogc::place_route;

namespace {

CircuitGraph lorenz_graph()
{
    return build_circuit(normalize(dsl::compile_source(test::read_corpus("lorenz.odedsl"))));
}

CircuitGraph integrators_only(int n)
{
    CircuitGraph g;
    for (int i = 0; i < n; ++i)
        g.nodes.push_back({i, NodeKind::Integrator, 0.0, "I" + std::to_string(i)});
    return g;
}

// Element slot for a node, following the placement convention: integrators
// and multipliers in id order within their kind.
struct SlotMap {
    std::map<int, int> slot;
    explicit SlotMap(const CircuitGraph& g)
    {
        int ni = 0;
        int nm = 0;
        for (const auto& n : g.nodes) {
            if (n.kind == NodeKind::Integrator)
                slot[n.id] = ni++;
            else if (n.kind == NodeKind::Multiplier)
                slot[n.id] = nm++;
        }
    }
};

using EdgeKey = std::tuple<int, int, int>;  // src, dst, port

// Undo the row convention to recover (src node, dst node, port) from lane rows.
std::multimap<EdgeKey, double> reconstruct(const CircuitGraph& g, const MachineConfig& c)
{
    SlotMap slots(g);
    std::map<std::pair<NodeKind, int>, int> node_of;
    for (const auto& n : g.nodes)
        node_of[{n.kind, n.kind == NodeKind::ConstOne ? 0 : slots.slot.at(n.id)}] = n.id;
    std::multimap<EdgeKey, double> out;
    for (const auto& e : active_edges(c)) {
        RowBinding src = out_row_binding(c.spec, e.out_row);
        RowBinding dst = in_row_binding(c.spec, e.in_row);
        int src_node = -1;
        if (src.role == RowRole::IntegratorOut)
            src_node = node_of.at({NodeKind::Integrator, src.element});
        else if (src.role == RowRole::MultiplierOut)
            src_node = node_of.at({NodeKind::Multiplier, src.element});
        else if (src.role == RowRole::ConstOne)
            src_node = node_of.at({NodeKind::ConstOne, 0});
        int dst_node = -1;
        Port port = Port::IntegratorIn;
        if (dst.role == RowRole::IntegratorIn) {
            dst_node = node_of.at({NodeKind::Integrator, dst.element});
        } else {
            dst_node = node_of.at({NodeKind::Multiplier, dst.element});
            port = dst.role == RowRole::MulA ? Port::MulA : Port::MulB;
        }
        out.emplace(EdgeKey{src_node, dst_node, static_cast<int>(port)}, e.weight);
    }
    return out;
}

void check_reconstruction(const CircuitGraph& g, const Placement& p)
{
    auto recovered = reconstruct(g, p.config);
    REQUIRE(recovered.size() == g.edges.size());
    for (const auto& e : g.edges) {
        auto it = recovered.find({e.src, e.dst, static_cast<int>(e.port)});
        REQUIRE(it != recovered.end());
        double realized = it->second;
        if (lowres_code_for(e.weight))
            CHECK((realized == e.weight || std::abs(realized - e.weight) <= kHighResLsb / 2));
        else if (std::abs(e.weight) < 10.0)
            CHECK(std::abs(realized - e.weight) <= kHighResLsb / 2);
        recovered.erase(it);
    }
}

CircuitGraph random_graph(std::mt19937_64& rng, int states)
{
    dsl::Program p;
    std::vector<std::string> vars;
    for (int i = 0; i < states; ++i)
        vars.push_back("S" + std::to_string(i));
    const double table[] = {1.0, -1.0, 0.5, 0.1, -10.0, 0.37, -2.25, 1.8};
    for (int i = 0; i < states; ++i) {
        dsl::Expr e = dsl::Expr::mul(dsl::Expr::constant(std::abs(table[rng() % 8])), dsl::Expr::var(vars[rng() % states]));
        if (rng() % 2)
            e = dsl::Expr::sub(e, dsl::Expr::mul(dsl::Expr::var(vars[rng() % states]), dsl::Expr::var(vars[rng() % states])));
        if (rng() % 3 == 0)
            e = dsl::Expr::add(e, dsl::Expr::constant(0.5));
        p.states.push_back({vars[i], e, 0.1});
    }
    return build_circuit(normalize(p));
}

} // namespace

TEST_SUITE("place_and_route")
{
    TEST_CASE("Lorenz on LUCIDAC")
    {
        CircuitGraph g = lorenz_graph();
        Placement p = place_and_route(g, lucidac_spec());
        CHECK(p.report.integrators_used == 3);
        CHECK(p.report.multipliers_used == 2);
        CHECK(p.report.const_used == 0);
        CHECK(p.report.lanes_used == 11);
        CHECK(p.report.lowres_lanes_used == 6);
        CHECK(p.report.clamp_warnings.empty());
        CHECK(p.report.max_quantization_error() <= kHighResLsb / 2);
        CHECK(validate_config(p.config).empty());
        CHECK(p.config.initial_states[0] == 0.1);
        REQUIRE(p.config.taps.size() == 3);
        CHECK(p.config.taps[0].name == "X");
        CHECK(p.config.taps[0].out_row == 0);
        CHECK(p.config.taps[2].out_row == 2);
        check_reconstruction(g, p);
        std::string text = to_text(p.report);
        CHECK(text.find("lanes_used: 11\n") != std::string::npos);
        CHECK(text.find("integrators_used: 3\n") != std::string::npos);
    }

    TEST_CASE("empty graph")
    {
        Placement p = place_and_route(CircuitGraph{}, lucidac_spec());
        CHECK(p.report.integrators_used == 0);
        CHECK(p.report.lanes_used == 0);
        CHECK(p.config.same_interconnect(MachineConfig::empty(lucidac_spec())));
    }

    TEST_CASE("integrator capacity")
    {
        try {
            place_and_route(integrators_only(9), lucidac_spec());
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            CHECK(e.kind() == "integrators");
            CHECK(e.needed() == 9);
            CHECK(e.available() == 8);
        }
        CHECK_NOTHROW(place_and_route(integrators_only(8), lucidac_spec()));
    }

    TEST_CASE("multiplier and lane capacity")
    {
        CircuitGraph g = integrators_only(1);
        for (int j = 0; j < 5; ++j) {
            g.nodes.push_back({1 + j, NodeKind::Multiplier, 0.0, "m"});
            g.edges.push_back({0, 1 + j, Port::MulA, 1.0});
            g.edges.push_back({0, 1 + j, Port::MulB, 1.0});
        }
        try {
            place_and_route(g, lucidac_spec());
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            CHECK(e.kind() == "multipliers");
            CHECK(e.needed() == 5);
            CHECK(e.available() == 4);
        }

        // 8 integrators fully cross-connected: 64 edges for 32 lanes.
        CircuitGraph dense = integrators_only(8);
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                dense.edges.push_back({a, b, Port::IntegratorIn, 0.3});
        try {
            place_and_route(dense, lucidac_spec());
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            CHECK(e.kind() == "lanes");
            CHECK(e.needed() == 64);
            CHECK(e.available() == 32);
        }

        // 25 non-table weights exceed the 24 high-res lanes even though lanes remain.
        CircuitGraph wide = integrators_only(5);
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
                wide.edges.push_back({a, b, Port::IntegratorIn, 0.3});
        try {
            place_and_route(wide, lucidac_spec());
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            CHECK(e.kind() == "highres lanes");
            CHECK(e.needed() == 25);
            CHECK(e.available() == 24);
        }
    }

    TEST_CASE("constant row")
    {
        CircuitGraph g = build_circuit(normalize(dsl::compile_source("fn X(t); let diff[X,t] = 1 - X; let X(t:0)=0;")));
        Placement p = place_and_route(g, lucidac_spec());
        CHECK(p.report.const_used == 1);
        bool from_const = false;
        for (const auto& e : active_edges(p.config))
            from_const = from_const || e.out_row == lucidac_spec().const_out_row();
        CHECK(from_const);
        MachineSpec no_const = lucidac_spec();
        no_const.has_const_row = false;
        CHECK_THROWS_AS(place_and_route(g, no_const), ConstUnavailable);
    }

    TEST_CASE("algebraic loops and parallel edges are rejected")
    {
        CircuitGraph loop;
        loop.nodes = {{0, NodeKind::Multiplier, 0.0, "m"}};
        loop.edges = {{0, 0, Port::MulA, 1.0}, {0, 0, Port::MulB, 1.0}};
        CHECK_THROWS_AS(place_and_route(loop, lucidac_spec()), LoopError);

        CircuitGraph parallel = integrators_only(1);
        parallel.edges = {{0, 0, Port::IntegratorIn, 1.0}, {0, 0, Port::IntegratorIn, 2.0}};
        CHECK_THROWS_AS(place_and_route(parallel, lucidac_spec()), Error);
    }

    TEST_CASE("summed multiplier port places")
    {
        CircuitGraph g;
        g.nodes = {{0, NodeKind::Integrator, 0.0, "X"},
                   {1, NodeKind::Integrator, 1.0, "A"},
                   {2, NodeKind::Integrator, 1.0, "B"},
                   {3, NodeKind::Integrator, 1.0, "C"},
                   {4, NodeKind::Multiplier, 0.0, "A*(B+C)"}};
        g.edges = {{1, 4, Port::MulA, 1.0}, {2, 4, Port::MulB, 1.0}, {3, 4, Port::MulB, 1.0},
                   {4, 0, Port::IntegratorIn, 1.0}};
        Placement p = place_and_route(g, lucidac_spec());
        CHECK(p.report.multipliers_used == 1);
        int into_b = 0;
        for (const auto& e : active_edges(p.config))
            into_b += e.in_row == lucidac_spec().mul_b_in_row(0);
        CHECK(into_b == 2);
        check_reconstruction(g, p);
    }

    TEST_CASE("routed edges reconstruct the graph")
    {
        std::mt19937_64 rng(8);
        for (int n = 0; n < 200; ++n) {
            CircuitGraph g = random_graph(rng, 1 + static_cast<int>(rng() % 4));
            Placement p;
            try {
                p = place_and_route(g, lucidac_spec());
            } catch (const CapacityError&) {
                continue;
            }
            CHECK(validate_config(p.config).empty());
            check_reconstruction(g, p);
            std::set<std::pair<int, int>> pairs;
            for (const auto& e : active_edges(p.config))
                CHECK(pairs.insert({e.out_row, e.in_row}).second);
            CHECK(p.report.lanes_used == static_cast<int>(g.edges.size()));
        }
    }

    TEST_CASE("deterministic")
    {
        CircuitGraph g = lorenz_graph();
        Placement a = place_and_route(g, lucidac_spec());
        Placement b = place_and_route(g, lucidac_spec());
        CHECK(a.config == b.config);
        CHECK(to_text(a.report) == to_text(b.report));
    }
}

TEST_SUITE("assign_lane_kinds")
{
    TEST_CASE("table weights prefer low-res lanes")
    {
        MachineSpec s = lucidac_spec();
        auto lanes = assign_lane_kinds({{0, 0, -1.0}, {1, 0, 1.8}}, s);
        CHECK(lanes[0] == 24);
        CHECK(lanes[1] == 0);
        CHECK(lowres_code_for(-1.0) == 6);
        CHECK(quantize_highres(1.8).code == 369);
    }

    TEST_CASE("sorted by source, destination, weight")
    {
        MachineSpec s = lucidac_spec();
        auto lanes = assign_lane_kinds({{2, 0, 0.3}, {1, 5, 0.3}, {1, 2, 0.7}, {1, 2, 0.2}}, s);
        CHECK(lanes == std::vector<int>{3, 2, 1, 0});
    }

    TEST_CASE("nine +10 edges overflow into one clamped high-res lane")
    {
        CircuitGraph g = integrators_only(3);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                g.edges.push_back({a, b, Port::IntegratorIn, 10.0});
        Placement p = place_and_route(g, lucidac_spec());
        CHECK(p.report.lowres_lanes_used == 8);
        CHECK(p.report.lanes_used == 9);
        REQUIRE(p.report.clamp_warnings.size() == 1);
        const auto& w = p.report.clamp_warnings[0];
        CHECK(w.lane == 0);
        CHECK(w.requested == 10.0);
        CHECK(w.realized == 9.9951171875);
        CHECK(p.config.lanes[0].coeff == CoefficientCode::high(2047));
        for (int k = 24; k < 32; ++k)
            CHECK(p.config.lanes[k].coeff == CoefficientCode::low(0));
        CHECK(to_text(p.report).find("clamp_warnings: 1") != std::string::npos);
    }

    TEST_CASE("near misses do not snap to the table")
    {
        auto lanes = assign_lane_kinds({{0, 0, 0.09999}}, lucidac_spec());
        CHECK(lanes[0] == 0);
    }
}
