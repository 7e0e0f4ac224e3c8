#include "analogc/place_route.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "analogc/format.hpp"

namespace analogc::place_route {

using circuit::NodeKind;
using circuit::Port;
using machine::CoefficientCode;
using machine::MachineConfig;
using machine::MachineSpec;

double PlaceRouteReport::max_quantization_error() const
{
    double m = 0.0;
    for (double e : quantization_errors)
        m = std::max(m, e);
    return m;
}

std::string to_text(const PlaceRouteReport& r)
{
    std::ostringstream os;
    os << "integrators_used: " << r.integrators_used << '\n';
    os << "multipliers_used: " << r.multipliers_used << '\n';
    os << "const_used: " << r.const_used << '\n';
    os << "lanes_used: " << r.lanes_used << '\n';
    os << "lowres_lanes_used: " << r.lowres_lanes_used << '\n';
    os << "clamp_warnings: " << r.clamp_warnings.size() << '\n';
    for (const auto& w : r.clamp_warnings)
        os << "clamped_lane: " << w.lane << ' ' << format_real(w.requested) << " -> " << format_real(w.realized)
           << '\n';
    os << "max_quantization_error: " << format_real(r.max_quantization_error()) << '\n';
    return os.str();
}

std::vector<int> assign_lane_kinds(const std::vector<LaneRequest>& requests, const MachineSpec& spec)
{
    const int total = static_cast<int>(requests.size());
    if (total > spec.n_lanes)
        throw CapacityError("lanes", total, spec.n_lanes);

    std::vector<int> order(requests.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ra = requests[static_cast<std::size_t>(a)];
        const auto& rb = requests[static_cast<std::size_t>(b)];
        return std::tie(ra.out_row, ra.in_row, ra.weight) < std::tie(rb.out_row, rb.in_row, rb.weight);
    });

    const std::vector<int> low = spec.lowres_lanes();
    const std::vector<int> high = spec.highres_lanes();
    std::size_t next_low = 0;
    std::size_t next_high = 0;

    std::vector<int> lane_of(requests.size(), -1);
    std::vector<int> needs_high;
    for (int idx : order) {
        bool exact = machine::lowres_code_for(requests[static_cast<std::size_t>(idx)].weight).has_value();
        if (exact && next_low < low.size())
            lane_of[static_cast<std::size_t>(idx)] = low[next_low++];
        else
            needs_high.push_back(idx);
    }
    if (needs_high.size() > high.size())
        throw CapacityError("highres lanes", static_cast<int>(needs_high.size()), static_cast<int>(high.size()));
    for (int idx : needs_high)
        lane_of[static_cast<std::size_t>(idx)] = high[next_high++];
    return lane_of;
}

Placement place_and_route(const circuit::CircuitGraph& graph, const MachineSpec& spec)
{
    machine::check_spec(spec);
    circuit::detect_algebraic_loops(graph);

    const int n_int = graph.count(NodeKind::Integrator);
    const int n_mul = graph.count(NodeKind::Multiplier);
    const int n_const = graph.count(NodeKind::ConstOne);
    if (n_int > spec.n_integrators)
        throw CapacityError("integrators", n_int, spec.n_integrators);
    if (n_mul > spec.n_multipliers)
        throw CapacityError("multipliers", n_mul, spec.n_multipliers);
    if (n_const > 1)
        throw Error("circuit has more than one constant source");
    if (n_const > 0 && !spec.has_const_row)
        throw ConstUnavailable();

    Placement result;
    MachineConfig& config = result.config;
    config = MachineConfig::empty(spec);

    // Node id -> element slot, in id order (integrators follow state order,
    // multipliers follow canonical monomial order).
    std::vector<int> slot(graph.nodes.size(), -1);
    int next_int = 0;
    int next_mul = 0;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& node = graph.nodes[i];
        if (node.id != static_cast<int>(i))
            throw Error("circuit node ids must equal their index");
        switch (node.kind) {
        case NodeKind::Integrator:
            config.initial_states[static_cast<std::size_t>(next_int)] = node.initial;
            slot[i] = next_int++;
            break;
        case NodeKind::Multiplier:
            slot[i] = next_mul++;
            break;
        case NodeKind::ConstOne:
            slot[i] = 0;
            break;
        }
    }

    auto out_row = [&](int node) {
        const auto& n = graph.nodes.at(static_cast<std::size_t>(node));
        int s = slot[static_cast<std::size_t>(node)];
        switch (n.kind) {
        case NodeKind::Integrator:
            return spec.integrator_out_row(s);
        case NodeKind::Multiplier:
            return spec.multiplier_out_row(s);
        case NodeKind::ConstOne:
            break;
        }
        return spec.const_out_row();
    };

    auto in_row = [&](int node, Port port) {
        const auto& n = graph.nodes.at(static_cast<std::size_t>(node));
        int s = slot[static_cast<std::size_t>(node)];
        if (n.kind == NodeKind::Integrator && port == Port::IntegratorIn)
            return spec.integrator_in_row(s);
        if (n.kind == NodeKind::Multiplier && port == Port::MulA)
            return spec.mul_a_in_row(s);
        if (n.kind == NodeKind::Multiplier && port == Port::MulB)
            return spec.mul_b_in_row(s);
        throw Error("edge into node " + std::to_string(node) + " uses port '" + circuit::to_string(port) +
                    "' that a " + circuit::to_string(n.kind) + " does not have");
    };

    std::vector<LaneRequest> requests;
    std::set<std::pair<int, int>> seen;
    for (const auto& e : graph.edges) {
        LaneRequest req{out_row(e.src), in_row(e.dst, e.port), e.weight};
        if (!std::isfinite(e.weight))
            throw Error("edge weight is not finite");
        if (!seen.insert({req.out_row, req.in_row}).second)
            throw Error("parallel edges between row " + std::to_string(req.out_row) + " and row " +
                        std::to_string(req.in_row) + " were not merged");
        requests.push_back(req);
    }

    std::vector<int> lanes = assign_lane_kinds(requests, spec);

    PlaceRouteReport& report = result.report;
    report.integrators_used = n_int;
    report.multipliers_used = n_mul;
    report.const_used = n_const;
    report.lanes_used = static_cast<int>(requests.size());
    report.requested_weights.assign(static_cast<std::size_t>(spec.n_lanes), std::nullopt);
    report.quantization_errors.assign(static_cast<std::size_t>(spec.n_lanes), 0.0);

    for (std::size_t r = 0; r < requests.size(); ++r) {
        const int k = lanes[r];
        auto& lane = config.lanes[static_cast<std::size_t>(k)];
        lane.source = requests[r].out_row;
        lane.dest = requests[r].in_row;
        const double w = requests[r].weight;
        if (spec.is_lowres(k)) {
            lane.coeff = CoefficientCode::low(*machine::lowres_code_for(w));
            ++report.lowres_lanes_used;
        } else {
            auto q = machine::quantize_highres(w);
            lane.coeff = CoefficientCode::high(q.code);
            if (q.clamped)
                report.clamp_warnings.push_back({k, w, machine::decode(lane.coeff)});
        }
        report.requested_weights[static_cast<std::size_t>(k)] = w;
        report.quantization_errors[static_cast<std::size_t>(k)] = std::abs(machine::decode(lane.coeff) - w);
    }

    for (const auto& tap : graph.taps) {
        if (graph.nodes.at(static_cast<std::size_t>(tap.node)).kind != NodeKind::Integrator)
            throw Error("tap '" + tap.name + "' does not name an integrator");
        config.taps.push_back({tap.name, out_row(tap.node)});
    }

    auto violations = machine::validate_config(config);
    if (!violations.empty())
        throw Error("routed configuration is invalid: " + machine::to_string(violations.front()));
    return result;
}

} // namespace analogc::place_route
