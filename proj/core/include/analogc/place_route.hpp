#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "analogc/circuit.hpp"
#include "analogc/machine.hpp"

namespace analogc::place_route {

class CapacityError : public Error {
public:
    CapacityError(std::string kind, int needed, int available)
        : Error(kind + ": need " + std::to_string(needed) + ", have " + std::to_string(available)),
          kind_(std::move(kind)), needed_(needed), available_(available) {}

    const std::string& kind() const { return kind_; }
    int needed() const { return needed_; }
    int available() const { return available_; }

private:
    std::string kind_;
    int needed_;
    int available_;
};

class ConstUnavailable : public Error {
public:
    ConstUnavailable() : Error("circuit needs a constant source but the machine has no constant row") {}
};

struct ClampWarning {
    int lane = 0;
    double requested = 0.0;
    double realized = 0.0;
};

struct PlaceRouteReport {
    int integrators_used = 0;
    int multipliers_used = 0;
    int const_used = 0;
    int lanes_used = 0;
    int lowres_lanes_used = 0;
    std::vector<ClampWarning> clamp_warnings;
    /// Per lane: requested weight of the edge routed through it, if any.
    std::vector<std::optional<double>> requested_weights;
    /// Per lane: |decoded - requested|, zero for unused lanes.
    std::vector<double> quantization_errors;

    double max_quantization_error() const;
};

/// Deterministic `key: value` lines.
std::string to_text(const PlaceRouteReport& report);

struct LaneRequest {
    int out_row = 0;
    int in_row = 0;
    double weight = 0.0;
};

/// Lane index per request (same order as `requests`). Requests are visited
/// sorted by (out_row, in_row, weight); exact low-res table values take the
/// lowest free low-res lanes, everything else the lowest free high-res lanes.
std::vector<int> assign_lane_kinds(const std::vector<LaneRequest>& requests, const machine::MachineSpec& spec);

struct Placement {
    machine::MachineConfig config;
    PlaceRouteReport report;
};

/// Map every node onto an element and every edge onto a lane.
Placement place_and_route(const circuit::CircuitGraph& graph, const machine::MachineSpec& spec);

} // namespace analogc::place_route
