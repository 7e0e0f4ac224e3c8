#pragma once

// Three-stage switch fabric (input concentrators, middle blocks, output
// expanders) with greedy first-fit routing and blocking detection.
//
// Wiring: output link j of input block i goes to input i of middle block j;
// output link k of middle block j goes to input j of output block k. Links
// whose far end does not exist are absent (e.g. spare output-block inputs).

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "analogc/error.hpp"

namespace analogc::clos {

struct StageSpec {
    int blocks = 0;
    int inputs_per_block = 0;
    int outputs_per_block = 0;

    /// outputs / inputs: < 1 concentrator, > 1 expander.
    double expansion() const { return static_cast<double>(outputs_per_block) / inputs_per_block; }

    friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

enum class BlockClass { Concentrator, Square, Expander };
BlockClass classify(const StageSpec& stage);

struct FabricSpec {
    StageSpec input;
    StageSpec middle;
    StageSpec output;

    int total_inputs() const { return input.blocks * input.inputs_per_block; }
    int total_outputs() const { return output.blocks * output.outputs_per_block; }

    friend bool operator==(const FabricSpec&, const FabricSpec&) = default;
};

void check_spec(const FabricSpec& spec);

/// Twenty 16x20 input blocks, twenty 20x32 middle blocks, 32 22x16 output blocks.
FabricSpec simstar_spec();

std::int64_t switch_count(const StageSpec& stage);
std::int64_t switch_count(const FabricSpec& spec);

class OutputBusy : public Error {
public:
    explicit OutputBusy(int output) : Error("output " + std::to_string(output) + " is already routed") {}
};

class IndexError : public Error {
public:
    using Error::Error;
};

struct Route {
    int input = 0;
    int output = 0;
    int middle_block = 0;

    friend bool operator==(const Route&, const Route&) = default;
};

struct Blocked {
    int input = 0;
    int output = 0;
    /// Middle blocks that could not take the route (busy or missing link on either hop).
    std::vector<int> saturated_middles;
};

using RouteResult = std::variant<Route, Blocked>;
using FanoutResult = std::variant<std::vector<Route>, Blocked>;

class FabricState {
public:
    explicit FabricState(FabricSpec spec);

    const FabricSpec& spec() const { return spec_; }
    const std::vector<Route>& routes() const { return routes_; }

    bool output_busy(int output) const;
    bool first_link_busy(int input_block, int middle) const;
    bool second_link_busy(int middle, int output_block) const;
    bool first_link_exists(int input_block, int middle) const;
    bool second_link_exists(int middle, int output_block) const;

    /// Route through the lowest-indexed middle block with both hops free.
    /// On Blocked the state is unchanged.
    RouteResult route_request(int input, int output);

    /// All outputs routed from one input, or none.
    FanoutResult route_fanout(int input, const std::vector<int>& outputs);

    /// Remove the route ending at `output`. Returns false if none exists.
    bool teardown(int output);

    /// Empty when every occupancy invariant holds.
    std::vector<std::string> check_invariants() const;

    friend bool operator==(const FabricState&, const FabricState&) = default;

private:
    FabricSpec spec_;
    std::vector<std::uint8_t> first_hop_;   // [input_block * middle.blocks + middle]
    std::vector<std::uint8_t> second_hop_;  // [middle * output.blocks + output_block]
    std::vector<std::uint8_t> output_used_;
    std::vector<Route> routes_;

    void check_input(int input) const;
    void check_output(int output) const;
};

struct BlockingStats {
    double blocked_fraction = 0.0;
    double mean_routed = 0.0;
};

/// Per trial: a fresh fabric receives `load` requests, each from a uniformly
/// random input to a not-yet-used random output. A trial counts as blocked if
/// any request was Blocked. Trial t draws from its own generator seeded by
/// (seed, t), so results depend only on the arguments.
BlockingStats blocking_experiment(const FabricSpec& spec, int load, int trials, std::uint64_t seed);

/// "simstar", "crossbar:<n>x<m>" or "custom:<b>x<n>x<m>,<b>x<n>x<m>,<b>x<n>x<m>".
/// Crossbars come back as a single input-stage block with empty middle/output stages.
struct ParsedFabric {
    FabricSpec spec;
    bool crossbar = false;
};
ParsedFabric parse_fabric(const std::string& text);

} // namespace analogc::clos
