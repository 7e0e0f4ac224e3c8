#include "analogc/clos.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace analogc::clos {

BlockClass classify(const StageSpec& stage)
{
    if (stage.outputs_per_block < stage.inputs_per_block)
        return BlockClass::Concentrator;
    if (stage.outputs_per_block > stage.inputs_per_block)
        return BlockClass::Expander;
    return BlockClass::Square;
}

void check_spec(const FabricSpec& spec)
{
    for (const StageSpec* s : {&spec.input, &spec.middle, &spec.output})
        if (s->blocks <= 0 || s->inputs_per_block <= 0 || s->outputs_per_block <= 0)
            throw Error("fabric stage dimensions must be positive");
}

FabricSpec simstar_spec()
{
    return {{20, 16, 20}, {20, 20, 32}, {32, 22, 16}};
}

std::int64_t switch_count(const StageSpec& s)
{
    return std::int64_t{s.blocks} * s.inputs_per_block * s.outputs_per_block;
}

std::int64_t switch_count(const FabricSpec& spec)
{
    return switch_count(spec.input) + switch_count(spec.middle) + switch_count(spec.output);
}

FabricState::FabricState(FabricSpec spec) : spec_(spec)
{
    check_spec(spec_);
    first_hop_.assign(static_cast<std::size_t>(spec_.input.blocks * spec_.middle.blocks), 0);
    second_hop_.assign(static_cast<std::size_t>(spec_.middle.blocks * spec_.output.blocks), 0);
    output_used_.assign(static_cast<std::size_t>(spec_.total_outputs()), 0);
}

bool FabricState::first_link_exists(int ib, int m) const
{
    return m < spec_.input.outputs_per_block && ib < spec_.middle.inputs_per_block;
}

bool FabricState::second_link_exists(int m, int ob) const
{
    return ob < spec_.middle.outputs_per_block && m < spec_.output.inputs_per_block;
}

bool FabricState::first_link_busy(int ib, int m) const
{
    return first_hop_[static_cast<std::size_t>(ib * spec_.middle.blocks + m)] != 0;
}

bool FabricState::second_link_busy(int m, int ob) const
{
    return second_hop_[static_cast<std::size_t>(m * spec_.output.blocks + ob)] != 0;
}

bool FabricState::output_busy(int output) const
{
    check_output(output);
    return output_used_[static_cast<std::size_t>(output)] != 0;
}

void FabricState::check_input(int input) const
{
    if (input < 0 || input >= spec_.total_inputs())
        throw IndexError("input " + std::to_string(input) + " out of range [0, " +
                         std::to_string(spec_.total_inputs()) + ")");
}

void FabricState::check_output(int output) const
{
    if (output < 0 || output >= spec_.total_outputs())
        throw IndexError("output " + std::to_string(output) + " out of range [0, " +
                         std::to_string(spec_.total_outputs()) + ")");
}

RouteResult FabricState::route_request(int input, int output)
{
    check_input(input);
    check_output(output);
    if (output_used_[static_cast<std::size_t>(output)])
        throw OutputBusy(output);

    const int ib = input / spec_.input.inputs_per_block;
    const int ob = output / spec_.output.outputs_per_block;
    Blocked blocked{input, output, {}};
    for (int m = 0; m < spec_.middle.blocks; ++m) {
        bool free = first_link_exists(ib, m) && !first_link_busy(ib, m) && second_link_exists(m, ob) &&
                    !second_link_busy(m, ob);
        if (!free) {
            blocked.saturated_middles.push_back(m);
            continue;
        }
        first_hop_[static_cast<std::size_t>(ib * spec_.middle.blocks + m)] = 1;
        second_hop_[static_cast<std::size_t>(m * spec_.output.blocks + ob)] = 1;
        output_used_[static_cast<std::size_t>(output)] = 1;
        Route r{input, output, m};
        routes_.push_back(r);
        return r;
    }
    return blocked;
}

FanoutResult FabricState::route_fanout(int input, const std::vector<int>& outputs)
{
    check_input(input);
    for (int o : outputs)
        check_output(o);
    FabricState trial = *this;
    std::vector<Route> routed;
    for (int o : outputs) {
        RouteResult r = trial.route_request(input, o);
        if (auto* b = std::get_if<Blocked>(&r))
            return *b;
        routed.push_back(std::get<Route>(r));
    }
    *this = std::move(trial);
    return routed;
}

bool FabricState::teardown(int output)
{
    check_output(output);
    auto it = std::find_if(routes_.begin(), routes_.end(), [&](const Route& r) { return r.output == output; });
    if (it == routes_.end())
        return false;
    const int ib = it->input / spec_.input.inputs_per_block;
    const int ob = it->output / spec_.output.outputs_per_block;
    first_hop_[static_cast<std::size_t>(ib * spec_.middle.blocks + it->middle_block)] = 0;
    second_hop_[static_cast<std::size_t>(it->middle_block * spec_.output.blocks + ob)] = 0;
    output_used_[static_cast<std::size_t>(output)] = 0;
    routes_.erase(it);
    return true;
}

std::vector<std::string> FabricState::check_invariants() const
{
    std::vector<std::string> problems;
    std::vector<int> first(first_hop_.size(), 0);
    std::vector<int> second(second_hop_.size(), 0);
    std::vector<int> outs(output_used_.size(), 0);
    for (const auto& r : routes_) {
        const int ib = r.input / spec_.input.inputs_per_block;
        const int ob = r.output / spec_.output.outputs_per_block;
        if (!first_link_exists(ib, r.middle_block) || !second_link_exists(r.middle_block, ob))
            problems.push_back("route uses a link that does not exist");
        ++first[static_cast<std::size_t>(ib * spec_.middle.blocks + r.middle_block)];
        ++second[static_cast<std::size_t>(r.middle_block * spec_.output.blocks + ob)];
        ++outs[static_cast<std::size_t>(r.output)];
    }
    for (std::size_t i = 0; i < first.size(); ++i)
        if (first[i] > 1 || first[i] != first_hop_[i])
            problems.push_back("first-hop link " + std::to_string(i) + " occupancy mismatch");
    for (std::size_t i = 0; i < second.size(); ++i)
        if (second[i] > 1 || second[i] != second_hop_[i])
            problems.push_back("second-hop link " + std::to_string(i) + " occupancy mismatch");
    for (std::size_t i = 0; i < outs.size(); ++i)
        if (outs[i] > 1 || outs[i] != output_used_[i])
            problems.push_back("output " + std::to_string(i) + " occupancy mismatch");
    return problems;
}

namespace {

// Unbiased draw from [0, n) by rejection; std distributions are not portable.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n)
{
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

} // namespace

BlockingStats blocking_experiment(const FabricSpec& spec, int load, int trials, std::uint64_t seed)
{
    check_spec(spec);
    if (load < 0 || load > spec.total_outputs())
        throw Error("load must be within [0, total outputs]");
    if (trials <= 0)
        throw Error("trials must be positive");

    int blocked_trials = 0;
    std::int64_t routed_total = 0;
    const auto n_in = static_cast<std::uint64_t>(spec.total_inputs());
    const auto n_out = static_cast<std::size_t>(spec.total_outputs());

    for (int t = 0; t < trials; ++t) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        FabricState state(spec);
        std::vector<int> outputs(n_out);
        std::iota(outputs.begin(), outputs.end(), 0);
        bool any_blocked = false;
        for (int r = 0; r < load; ++r) {
            // Partial Fisher-Yates: position r receives a fresh output.
            auto pick = static_cast<std::size_t>(r) + draw_below(rng, n_out - static_cast<std::size_t>(r));
            std::swap(outputs[static_cast<std::size_t>(r)], outputs[pick]);
            int input = static_cast<int>(draw_below(rng, n_in));
            RouteResult res = state.route_request(input, outputs[static_cast<std::size_t>(r)]);
            if (std::holds_alternative<Blocked>(res))
                any_blocked = true;
            else
                ++routed_total;
        }
        if (any_blocked)
            ++blocked_trials;
    }
    return {static_cast<double>(blocked_trials) / trials, static_cast<double>(routed_total) / trials};
}

namespace {

int parse_positive(const std::string& s, const std::string& whole)
{
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || v <= 0)
        throw Error("bad fabric spec '" + whole + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        parts.push_back(item);
    if (!s.empty() && s.back() == sep)
        parts.emplace_back();
    return parts;
}

StageSpec parse_stage(const std::string& s, const std::string& whole)
{
    auto dims = split(s, 'x');
    if (dims.size() != 3)
        throw Error("bad fabric stage '" + s + "' in '" + whole + "' (want <blocks>x<inputs>x<outputs>)");
    return {parse_positive(dims[0], whole), parse_positive(dims[1], whole), parse_positive(dims[2], whole)};
}

} // namespace

ParsedFabric parse_fabric(const std::string& text)
{
    if (text == "simstar")
        return {simstar_spec(), false};
    const std::string crossbar = "crossbar:";
    const std::string custom = "custom:";
    if (text.rfind(crossbar, 0) == 0) {
        auto dims = split(text.substr(crossbar.size()), 'x');
        if (dims.size() != 2)
            throw Error("bad fabric spec '" + text + "' (want crossbar:<n>x<m>)");
        FabricSpec s{{1, parse_positive(dims[0], text), parse_positive(dims[1], text)}, {}, {}};
        return {s, true};
    }
    if (text.rfind(custom, 0) == 0) {
        auto stages = split(text.substr(custom.size()), ',');
        if (stages.size() != 3)
            throw Error("bad fabric spec '" + text + "' (want three comma-separated stages)");
        FabricSpec s{parse_stage(stages[0], text), parse_stage(stages[1], text), parse_stage(stages[2], text)};
        return {s, false};
    }
    throw Error("unknown fabric spec '" + text + "'");
}

} // namespace analogc::clos
