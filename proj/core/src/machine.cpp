#include "analogc/machine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "analogc/format.hpp"

namespace analogc::machine {

namespace {

constexpr std::array<double, kLowResCodes> kLowResTable = {10.0, 1.0, 0.5, 0.1, -0.1, -0.5, -1.0, -10.0};

std::vector<bool> top_fraction_lowres(int lanes, int count)
{
    std::vector<bool> mask(static_cast<std::size_t>(lanes), false);
    for (int k = lanes - count; k < lanes; ++k)
        mask[static_cast<std::size_t>(k)] = true;
    return mask;
}

} // namespace

std::vector<int> MachineSpec::lowres_lanes() const
{
    std::vector<int> out;
    for (int k = 0; k < n_lanes; ++k)
        if (lowres[static_cast<std::size_t>(k)])
            out.push_back(k);
    return out;
}

std::vector<int> MachineSpec::highres_lanes() const
{
    std::vector<int> out;
    for (int k = 0; k < n_lanes; ++k)
        if (!lowres[static_cast<std::size_t>(k)])
            out.push_back(k);
    return out;
}

void check_spec(const MachineSpec& spec)
{
    if (spec.n_integrators < 0 || spec.n_multipliers < 0 || spec.n_lanes < 0)
        throw Error("machine spec: negative element count");
    if (spec.in_rows != spec.n_integrators + 2 * spec.n_multipliers)
        throw Error("machine spec: in_rows must equal integrators + 2 * multipliers");
    if (spec.out_rows < spec.n_integrators + spec.n_multipliers + (spec.has_const_row ? 1 : 0))
        throw Error("machine spec: too few out_rows for the element count");
    if (static_cast<int>(spec.lowres.size()) != spec.n_lanes)
        throw Error("machine spec: low-res mask size differs from lane count");
    auto n_low = std::count(spec.lowres.begin(), spec.lowres.end(), true);
    if (2 * n_low > spec.n_lanes)
        throw Error("machine spec: more than half of the lanes are low-res");
    if (spec.in_rows > 0xFFFF || spec.out_rows > 0xFFFF || spec.n_lanes > 0xFFFF)
        throw Error("machine spec: rows and lanes must fit 16-bit indices");
}

MachineSpec lucidac_spec()
{
    MachineSpec s;
    s.n_integrators = 8;
    s.n_multipliers = 4;
    s.n_lanes = 32;
    s.in_rows = 16;
    s.out_rows = 16;
    s.lowres = top_fraction_lowres(32, 8);
    s.has_const_row = true;
    return s;
}

MachineSpec redac_tile_spec()
{
    return custom_spec(1000, 500, 8000);
}

MachineSpec custom_spec(int integrators, int multipliers, int lanes)
{
    MachineSpec s;
    s.n_integrators = integrators;
    s.n_multipliers = multipliers;
    s.n_lanes = lanes;
    s.in_rows = integrators + 2 * multipliers;
    s.out_rows = std::max(s.in_rows, integrators + multipliers + 1);
    s.lowres = top_fraction_lowres(lanes, lanes / 4);
    s.has_const_row = true;
    check_spec(s);
    return s;
}

RowBinding out_row_binding(const MachineSpec& spec, int row)
{
    if (row < 0 || row >= spec.out_rows)
        return {};
    if (row < spec.n_integrators)
        return {RowRole::IntegratorOut, row};
    if (row < spec.n_integrators + spec.n_multipliers)
        return {RowRole::MultiplierOut, row - spec.n_integrators};
    if (spec.has_const_row && row == spec.const_out_row())
        return {RowRole::ConstOne, 0};
    return {};
}

RowBinding in_row_binding(const MachineSpec& spec, int row)
{
    if (row < 0 || row >= spec.in_rows)
        return {};
    if (row < spec.n_integrators)
        return {RowRole::IntegratorIn, row};
    int k = row - spec.n_integrators;
    return {k % 2 == 0 ? RowRole::MulA : RowRole::MulB, k / 2};
}

std::string describe(RowBinding b)
{
    switch (b.role) {
    case RowRole::IntegratorOut:
        return "IntegratorOut(" + std::to_string(b.element) + ")";
    case RowRole::MultiplierOut:
        return "MultiplierOut(" + std::to_string(b.element) + ")";
    case RowRole::ConstOne:
        return "ConstOne";
    case RowRole::IntegratorIn:
        return "IntegratorIn(" + std::to_string(b.element) + ")";
    case RowRole::MulA:
        return "MulA(" + std::to_string(b.element) + ")";
    case RowRole::MulB:
        return "MulB(" + std::to_string(b.element) + ")";
    case RowRole::Reserved:
        break;
    }
    return "Reserved";
}

Quantized quantize_highres(double value)
{
    double scaled = std::round(value * 2048.0 / 10.0);
    if (scaled > kHighResMax)
        return {kHighResMax, true};
    if (scaled < kHighResMin)
        return {kHighResMin, true};
    return {static_cast<int>(scaled), false};
}

std::optional<int> lowres_code_for(double value)
{
    for (int c = 0; c < kLowResCodes; ++c)
        if (kLowResTable[static_cast<std::size_t>(c)] == value)
            return c;
    return std::nullopt;
}

double decode(CoefficientCode code)
{
    if (code.kind == CoeffKind::LowRes)
        return kLowResTable.at(static_cast<std::size_t>(code.code));
    return code.code * 10.0 / 2048.0;
}

bool code_in_range(CoefficientCode code)
{
    if (code.kind == CoeffKind::LowRes)
        return code.code >= 0 && code.code < kLowResCodes;
    return code.code >= kHighResMin && code.code <= kHighResMax;
}

MachineConfig MachineConfig::empty(const MachineSpec& spec)
{
    MachineConfig c;
    c.spec = spec;
    c.lanes.resize(static_cast<std::size_t>(spec.n_lanes));
    for (int k = 0; k < spec.n_lanes; ++k)
        c.lanes[static_cast<std::size_t>(k)].coeff.kind = spec.is_lowres(k) ? CoeffKind::LowRes : CoeffKind::HighRes;
    c.initial_states.assign(static_cast<std::size_t>(spec.n_integrators), 0.0);
    return c;
}

std::string to_string(const Violation& v)
{
    std::string s = v.rule;
    if (v.lane >= 0)
        s = "lane " + std::to_string(v.lane) + ": " + s;
    if (v.row >= 0)
        s += " (row " + std::to_string(v.row) + ")";
    return s;
}

std::vector<Violation> validate_config(const MachineConfig& config)
{
    const MachineSpec& spec = config.spec;
    std::vector<Violation> out;
    if (static_cast<int>(config.lanes.size()) != spec.n_lanes) {
        out.push_back({-1, -1, "lane count differs from spec"});
        return out;
    }
    if (static_cast<int>(config.initial_states.size()) != spec.n_integrators)
        out.push_back({-1, -1, "initial state count differs from integrator count"});

    for (int k = 0; k < spec.n_lanes; ++k) {
        const Lane& lane = config.lanes[static_cast<std::size_t>(k)];
        if (lane.source) {
            int r = *lane.source;
            if (r < 0 || r >= spec.out_rows)
                out.push_back({k, r, "source row out of range"});
            else if (out_row_binding(spec, r).role == RowRole::Reserved)
                out.push_back({k, r, "source row is not bound to an element"});
        }
        if (lane.dest) {
            int r = *lane.dest;
            if (r < 0 || r >= spec.in_rows)
                out.push_back({k, r, "destination row out of range"});
        }
        if (lane.source.has_value() != lane.dest.has_value())
            out.push_back({k, lane.source ? *lane.source : *lane.dest, "dangling lane"});

        CoeffKind expected = spec.is_lowres(k) ? CoeffKind::LowRes : CoeffKind::HighRes;
        if (lane.coeff.kind != expected)
            out.push_back({k, -1, "kind/lane mismatch"});
        else if (!code_in_range(lane.coeff))
            out.push_back({k, -1, "coefficient code out of range"});
        else if (!lane.source && !lane.dest && lane.coeff.code != 0)
            out.push_back({k, -1, "unused lane carries a coefficient"});
    }

    for (const auto& tap : config.taps) {
        if (out_row_binding(spec, tap.out_row).role != RowRole::IntegratorOut)
            out.push_back({-1, tap.out_row, "tap '" + tap.name + "' is not an integrator output"});
    }
    return out;
}

std::vector<RoutedEdge> active_edges(const MachineConfig& config)
{
    std::vector<RoutedEdge> out;
    for (std::size_t k = 0; k < config.lanes.size(); ++k) {
        const Lane& lane = config.lanes[k];
        if (lane.active())
            out.push_back({static_cast<int>(k), *lane.source, *lane.dest, decode(lane.coeff)});
    }
    return out;
}

std::string dump(const MachineConfig& config)
{
    std::ostringstream os;
    for (std::size_t k = 0; k < config.lanes.size(); ++k) {
        const Lane& lane = config.lanes[k];
        if (!lane.active())
            continue;
        os << "LANE " << k << ": row" << *lane.source << " --[" << format_real(decode(lane.coeff)) << " ("
           << (lane.coeff.kind == CoeffKind::LowRes ? "lowres" : "highres") << ',' << lane.coeff.code
           << ")]--> row" << *lane.dest << '\n';
    }
    return os.str();
}

} // namespace analogc::machine
