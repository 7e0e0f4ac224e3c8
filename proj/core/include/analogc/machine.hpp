#pragma once

// Machine geometry and interconnect configuration of a LUCIDAC-style analog
// computer. Signals leave computing elements on out-rows, fan out through the
// voltage-coupled U-matrix onto lanes, are scaled by one coefficient per lane,
// and are summed as currents onto in-rows by the I-matrix.
//
// Row convention (LUCIDAC: 8 integrators, 4 multipliers):
//   out-rows  0..7  integrator outputs, 8..11 multiplier outputs, 12 constant one
//   in-rows   0..7  integrator inputs,  8+2j multiplier j input A, 9+2j input B

#include <optional>
#include <string>
#include <vector>

#include "analogc/error.hpp"

namespace analogc::machine {

struct MachineSpec {
    int n_integrators = 0;
    int n_multipliers = 0;
    int n_lanes = 0;
    int out_rows = 0;
    int in_rows = 0;
    std::vector<bool> lowres;  // per lane
    bool has_const_row = false;

    bool is_lowres(int lane) const { return lowres.at(static_cast<std::size_t>(lane)); }
    std::vector<int> lowres_lanes() const;
    std::vector<int> highres_lanes() const;

    int integrator_out_row(int i) const { return i; }
    int multiplier_out_row(int j) const { return n_integrators + j; }
    int const_out_row() const { return n_integrators + n_multipliers; }
    int integrator_in_row(int i) const { return i; }
    int mul_a_in_row(int j) const { return n_integrators + 2 * j; }
    int mul_b_in_row(int j) const { return n_integrators + 2 * j + 1; }

    friend bool operator==(const MachineSpec&, const MachineSpec&) = default;
};

/// Throws Error if the geometry invariants do not hold.
void check_spec(const MachineSpec& spec);

MachineSpec lucidac_spec();
MachineSpec redac_tile_spec();
/// Integrators, multipliers and lanes given; rows derived, the top quarter of lanes low-res.
MachineSpec custom_spec(int integrators, int multipliers, int lanes);

enum class RowRole { IntegratorOut, MultiplierOut, ConstOne, Reserved, IntegratorIn, MulA, MulB };

struct RowBinding {
    RowRole role = RowRole::Reserved;
    int element = -1;
};

RowBinding out_row_binding(const MachineSpec& spec, int row);
RowBinding in_row_binding(const MachineSpec& spec, int row);
std::string describe(RowBinding binding);

// ---------------------------------------------------------------------------
// Coefficients

inline constexpr int kHighResMin = -2048;
inline constexpr int kHighResMax = 2047;
inline constexpr int kLowResCodes = 8;
inline constexpr double kHighResLsb = 10.0 / 2048.0;

enum class CoeffKind { HighRes, LowRes };

struct CoefficientCode {
    CoeffKind kind = CoeffKind::HighRes;
    int code = 0;

    static CoefficientCode high(int c) { return {CoeffKind::HighRes, c}; }
    static CoefficientCode low(int c) { return {CoeffKind::LowRes, c}; }

    friend bool operator==(const CoefficientCode&, const CoefficientCode&) = default;
};

struct Quantized {
    int code = 0;
    bool clamped = false;  // value was outside the representable range
};

/// round(value * 2048 / 10), clamped to [-2048, 2047].
Quantized quantize_highres(double value);

/// Code whose table value equals `value` exactly, if any.
std::optional<int> lowres_code_for(double value);

double decode(CoefficientCode code);

bool code_in_range(CoefficientCode code);

// ---------------------------------------------------------------------------
// Configuration

struct Lane {
    std::optional<int> source;  // out-row
    CoefficientCode coeff;
    std::optional<int> dest;    // in-row

    bool active() const { return source.has_value() && dest.has_value(); }

    friend bool operator==(const Lane&, const Lane&) = default;
};

struct TapBinding {
    std::string name;
    int out_row = 0;

    friend bool operator==(const TapBinding&, const TapBinding&) = default;
};

struct MachineConfig {
    MachineSpec spec;
    std::vector<Lane> lanes;
    std::vector<double> initial_states;  // per integrator
    std::vector<TapBinding> taps;

    /// Unused interconnect: every lane empty with the zero code of its kind.
    static MachineConfig empty(const MachineSpec& spec);

    bool same_interconnect(const MachineConfig& other) const
    {
        return spec == other.spec && lanes == other.lanes;
    }

    friend bool operator==(const MachineConfig&, const MachineConfig&) = default;
};

struct Violation {
    int lane = -1;
    int row = -1;
    std::string rule;

    friend bool operator==(const Violation&, const Violation&) = default;
};

std::string to_string(const Violation& v);

/// Empty result means the configuration is valid.
std::vector<Violation> validate_config(const MachineConfig& config);

/// Signed weighted connection recovered from the interconnect.
struct RoutedEdge {
    int lane = 0;
    int out_row = 0;
    int in_row = 0;
    double weight = 0.0;
};

std::vector<RoutedEdge> active_edges(const MachineConfig& config);

/// `LANE <k>: row<out> --[<value> (<kind>,<code>)]--> row<in>` per active lane.
std::string dump(const MachineConfig& config);

} // namespace analogc::machine
