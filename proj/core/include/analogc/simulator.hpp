#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "analogc/circuit.hpp"
#include "analogc/dsl.hpp"
#include "analogc/machine.hpp"

namespace analogc::sim {

enum class Method { RK4, Euler };

struct SimSettings {
    double dt = 1e-3;
    double t_end = 1.0;
    Method method = Method::RK4;
    /// Saturation level in machine units; nullopt disables clipping.
    std::optional<double> clip = 1.0;
    int record_stride = 1;
    std::int64_t max_steps = 100'000'000;
};

struct ClipEvent {
    double t = 0.0;
    std::string element;
};

struct Trace {
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> signals;  // aligned with `names`, each the length of `times`
    std::vector<ClipEvent> clip_events;

    /// Throws Error if no signal has that name.
    const std::vector<double>& signal(const std::string& name) const;
    double max_abs() const;
};

class NonFinite : public Error {
public:
    NonFinite(double t, std::string element);

    double t() const { return t_; }
    const std::string& element() const { return element_; }

private:
    double t_;
    std::string element_;
};

class AlgebraicLoop : public Error {
public:
    using Error::Error;
};

class UnroutedTap : public Error {
public:
    using Error::Error;
};

/// Right-hand side shared by the hardware and reference paths.
class System {
public:
    virtual ~System() = default;

    virtual std::size_t dimension() const = 0;
    virtual const std::vector<std::string>& state_names() const = 0;
    /// State elements first (same order as the state vector), then any internal ones.
    virtual const std::vector<std::string>& element_names() const = 0;

    /// dx = f(x). With `clip`, every element output is saturated to +-clip and
    /// the matching entry of `clipped` (sized element_names()) set to 1.
    virtual void evaluate(std::span<const double> x, std::span<double> dx, std::optional<double> clip,
                          std::span<std::uint8_t> clipped) const = 0;
};

/// Dynamics of a routed interconnect: out-row voltages scaled per lane, summed
/// per in-row, multipliers resolved in dependency order.
class DynamicsModel final : public System {
public:
    std::size_t dimension() const override { return integrators_.size(); }
    const std::vector<std::string>& state_names() const override { return state_names_; }
    const std::vector<std::string>& element_names() const override { return element_names_; }
    void evaluate(std::span<const double> x, std::span<double> dx, std::optional<double> clip,
                  std::span<std::uint8_t> clipped) const override;

    /// Integrator slots backing each model state.
    const std::vector<int>& integrator_slots() const { return integrators_; }

    /// Current of every active lane (lane order) for one unclipped evaluation.
    std::vector<double> lane_currents(std::span<const double> x) const;
    std::vector<int> active_lanes() const;

    /// Initial values of the model states taken from the configuration.
    std::vector<double> initial_state(const machine::MachineConfig& config) const;

    friend DynamicsModel build_dynamics(const machine::MachineConfig&, std::span<const std::optional<double>>);

private:
    struct LaneTerm {
        int lane;
        int out_row;
        double weight;
    };

    int out_rows_ = 0;
    int const_row_ = -1;
    std::vector<int> integrators_;                // model state -> integrator slot
    std::vector<int> integrator_out_row_;         // model state -> out-row
    std::vector<int> multipliers_;                // evaluation order (slots)
    std::vector<int> multiplier_out_row_;         // aligned with multipliers_
    std::vector<std::vector<LaneTerm>> mul_a_;    // aligned with multipliers_
    std::vector<std::vector<LaneTerm>> mul_b_;
    std::vector<std::vector<LaneTerm>> integrator_in_;  // per model state
    std::vector<std::string> state_names_;
    std::vector<std::string> element_names_;
};

/// `exact_weights`, when non-empty (one entry per lane), replaces the decoded
/// coefficient of every lane that has a value: the quantization bypass.
DynamicsModel build_dynamics(const machine::MachineConfig& config,
                             std::span<const std::optional<double>> exact_weights = {});

/// Direct evaluation of a PolySystem with unquantized weights.
class ReferenceSystem final : public System {
public:
    explicit ReferenceSystem(circuit::PolySystem system);

    std::size_t dimension() const override { return system_.states.size(); }
    const std::vector<std::string>& state_names() const override { return system_.states; }
    const std::vector<std::string>& element_names() const override { return system_.states; }
    void evaluate(std::span<const double> x, std::span<double> dx, std::optional<double> clip,
                  std::span<std::uint8_t> clipped) const override;

private:
    struct Term {
        double weight;
        std::vector<int> factors;
    };
    circuit::PolySystem system_;
    std::vector<std::vector<Term>> terms_;
};

/// Fixed-step integration. Samples t = 0, every record_stride steps, and t_end
/// (the last step is shortened to land on t_end).
Trace run(const System& system, std::span<const double> initial, const SimSettings& settings);

Trace run_reference(const circuit::PolySystem& system, const SimSettings& settings);

/// Largest |a - b| over every shared signal; traces must share the time grid.
double max_abs_deviation(const Trace& a, const Trace& b, std::optional<double> t_max = std::nullopt);

struct TraceSelection {
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, std::string>> plots;
};

TraceSelection selection_for(const dsl::Program& program);

/// `<prefix>out.csv` (t plus outputs) and one `<prefix>plot_<x>_<y>.csv` per plot.
std::vector<std::filesystem::path> emit_traces(const Trace& trace, const TraceSelection& selection,
                                               const std::filesystem::path& out_dir, const std::string& prefix = "");
std::vector<std::filesystem::path> emit_traces(const Trace& trace, const dsl::Program& program,
                                               const std::filesystem::path& out_dir, const std::string& prefix = "");

} // namespace analogc::sim
