#include "analogc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "analogc/format.hpp"

namespace analogc::sim {

using machine::MachineConfig;
using machine::RowRole;

const std::vector<double>& Trace::signal(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return signals[i];
    throw Error("trace has no signal '" + name + "'");
}

double Trace::max_abs() const
{
    double m = 0.0;
    for (const auto& s : signals)
        for (double v : s)
            m = std::max(m, std::abs(v));
    return m;
}

NonFinite::NonFinite(double t, std::string element)
    : Error("non-finite value in " + element + " at t=" + format_real(t)), t_(t), element_(std::move(element))
{
}

namespace {

inline double saturate(double v, std::optional<double> clip, std::span<std::uint8_t> clipped, std::size_t element)
{
    if (!clip)
        return v;
    if (v > *clip) {
        clipped[element] = 1;
        return *clip;
    }
    if (v < -*clip) {
        clipped[element] = 1;
        return -*clip;
    }
    return v;
}

} // namespace

// ---------------------------------------------------------------------------
// Hardware path

DynamicsModel build_dynamics(const MachineConfig& config, std::span<const std::optional<double>> exact_weights)
{
    const auto& spec = config.spec;
    if (!exact_weights.empty() && exact_weights.size() != config.lanes.size())
        throw Error("exact weight list must have one entry per lane");
    for (const auto& tap : config.taps)
        if (machine::out_row_binding(spec, tap.out_row).role != RowRole::IntegratorOut)
            throw UnroutedTap("tap '" + tap.name + "' has no integrator out-row");
    auto violations = machine::validate_config(config);
    if (!violations.empty())
        throw Error("cannot simulate invalid configuration: " + machine::to_string(violations.front()));

    DynamicsModel m;
    m.out_rows_ = spec.out_rows;

    std::set<int> used_int;
    std::set<int> used_mul;
    bool used_const = false;
    auto note_out = [&](int row) {
        auto b = machine::out_row_binding(spec, row);
        if (b.role == RowRole::IntegratorOut)
            used_int.insert(b.element);
        else if (b.role == RowRole::MultiplierOut)
            used_mul.insert(b.element);
        else if (b.role == RowRole::ConstOne)
            used_const = true;
    };
    auto note_in = [&](int row) {
        auto b = machine::in_row_binding(spec, row);
        if (b.role == RowRole::IntegratorIn)
            used_int.insert(b.element);
        else
            used_mul.insert(b.element);
    };

    std::vector<int> lanes;
    for (std::size_t k = 0; k < config.lanes.size(); ++k) {
        const auto& lane = config.lanes[k];
        if (!lane.active())
            continue;
        lanes.push_back(static_cast<int>(k));
        note_out(*lane.source);
        note_in(*lane.dest);
    }
    std::map<int, std::string> tap_name;
    for (const auto& tap : config.taps) {
        auto b = machine::out_row_binding(spec, tap.out_row);
        used_int.insert(b.element);
        tap_name.emplace(b.element, tap.name);
    }

    std::map<int, int> state_of;  // integrator slot -> model state
    for (int slot : used_int) {
        state_of[slot] = static_cast<int>(m.integrators_.size());
        m.integrators_.push_back(slot);
        m.integrator_out_row_.push_back(spec.integrator_out_row(slot));
        auto it = tap_name.find(slot);
        m.state_names_.push_back(it != tap_name.end() ? it->second : "int" + std::to_string(slot));
    }
    m.integrator_in_.resize(m.integrators_.size());

    // Multiplier dependencies: lanes from one multiplier's output into another's inputs.
    std::map<int, std::vector<DynamicsModel::LaneTerm>> mul_a, mul_b;
    std::map<int, std::set<int>> deps;
    for (int slot : used_mul)
        deps[slot];
    for (int k : lanes) {
        const auto& lane = config.lanes[static_cast<std::size_t>(k)];
        double w = machine::decode(lane.coeff);
        if (!exact_weights.empty() && exact_weights[static_cast<std::size_t>(k)])
            w = *exact_weights[static_cast<std::size_t>(k)];
        DynamicsModel::LaneTerm term{k, *lane.source, w};
        auto dst = machine::in_row_binding(spec, *lane.dest);
        switch (dst.role) {
        case RowRole::IntegratorIn:
            m.integrator_in_[static_cast<std::size_t>(state_of.at(dst.element))].push_back(term);
            break;
        case RowRole::MulA:
        case RowRole::MulB: {
            (dst.role == RowRole::MulA ? mul_a : mul_b)[dst.element].push_back(term);
            auto src = machine::out_row_binding(spec, *lane.source);
            if (src.role == RowRole::MultiplierOut)
                deps[dst.element].insert(src.element);
            break;
        }
        default:
            throw Error("lane " + std::to_string(k) + " targets an unbound row");
        }
    }

    // Kahn's algorithm, lowest slot first among the ready ones.
    std::map<int, int> pending;
    std::map<int, std::vector<int>> users;
    for (const auto& [slot, ds] : deps) {
        pending[slot] = static_cast<int>(ds.size());
        for (int d : ds)
            users[d].push_back(slot);
    }
    std::set<int> ready;
    for (const auto& [slot, n] : pending)
        if (n == 0)
            ready.insert(slot);
    while (!ready.empty()) {
        int slot = *ready.begin();
        ready.erase(ready.begin());
        m.multipliers_.push_back(slot);
        for (int u : users[slot])
            if (--pending[u] == 0)
                ready.insert(u);
    }
    if (m.multipliers_.size() != deps.size()) {
        std::string cycle;
        for (const auto& [slot, n] : pending)
            if (n > 0)
                cycle += " mul" + std::to_string(slot);
        throw AlgebraicLoop("multiplier loop without an integrator:" + cycle);
    }
    for (int slot : m.multipliers_) {
        m.multiplier_out_row_.push_back(spec.multiplier_out_row(slot));
        m.mul_a_.push_back(mul_a[slot]);
        m.mul_b_.push_back(mul_b[slot]);
    }

    m.element_names_ = m.state_names_;
    for (int slot : m.multipliers_)
        m.element_names_.push_back("mul" + std::to_string(slot));
    if (used_const) {
        m.const_row_ = spec.const_out_row();
        m.element_names_.push_back("const");
    }
    return m;
}

void DynamicsModel::evaluate(std::span<const double> x, std::span<double> dx, std::optional<double> clip,
                             std::span<std::uint8_t> clipped) const
{
    // Scratch row voltages; thread-local keeps evaluate() const and reentrant.
    thread_local std::vector<double> out;
    out.assign(static_cast<std::size_t>(out_rows_), 0.0);

    const std::size_t n = integrators_.size();
    for (std::size_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(integrator_out_row_[i])] = saturate(x[i], clip, clipped, i);
    std::size_t element = n;
    std::size_t const_element = n + multipliers_.size();
    if (const_row_ >= 0)
        out[static_cast<std::size_t>(const_row_)] = saturate(1.0, clip, clipped, const_element);

    auto row_sum = [&](const std::vector<LaneTerm>& terms) {
        double s = 0.0;
        for (const auto& t : terms)
            s += t.weight * out[static_cast<std::size_t>(t.out_row)];
        return s;
    };

    for (std::size_t j = 0; j < multipliers_.size(); ++j, ++element) {
        double a = row_sum(mul_a_[j]);
        double b = row_sum(mul_b_[j]);
        out[static_cast<std::size_t>(multiplier_out_row_[j])] = saturate(a * b, clip, clipped, element);
    }
    for (std::size_t i = 0; i < n; ++i)
        dx[i] = row_sum(integrator_in_[i]);
}

std::vector<double> DynamicsModel::lane_currents(std::span<const double> x) const
{
    // Recompute row voltages the same way evaluate() does, then collect per-lane products.
    std::vector<double> out(static_cast<std::size_t>(out_rows_), 0.0);
    for (std::size_t i = 0; i < integrators_.size(); ++i)
        out[static_cast<std::size_t>(integrator_out_row_[i])] = x[i];
    if (const_row_ >= 0)
        out[static_cast<std::size_t>(const_row_)] = 1.0;
    auto row_sum = [&](const std::vector<LaneTerm>& terms) {
        double s = 0.0;
        for (const auto& t : terms)
            s += t.weight * out[static_cast<std::size_t>(t.out_row)];
        return s;
    };
    for (std::size_t j = 0; j < multipliers_.size(); ++j)
        out[static_cast<std::size_t>(multiplier_out_row_[j])] = row_sum(mul_a_[j]) * row_sum(mul_b_[j]);

    std::map<int, double> current;
    auto collect = [&](const std::vector<LaneTerm>& terms) {
        for (const auto& t : terms)
            current[t.lane] = t.weight * out[static_cast<std::size_t>(t.out_row)];
    };
    for (const auto& terms : mul_a_)
        collect(terms);
    for (const auto& terms : mul_b_)
        collect(terms);
    for (const auto& terms : integrator_in_)
        collect(terms);
    std::vector<double> result;
    for (const auto& [lane, c] : current)
        result.push_back(c);
    return result;
}

std::vector<int> DynamicsModel::active_lanes() const
{
    std::set<int> lanes;
    for (const auto* group : {&mul_a_, &mul_b_, &integrator_in_})
        for (const auto& terms : *group)
            for (const auto& t : terms)
                lanes.insert(t.lane);
    return {lanes.begin(), lanes.end()};
}

std::vector<double> DynamicsModel::initial_state(const MachineConfig& config) const
{
    std::vector<double> x;
    for (int slot : integrators_)
        x.push_back(config.initial_states.at(static_cast<std::size_t>(slot)));
    return x;
}

// ---------------------------------------------------------------------------
// Reference path

ReferenceSystem::ReferenceSystem(circuit::PolySystem system) : system_(std::move(system))
{
    for (const auto& rhs : system_.rhs) {
        std::vector<Term> terms;
        for (const auto& t : rhs) {
            Term term{t.weight, {}};
            for (const auto& f : t.monomial.factors) {
                int idx = system_.index_of(f);
                if (idx < 0)
                    throw Error("term refers to unknown state '" + f + "'");
                term.factors.push_back(idx);
            }
            terms.push_back(std::move(term));
        }
        terms_.push_back(std::move(terms));
    }
}

void ReferenceSystem::evaluate(std::span<const double> x, std::span<double> dx, std::optional<double> clip,
                               std::span<std::uint8_t> clipped) const
{
    thread_local std::vector<double> v;
    v.assign(x.begin(), x.end());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = saturate(v[i], clip, clipped, i);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        double s = 0.0;
        for (const auto& t : terms_[i]) {
            // Same association as a multiplier chain: ((a*b)*c)..., then the weight.
            double p = 1.0;
            if (!t.factors.empty()) {
                p = v[static_cast<std::size_t>(t.factors[0])];
                for (std::size_t f = 1; f < t.factors.size(); ++f)
                    p *= v[static_cast<std::size_t>(t.factors[f])];
            }
            s += t.weight * p;
        }
        dx[i] = s;
    }
}

// ---------------------------------------------------------------------------
// Integration

Trace run(const System& system, std::span<const double> initial, const SimSettings& settings)
{
    const std::size_t n = system.dimension();
    if (initial.size() != n)
        throw Error("initial state has " + std::to_string(initial.size()) + " values, system has " +
                    std::to_string(n));
    if (!(settings.dt > 0.0) || !std::isfinite(settings.dt))
        throw Error("dt must be positive");
    if (!(settings.t_end >= 0.0) || !std::isfinite(settings.t_end))
        throw Error("t_end must be non-negative");
    if (settings.record_stride < 1)
        throw Error("record stride must be at least 1");
    if (settings.clip && !(*settings.clip > 0.0))
        throw Error("clip threshold must be positive");

    const double ratio = settings.t_end / settings.dt;
    std::int64_t full_steps = std::llround(ratio);
    double partial = 0.0;
    if (std::abs(ratio - static_cast<double>(full_steps)) > 1e-9 * std::max(1.0, ratio)) {
        full_steps = static_cast<std::int64_t>(std::floor(ratio));
        partial = settings.t_end - static_cast<double>(full_steps) * settings.dt;
    }
    if (full_steps + (partial > 0 ? 1 : 0) > settings.max_steps)
        throw Error("t_end / dt exceeds the step cap of " + std::to_string(settings.max_steps));

    const auto& elements = system.element_names();
    Trace trace;
    trace.names = system.state_names();
    trace.signals.resize(n);

    std::vector<double> x(initial.begin(), initial.end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<std::uint8_t> clipped(elements.size(), 0);

    auto record = [&](double t) {
        trace.times.push_back(t);
        for (std::size_t i = 0; i < n; ++i)
            trace.signals[i].push_back(x[i]);
    };

    auto step = [&](double t, double h) {
        std::fill(clipped.begin(), clipped.end(), 0);
        if (settings.method == Method::Euler) {
            system.evaluate(x, k1, settings.clip, clipped);
            for (std::size_t i = 0; i < n; ++i)
                x[i] += h * k1[i];
        } else {
            const double h2 = h / 2;
            system.evaluate(x, k1, settings.clip, clipped);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = x[i] + h2 * k1[i];
            system.evaluate(tmp, k2, settings.clip, clipped);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = x[i] + h2 * k2[i];
            system.evaluate(tmp, k3, settings.clip, clipped);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = x[i] + h * k3[i];
            system.evaluate(tmp, k4, settings.clip, clipped);
            for (std::size_t i = 0; i < n; ++i)
                x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(x[i]))
                throw NonFinite(t + h, trace.names[i]);
            // Integrators saturate at the rail as well.
            if (settings.clip && std::abs(x[i]) > *settings.clip) {
                x[i] = std::copysign(*settings.clip, x[i]);
                clipped[i] = 1;
            }
        }
        for (std::size_t e = 0; e < clipped.size(); ++e)
            if (clipped[e])
                trace.clip_events.push_back({t, elements[e]});
    };

    record(0.0);
    for (std::int64_t k = 1; k <= full_steps; ++k) {
        step(static_cast<double>(k - 1) * settings.dt, settings.dt);
        const bool last = k == full_steps && partial == 0.0;
        if (last)
            record(settings.t_end);
        else if (k % settings.record_stride == 0)
            record(static_cast<double>(k) * settings.dt);
    }
    if (partial > 0.0) {
        step(static_cast<double>(full_steps) * settings.dt, partial);
        record(settings.t_end);
    }
    return trace;
}

Trace run_reference(const circuit::PolySystem& system, const SimSettings& settings)
{
    ReferenceSystem ref(system);
    return run(ref, system.initial, settings);
}

double max_abs_deviation(const Trace& a, const Trace& b, std::optional<double> t_max)
{
    if (a.times.size() != b.times.size())
        throw Error("traces have different sample counts");
    double m = 0.0;
    for (std::size_t i = 0; i < a.names.size(); ++i) {
        auto it = std::find(b.names.begin(), b.names.end(), a.names[i]);
        if (it == b.names.end())
            continue;
        const auto& sb = b.signals[static_cast<std::size_t>(it - b.names.begin())];
        for (std::size_t s = 0; s < a.times.size(); ++s) {
            if (t_max && a.times[s] > *t_max)
                break;
            m = std::max(m, std::abs(a.signals[i][s] - sb[s]));
        }
    }
    return m;
}

TraceSelection selection_for(const dsl::Program& program)
{
    TraceSelection sel;
    sel.outputs = program.outputs;
    for (const auto& p : program.plots)
        sel.plots.emplace_back(p.x, p.y);
    return sel;
}

namespace {

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns, std::size_t rows)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << (c ? "," : "") << format_17g((*columns[c])[r]);
        out << '\n';
    }
    if (!out)
        throw Error("write failed for " + path.string());
}

} // namespace

std::vector<std::filesystem::path> emit_traces(const Trace& trace, const TraceSelection& selection,
                                               const std::filesystem::path& out_dir, const std::string& prefix)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    std::vector<std::string> header{"t"};
    std::vector<const std::vector<double>*> columns{&trace.times};
    for (const auto& name : selection.outputs) {
        header.push_back(name);
        columns.push_back(&trace.signal(name));
    }
    auto out_path = out_dir / (prefix + "out.csv");
    write_csv(out_path, header, columns, trace.times.size());
    written.push_back(out_path);

    for (const auto& [x, y] : selection.plots) {
        auto path = out_dir / (prefix + "plot_" + x + "_" + y + ".csv");
        write_csv(path, {x, y}, {&trace.signal(x), &trace.signal(y)}, trace.times.size());
        written.push_back(path);
    }
    return written;
}

std::vector<std::filesystem::path> emit_traces(const Trace& trace, const dsl::Program& program,
                                               const std::filesystem::path& out_dir, const std::string& prefix)
{
    return emit_traces(trace, selection_for(program), out_dir, prefix);
}

} // namespace analogc::sim
