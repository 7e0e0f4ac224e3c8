#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "analogc/bitstream.hpp"
#include "analogc/circuit.hpp"
#include "analogc/clos.hpp"
#include "analogc/dsl.hpp"
#include "analogc/format.hpp"
#include "analogc/machine.hpp"
#include "analogc/place_route.hpp"
#include "analogc/simulator.hpp"

namespace analogc::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string version_text()
{
    return std::string("analogc ") + kToolVersion + " (config image format " +
           std::to_string(bitstream::kImageVersion) + ", delta format " + std::to_string(bitstream::kDeltaVersion) +
           ")";
}

/// A failure already reported with context; carries only the exit path.
struct Failure {
    std::string message;
    bool located = false;  // message already starts with file:line:col
};

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Failure{path + ": cannot open file"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

dsl::Program load_program(const std::string& path)
{
    std::string text = read_text(path);
    try {
        return dsl::compile_source(text);
    } catch (const SourceError& e) {
        throw Failure{path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) +
                      ": error: " + e.message(), true};
    }
}

int parse_int_field(const std::string& s, const std::string& whole)
{
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 0)
        throw Failure{"bad machine spec '" + whole + "'"};
    return v;
}

machine::MachineSpec parse_machine(const std::string& text)
{
    if (text == "lucidac")
        return machine::lucidac_spec();
    if (text == "redac")
        return machine::redac_tile_spec();
    const std::string prefix = "custom:";
    if (text.rfind(prefix, 0) != 0)
        throw Failure{"unknown machine '" + text + "' (lucidac, redac or custom:i=<n>,m=<n>,l=<n>)"};
    int i = -1, m = -1, l = -1;
    std::stringstream ss(text.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw Failure{"bad machine spec '" + text + "'"};
        std::string key = item.substr(0, eq);
        int v = parse_int_field(item.substr(eq + 1), text);
        if (key == "i")
            i = v;
        else if (key == "m")
            m = v;
        else if (key == "l")
            l = v;
        else
            throw Failure{"bad machine spec '" + text + "': unknown key '" + key + "'"};
    }
    if (i < 0 || m < 0 || l < 0)
        throw Failure{"bad machine spec '" + text + "': need i, m and l"};
    return machine::custom_spec(i, m, l);
}

/// Explicit --machine wins; otherwise match the image length against the known profiles.
machine::MachineSpec spec_for_image(const bitstream::Bytes& image, const std::string& machine_flag)
{
    if (!machine_flag.empty())
        return parse_machine(machine_flag);
    for (const auto& spec : {machine::lucidac_spec(), machine::redac_tile_spec()})
        if (image.size() == bitstream::image_size(spec))
            return spec;
    throw Failure{"cannot infer machine from a " + std::to_string(image.size()) +
                  "-byte image; pass --machine"};
}

machine::MachineConfig load_config(const std::string& path, const std::string& machine_flag)
{
    bitstream::Bytes image = bitstream::read_file(path);
    machine::MachineSpec spec = spec_for_image(image, machine_flag);
    try {
        machine::MachineConfig config = bitstream::decode(image, spec);
        auto violations = machine::validate_config(config);
        if (!violations.empty())
            throw Failure{path + ": invalid configuration: " + machine::to_string(violations.front())};
        return config;
    } catch (const bitstream::FormatError& e) {
        throw Failure{path + ": " + e.what()};
    }
}

bool looks_like_image(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::memcmp(magic, "ACFG", 4) == 0;
}

struct Pipeline {
    dsl::Program program;
    circuit::PolySystem system;
    circuit::CircuitGraph graph;
    place_route::Placement placement;
};

Pipeline compile_and_route(const std::string& path, const machine::MachineSpec& spec)
{
    Pipeline p;
    p.program = load_program(path);
    p.system = circuit::normalize(p.program);
    p.graph = circuit::build_circuit(p.system);
    circuit::detect_algebraic_loops(p.graph);
    p.placement = place_route::place_and_route(p.graph, spec);
    return p;
}

// --- subcommands -----------------------------------------------------------

struct CompileArgs {
    std::string source;
    bool emit_ir = false;
    std::string output;
};

int cmd_compile(const CompileArgs& a, std::ostream& out)
{
    dsl::Program program = load_program(a.source);
    circuit::PolySystem system = circuit::normalize(program);
    circuit::CircuitGraph graph = circuit::build_circuit(system);
    circuit::detect_algebraic_loops(graph);
    std::string ir = circuit::dump(graph);
    if (!a.output.empty()) {
        std::ofstream f(a.output, std::ios::binary | std::ios::trunc);
        if (!f || !(f << ir))
            throw Failure{a.output + ": cannot write"};
    }
    if (a.emit_ir && a.output.empty())
        out << ir;
    if (!a.emit_ir)
        out << "integrators: " << graph.count(circuit::NodeKind::Integrator)
            << "\nmultipliers: " << graph.count(circuit::NodeKind::Multiplier)
            << "\nconst: " << graph.count(circuit::NodeKind::ConstOne) << "\nedges: " << graph.edges.size() << '\n';
    return 0;
}

struct RouteArgs {
    std::string source;
    std::string machine = "lucidac";
    std::string output;
    bool report = false;
    bool emit_config = false;
};

int cmd_route(const RouteArgs& a, std::ostream& out)
{
    Pipeline p = compile_and_route(a.source, parse_machine(a.machine));
    if (!a.output.empty())
        bitstream::write_file(a.output, bitstream::encode(p.placement.config));
    if (a.report || !a.emit_config)
        out << place_route::to_text(p.placement.report);
    if (a.emit_config)
        out << machine::dump(p.placement.config);
    return 0;
}

struct SimulateArgs {
    std::string input;
    std::string machine;
    double dt = 1e-3;
    double t_end = 1.0;
    std::string method = "rk4";
    std::string clip = "1.0";
    int stride = 1;
    std::string quantize = "on";
    bool reference = false;
    std::string out_dir = ".";
    std::vector<double> initial;
};

std::optional<double> parse_clip(const std::string& text)
{
    if (text == "off")
        return std::nullopt;
    double v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !(v > 0))
        throw Failure{"--clip expects a positive number or 'off', got '" + text + "'"};
    return v;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out)
{
    sim::SimSettings settings;
    settings.dt = a.dt;
    settings.t_end = a.t_end;
    settings.method = a.method == "euler" ? sim::Method::Euler : sim::Method::RK4;
    settings.clip = parse_clip(a.clip);
    settings.record_stride = a.stride;
    const bool quantize = a.quantize == "on";

    if (looks_like_image(a.input)) {
        if (a.reference)
            throw Failure{"--reference needs a source program, not a configuration image"};
        machine::MachineConfig config = load_config(a.input, a.machine);
        sim::DynamicsModel model = sim::build_dynamics(config);
        std::vector<double> initial = model.initial_state(config);
        if (!a.initial.empty()) {
            if (a.initial.size() != initial.size())
                throw Failure{"--initial has " + std::to_string(a.initial.size()) + " values, model has " +
                              std::to_string(initial.size()) + " integrators"};
            initial = a.initial;
        }
        sim::Trace trace = sim::run(model, initial, settings);
        sim::TraceSelection sel;
        sel.outputs = trace.names;
        sim::emit_traces(trace, sel, a.out_dir);
        out << "samples: " << trace.times.size() << "\nclip_events: " << trace.clip_events.size() << '\n';
        return 0;
    }

    if (!a.initial.empty())
        throw Failure{"--initial applies to configuration images; programs carry their own initial values"};
    Pipeline p = compile_and_route(a.input, parse_machine(a.machine.empty() ? "lucidac" : a.machine));
    const auto& config = p.placement.config;
    sim::DynamicsModel model =
        quantize ? sim::build_dynamics(config) : sim::build_dynamics(config, p.placement.report.requested_weights);
    sim::Trace trace = sim::run(model, model.initial_state(config), settings);
    sim::emit_traces(trace, p.program, a.out_dir);
    out << "samples: " << trace.times.size() << "\nclip_events: " << trace.clip_events.size() << '\n';

    if (a.reference) {
        sim::Trace ref = sim::run_reference(p.system, settings);
        sim::emit_traces(ref, p.program, a.out_dir, "ref_");
        out << "max_abs_deviation: " << format_real(sim::max_abs_deviation(trace, ref)) << '\n';
    }
    return 0;
}

struct DiffArgs {
    std::string old_path;
    std::string new_path;
    std::string output;
    std::string machine;
};

int cmd_diff(const DiffArgs& a, std::ostream& out)
{
    machine::MachineConfig from = load_config(a.old_path, a.machine);
    machine::MachineConfig to = load_config(a.new_path, a.machine);
    bitstream::DeltaScript script = bitstream::diff(from, to);
    bitstream::write_file(a.output, bitstream::encode_delta(script));
    out << "ops: " << script.ops.size() << '\n';
    return 0;
}

struct ApplyArgs {
    std::string base_path;
    std::string delta_path;
    std::string output;
    std::string machine;
};

int cmd_apply(const ApplyArgs& a, std::ostream& out)
{
    machine::MachineConfig base = load_config(a.base_path, a.machine);
    bitstream::DeltaScript script;
    try {
        script = bitstream::decode_delta(bitstream::read_file(a.delta_path));
    } catch (const bitstream::FormatError& e) {
        throw Failure{a.delta_path + ": " + e.what()};
    }
    machine::MachineConfig result = bitstream::apply(base, script);
    bitstream::write_file(a.output, bitstream::encode(result));
    out << "ops: " << script.ops.size() << '\n';
    return 0;
}

struct FabricArgs {
    std::string spec = "simstar";
    bool count = false;
    bool experiment = false;
    int load = 0;
    int trials = 100;
    std::uint64_t seed = 42;
};

int cmd_fabric(const FabricArgs& a, std::ostream& out)
{
    clos::ParsedFabric fabric = clos::parse_fabric(a.spec);
    if (!a.count && !a.experiment)
        throw Failure{"fabric: pass --count and/or --experiment"};
    if (a.count)
        out << clos::switch_count(fabric.spec) << '\n';
    if (a.experiment) {
        if (fabric.crossbar)
            throw Failure{"fabric: blocking experiments need a three-stage fabric"};
        clos::BlockingStats stats = clos::blocking_experiment(fabric.spec, a.load, a.trials, a.seed);
        out << "blocked_fraction: " << format_real(stats.blocked_fraction) << '\n'
            << "mean_routed: " << format_real(stats.mean_routed) << '\n';
    }
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Compiler, router and simulator for reconfigurable analog computers", "analogc"};
    app.set_version_flag("--version", version_text());
    app.require_subcommand(1);

    CompileArgs compile_args;
    auto* compile = app.add_subcommand("compile", "Parse a program and build its circuit");
    compile->add_option("source", compile_args.source, "Program (.odedsl)")->required();
    compile->add_flag("--emit-ir", compile_args.emit_ir, "Print the circuit text dump");
    compile->add_option("-o,--output", compile_args.output, "Write the circuit dump to a file");

    RouteArgs route_args;
    auto* route = app.add_subcommand("route", "Place and route a program onto a machine");
    route->add_option("source", route_args.source, "Program (.odedsl)")->required();
    route->add_option("--machine", route_args.machine, "lucidac, redac or custom:i=<n>,m=<n>,l=<n>");
    route->add_option("-o,--output", route_args.output, "Configuration image (.acfg)");
    route->add_flag("--report", route_args.report, "Print the resource report (default unless --emit-config)");
    route->add_flag("--emit-config", route_args.emit_config, "Print the lane-by-lane configuration");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Simulate a program or configuration image");
    simulate->add_option("input", sim_args.input, "Program (.odedsl) or configuration image (.acfg)")->required();
    simulate->add_option("--machine", sim_args.machine, "Machine profile");
    simulate->add_option("--dt", sim_args.dt, "Step size (machine time)")->check(CLI::PositiveNumber);
    simulate->add_option("--t-end", sim_args.t_end, "End time")->check(CLI::NonNegativeNumber);
    simulate->add_option("--method", sim_args.method, "rk4 or euler")->check(CLI::IsMember({"rk4", "euler"}));
    simulate->add_option("--clip", sim_args.clip, "Saturation level or 'off'");
    simulate->add_option("--stride", sim_args.stride, "Record every N steps")->check(CLI::PositiveNumber);
    simulate->add_option("--quantize", sim_args.quantize, "on or off")->check(CLI::IsMember({"on", "off"}));
    simulate->add_flag("--reference", sim_args.reference, "Also integrate the unquantized equations");
    simulate->add_option("--out-dir", sim_args.out_dir, "Directory for CSV output");
    simulate->add_option("--initial", sim_args.initial, "Initial integrator values for an image")->delimiter(',');

    DiffArgs diff_args;
    auto* diff = app.add_subcommand("diff", "Write the delta script between two images");
    diff->add_option("old", diff_args.old_path, "Old image")->required();
    diff->add_option("new", diff_args.new_path, "New image")->required();
    diff->add_option("-o,--output", diff_args.output, "Delta script (.acdl)")->required();
    diff->add_option("--machine", diff_args.machine, "Machine profile (inferred from size if omitted)");

    ApplyArgs apply_args;
    auto* apply = app.add_subcommand("apply", "Apply a delta script to an image");
    apply->add_option("base", apply_args.base_path, "Base image")->required();
    apply->add_option("delta", apply_args.delta_path, "Delta script")->required();
    apply->add_option("-o,--output", apply_args.output, "Resulting image")->required();
    apply->add_option("--machine", apply_args.machine, "Machine profile (inferred from size if omitted)");

    FabricArgs fabric_args;
    auto* fabric = app.add_subcommand("fabric", "Switch-fabric economics and blocking experiments");
    fabric->add_option("--spec", fabric_args.spec, "simstar, crossbar:<n>x<m> or custom:<b>x<n>x<m>,...");
    fabric->add_flag("--count", fabric_args.count, "Print the switch count");
    fabric->add_flag("--experiment", fabric_args.experiment, "Run a Monte Carlo blocking experiment");
    fabric->add_option("--load", fabric_args.load, "Requests per trial")->check(CLI::NonNegativeNumber);
    fabric->add_option("--trials", fabric_args.trials, "Number of trials")->check(CLI::PositiveNumber);
    fabric->add_option("--seed", fabric_args.seed, "Random seed");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*compile)
            return cmd_compile(compile_args, out);
        if (*route)
            return cmd_route(route_args, out);
        if (*simulate)
            return cmd_simulate(sim_args, out);
        if (*diff)
            return cmd_diff(diff_args, out);
        if (*apply)
            return cmd_apply(apply_args, out);
        if (*fabric)
            return cmd_fabric(fabric_args, out);
    } catch (const Failure& f) {
        err << (f.located ? "" : "error: ") << f.message << '\n';
        return 1;
    } catch (const sim::NonFinite& e) {
        err << "error: simulation diverged: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace analogc::cli
