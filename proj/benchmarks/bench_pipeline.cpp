#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "analogc/bitstream.hpp"
#include "analogc/circuit.hpp"
#include "analogc/clos.hpp"
#include "analogc/dsl.hpp"
#include "analogc/place_route.hpp"
#include "analogc/simulator.hpp"

using namespace analogc;

namespace {

std::string lorenz_source()
{
    std::ifstream in(std::string(ANALOGC_CORPUS_DIR) + "/lorenz.odedsl");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Ring of states, three terms each, one product per state.
std::string ring_source(int states)
{
    std::ostringstream src;
    for (int i = 0; i < states; ++i)
        src << "fn X" << i << "(t);\n";
    for (int i = 0; i < states; ++i) {
        src << "let diff[X" << i << ", t] = -0.5 * X" << i << " + 0.37 * X" << (i + 1) % states << " - 1.25 * X" << i
            << " * X" << (i + 2) % states << ";\n";
        src << "let X" << i << "(t: 0) = 0.01;\n";
    }
    return src.str();
}

place_route::Placement route(const std::string& src, const machine::MachineSpec& spec)
{
    return place_route::place_and_route(circuit::build_circuit(circuit::normalize(dsl::compile_source(src))), spec);
}

} // namespace

static void BM_CompileLorenz(benchmark::State& state)
{
    const std::string src = lorenz_source();
    for (auto _ : state)
        benchmark::DoNotOptimize(route(src, machine::lucidac_spec()));
}
BENCHMARK(BM_CompileLorenz);

static void BM_RouteRedac(benchmark::State& state)
{
    const std::string src = ring_source(static_cast<int>(state.range(0)));
    const auto spec = machine::redac_tile_spec();
    for (auto _ : state)
        benchmark::DoNotOptimize(route(src, spec));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RouteRedac)->Arg(50)->Arg(200)->Arg(500)->Complexity();

static void BM_SimulateLorenz(benchmark::State& state)
{
    auto p = route(lorenz_source(), machine::lucidac_spec());
    auto model = sim::build_dynamics(p.config);
    sim::SimSettings s;
    s.t_end = 10.0;
    s.record_stride = 100;
    for (auto _ : state)
        benchmark::DoNotOptimize(sim::run(model, model.initial_state(p.config), s));
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_SimulateLorenz);

static void BM_EncodeRedacImage(benchmark::State& state)
{
    auto p = route(ring_source(500), machine::redac_tile_spec());
    for (auto _ : state)
        benchmark::DoNotOptimize(bitstream::encode(p.config));
}
BENCHMARK(BM_EncodeRedacImage);

static void BM_BlockingExperiment(benchmark::State& state)
{
    const auto spec = clos::simstar_spec();
    for (auto _ : state)
        benchmark::DoNotOptimize(clos::blocking_experiment(spec, 320, 100, 42));
}
BENCHMARK(BM_BlockingExperiment);
BENCHMARK_MAIN();
