// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "dinl/engine.hpp"
#include "dinl/gate.hpp"
#include "dinl/harness.hpp"
#include "dinl/info.hpp"
#include "support/oracles.hpp"
#include "support/random_graphs.hpp"

using namespace dinl;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kTopologyBudgetMs = 1.0;
constexpr std::size_t kOracleGraphs = 250;
constexpr double kOracleRelTol = 1e-12;
constexpr double kOracleBudgetS = 5.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradBudgetS = 10.0;
constexpr double kDenseAccLo = 68.0;
constexpr double kDenseAccHi = 80.0;
constexpr double kAccGapFloor = 2.0;
constexpr double kRateRatio = 0.7;
constexpr double kExperimentBudgetS = 120.0;
constexpr double kIdentityTol = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& err) {
        o = {false, std::string("exception: ") + err.what()};
    }
    const double s = seconds_since(t0);
    if (!o.pass) ++failures;
    std::printf("[%s] %d %-34s %8.3fs  %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), s, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

GraphSpec reference() { return load_graph_spec(std::string(DINL_DATA_DIR) + "/paper_topology.json"); }

ExperimentConfig defaults() { return load_config(std::string(DINL_CONFIG_DIR) + "/defaults.json"); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome topology_exact(const GraphSpec& spec) {
    const auto t0 = Clock::now();
    const auto tree = build_spt(spec.graph, spec.weights);
    const double ms = 1e3 * seconds_since(t0);
    const std::vector<std::pair<NodeId, NodeId>> want{{0, 6}, {1, 6}, {2, 7}, {3, 6}, {4, 6}, {5, 7}, {6, 9}, {7, 9}};
    bool ok = tree.size() == want.size();
    for (std::size_t k = 0; ok && k < want.size(); ++k)
        ok = tree.edges()[k].from == want[k].first && tree.edges()[k].to == want[k].second;
    return {ok && ms < kTopologyBudgetMs, fmt("%.0f tree edges, built in %.3f ms", double(tree.size()), ms)};
}

Outcome exchange_exact(const GraphSpec& spec) {
    const auto tree = build_spt(spec.graph, spec.weights);
    const auto full = full_topology(spec.graph);
    const auto s = spec.weights.bits_per_scalar;
    const std::uint64_t bt = exchange_bits(tree, s, 120), bd = exchange_bits(full, s, 120);
    std::uint64_t wt = 0, wd = 0;
    for (const Edge& e : tree.edges()) wt += e.attr.width;
    for (const Edge& e : full.edges()) wd += e.attr.width;
    const double gain = exchange_gain(tree, full);
    const bool ok = bt == 184320u && bd == 622080u && bt == 2 * s * 120 * wt && bd == 2 * s * 120 * wd &&
                    full.size() == 27 && std::round(gain * 1e4) == 7037.0;
    return {ok, fmt("B_spt=%.0f B_dense=%.0f G_B=%.2f%%", double(bt), double(bd), 100 * gain)};
}

Outcome dijkstra_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    std::size_t checked = 0, bad = 0;
    for (std::size_t g = 0; g < kOracleGraphs; ++g) {
        const auto dag = testing::random_dag(rng);
        const auto sp = reverse_dijkstra(dag.graph, dag.weights);
        for (NodeId j : dag.graph.data_nodes()) {
            ++checked;
            const double truth = oracle::min_path_cost(dag.plain, j, dag.graph.fusion());
            if (oracle::relative_error(sp.distance[j], truth, 1.0) > kOracleRelTol) ++bad;
        }
    }
    const double s = seconds_since(t0);
    return {bad == 0 && s < kOracleBudgetS,
            fmt("%.0f graphs, %.0f data nodes, %.0f mismatches", double(kOracleGraphs), double(checked), double(bad))};
}

Outcome gradient_suite(const GraphSpec& spec) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    // Full network on the reference tree, loss + λ·rate with frozen noise.
    TaskSpec ts;
    const auto task = generate(ts);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    const Batch batch = make_batch(task.train, rows);
    for (const auto& topo : {build_spt(spec.graph, spec.weights), full_topology(spec.graph)}) {
        InlNetwork net(spec.graph, topo, Architecture{}, 31);
        std::vector<Tensor2> noise;
        Rng rng(5);
        for (std::size_t j = 0; j < batch.sensor_inputs.size(); ++j) noise.push_back(standard_normal(6, 3, rng));
        const double lambda = 0.05;
        auto objective = [&] {
            const auto f = net.forward_wave(batch, GateMode::frozen, &noise);
            return bce_with_logits(f.logits, batch.labels).mean_nll + lambda * f.rate;
        };
        net.zero_grad();
        auto f = net.forward_wave(batch, GateMode::frozen, &noise);
        net.backward_wave(bce_with_logits(f.logits, batch.labels).error, lambda, f.trace);
        for (const ParamRef& p : net.params()) {
            const std::vector<double> g(p.grad.begin(), p.grad.end());
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                worst = std::max(worst, oracle::relative_error(g[k], oracle::central_difference(objective, p.value[k]), 1e-6));
                ++checked;
            }
        }
    }
    const double s = seconds_since(t0);
    return {worst < kGradRelTol && s < kGradBudgetS,
            fmt("%.0f parameters, worst rel err %.2e", double(checked), worst)};
}

struct TrafficAudit {
    std::mutex mu;
    std::size_t steps = 0;
    std::size_t violations = 0;
    std::map<std::pair<int, std::uint64_t>, std::uint64_t> bits;  // (scheme, seed) → total bits
    std::map<std::pair<int, std::uint64_t>, std::uint64_t> expected_per_epoch;
};

struct ExperimentResult {
    std::vector<ExperimentRecord> records;
    Summary summary;
};

}  // namespace

int main() {
    const auto spec = reference();
    auto cfg = defaults();
    std::printf("acceptance: %zu seeds, %zu epochs, noise %.2f, rate lambda %g\n", cfg.seeds, cfg.train.epochs,
                cfg.task.noise_std, cfg.rate_lambda);

    report(1, "topology exactness", [&] { return topology_exact(spec); });
    report(2, "exchange exactness", [&] { return exchange_exact(spec); });
    report(3, "dijkstra vs brute force", [] { return dijkstra_oracle(); });
    report(4, "gradient suite", [&] { return gradient_suite(spec); });

    TrafficAudit audit;
    ExperimentResult exp;
    double exp_seconds = 0.0;
    const std::vector<Scheme> all{Scheme::dense, Scheme::dijkstra, Scheme::dijkstra_rate};
    const TraceHook hook = [&](Scheme s, std::uint64_t seed, const TrainingTopology& topo, const WaveTrace& trace) {
        bool ok = true;
        try {
            verify_edge_discipline(trace, topo);
        } catch (const EngineError&) {
            ok = false;
        }
        const std::uint64_t b = trace.total_scalars() * spec.weights.bits_per_scalar;
        std::lock_guard lock(audit.mu);
        ++audit.steps;
        if (!ok) ++audit.violations;
        const auto key = std::make_pair(static_cast<int>(s), seed);
        audit.bits[key] += b;
        audit.expected_per_epoch[key] = exchange_bits(topo, spec.weights.bits_per_scalar, cfg.task.train_size);
    };
    try {
        const auto t0 = Clock::now();
        exp.records = run_experiment(spec, cfg, all, hook);
        exp.summary = summarize(exp.records, all);
        exp_seconds = seconds_since(t0);
    } catch (const std::exception& err) {
        std::printf("experiment failed: %s\n", err.what());
    }

    report(5, "edge discipline and traffic", [&] {
        std::size_t mismatched = 0;
        for (const auto& [key, total] : audit.bits)
            if (total != audit.expected_per_epoch[key] * cfg.train.epochs) ++mismatched;
        const bool ok = audit.steps > 0 && audit.violations == 0 && mismatched == 0 &&
                        audit.bits.size() == all.size() * cfg.seeds;
        return Outcome{ok, fmt("%.0f steps, %.0f violations, %.0f runs with bit mismatch", double(audit.steps),
                               double(audit.violations), double(mismatched))};
    });

    report(6, "three-scheme experiment", [&] {
        const auto* d = exp.summary.find(Scheme::dense);
        const auto* t = exp.summary.find(Scheme::dijkstra);
        const auto* r = exp.summary.find(Scheme::dijkstra_rate);
        if (!d || !t || !r) return Outcome{false, "missing scheme rows"};
        const double gap = std::abs(d->accuracy.mean - t->accuracy.mean);
        const bool ok = d->accuracy.mean >= kDenseAccLo && d->accuracy.mean <= kDenseAccHi &&
                        gap <= std::max(kAccGapFloor, d->accuracy.std) && r->rate.mean <= kRateRatio * t->rate.mean &&
                        exp_seconds < kExperimentBudgetS;
        std::ostringstream detail;
        detail << std::fixed << std::setprecision(2) << "dense acc " << d->accuracy.mean << "±" << d->accuracy.std
               << ", tree gap " << gap << ", rate " << r->rate.mean << " vs " << t->rate.mean << " (G_R "
               << 100 * exp.summary.rate_reduction.value_or(0.0) << "%), " << std::setprecision(1) << exp_seconds
               << "s";
        return Outcome{ok, detail.str()};
    });

    report(7, "rate falls as lambda grows", [&] {
        const std::vector<double> grid{0.0, 1e-3, 1e-2, 1e-1};
        auto front = sweep_lambda(spec, cfg, grid);
        std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
        bool ok = front.size() == grid.size();
        std::string detail = "rates:";
        for (std::size_t k = 0; k < front.size(); ++k) {
            detail += fmt(" %.3f", front[k].rate);
            if (k > 0 && !(front[k].rate <= front[k - 1].rate)) ok = false;
        }
        return Outcome{ok, detail};
    });

    report(8, "reproducible output files", [&] {
        const auto base = fs::temp_directory_path() / "dinl_acceptance";
        fs::remove_all(base);
        auto once = [&](std::size_t workers, const std::string& name) {
            auto c = cfg;
            c.workers = workers;
            const auto recs = run_experiment(spec, c, all);
            return emit_results(recs, summarize(recs, all), sweep_lambda(spec, c, {0.0, 1e-2}),
                                (base / name).string());
        };
        const auto a = once(1, "a");
        const auto b = once(0, "b");
        std::size_t differ = 0;
        for (auto [x, y] : {std::pair{a.records, b.records}, {a.summary, b.summary}, {a.frontier, b.frontier},
                            {a.exchange, b.exchange}})
            if (slurp(x) != slurp(y) || slurp(x).empty()) ++differ;
        fs::remove_all(base);
        return Outcome{differ == 0, fmt("%.0f of 4 files differ", double(differ))};
    });

    report(9, "KL and MI identities", [] {
        double worst = 0.0;
        std::mt19937_64 rng(13);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int k = 0; k < 200; ++k) {
            Tensor2 mu(1, 3), lv(1, 3);
            double direct = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                mu(0, i) = n(rng);
                lv(0, i) = n(rng);
                const double var = std::exp(lv(0, i));
                direct += 0.5 * (var + mu(0, i) * mu(0, i) - 1.0 - std::log(var));
            }
            worst = std::max(worst, std::abs(gaussian_kl(mu, lv)[0] - direct));
        }
        worst = std::max(worst, std::abs(gaussian_kl(Tensor2(1, 4), Tensor2(1, 4))[0]));
        for (int k = 0; k < 200; ++k) {
            Tensor2 t(3, 3);
            for (double& v : t.values()) v = static_cast<double>(rng() % 7);
            t(0, 0) += 1.0;
            const double total = std::accumulate(t.values().begin(), t.values().end(), 0.0);
            std::vector<double> px(3, 0.0), py(3, 0.0);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    px[i] += t(i, j) / total;
                    py[j] += t(i, j) / total;
                }
            double direct = 0.0;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    const double p = t(i, j) / total;
                    if (p > 0) direct += p * std::log(p / (px[i] * py[j]));
                }
            worst = std::max(worst, std::abs(empirical_mi(t) - std::max(direct, 0.0)));
        }
        // Independence and a perfect copy of a fair bit.
        worst = std::max(worst, std::abs(empirical_mi(Tensor2(2, 3, 4.0))));
        worst = std::max(worst, std::abs(empirical_mi(Tensor2(2, 2, std::vector<double>{3, 0, 0, 3})) - std::log(2.0)));
        return Outcome{worst <= kIdentityTol, fmt("worst abs deviation %.2e", worst)};
    });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
