// dinl: command-line driver for pruning, training runs and λ sweeps.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dinl/graph.hpp"
#include "dinl/harness.hpp"
#include "dinl/task.hpp"

namespace {

struct CommonOptions {
    std::string config = DINL_DEFAULT_CONFIG;
    std::string topology;
    std::size_t seeds = 0;
    std::uint64_t master_seed = 0;
    bool master_seed_set = false;
    std::size_t workers = 0;
    bool workers_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--topology", o.topology, "Topology file; overrides the config")->check(CLI::ExistingFile);
    cmd->add_option("--seeds", o.seeds, "Number of seeds (0..n-1); overrides the config");
    cmd->add_option("--master-seed", o.master_seed, "Master seed offsetting every random stream")
        ->each([&o](const std::string&) { o.master_seed_set = true; });
    cmd->add_option("--workers", o.workers, "Parallel runs (0 = hardware concurrency)")
        ->each([&o](const std::string&) { o.workers_set = true; });
}

dinl::ExperimentConfig resolve(const CommonOptions& o) {
    dinl::ExperimentConfig cfg = dinl::load_config(o.config);
    if (!o.topology.empty()) cfg.topology = o.topology;
    if (o.seeds > 0) cfg.seeds = o.seeds;
    if (o.master_seed_set) cfg.master_seed = o.master_seed;
    if (o.workers_set) cfg.workers = o.workers;
    if (cfg.topology.empty()) throw std::invalid_argument("no topology file given (config or --topology)");
    return cfg;
}

void print_prune(const dinl::GraphSpec& spec) {
    const auto costs = dinl::edge_costs(spec.graph, spec.weights);
    const auto sp = dinl::reverse_dijkstra(spec.graph, spec.weights);
    const auto tree = dinl::build_spt(spec.graph, spec.weights);
    const auto full = dinl::full_topology(spec.graph);

    std::cout << "nodes " << spec.graph.node_count() << ", candidate edges " << spec.graph.edge_count()
              << ", training-active " << full.size() << ", fusion " << spec.graph.fusion() << "\n\n";
    std::cout << std::left << std::setw(10) << "edge" << std::right << std::setw(12) << "cost" << std::setw(8)
              << "tree" << '\n';
    for (std::size_t i = 0; i < spec.graph.edge_count(); ++i) {
        const auto& e = spec.graph.edge(i);
        std::ostringstream name;
        name << "(" << e.from << "," << e.to << ")";
        std::cout << std::left << std::setw(10) << name.str() << std::right << std::setw(12) << std::fixed
                  << std::setprecision(4) << costs[i] << std::setw(8) << (tree.contains(e.from, e.to) ? "*" : "")
                  << '\n';
    }
    std::cout << "\nshortest-path tree (" << tree.size() << " edges):";
    for (const auto& e : tree.edges()) std::cout << " (" << e.from << "," << e.to << ")";
    std::cout << "\n\ndistance to fusion:\n";
    for (dinl::NodeId j : spec.graph.data_nodes())
        std::cout << "  node " << j << ": " << std::setprecision(4) << sp.distance[j] << '\n';
    const std::size_t q = 120;
    const auto s = spec.weights.bits_per_scalar;
    std::cout << "\nexchange per epoch (q=" << q << ", s=" << s << "): full " << dinl::exchange_bits(full, s, q)
              << " bits, tree " << dinl::exchange_bits(tree, s, q) << " bits\n";
    std::cout << "reduction ratio " << std::setprecision(4) << dinl::reduction_ratio(tree, full) << ", gain G_B "
              << std::setprecision(2) << 100.0 * dinl::exchange_gain(tree, full) << "%\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shortest-path-tree pruned in-network learning simulator"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    std::string schemes = "dense,dijkstra,dijkstra+rate";
    double lambda = -1.0;
    std::string run_out = "results";
    auto* run = app.add_subcommand("run", "Train the schemes over seeds and write CSV results");
    add_common(run, run_opts);
    run->add_option("--schemes", schemes, "Comma-separated schemes: dense, dijkstra, dijkstra+rate");
    run->add_option("--lambda", lambda, "Rate weight for dijkstra+rate; overrides the config");
    run->add_option("--out", run_out, "Output directory");

    CommonOptions sweep_opts;
    std::string grid;
    std::string sweep_out = "results";
    auto* sweep = app.add_subcommand("sweep", "Trace the rate/NLL frontier of the tree scheme over a lambda grid");
    add_common(sweep, sweep_opts);
    sweep->add_option("--lambda-grid", grid, "Comma-separated lambda values; defaults to the config grid");
    sweep->add_option("--out", sweep_out, "Output directory");

    std::string prune_topology;
    std::string prune_config = DINL_DEFAULT_CONFIG;
    auto* prune = app.add_subcommand("prune", "Print edge costs, the shortest-path tree and G_B without training");
    prune->add_option("--topology", prune_topology, "Topology file")->check(CLI::ExistingFile);
    prune->add_option("--config", prune_config, "Config used to locate the default topology");

    CommonOptions export_opts;
    std::uint64_t export_seed = 0;
    std::string export_out = "dataset";
    auto* exporter = app.add_subcommand("export-data", "Write the generated train/val/test splits of one seed as CSV");
    add_common(exporter, export_opts);
    exporter->add_option("--seed", export_seed, "Seed index");
    exporter->add_option("--out", export_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prune) {
            std::string path = prune_topology;
            if (path.empty()) path = dinl::load_config(prune_config).topology;
            print_prune(dinl::load_graph_spec(path));
        } else if (*run) {
            auto cfg = resolve(run_opts);
            if (lambda >= 0.0) cfg.rate_lambda = lambda;
            const auto spec = dinl::load_graph_spec(cfg.topology);
            const auto scheme_list = dinl::parse_scheme_list(schemes);
            const auto records = dinl::run_experiment(spec, cfg, scheme_list);
            const auto summary = dinl::summarize(records, scheme_list);
            const auto files = dinl::emit_results(records, summary, {}, run_out);
            std::cout << dinl::format_summary_table(summary);
            std::cout << "lambda (dijkstra+rate) = " << cfg.rate_lambda << ", seeds = " << cfg.seeds << '\n';
            std::cout << "wrote " << files.records << ", " << files.summary << ", " << files.exchange << '\n';
        } else if (*sweep) {
            auto cfg = resolve(sweep_opts);
            const auto values = grid.empty() ? cfg.lambda_grid : dinl::parse_double_list(grid);
            const auto spec = dinl::load_graph_spec(cfg.topology);
            const auto frontier = dinl::sweep_lambda(spec, cfg, values);
            const auto files = dinl::emit_results({}, dinl::Summary{}, frontier, sweep_out);
            std::cout << std::setw(10) << "lambda" << std::setw(12) << "rate" << std::setw(10) << "nll"
                      << std::setw(10) << "acc" << std::setw(9) << "acc_std" << '\n';
            for (const auto& p : frontier)
                std::cout << std::setw(10) << p.lambda << std::setw(12) << std::fixed << std::setprecision(3)
                          << p.rate << std::setw(10) << std::setprecision(4) << p.nll << std::setw(10)
                          << std::setprecision(2) << p.accuracy << std::setw(9) << p.accuracy_std << '\n'
                          << std::defaultfloat;
            if (std::any_of(frontier.begin(), frontier.end(), [](const auto& p) { return p.lambda == 0.0; }))
                std::cout << "suggested rate lambda: " << dinl::select_rate_lambda(frontier) << '\n';
            std::cout << "wrote " << files.frontier << '\n';
        } else if (*exporter) {
            auto cfg = resolve(export_opts);
            const auto splits = dinl::generate(dinl::task_for_seed(cfg, export_seed));
            std::filesystem::create_directories(export_out);
            const std::filesystem::path base(export_out);
            dinl::write_dataset_csv(splits.train, (base / "train.csv").string());
            dinl::write_dataset_csv(splits.val, (base / "val.csv").string());
            dinl::write_dataset_csv(splits.test, (base / "test.csv").string());
            std::cout << "wrote train/val/test CSVs to " << export_out << '\n';
        }
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
