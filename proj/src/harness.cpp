#include "dinl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dinl/csv.hpp"
#include "dinl/rng.hpp"

namespace dinl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream labels under the master seed. Both tree schemes share a topology
// label, so a λ sweep point at λ = 0 reproduces the plain dijkstra run.
constexpr std::uint64_t kTaskLabel = 101;
constexpr std::uint64_t kShuffleLabel = 102;
constexpr std::uint64_t kDenseNetLabel = 103;
constexpr std::uint64_t kTreeNetLabel = 104;

std::uint64_t net_label(Scheme s) { return s == Scheme::dense ? kDenseNetLabel : kTreeNetLabel; }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find(sep, start);
        const auto piece = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!piece.empty()) out.push_back(piece);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// failure after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::dense: return "dense";
    case Scheme::dijkstra: return "dijkstra";
    case Scheme::dijkstra_rate: return "dijkstra+rate";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "dense") return Scheme::dense;
    if (text == "dijkstra") return Scheme::dijkstra;
    if (text == "dijkstra+rate") return Scheme::dijkstra_rate;
    throw std::invalid_argument("unknown scheme '" + std::string(text) + "' (expected dense, dijkstra, dijkstra+rate)");
}

std::vector<Scheme> parse_scheme_list(std::string_view text) {
    std::vector<Scheme> out;
    for (const auto& s : split(text, ',')) out.push_back(parse_scheme(s));
    return out;
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    for (const auto& s : split(text, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// configuration

namespace {

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config " + where + "." + key + ": wrong type");
    }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw std::invalid_argument("config " + where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; });
        if (!known) throw std::invalid_argument("config " + where + ": unknown key '" + it.key() + "'");
    }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& err) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + err.what());
    }
    reject_unknown(doc, {"version", "topology", "task", "architecture", "training", "experiment"}, "root");
    ExperimentConfig cfg;
    read_field(doc, "version", cfg.version, "root");
    if (cfg.version != kConfigVersion)
        throw std::invalid_argument("config: unsupported version " + std::to_string(cfg.version));
    read_field(doc, "topology", cfg.topology, "root");

    if (auto it = doc.find("task"); it != doc.end()) {
        reject_unknown(*it, {"latent_dim", "sensors", "obs_dim", "noise_std", "train_size", "val_size", "test_size"},
                       "task");
        read_field(*it, "latent_dim", cfg.task.latent_dim, "task");
        read_field(*it, "sensors", cfg.task.sensors, "task");
        read_field(*it, "obs_dim", cfg.task.obs_dim, "task");
        read_field(*it, "noise_std", cfg.task.noise_std, "task");
        read_field(*it, "train_size", cfg.task.train_size, "task");
        read_field(*it, "val_size", cfg.task.val_size, "task");
        read_field(*it, "test_size", cfg.task.test_size, "task");
    }
    if (auto it = doc.find("architecture"); it != doc.end()) {
        reject_unknown(*it, {"message_width", "sensor_hidden", "relay_hidden", "fusion_hidden"}, "architecture");
        read_field(*it, "message_width", cfg.arch.message_width, "architecture");
        read_field(*it, "sensor_hidden", cfg.arch.sensor_hidden, "architecture");
        read_field(*it, "relay_hidden", cfg.arch.relay_hidden, "architecture");
        read_field(*it, "fusion_hidden", cfg.arch.fusion_hidden, "architecture");
    }
    if (auto it = doc.find("training"); it != doc.end()) {
        reject_unknown(*it, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon", "eval_every",
                        "keep_best_validation"},
                       "training");
        read_field(*it, "epochs", cfg.train.epochs, "training");
        read_field(*it, "batch_size", cfg.train.batch_size, "training");
        read_field(*it, "learning_rate", cfg.train.adam.learning_rate, "training");
        read_field(*it, "beta1", cfg.train.adam.beta1, "training");
        read_field(*it, "beta2", cfg.train.adam.beta2, "training");
        read_field(*it, "adam_epsilon", cfg.train.adam.epsilon, "training");
        read_field(*it, "eval_every", cfg.train.eval_every, "training");
        read_field(*it, "keep_best_validation", cfg.train.keep_best_validation, "training");
    }
    if (auto it = doc.find("experiment"); it != doc.end()) {
        reject_unknown(*it, {"seeds", "master_seed", "rate_lambda", "lambda_grid", "workers"}, "experiment");
        read_field(*it, "seeds", cfg.seeds, "experiment");
        read_field(*it, "master_seed", cfg.master_seed, "experiment");
        read_field(*it, "rate_lambda", cfg.rate_lambda, "experiment");
        read_field(*it, "lambda_grid", cfg.lambda_grid, "experiment");
        read_field(*it, "workers", cfg.workers, "experiment");
    }
    cfg.arch.obs_dim = cfg.task.obs_dim;
    validate(cfg.task);
    validate(cfg.train);
    if (cfg.seeds < 1) throw std::invalid_argument("config experiment.seeds must be >= 1");
    if (!(cfg.rate_lambda >= 0.0)) throw std::invalid_argument("config experiment.rate_lambda must be >= 0");
    for (double l : cfg.lambda_grid)
        if (!(l >= 0.0)) throw std::invalid_argument("config experiment.lambda_grid values must be >= 0");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg;
    try {
        cfg = parse_config(buf.str());
    } catch (const std::invalid_argument& err) {
        throw std::invalid_argument(path + ": " + err.what());
    }
    if (!cfg.topology.empty() && fs::path(cfg.topology).is_relative())
        cfg.topology = (fs::path(path).parent_path() / cfg.topology).lexically_normal().string();
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["version"] = cfg.version;
    doc["topology"] = cfg.topology;
    doc["task"] = {{"latent_dim", cfg.task.latent_dim}, {"sensors", cfg.task.sensors},
                   {"obs_dim", cfg.task.obs_dim},       {"noise_std", cfg.task.noise_std},
                   {"train_size", cfg.task.train_size}, {"val_size", cfg.task.val_size},
                   {"test_size", cfg.task.test_size}};
    doc["architecture"] = {{"message_width", cfg.arch.message_width},
                           {"sensor_hidden", cfg.arch.sensor_hidden},
                           {"relay_hidden", cfg.arch.relay_hidden},
                           {"fusion_hidden", cfg.arch.fusion_hidden}};
    doc["training"] = {{"epochs", cfg.train.epochs},
                       {"batch_size", cfg.train.batch_size},
                       {"learning_rate", cfg.train.adam.learning_rate},
                       {"beta1", cfg.train.adam.beta1},
                       {"beta2", cfg.train.adam.beta2},
                       {"adam_epsilon", cfg.train.adam.epsilon},
                       {"eval_every", cfg.train.eval_every},
                       {"keep_best_validation", cfg.train.keep_best_validation}};
    doc["experiment"] = {{"seeds", cfg.seeds},
                         {"master_seed", cfg.master_seed},
                         {"rate_lambda", cfg.rate_lambda},
                         {"lambda_grid", cfg.lambda_grid},
                         {"workers", cfg.workers}};
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// runs

TaskSpec task_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    TaskSpec task = cfg.task;
    task.seed = stream_seed(cfg.master_seed, {kTaskLabel, seed});
    return task;
}

RunOutput run_single(const GraphSpec& spec, const ExperimentConfig& cfg, Scheme scheme, std::uint64_t seed,
                     double lambda, const TraceHook& hook) {
    const TaskSpec task = task_for_seed(cfg, seed);
    const TaskSplits data = generate(task);

    TrainingTopology topology =
        scheme == Scheme::dense ? full_topology(spec.graph) : build_spt(spec.graph, spec.weights);
    Architecture arch = cfg.arch;
    arch.obs_dim = task.obs_dim;
    InlNetwork net(spec.graph, topology, arch, stream_seed(cfg.master_seed, {net_label(scheme), seed}));

    TrainConfig tc = cfg.train;
    tc.rate_weight = lambda;
    tc.seed = stream_seed(cfg.master_seed, {kShuffleLabel, seed});
    tc.bits_per_scalar = spec.weights.bits_per_scalar;

    const std::uint64_t expected_bits = exchange_bits(net.topology(), tc.bits_per_scalar, data.train.size());
    const StepObserver observer = [&](const WaveTrace& trace) {
        verify_edge_discipline(trace, net.topology());
        if (hook) hook(scheme, seed, net.topology(), trace);
    };

    RunOutput out;
    out.history = train(net, data.train, &data.val, tc, observer);
    for (const auto& em : out.history)
        if (em.bits != expected_bits)
            throw EngineError("epoch " + std::to_string(em.epoch) + " exchanged " + std::to_string(em.bits) +
                              " bits, expected " + std::to_string(expected_bits));

    const EvalMetrics test = evaluate(net, data.test);
    out.record = ExperimentRecord{scheme, seed, net.topology().size(), net.count_params(), expected_bits,
                                  test.accuracy, test.nll, test.rate};
    return out;
}

std::vector<ExperimentRecord> run_experiment(const GraphSpec& spec, const ExperimentConfig& cfg,
                                             const std::vector<Scheme>& schemes, const TraceHook& hook) {
    std::vector<std::pair<Scheme, std::uint64_t>> jobs;
    for (Scheme s : schemes)
        for (std::uint64_t seed = 0; seed < cfg.seeds; ++seed) jobs.emplace_back(s, seed);
    std::vector<ExperimentRecord> records(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        const auto [scheme, seed] = jobs[i];
        const double lambda = scheme == Scheme::dijkstra_rate ? cfg.rate_lambda : 0.0;
        records[i] = run_single(spec, cfg, scheme, seed, lambda, hook).record;
    });
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::pair(a.scheme, a.seed) < std::pair(b.scheme, b.seed);
    });
    return records;
}

// ---------------------------------------------------------------------------
// aggregation

Stat mean_std(const std::vector<double>& values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

const SummaryRow* Summary::find(Scheme s) const {
    for (const auto& r : rows)
        if (r.scheme == s) return &r;
    return nullptr;
}

Summary summarize(const std::vector<ExperimentRecord>& records, const std::vector<Scheme>& required) {
    std::map<Scheme, std::vector<const ExperimentRecord*>> groups;
    for (const auto& r : records) groups[r.scheme].push_back(&r);
    for (Scheme s : required)
        if (!groups.count(s))
            throw std::invalid_argument("summarize: no records for scheme " + std::string(to_string(s)));

    Summary out;
    for (const auto& [scheme, group] : groups) {
        auto column = [&](auto field) {
            std::vector<double> v;
            for (const auto* r : group) v.push_back(static_cast<double>(field(*r)));
            return mean_std(v);
        };
        SummaryRow row;
        row.scheme = scheme;
        row.seeds = group.size();
        row.edges = column([](const auto& r) { return r.edges; });
        row.params = column([](const auto& r) { return r.params; });
        row.bits_per_epoch = column([](const auto& r) { return r.bits_per_epoch; });
        row.rate = column([](const auto& r) { return r.rate; });
        row.accuracy = column([](const auto& r) { return r.accuracy; });
        row.nll = column([](const auto& r) { return r.nll; });
        out.rows.push_back(row);
    }

    const SummaryRow* dense = out.find(Scheme::dense);
    const SummaryRow* tree = out.find(Scheme::dijkstra);
    const SummaryRow* rated = out.find(Scheme::dijkstra_rate);
    const SummaryRow* sparse = tree ? tree : rated;
    if (dense && sparse && dense->bits_per_epoch.mean > 0.0)
        out.exchange_reduction = 1.0 - sparse->bits_per_epoch.mean / dense->bits_per_epoch.mean;
    if (tree && rated && tree->rate.mean > 0.0)
        out.rate_reduction = (tree->rate.mean - rated->rate.mean) / tree->rate.mean;
    return out;
}

std::vector<FrontierPoint> sweep_lambda(const GraphSpec& spec, const ExperimentConfig& cfg,
                                        const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("sweep_lambda: empty lambda grid");
    for (double l : grid)
        if (!(l >= 0.0)) throw std::invalid_argument("sweep_lambda: lambda values must be >= 0");

    std::vector<ExperimentRecord> runs(grid.size() * cfg.seeds);
    parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
        const double lambda = grid[i / cfg.seeds];
        const std::uint64_t seed = i % cfg.seeds;
        runs[i] = run_single(spec, cfg, Scheme::dijkstra, seed, lambda).record;
    });

    std::vector<FrontierPoint> points;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> rate, nll, acc;
        for (std::size_t s = 0; s < cfg.seeds; ++s) {
            const auto& r = runs[k * cfg.seeds + s];
            rate.push_back(r.rate);
            nll.push_back(r.nll);
            acc.push_back(r.accuracy);
        }
        const Stat a = mean_std(acc);
        points.push_back({grid[k], mean_std(rate).mean, mean_std(nll).mean, a.mean, a.std,
                          runs[k * cfg.seeds].bits_per_epoch});
    }
    std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.rate < b.rate; });
    return points;
}

double select_rate_lambda(const std::vector<FrontierPoint>& frontier) {
    auto base = std::find_if(frontier.begin(), frontier.end(), [](const auto& p) { return p.lambda == 0.0; });
    if (base == frontier.end()) throw std::invalid_argument("select_rate_lambda: frontier lacks a lambda = 0 point");
    double chosen = 0.0;
    for (const auto& p : frontier)
        if (p.accuracy >= base->accuracy - base->accuracy_std) chosen = std::max(chosen, p.lambda);
    return chosen;
}

// ---------------------------------------------------------------------------
// output

namespace {

const std::vector<std::string> kRecordHeader{"scheme", "seed",     "edges", "params",
                                             "bits_per_epoch", "accuracy", "nll",   "rate"};

std::string fmt_fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

OutputFiles emit_results(const std::vector<ExperimentRecord>& records, const Summary& summary,
                         const std::vector<FrontierPoint>& frontier, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    const fs::path base(dir);
    OutputFiles files{(base / "records.csv").string(), (base / "summary.csv").string(),
                      (base / "frontier.csv").string(), (base / "exchange.csv").string()};

    {
        CsvWriter out(files.records, kRecordHeader);
        for (const auto& r : records)
            out.write_row({std::string(to_string(r.scheme)), std::to_string(r.seed), std::to_string(r.edges),
                           std::to_string(r.params), std::to_string(r.bits_per_epoch), format_double(r.accuracy),
                           format_double(r.nll), format_double(r.rate)});
    }
    {
        CsvWriter out(files.summary, {"scheme", "seeds", "edges", "params", "mbit_per_epoch", "rate_mean", "rate_std",
                                      "acc_mean", "acc_std", "nll_mean", "nll_std"});
        for (const auto& r : summary.rows)
            out.write_row({std::string(to_string(r.scheme)), std::to_string(r.seeds), format_double(r.edges.mean),
                           format_double(r.params.mean), format_double(r.bits_per_epoch.mean / 1e6),
                           format_double(r.rate.mean), format_double(r.rate.std), format_double(r.accuracy.mean),
                           format_double(r.accuracy.std), format_double(r.nll.mean), format_double(r.nll.std)});
    }
    {
        CsvWriter out(files.frontier, {"lambda", "rate", "nll", "acc_mean", "acc_std"});
        for (const auto& p : frontier)
            out.write_row({format_double(p.lambda), format_double(p.rate), format_double(p.nll),
                           format_double(p.accuracy), format_double(p.accuracy_std)});
    }
    {
        CsvWriter out(files.exchange, {"scheme", "bits_per_epoch", "acc_mean", "acc_std"});
        for (const auto& r : summary.rows)
            out.write_row({std::string(to_string(r.scheme)), format_double(r.bits_per_epoch.mean),
                           format_double(r.accuracy.mean), format_double(r.accuracy.std)});
    }
    return files;
}

std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != kRecordHeader) throw std::runtime_error(path + ": unexpected record header");
    std::vector<ExperimentRecord> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        try {
            ExperimentRecord r;
            r.scheme = parse_scheme(row[0]);
            r.seed = std::stoull(row[1]);
            r.edges = std::stoull(row[2]);
            r.params = std::stoull(row[3]);
            r.bits_per_epoch = std::stoull(row[4]);
            r.accuracy = parse_double(row[5]);
            r.nll = parse_double(row[6]);
            r.rate = parse_double(row[7]);
            out.push_back(r);
        } catch (const std::exception& err) {
            throw std::runtime_error(path + ":" + std::to_string(i + 2) + ": " + err.what());
        }
    }
    return out;
}

std::string format_summary_table(const Summary& summary) {
    std::ostringstream os;
    os << std::left << std::setw(15) << "Scheme" << std::right << std::setw(7) << "Edges" << std::setw(8) << "Params"
       << std::setw(9) << "B(Mbit)" << std::setw(18) << "Rate" << std::setw(16) << "Acc." << std::setw(20) << "NLL"
       << '\n';
    for (const auto& r : summary.rows) {
        os << std::left << std::setw(15) << to_string(r.scheme) << std::right << std::setw(7)
           << fmt_fixed(r.edges.mean, 0) << std::setw(8) << fmt_fixed(r.params.mean, 0) << std::setw(9)
           << fmt_fixed(r.bits_per_epoch.mean / 1e6, 3) << std::setw(18)
           << (fmt_fixed(r.rate.mean, 2) + " +- " + fmt_fixed(r.rate.std, 2)) << std::setw(16)
           << (fmt_fixed(r.accuracy.mean, 2) + " +- " + fmt_fixed(r.accuracy.std, 2)) << std::setw(20)
           << (fmt_fixed(r.nll.mean, 4) + " +- " + fmt_fixed(r.nll.std, 4)) << '\n';
    }
    if (summary.exchange_reduction)
        os << "exchange reduction G_B: " << fmt_fixed(100.0 * *summary.exchange_reduction, 2) << "%\n";
    if (summary.rate_reduction)
        os << "rate reduction (dijkstra -> dijkstra+rate): " << fmt_fixed(100.0 * *summary.rate_reduction, 2)
           << "%\n";
    return os.str();
}

}  // namespace dinl
