#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dinl/csv.hpp"
#include "dinl/harness.hpp"

using namespace dinl;
namespace fs = std::filesystem;

namespace {

GraphSpec reference() { return load_graph_spec(std::string(DINL_DATA_DIR) + "/paper_topology.json"); }

ExperimentConfig quick() { return load_config(std::string(DINL_TEST_DATA_DIR) + "/quick_config.json"); }

ExperimentRecord rec(Scheme s, std::uint64_t seed, std::uint64_t bits, double acc, double nll, double rate) {
    return ExperimentRecord{s, seed, s == Scheme::dense ? 27u : 8u, 100, bits, acc, nll, rate};
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("dinl_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("scheme and list parsing") {
    CHECK(parse_scheme("dijkstra+rate") == Scheme::dijkstra_rate);
    CHECK(to_string(Scheme::dijkstra_rate) == "dijkstra+rate");
    CHECK(parse_scheme_list("dense, dijkstra") == std::vector<Scheme>{Scheme::dense, Scheme::dijkstra});
    CHECK_THROWS_AS(parse_scheme("sparse"), std::invalid_argument);
    CHECK(parse_double_list("0,1e-3, 0.5") == std::vector<double>{0.0, 1e-3, 0.5});
    CHECK_THROWS_AS(parse_double_list("0,abc"), std::invalid_argument);
}

TEST_CASE("config files") {
    const auto cfg = load_config(std::string(DINL_CONFIG_DIR) + "/defaults.json");
    CHECK(cfg.task.noise_std == 1.4);
    CHECK(cfg.rate_lambda == 0.01);
    CHECK(cfg.seeds == 6);
    CHECK(cfg.train.epochs == 300);
    CHECK(fs::exists(cfg.topology));

    const auto back = parse_config(config_to_json(cfg));
    CHECK(back.task.noise_std == cfg.task.noise_std);
    CHECK(back.train.adam.learning_rate == cfg.train.adam.learning_rate);
    CHECK(back.train.keep_best_validation == cfg.train.keep_best_validation);
    CHECK(back.lambda_grid == cfg.lambda_grid);
    CHECK(back.topology == cfg.topology);
    CHECK(back.arch.fusion_hidden == cfg.arch.fusion_hidden);

    CHECK_THROWS_AS(parse_config(R"({"version": 1, "training": {"epoch": 3}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({"version": 2})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "experiment": {"seeds": 0}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("{"), std::invalid_argument);
}

TEST_CASE("scheme runs use their topology") {
    const auto spec = reference();
    const auto cfg = quick();
    const auto dense = run_single(spec, cfg, Scheme::dense, 0, 0.0);
    CHECK(dense.record.edges == 27);
    CHECK(dense.record.bits_per_epoch == 622080u);
    CHECK(dense.history.size() == cfg.train.epochs);
    const auto tree = run_single(spec, cfg, Scheme::dijkstra, 0, 0.0);
    CHECK(tree.record.edges == 8);
    CHECK(tree.record.bits_per_epoch == 184320u);
    CHECK(tree.record.params == 1147);
    CHECK(std::isfinite(tree.record.nll));

    // The rate scheme at λ = 0 is the tree scheme.
    const auto rated = run_single(spec, cfg, Scheme::dijkstra_rate, 0, 0.0);
    CHECK(rated.record.accuracy == tree.record.accuracy);
    CHECK(rated.record.rate == tree.record.rate);
}

TEST_CASE("experiments") {
    const auto spec = reference();
    auto cfg = quick();
    CHECK(run_experiment(spec, cfg, {}).empty());

    std::size_t steps = 0;
    cfg.workers = 1;
    const auto records = run_experiment(spec, cfg, {Scheme::dijkstra, Scheme::dense},
                                        [&](Scheme, std::uint64_t, const TrainingTopology&, const WaveTrace&) {
                                            ++steps;
                                        });
    REQUIRE(records.size() == 4);
    CHECK(records[0].scheme == Scheme::dense);
    CHECK(records[1].seed == 1);
    CHECK(steps == 4 * cfg.train.epochs * 4);  // 120 samples in batches of 32

    cfg.workers = 3;
    CHECK(run_experiment(spec, cfg, {Scheme::dijkstra, Scheme::dense}) == records);
}

TEST_CASE("summaries") {
    const std::vector<ExperimentRecord> rs{
        rec(Scheme::dense, 0, 622080, 70, 0.5, 12), rec(Scheme::dense, 1, 622080, 74, 0.6, 14),
        rec(Scheme::dijkstra, 0, 184320, 72, 0.5, 10), rec(Scheme::dijkstra, 1, 184320, 72, 0.5, 10),
        rec(Scheme::dijkstra_rate, 0, 184320, 71, 0.5, 5.43), rec(Scheme::dijkstra_rate, 1, 184320, 71, 0.5, 5.43)};
    const auto s = summarize(rs, {Scheme::dense, Scheme::dijkstra, Scheme::dijkstra_rate});
    REQUIRE(s.rows.size() == 3);
    CHECK(*s.exchange_reduction == doctest::Approx(19.0 / 27.0).epsilon(1e-15));
    CHECK(*s.rate_reduction == doctest::Approx(0.457).epsilon(1e-12));
    const auto* dense = s.find(Scheme::dense);
    CHECK(dense->accuracy.mean == 72.0);
    CHECK(dense->accuracy.std == doctest::Approx(std::sqrt(8.0)));
    CHECK(s.find(Scheme::dijkstra)->accuracy.std == 0.0);
    CHECK(s.find(Scheme::dijkstra)->seeds == 2);

    CHECK_THROWS_AS(summarize({rs[0]}, {Scheme::dijkstra}), std::invalid_argument);
    const auto one = summarize({rs[0]});
    CHECK(one.rows[0].accuracy.std == 0.0);
    CHECK_FALSE(one.exchange_reduction.has_value());
    CHECK(mean_std({}).mean == 0.0);
}

TEST_CASE("lambda sweep") {
    const auto spec = reference();
    auto cfg = quick();
    const auto front = sweep_lambda(spec, cfg, {0.0});
    REQUIRE(front.size() == 1);
    const auto r0 = run_single(spec, cfg, Scheme::dijkstra, 0, 0.0).record;
    const auto r1 = run_single(spec, cfg, Scheme::dijkstra, 1, 0.0).record;
    CHECK(front[0].rate == doctest::Approx((r0.rate + r1.rate) / 2.0).epsilon(1e-15));
    CHECK(front[0].accuracy == doctest::Approx((r0.accuracy + r1.accuracy) / 2.0).epsilon(1e-15));
    CHECK(front[0].bits_per_epoch == 184320u);
    CHECK_THROWS_AS(sweep_lambda(spec, cfg, {}), std::invalid_argument);

    const std::vector<FrontierPoint> pts{{0.1, 1.0, 0.7, 60.0, 2.0, 0},
                                         {0.0, 20.0, 0.5, 74.0, 3.0, 0},
                                         {0.01, 6.0, 0.5, 72.0, 2.5, 0},
                                         {0.001, 15.0, 0.5, 73.5, 2.0, 0}};
    CHECK(select_rate_lambda(pts) == 0.01);
    CHECK_THROWS_AS(select_rate_lambda({pts[0]}), std::invalid_argument);
}

TEST_CASE("result files") {
    const std::vector<ExperimentRecord> rs{
        rec(Scheme::dense, 0, 622080, 70.1, 0.51234567890123, 12.25),
        rec(Scheme::dense, 1, 622080, 73.9, 0.6, 14.0 / 3.0),
        rec(Scheme::dijkstra, 0, 184320, 72.0, 0.1 + 0.2, 10.0),
        rec(Scheme::dijkstra_rate, 0, 184320, 71.0, 0.5, 5.43)};
    const auto s = summarize(rs);
    const auto dir = scratch_dir("emit");
    const auto files = emit_results(rs, s, {{0.0, 20.0, 0.5, 74.0, 3.0, 0}}, dir.string());

    CHECK(read_records_csv(files.records) == rs);
    const auto summary = read_csv(files.summary);
    REQUIRE(summary.rows.size() == 3);
    CHECK(summary.header.size() == 11);
    // The summary is reproducible from the records file alone.
    const auto again = summarize(read_records_csv(files.records));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(parse_double(summary.rows[k][7]) - again.rows[k].accuracy.mean) <= 1e-12);
        CHECK(std::abs(parse_double(summary.rows[k][8]) - again.rows[k].accuracy.std) <= 1e-12);
        CHECK(std::abs(parse_double(summary.rows[k][5]) - again.rows[k].rate.mean) <= 1e-12);
        CHECK(std::abs(parse_double(summary.rows[k][9]) - again.rows[k].nll.mean) <= 1e-12);
    }
    CHECK(parse_double(summary.rows[0][4]) == doctest::Approx(0.62208));
    CHECK(read_csv(files.frontier).rows.size() == 1);
    CHECK(read_csv(files.exchange).rows.size() == 3);

    const auto empty = emit_results({}, Summary{}, {}, (dir / "empty").string());
    CHECK(slurp(empty.records) == "scheme,seed,edges,params,bits_per_epoch,accuracy,nll,rate\n");
    CHECK(read_csv(empty.summary).rows.empty());
    CHECK(read_csv(empty.frontier).rows.empty());
    CHECK(format_summary_table(s).find("dijkstra+rate") != std::string::npos);
    fs::remove_all(dir);
}
