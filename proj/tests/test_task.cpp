#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "dinl/task.hpp"
#include "support/oracles.hpp"

using namespace dinl;

namespace {

bool same(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.samples[i].observations != b.samples[i].observations || a.samples[i].label != b.samples[i].label)
            return false;
    return true;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Least-squares solve of M·u = y via normal equations and Gaussian elimination.
std::vector<double> least_squares(const Tensor2& m, const std::vector<double>& y) {
    const std::size_t n = m.cols();
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t r = 0; r < m.rows(); ++r) a[i][j] += m(r, i) * m(r, j);
        for (std::size_t r = 0; r < m.rows(); ++r) a[i][n] += m(r, i) * y[r];
    }
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = a[i][n] / a[i][i];
    return u;
}

double mean_oracle_accuracy(double noise, std::size_t seeds) {
    double total = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        TaskSpec spec;
        spec.noise_std = noise;
        spec.seed = s;
        total += oracle::centralized_baseline(spec);
    }
    return total / static_cast<double>(seeds);
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    TaskSpec spec;
    spec.seed = 4;
    const auto a = generate(spec), b = generate(spec);
    CHECK(same(a.train, b.train));
    CHECK(same(a.test, b.test));
    spec.seed = 5;
    CHECK_FALSE(same(a.train, generate(spec).train));
    CHECK(a.train.size() == 120);
    CHECK(a.val.size() == 120);
    CHECK(a.test.size() == 1000);
    CHECK(a.train.samples[0].observations.size() == 12);
}

TEST_CASE("generator model has unit-norm directions") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        TaskSpec spec;
        spec.seed = s;
        const auto model = draw_task_model(spec);
        CHECK(norm(model.label_direction) == doctest::Approx(1.0).epsilon(1e-12));
        REQUIRE(model.projections.size() == 6);
        for (const auto& a : model.projections) {
            CHECK(a.rows() == 2);
            CHECK(a.cols() == 4);
            for (std::size_t r = 0; r < a.rows(); ++r) CHECK(norm(a.row(r)) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("without noise the labels follow from the recovered latent") {
    TaskSpec spec;
    spec.noise_std = 0.0;
    spec.seed = 9;
    const auto model = draw_task_model(spec);
    Tensor2 stacked(12, 4);
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t k = 0; k < 4; ++k) stacked(2 * j + r, k) = model.projections[j](r, k);
    const auto splits = generate(spec);
    for (const auto& s : splits.test.samples) {
        const auto u = least_squares(stacked, s.observations);
        double score = 0.0;
        for (std::size_t k = 0; k < 4; ++k) score += model.label_direction[k] * u[k];
        CHECK((score > 0.0 ? 1 : 0) == s.label);
    }
}

TEST_CASE("splits come from one stream in order") {
    TaskSpec spec;
    spec.seed = 2;
    const auto base = generate(spec);
    TaskSpec merged = spec;
    merged.train_size = 240;
    merged.test_size = 10;
    const auto m = generate(merged);
    Dataset first{6, 2, {m.train.samples.begin(), m.train.samples.begin() + 120}};
    Dataset second{6, 2, {m.train.samples.begin() + 120, m.train.samples.end()}};
    CHECK(same(first, base.train));
    CHECK(same(second, base.val));
    CHECK_FALSE(same(base.train, base.val));
}

TEST_CASE("labels are balanced") {
    double total = 0.0;
    for (std::uint64_t s = 0; s < 6; ++s) {
        TaskSpec spec;
        spec.seed = s;
        total += label_balance(generate(spec).test);
    }
    CHECK(total / 6.0 >= 0.45);
    CHECK(total / 6.0 <= 0.55);
    Dataset pos{1, 1, {{{0.0}, 1}, {{1.0}, 1}}};
    CHECK(label_balance(pos) == 1.0);
    CHECK_THROWS_AS(label_balance(Dataset{}), std::invalid_argument);
}

TEST_CASE("centralized baseline at the default noise") {
    const double acc = mean_oracle_accuracy(TaskSpec{}.noise_std, 6);
    MESSAGE("logistic baseline " << acc << "%");
    CHECK(acc >= 70.0);
    CHECK(acc <= 80.0);
}

TEST_CASE("more noise makes the task harder") {
    double previous = 101.0;
    for (double noise : {0.5, 1.0, 2.0, 3.0}) {
        const double acc = mean_oracle_accuracy(noise, 6);
        CHECK(acc < previous);
        previous = acc;
    }
}

TEST_CASE("dataset CSV round trip") {
    TaskSpec spec;
    spec.seed = 1;
    spec.test_size = 50;
    const auto splits = generate(spec);
    const auto dir = std::filesystem::temp_directory_path() / "dinl_task_csv";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "train.csv").string();
    write_dataset_csv(splits.train, path);
    CHECK(same(read_dataset_csv(path, 6, 2), splits.train));
    CHECK_THROWS(read_dataset_csv(path, 5, 2));
    std::filesystem::remove_all(dir);
}

TEST_CASE("invalid specs") {
    TaskSpec spec;
    spec.sensors = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = TaskSpec{};
    spec.noise_std = -1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = TaskSpec{};
    spec.val_size = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}
