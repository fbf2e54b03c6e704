#include "dinl/task.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dinl/csv.hpp"
#include "dinl/rng.hpp"

namespace dinl {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kSampleStream = 2;

void normalize(std::span<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
}

}  // namespace

void validate(const TaskSpec& spec) {
    if (spec.latent_dim == 0 || spec.sensors == 0 || spec.obs_dim == 0)
        throw std::invalid_argument("task dimensions must be positive");
    if (spec.train_size == 0 || spec.val_size == 0 || spec.test_size == 0)
        throw std::invalid_argument("task split sizes must be positive");
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std))
        throw std::invalid_argument("task noise std must be finite and >= 0");
}

Tensor2 Dataset::sensor_batch(std::size_t sensor, const std::vector<std::size_t>& rows) const {
    if (sensor >= sensors) throw std::out_of_range("sensor index " + std::to_string(sensor));
    Tensor2 out(rows.size(), obs_dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& obs = samples.at(rows[r]).observations;
        for (std::size_t k = 0; k < obs_dim; ++k) out(r, k) = obs[sensor * obs_dim + k];
    }
    return out;
}

Tensor2 Dataset::label_batch(const std::vector<std::size_t>& rows) const {
    Tensor2 out(rows.size(), 1);
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, 0) = samples.at(rows[r]).label;
    return out;
}

Tensor2 Dataset::design_matrix() const {
    Tensor2 out(samples.size(), sensors * obs_dim);
    for (std::size_t r = 0; r < samples.size(); ++r)
        for (std::size_t k = 0; k < sensors * obs_dim; ++k) out(r, k) = samples[r].observations[k];
    return out;
}

TaskModel draw_task_model(const TaskSpec& spec) {
    validate(spec);
    Rng rng = make_stream(spec.seed, {kModelStream});
    std::normal_distribution<double> normal(0.0, 1.0);
    TaskModel model;
    model.label_direction.resize(spec.latent_dim);
    for (double& x : model.label_direction) x = normal(rng);
    normalize(model.label_direction);
    for (std::size_t j = 0; j < spec.sensors; ++j) {
        Tensor2 a(spec.obs_dim, spec.latent_dim);
        for (double& x : a.values()) x = normal(rng);
        for (std::size_t r = 0; r < spec.obs_dim; ++r) normalize(a.row(r));
        model.projections.push_back(std::move(a));
    }
    return model;
}

TaskSplits generate(const TaskSpec& spec) {
    const TaskModel model = draw_task_model(spec);
    Rng rng = make_stream(spec.seed, {kSampleStream});
    std::normal_distribution<double> normal(0.0, 1.0);

    auto draw = [&](std::size_t n) {
        Dataset d{spec.sensors, spec.obs_dim, {}};
        d.samples.reserve(n);
        std::vector<double> u(spec.latent_dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& x : u) x = normal(rng);
            double score = 0.0;
            for (std::size_t k = 0; k < spec.latent_dim; ++k) score += model.label_direction[k] * u[k];
            DistributedSample s;
            s.label = score > 0.0 ? 1 : 0;
            s.observations.reserve(spec.sensors * spec.obs_dim);
            for (const Tensor2& a : model.projections)
                for (std::size_t r = 0; r < spec.obs_dim; ++r) {
                    double y = 0.0;
                    for (std::size_t k = 0; k < spec.latent_dim; ++k) y += a(r, k) * u[k];
                    s.observations.push_back(y + spec.noise_std * normal(rng));
                }
            d.samples.push_back(std::move(s));
        }
        return d;
    };

    // One stream, consumed in split order: train, then val, then test.
    TaskSplits splits;
    splits.train = draw(spec.train_size);
    splits.val = draw(spec.val_size);
    splits.test = draw(spec.test_size);
    return splits;
}

double label_balance(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("label_balance: empty sample set");
    std::size_t positives = 0;
    for (const auto& s : data.samples) positives += s.label == 1 ? 1 : 0;
    return static_cast<double>(positives) / static_cast<double>(data.size());
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::vector<std::string> header;
    for (std::size_t j = 0; j < data.sensors; ++j)
        for (std::size_t k = 0; k < data.obs_dim; ++k)
            header.push_back("x" + std::to_string(j) + "_" + std::to_string(k));
    header.push_back("label");
    CsvWriter out(path, header);
    for (const auto& s : data.samples) {
        std::vector<std::string> row;
        for (double x : s.observations) row.push_back(format_double(x));
        row.push_back(std::to_string(s.label));
        out.write_row(row);
    }
}

Dataset read_dataset_csv(const std::string& path, std::size_t sensors, std::size_t obs_dim) {
    const CsvTable table = read_csv(path);
    const std::size_t width = sensors * obs_dim;
    if (table.header.size() != width + 1)
        throw std::runtime_error(path + ": expected " + std::to_string(width + 1) + " columns");
    Dataset d{sensors, obs_dim, {}};
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        DistributedSample s;
        for (std::size_t k = 0; k < width; ++k) s.observations.push_back(parse_double(row[k]));
        const std::string& label = row[width];
        if (label != "0" && label != "1")
            throw std::runtime_error(path + ": row " + std::to_string(r + 2) + ": label must be 0 or 1");
        s.label = label == "1" ? 1 : 0;
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace dinl
