#include "tdsearch/config.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "tdsearch/serialize.hpp"

namespace tds {

void PipelineConfig::validate() const {
    if (model.layer_dims.size() < 2) {
        throw std::invalid_argument("model needs at least one hidden layer");
    }
    if (task.dim != model.layer_dims.front()) {
        throw std::invalid_argument("task dim must equal the first layer dim");
    }
    if (task.classes != model.classes) {
        throw std::invalid_argument("task classes must match the model head");
    }
    if (shape_space.format != format) {
        throw std::invalid_argument("shape_space format must match the pipeline format");
    }
    shape_space.validate();
    accel.validate();
    evolution.validate();
    if (surrogate_samples < 2) throw std::invalid_argument("surrogate_samples must be >= 2");
    if (batch_tokens == 0) throw std::invalid_argument("batch_tokens must be positive");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    if (!(target_compression > 0.0)) {
        throw std::invalid_argument("target_compression must be positive");
    }
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    json j;
    in >> j;
    PipelineConfig config = j.get<PipelineConfig>();
    config.validate();
    return config;
}

void save_pipeline_config(const PipelineConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << json(config).dump(2) << "\n";
}

std::string config_hash(const PipelineConfig& config) {
    const std::string dump = json(config).dump();
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("truncated weights file");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    return v;
}

void write_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

double read_f64(std::ifstream& in) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_weights(const std::string& path, const std::vector<DenseTensor>& matrices) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weights file: " + path);
    write_u64(out, matrices.size());
    for (const auto& m : matrices) {
        if (m.order() != 2) throw std::invalid_argument("weights file stores matrices only");
        write_u64(out, m.extent(0));
        write_u64(out, m.extent(1));
        for (double v : m.values()) write_f64(out, v);
    }
}

std::vector<DenseTensor> load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read weights file: " + path);
    const std::uint64_t count = read_u64(in);
    std::vector<DenseTensor> matrices;
    matrices.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t rows = read_u64(in);
        const std::uint64_t cols = read_u64(in);
        std::vector<double> data(rows * cols);
        for (double& v : data) v = read_f64(in);
        matrices.emplace_back(std::vector<std::size_t>{rows, cols}, std::move(data));
    }
    return matrices;
}

}  // namespace tds
