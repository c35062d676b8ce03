#include "deepsplit/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "deepsplit/errors.hpp"
#include "deepsplit/experiment.hpp"

namespace deepsplit {

namespace {

static_assert(std::endian::native == std::endian::little, "binary dumps assume little-endian hosts");

constexpr char kMagic[8] = {'D', 'S', 'S', 'T', 'E', 'P', '0', '1'};

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("truncated step dump");
    return value;
}

void put_vector(std::ostream& out, const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector get_vector(std::istream& in, Eigen::Index size) {
    Vector v(size);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(double)));
    if (!in) throw std::runtime_error("truncated step dump");
    return v;
}

}  // namespace

void write_step(std::ostream& out, const TrainedStep& step) {
    const NetworkShape& shape = step.theta.shape;
    out.write(kMagic, sizeof(kMagic));
    put<std::int32_t>(out, shape.input_dim);
    put<std::int32_t>(out, shape.hidden_dim);
    put<std::int32_t>(out, shape.hidden_layers);
    put<std::int32_t>(out, shape.batch_norm ? 1 : 0);
    put<std::int32_t>(out, step.n);
    put<std::int32_t>(out, static_cast<std::int32_t>(step.bn.running_mean.size()));
    put<double>(out, step.final_loss);
    put<double>(out, step.bn.momentum);
    put<double>(out, step.bn.epsilon);
    put<std::int64_t>(out, step.bn.update_count);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(step.theta.values.size()));
    put_vector(out, step.theta.values);
    for (std::size_t s = 0; s < step.bn.running_mean.size(); ++s) {
        put<std::int32_t>(out, static_cast<std::int32_t>(step.bn.running_mean[s].size()));
        put_vector(out, step.bn.running_mean[s]);
        put_vector(out, step.bn.running_var[s]);
    }
}

TrainedStep read_step(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a step dump (bad magic)");
    }
    TrainedStep step;
    NetworkShape shape;
    shape.input_dim = get<std::int32_t>(in);
    shape.hidden_dim = get<std::int32_t>(in);
    shape.hidden_layers = get<std::int32_t>(in);
    shape.batch_norm = get<std::int32_t>(in) != 0;
    step.n = get<std::int32_t>(in);
    const auto sites = get<std::int32_t>(in);
    step.final_loss = get<double>(in);
    step.bn.momentum = get<double>(in);
    step.bn.epsilon = get<double>(in);
    step.bn.update_count = get<std::int64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (count != shape.param_count() || sites != shape.bn_site_count()) {
        throw ShapeError("step dump sizes do not match its header shape");
    }
    step.theta.shape = shape;
    step.theta.values = get_vector(in, static_cast<Eigen::Index>(count));
    for (int s = 0; s < sites; ++s) {
        const auto dim = get<std::int32_t>(in);
        if (dim != shape.bn_site_dim(s)) throw ShapeError("step dump BN site has the wrong width");
        step.bn.running_mean.push_back(get_vector(in, dim));
        step.bn.running_var.push_back(get_vector(in, dim));
    }
    return step;
}

void save_step(const std::string& path, const TrainedStep& step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_step(out, step);
}

TrainedStep load_step(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    return read_step(in);
}

void write_noise_csv(std::ostream& out, const NoiseRealization& z) {
    const bool fine = z.fine_path.rows() > 0;
    const Matrix& rows = fine ? z.fine_path : z.path;
    const int substeps = fine ? z.substeps : 1;
    out << "# T=" << format_number(z.grid.T) << " N=" << z.grid.N << " substeps=" << substeps << '\n';
    out << "i,t";
    for (int k = 0; k < z.noise_dim; ++k) out << ",z" << (k + 1);
    out << '\n';
    const double ds = z.grid.T / static_cast<double>(rows.rows() - 1);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        out << i << ',' << format_number(static_cast<double>(i) * ds);
        for (int k = 0; k < z.noise_dim; ++k) out << ',' << format_number(rows(i, k));
        out << '\n';
    }
}

NoiseRealization read_noise_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ParseError("noise csv: missing header comment");
    double T = 0.0;
    int N = 0, substeps = 0;
    {
        std::istringstream meta(line.substr(2));
        std::string token;
        while (meta >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) throw ParseError("noise csv: bad header token '" + token + "'");
            const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
            if (key == "T") T = std::stod(value);
            else if (key == "N") N = std::stoi(value);
            else if (key == "substeps") substeps = std::stoi(value);
        }
    }
    if (!std::getline(in, line)) throw ParseError("noise csv: missing column header");
    const int noise_dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
    if (noise_dim < 1 || substeps < 1) throw ParseError("noise csv: malformed header");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        std::vector<double> row;
        for (int col = 0; std::getline(fields, cell, ','); ++col) {
            if (col >= 2) row.push_back(std::stod(cell));
        }
        if (static_cast<int>(row.size()) != noise_dim) throw ParseError("noise csv: ragged row");
        rows.push_back(std::move(row));
    }
    if (static_cast<long>(rows.size()) != static_cast<long>(N) * substeps + 1) {
        throw ParseError("noise csv: row count does not match N and substeps");
    }

    NoiseRealization z;
    z.grid = make_grid(T, N);
    z.noise_dim = noise_dim;
    z.substeps = substeps;
    Matrix all(static_cast<Eigen::Index>(rows.size()), noise_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int k = 0; k < noise_dim; ++k) all(static_cast<Eigen::Index>(i), k) = rows[i][k];
    }
    z.path.resize(N + 1, noise_dim);
    for (int n = 0; n <= N; ++n) z.path.row(n) = all.row(static_cast<Eigen::Index>(n) * substeps);
    if (substeps > 1) z.fine_path = std::move(all);
    return z;
}

void save_noise_csv(const std::string& path, const NoiseRealization& z) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_noise_csv(out, z);
}

NoiseRealization load_noise_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    return read_noise_csv(in);
}

}  // namespace deepsplit
