#include "deepsplit/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "deepsplit/errors.hpp"
#include "deepsplit/serialize.hpp"

namespace deepsplit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

long parse_long(const std::string& v) {
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected integer");
    return out;
}

int parse_int(const std::string& v) {
    const long out = parse_long(v);
    if (out < std::numeric_limits<int>::min() || out > std::numeric_limits<int>::max()) {
        throw std::invalid_argument("integer out of range");
    }
    return static_cast<int>(out);
}

std::uint64_t parse_u64(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw std::invalid_argument("expected non-negative integer");
    }
    return out;
}

double parse_double(const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw std::invalid_argument("expected real number");
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected boolean");
}

Vector parse_point(const std::string& v, int dim) {
    std::vector<double> values;
    std::string_view rest = v;
    while (true) {
        const auto comma = rest.find(',');
        values.push_back(parse_double(trim(rest.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    if (values.size() == 1) return Vector::Constant(dim, values[0]);
    if (static_cast<int>(values.size()) != dim) {
        throw std::invalid_argument("expected 1 or " + std::to_string(dim) + " coordinates");
    }
    return Eigen::Map<Vector>(values.data(), dim);
}

struct Entry {
    std::string key;
    std::string value;
    std::string where;
};

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"problem", [](ExperimentConfig& c, const std::string& v) { c.problem = parse_problem_id(v); }},
        {"dim", [](ExperimentConfig& c, const std::string& v) { c.dim = parse_int(v); }},
        {"T", [](ExperimentConfig& c, const std::string& v) { c.T = parse_double(v); }},
        {"steps", [](ExperimentConfig& c, const std::string& v) { c.steps = parse_int(v); }},
        {"iters", [](ExperimentConfig& c, const std::string& v) { c.iters = parse_long(v); }},
        {"batch", [](ExperimentConfig& c, const std::string& v) { c.batch = parse_int(v); }},
        {"runs", [](ExperimentConfig& c, const std::string& v) { c.runs = parse_int(v); }},
        {"run_offset", [](ExperimentConfig& c, const std::string& v) { c.run_offset = parse_long(v); }},
        {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
        {"x_eval", [](ExperimentConfig& c, const std::string& v) { c.x_eval = parse_point(v, c.dim); }},
        {"xi",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "point") c.xi = XiSpec::Mode::Point;
             else if (v == "box") c.xi = XiSpec::Mode::Box;
             else throw std::invalid_argument("expected point or box");
         }},
        {"xi_halfwidth", [](ExperimentConfig& c, const std::string& v) { c.xi_halfwidth = parse_double(v); }},
        {"optimizer",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "adam") c.optimizer = OptimizerKind::Adam;
             else if (v == "sgd") c.optimizer = OptimizerKind::Sgd;
             else throw std::invalid_argument("expected adam or sgd");
         }},
        {"lr_schedule", [](ExperimentConfig& c, const std::string& v) { c.schedule = LrSchedule::parse(v); }},
        {"sgd_lr", [](ExperimentConfig& c, const std::string& v) { c.sgd_lr = parse_double(v); }},
        {"adam_epsilon", [](ExperimentConfig& c, const std::string& v) { c.adam_epsilon = parse_double(v); }},
        {"hidden_dim", [](ExperimentConfig& c, const std::string& v) { c.hidden_dim = parse_int(v); }},
        {"hidden_layers", [](ExperimentConfig& c, const std::string& v) { c.hidden_layers = parse_int(v); }},
        {"batch_norm", [](ExperimentConfig& c, const std::string& v) { c.batch_norm = parse_bool(v); }},
        {"bn_momentum", [](ExperimentConfig& c, const std::string& v) { c.bn_momentum = parse_double(v); }},
        {"bn_epsilon", [](ExperimentConfig& c, const std::string& v) { c.bn_epsilon = parse_double(v); }},
        {"init",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "uniform") c.init = InitScheme::Uniform;
             else if (v == "normal") c.init = InitScheme::Normal;
             else if (v == "glorot") c.init = InitScheme::GlorotUniform;
             else throw std::invalid_argument("expected uniform, normal or glorot");
         }},
        {"warm_start", [](ExperimentConfig& c, const std::string& v) { c.warm_start = parse_bool(v); }},
        {"prev_bn",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "batch") c.prev_batch_stats = true;
             else if (v == "running") c.prev_batch_stats = false;
             else throw std::invalid_argument("expected batch or running");
         }},
        {"zakai_substeps", [](ExperimentConfig& c, const std::string& v) { c.zakai_substeps = parse_int(v); }},
        {"alpha", [](ExperimentConfig& c, const std::string& v) { c.params.alpha = parse_double(v); }},
        {"beta", [](ExperimentConfig& c, const std::string& v) { c.params.beta = parse_double(v); }},
        {"gamma_drift", [](ExperimentConfig& c, const std::string& v) { c.params.gamma_drift = parse_double(v); }},
        {"rate_r", [](ExperimentConfig& c, const std::string& v) { c.params.rate_r = parse_double(v); }},
        {"oracle_mc", [](ExperimentConfig& c, const std::string& v) { c.oracle.bs_pairs = parse_long(v); }},
        {"oracle_points", [](ExperimentConfig& c, const std::string& v) { c.oracle.zakai.points = parse_int(v); }},
        {"oracle_substeps",
         [](ExperimentConfig& c, const std::string& v) { c.oracle.zakai.time_substeps = parse_int(v); }},
        {"out", [](ExperimentConfig& c, const std::string& v) { c.out = v; }},
        {"log", [](ExperimentConfig& c, const std::string& v) { c.log = v; }},
        {"dump_dir", [](ExperimentConfig& c, const std::string& v) { c.dump_dir = v; }},
        {"progress_every", [](ExperimentConfig& c, const std::string& v) { c.progress_every = parse_int(v); }},
    };
    return table;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ParseError("key '" + key + "': " + what);
}

}  // namespace

std::shared_ptr<SpdeProblem> ExperimentConfig::make() const {
    ProblemParams p = params;
    if (p.horizon <= 0.0) p.horizon = T;
    return std::shared_ptr<SpdeProblem>(make_problem(problem, dim, p));
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig tc;
    tc.shape.input_dim = dim;
    tc.shape.hidden_dim = hidden_dim;
    tc.shape.hidden_layers = hidden_layers;
    tc.shape.batch_norm = batch_norm;
    tc.batch_size = batch;
    tc.iterations = iters;
    tc.optimizer = optimizer;
    tc.schedule = optimizer == OptimizerKind::Sgd ? LrSchedule::constant(sgd_lr, std::max(iters, 1L))
                                                  : schedule;
    tc.adam.epsilon = adam_epsilon;
    tc.bn_momentum = bn_momentum;
    tc.bn_epsilon = bn_epsilon;
    tc.init = init;
    tc.warm_start = warm_start;
    tc.prev_batch_stats = prev_batch_stats;
    tc.xi.mode = xi;
    tc.xi.center = x_eval;
    tc.xi.halfwidth = xi_halfwidth;
    tc.progress_every = progress_every;
    return tc;
}

ExperimentConfig preset_config(ProblemId id, int dim) {
    const PresetDefaults preset = preset_defaults(id);
    ExperimentConfig c;
    c.problem = id;
    c.dim = dim;
    c.T = preset.T;
    c.steps = preset.N;
    c.iters = preset.M;
    c.schedule = preset.schedule;
    c.x_eval = Vector::Constant(dim, preset.x_eval);
    c.hidden_dim = dim + 50;
    return c;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [key, setter] : setters()) out.push_back(key);
        return out;
    }();
    return keys;
}

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::vector<Entry> entries;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        const std::string where = "line " + std::to_string(line_no);
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value', got '" + content + "'");
        Entry e{trim(std::string_view(content).substr(0, eq)), trim(std::string_view(content).substr(eq + 1)), where};
        if (e.key.empty()) throw ParseError(where + ": missing key");
        entries.push_back(std::move(e));
    }
    for (const auto& [key, value] : overrides) entries.push_back({key, trim(value), "flag --" + key});

    for (const auto& e : entries) {
        if (!setters().count(e.key)) throw ParseError(e.where + ": unknown key '" + e.key + "'");
    }

    ProblemId id = ProblemId::HeatAdditive;
    int dim = 1;
    auto wrap = [](const Entry& e, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ParseError(e.where + ": key '" + e.key + "': " + ex.what() + ", got '" + e.value + "'");
        }
    };
    for (const auto& e : entries) {
        if (e.key == "problem") wrap(e, [&] { id = parse_problem_id(e.value); });
        if (e.key == "dim") wrap(e, [&] { dim = parse_int(e.value); });
    }
    if (dim < 1) throw ParseError("key 'dim': must be >= 1");

    ExperimentConfig c = preset_config(id, dim);
    const long preset_iters = c.iters;
    bool schedule_given = false;
    bool hidden_given = false;
    for (const auto& e : entries) {
        if (e.key == "x_eval" || e.key == "problem" || e.key == "dim") continue;
        wrap(e, [&] { setters().at(e.key)(c, e.value); });
        schedule_given |= e.key == "lr_schedule";
        hidden_given |= e.key == "hidden_dim";
    }
    for (const auto& e : entries) {
        if (e.key == "x_eval") wrap(e, [&] { c.x_eval = parse_point(e.value, dim); });
    }
    if (!hidden_given) c.hidden_dim = dim + 50;
    if (!schedule_given && c.iters > 0 && c.iters != preset_iters) {
        c.schedule = c.schedule.scaled(static_cast<double>(c.iters) / static_cast<double>(preset_iters));
    }

    require(c.T > 0.0, "T", "must be > 0");
    require(c.steps >= 1, "steps", "must be >= 1");
    require(c.iters >= 0, "iters", "must be >= 0");
    require(c.batch >= 1, "batch", "must be >= 1");
    require(c.runs >= 1, "runs", "must be >= 1");
    require(c.run_offset >= 0, "run_offset", "must be >= 0");
    require(c.hidden_dim >= 1, "hidden_dim", "must be >= 1");
    require(c.hidden_layers >= 1, "hidden_layers", "must be >= 1");
    require(c.bn_momentum >= 0.0 && c.bn_momentum < 1.0, "bn_momentum", "must lie in [0, 1)");
    require(c.bn_epsilon > 0.0, "bn_epsilon", "must be > 0");
    require(c.sgd_lr > 0.0, "sgd_lr", "must be > 0");
    require(c.zakai_substeps >= 1, "zakai_substeps", "must be >= 1");
    require(c.oracle.bs_pairs >= 2, "oracle_mc", "must be >= 2");
    require(c.xi_halfwidth >= 0.0, "xi_halfwidth", "must be >= 0");
    require(c.progress_every >= 0, "progress_every", "must be >= 0");
    return c;
}

ExperimentConfig parse_config_file(const std::string& path,
                                   const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), overrides);
}

double rel_l2(std::span<const double> errors) {
    if (errors.empty()) throw std::invalid_argument("rel_l2 needs at least one error");
    double sum = 0.0;
    for (double e : errors) sum += e * e;
    return std::sqrt(sum / static_cast<double>(errors.size()));
}

bool ExperimentReport::any_failed() const {
    for (const auto& row : rows) {
        if (row.failed) return true;
    }
    return false;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentHooks& hooks) {
    const std::shared_ptr<SpdeProblem> problem = config.make();
    const TimeGrid grid = make_grid(config.T, config.steps);
    TrainConfig tc = config.train_config();

    ExperimentReport report;
    report.config = config;
    if (hooks.training_log != nullptr) *hooks.training_log << "run,n,m,loss,lr\n";

    for (int r = 0; r < config.runs; ++r) {
        RunRecord row;
        row.run = config.run_offset + r;
        const RunStreams streams{config.seed, static_cast<std::uint64_t>(row.run)};
        RngStream noise_stream = streams.noise();
        const NoiseRealization z = sample_noise(*problem, grid, noise_stream, config.zakai_substeps);

        if (hooks.training_log != nullptr) {
            std::ostream& log = *hooks.training_log;
            const long run = row.run;
            tc.on_iteration = [&log, run](int n, long m, double loss, double lr) {
                log << run << ',' << n << ',' << m << ',' << format_number(loss) << ','
                    << format_number(lr) << '\n';
            };
        }

        try {
            const auto start = std::chrono::steady_clock::now();
            const TrainedSolver solver = solve(problem, grid, z, tc, streams);
            row.runtime_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            row.result = solver.evaluate(grid.N, config.x_eval);
            if (!config.dump_dir.empty()) {
                const std::filesystem::path dir(config.dump_dir);
                std::filesystem::create_directories(dir);
                const std::string stem = "run" + std::to_string(row.run);
                save_noise_csv((dir / (stem + "_noise.csv")).string(), z);
                for (const auto& step : solver.steps()) {
                    save_step((dir / (stem + "_step" + std::to_string(step.n) + ".bin")).string(), step);
                }
            }
        } catch (const TrainingError& e) {
            row.failed = true;
            row.failure = e.what();
            row.result = kNaN;
        }

        try {
            RngStream oracle_stream = streams.oracle();
            const McEstimate ref =
                reference_solution(*problem, z, config.x_eval, config.oracle, oracle_stream);
            row.reference = ref.value;
            row.reference_std_error = ref.std_error;
        } catch (const OracleError& e) {
            row.reference = kNaN;
            row.reference_std_error = kNaN;
            if (hooks.messages != nullptr) *hooks.messages << "run " << row.run << ": no reference (" << e.what() << ")\n";
        }
        row.rel_pathwise_error = std::abs(row.result - row.reference) / std::abs(row.reference);

        if (hooks.messages != nullptr) {
            if (row.failed) {
                *hooks.messages << "run " << row.run << ": FAILED: " << row.failure << '\n';
            } else {
                *hooks.messages << "run " << row.run << ": result " << format_number(row.result)
                                << ", reference " << format_number(row.reference) << ", rel error "
                                << format_number(row.rel_pathwise_error) << ", "
                                << format_number(row.runtime_s) << " s\n";
            }
        }
        report.rows.push_back(std::move(row));
    }

    std::vector<double> errors;
    bool valid = true;
    for (const auto& row : report.rows) {
        valid = valid && !row.failed && std::isfinite(row.rel_pathwise_error);
        errors.push_back(row.rel_pathwise_error);
    }
    report.rel_l2 = valid ? rel_l2(errors) : kNaN;
    return report;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "NaN";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_report_csv(const ExperimentReport& report, std::ostream& out, bool with_runtime) {
    const std::string name = problem_name(report.config.problem);
    const int d = report.config.dim;
    out << "problem,d,run,result,runtime_s,reference,rel_pathwise_error\n";
    for (const auto& row : report.rows) {
        std::string runtime;
        if (with_runtime) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3f", row.runtime_s);
            runtime = buf;
        }
        out << name << ',' << d << ',' << row.run << ',' << format_number(row.result) << ','
            << runtime << ',' << format_number(row.reference) << ','
            << format_number(row.rel_pathwise_error) << '\n';
    }
    out << name << ',' << d << ",L2,,,," << format_number(report.rel_l2) << '\n';
}

}  // namespace deepsplit
