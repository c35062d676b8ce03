#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deepsplit/oracles.hpp"
#include "deepsplit/problems.hpp"
#include "deepsplit/trainer.hpp"

namespace deepsplit {

struct ExperimentConfig {
    ProblemId problem = ProblemId::HeatAdditive;
    ProblemParams params;
    int dim = 1;
    double T = 1.0;
    int steps = 5;
    long iters = 8000;
    int batch = 64;
    int runs = 5;
    long run_offset = 0;
    std::uint64_t seed = 0;
    Vector x_eval;

    XiSpec::Mode xi = XiSpec::Mode::Point;
    double xi_halfwidth = 1.0;

    OptimizerKind optimizer = OptimizerKind::Adam;
    LrSchedule schedule;
    double sgd_lr = 1e-3;
    double adam_epsilon = 1e-8;
    int hidden_dim = 51;
    int hidden_layers = 2;
    bool batch_norm = true;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;
    InitScheme init = InitScheme::Uniform;
    bool warm_start = false;
    bool prev_batch_stats = true;
    int zakai_substeps = 16;

    OracleOptions oracle;

    std::string out;
    std::string log;
    std::string dump_dir;
    int progress_every = 0;

    /// Trainer settings derived from this experiment.
    TrainConfig train_config() const;
    std::shared_ptr<SpdeProblem> make() const;
};

/// Defaults of the named preset for dimension `dim`.
ExperimentConfig preset_config(ProblemId id, int dim = 1);

/// Key names accepted by parse_config, in documentation order.
const std::vector<std::string>& config_keys();

/// Flat `key = value` text with `#` comments, merged with `overrides`
/// (applied after the file, in order). `problem` and `dim` select the preset
/// whose defaults fill every key not given. When `iters` differs from the
/// preset and no `lr_schedule` is given, the preset schedule is compressed
/// proportionally. Throws ParseError naming the line and key.
ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

ExperimentConfig parse_config_file(const std::string& path,
                                   const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Root-mean-square of the entries. Throws std::invalid_argument when empty.
double rel_l2(std::span<const double> errors);

struct RunRecord {
    long run = 0;
    double result = 0.0;
    double runtime_s = 0.0;
    double reference = 0.0;
    double reference_std_error = 0.0;
    double rel_pathwise_error = 0.0;
    bool failed = false;
    std::string failure;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RunRecord> rows;
    double rel_l2 = 0.0;  // NaN when any run failed or has no reference

    bool any_failed() const;
};

struct ExperimentHooks {
    std::ostream* training_log = nullptr;  // CSV rows run,n,m,loss,lr
    std::ostream* messages = nullptr;      // one human-readable line per run
};

ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentHooks& hooks = {});

/// problem,d,run,result,runtime_s,reference,rel_pathwise_error rows plus the
/// L2 summary row. `with_runtime = false` blanks the runtime column.
void write_report_csv(const ExperimentReport& report, std::ostream& out, bool with_runtime = true);

/// Shortest round-trip-safe decimal form used in every CSV ("NaN" for NaN).
std::string format_number(double value);

}  // namespace deepsplit
