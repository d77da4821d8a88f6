// saetrain: deep stacked-autoencoder training with greedy or synchronized
// layer-wise pre-training, fine-tuning, evaluation, and run comparison.

#include <CLI11.hpp>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sae/checkpoint.hpp"
#include "sae/pipeline.hpp"
#include "sae/synth.hpp"

namespace fs = std::filesystem;
using namespace sae;

namespace {

// Exit codes: 0 ok, 2 configuration, 3 data, 4 runtime.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CommonOptions {
    std::string config_path;
    std::string preset;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string run_id;
    bool quiet = false;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Configuration file (key = value lines)");
    cmd->add_option("--preset", opts.preset, "Parameter preset: paper or desk");
    cmd->add_option("--set", opts.overrides, "Override a single key, e.g. --set train.seed=7");
    cmd->add_option("--out", opts.out_dir, "Output directory root (default: out)");
    cmd->add_option("--run-id", opts.run_id, "Run directory name (default: derived)");
    cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
}

bool test_pair_available(const TrainingConfig& cfg) {
    if (!cfg.data.test_images.empty()) return true;
    if (const char* dir = std::getenv("SAETRAIN_DATA_DIR"))
        return fs::exists(std::string(dir) + "/t10k-images-idx3-ubyte");
    return false;
}

TrainingConfig resolve_config(const CommonOptions& opts) {
    TrainingConfig cfg;
    if (!opts.preset.empty()) apply_preset(cfg, opts.preset);
    if (!opts.config_path.empty()) apply_config_file(cfg, opts.config_path);
    for (const std::string& item : opts.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + item + "'");
        apply_config_value(cfg, item.substr(0, eq), item.substr(eq + 1));
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    cfg.validate();
    return cfg;
}

std::string default_run_id(const std::string& stem, const TrainingConfig& cfg) {
    return stem + "-s" + std::to_string(cfg.seed) + "-" + std::to_string(std::time(nullptr));
}

fs::path make_run_dir(const TrainingConfig& cfg, const CommonOptions& opts,
                      const std::string& stem) {
    const std::string id = opts.run_id.empty() ? default_run_id(stem, cfg) : opts.run_id;
    const fs::path dir = fs::path(cfg.out_dir) / id;
    fs::create_directories(dir / "checkpoints");
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot write " + path.string());
    out << text;
    if (!out) throw IoError(path.string(), "failed writing " + path.string());
}

void write_finetune_log(const fs::path& path, const std::vector<FinetuneEpoch>& log) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot write " + path.string());
    out << "epoch,train_err,valid_err,t_start_ns,t_end_ns\n";
    char buf[160];
    for (const FinetuneEpoch& row : log) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%lld,%lld\n",
                      static_cast<unsigned long long>(row.epoch), row.train_err, row.valid_err,
                      static_cast<long long>(row.t_start_ns),
                      static_cast<long long>(row.t_end_ns));
        out << buf;
    }
}

void print_schedule(const TrainingConfig& cfg) {
    const auto stipulated = cfg.stipulated();
    const auto extra = cfg.extra_budget();
    std::printf("resolved schedule (%s, %s):\n", sync_mode_name(cfg.mode),
                termination_name(cfg.schedule.termination));
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        std::printf("  layer %zu: %zu -> %zu, stipulated %zu, extra ", l + 1, cfg.arch[l],
                    cfg.arch[l + 1], stipulated[l]);
        if (extra[l] == kUnlimitedEpochs) std::printf("unlimited");
        else std::printf("%zu", extra[l]);
        std::printf(", wake %zu\n", cfg.schedule.wake_epochs);
    }
}

void save_pretrain_checkpoint(const fs::path& dir, const TrainingConfig& cfg,
                              const PretrainResult& result) {
    if (!result.rbms.empty()) {
        RbmStackCheckpoint checkpoint;
        checkpoint.rbms = result.rbms;
        checkpoint.seed = cfg.seed;
        checkpoint.epochs_done.assign(result.rbms.size(), 0);
        for (const TraceEvent& e : result.trace)
            if (e.kind == EventKind::Epoch && e.worker_id >= 1 &&
                e.worker_id <= checkpoint.epochs_done.size())
                ++checkpoint.epochs_done[e.worker_id - 1];
        save_rbm_stack((dir / "checkpoints" / "pretrain.rbms").string(), checkpoint);
    } else {
        LayerStackCheckpoint checkpoint;
        checkpoint.layers = result.encoder_layers;
        checkpoint.seed = cfg.seed;
        checkpoint.epochs_done.assign(result.encoder_layers.size(), cfg.epochs_per_layer);
        save_layer_stack((dir / "checkpoints" / "pretrain.layers").string(), checkpoint);
    }
}

StackedAutoencoder load_net_from_checkpoint(const std::string& path, std::uint64_t& seed,
                                            std::uint64_t& epochs_done) {
    switch (checkpoint_kind(path)) {
        case CheckpointKind::RbmStack: {
            const RbmStackCheckpoint checkpoint = load_rbm_stack(path);
            seed = checkpoint.seed;
            epochs_done = 0;
            return unfold(checkpoint.rbms);
        }
        case CheckpointKind::Sae: {
            SaeCheckpoint checkpoint = load_sae(path);
            seed = checkpoint.seed;
            epochs_done = checkpoint.epochs_done;
            return std::move(checkpoint.net);
        }
        case CheckpointKind::LayerStack: {
            const LayerStackCheckpoint checkpoint = load_layer_stack(path);
            seed = checkpoint.seed;
            epochs_done = 0;
            return unfold(checkpoint.layers);
        }
    }
    throw Error("unreachable checkpoint kind");
}

int cmd_pretrain(const CommonOptions& opts, const std::string& algo_name, bool dry_run) {
    const TrainingConfig cfg = resolve_config(opts);
    const Algorithm algorithm = algo_name == "greedy" ? Algorithm::Greedy : Algorithm::Sync;
    if (dry_run) {
        print_schedule(cfg);
        return kExitOk;
    }

    const SplitData data = load_data(cfg, test_pair_available(cfg));
    if (!opts.quiet)
        std::printf("pre-training (%s): %zu train / %zu valid examples, arch depth %zu\n",
                    algorithm_name(algorithm), data.train.rows(), data.valid.rows(),
                    cfg.layer_count());

    const fs::path dir = make_run_dir(cfg, opts, std::string("pretrain-") + algo_name);
    write_text(dir / "config.echo", config_echo(cfg));

    const PretrainResult result = run_pretrain(algorithm, cfg, data.train, data.valid);
    export_trace(result.trace, (dir / "trace.csv").string());
    export_error_curves(result.trace, (dir / "curves.csv").string());
    save_pretrain_checkpoint(dir, cfg, result);

    const StackedAutoencoder net = unfold_result(result);
    RunReport report;
    report.algorithm = algorithm_name(algorithm);
    report.pretrain_wall_ns = result.wall_ns;
    report.train_err = evaluate(net, data.train);
    report.test_err = data.test.rows() ? evaluate(net, data.test) : 0.0;
    report.config_hash = config_hash(cfg);
    report.seed = cfg.seed;
    save_run_report(report, (dir / "summary").string());

    if (!opts.quiet) {
        std::printf("pre-training wall time: %s\n", format_duration_ns(result.wall_ns).c_str());
        std::printf("unfolded net: train err %.4f, valid err %.4f", report.train_err,
                    evaluate(net, data.valid));
        if (data.test.rows()) std::printf(", test err %.4f", report.test_err);
        std::printf("\nartifacts: %s\n", dir.string().c_str());
    }
    return kExitOk;
}

int cmd_finetune(const CommonOptions& opts, const std::string& checkpoint_path, long epochs_flag) {
    const TrainingConfig cfg = resolve_config(opts);
    std::uint64_t seed = cfg.seed;
    std::uint64_t epochs_done = 0;
    StackedAutoencoder net = load_net_from_checkpoint(checkpoint_path, seed, epochs_done);

    const SplitData data = load_data(cfg, test_pair_available(cfg));
    const std::size_t epochs =
        epochs_flag >= 0 ? static_cast<std::size_t>(epochs_flag) : cfg.finetune_epochs;

    const fs::path dir = make_run_dir(cfg, opts, "finetune");
    write_text(dir / "config.echo", config_echo(cfg));

    if (!opts.quiet)
        std::printf("fine-tuning for %zu epochs (resuming at epoch %llu, lr %g)\n", epochs,
                    static_cast<unsigned long long>(epochs_done), cfg.backprop_learning_rate);
    const FinetuneResult result =
        run_finetune(net, cfg, data.train, data.valid, seed, epochs_done, epochs);
    for (const FinetuneEpoch& row : result.log)
        if (!opts.quiet)
            std::printf("  epoch %llu: train %.4f, valid %.4f\n",
                        static_cast<unsigned long long>(row.epoch), row.train_err, row.valid_err);
    write_finetune_log(dir / "finetune.csv", result.log);

    SaeCheckpoint checkpoint;
    checkpoint.net = net;
    checkpoint.seed = seed;
    checkpoint.epochs_done = epochs_done + epochs;
    save_sae((dir / "checkpoints" / "model.sae").string(), checkpoint);

    RunReport report;
    report.algorithm = "finetune";
    report.finetune_wall_ns = result.wall_ns;
    report.train_err = evaluate(net, data.train);
    report.test_err = data.test.rows() ? evaluate(net, data.test) : 0.0;
    report.config_hash = config_hash(cfg);
    report.seed = seed;
    save_run_report(report, (dir / "summary").string());

    if (!opts.quiet) {
        std::printf("fine-tuning wall time: %s\n", format_duration_ns(result.wall_ns).c_str());
        std::printf("final: train err %.4f, valid err %.4f", report.train_err,
                    evaluate(net, data.valid));
        if (data.test.rows()) std::printf(", test err %.4f", report.test_err);
        std::printf("\nartifacts: %s\n", dir.string().c_str());
    }
    return kExitOk;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint_path,
             const std::string& which) {
    const TrainingConfig cfg = resolve_config(opts);
    std::uint64_t seed = 0, epochs_done = 0;
    const StackedAutoencoder net = load_net_from_checkpoint(checkpoint_path, seed, epochs_done);
    const SplitData data = load_data(cfg, which == "test");
    const Matrix& subject = which == "test" ? data.test
                            : which == "valid" ? data.valid
                                               : data.train;
    if (subject.rows() == 0) throw DataError("no " + which + " examples available");
    std::printf("%s mse_per_example = %.6f (%zu examples)\n", which.c_str(),
                evaluate(net, subject), subject.rows());
    return kExitOk;
}

int cmd_compare(const CommonOptions& opts) {
    const TrainingConfig cfg = resolve_config(opts);
    const SplitData data = load_data(cfg, true);
    const fs::path dir = make_run_dir(cfg, opts, "compare");
    write_text(dir / "config.echo", config_echo(cfg));

    if (!opts.quiet)
        std::printf("comparing algorithms on %zu train / %zu valid / %zu test examples\n",
                    data.train.rows(), data.valid.rows(), data.test.rows());

    EndToEndResult greedy = run_end_to_end(Algorithm::Greedy, cfg, data);
    if (!opts.quiet)
        std::printf("greedy done: pre-train %s, fine-tune %s\n",
                    format_duration_ns(greedy.report.pretrain_wall_ns).c_str(),
                    format_duration_ns(greedy.report.finetune_wall_ns).c_str());
    EndToEndResult sync = run_end_to_end(Algorithm::Sync, cfg, data);
    if (!opts.quiet)
        std::printf("sync done:   pre-train %s, fine-tune %s\n",
                    format_duration_ns(sync.report.pretrain_wall_ns).c_str(),
                    format_duration_ns(sync.report.finetune_wall_ns).c_str());

    for (const auto* run : {&greedy, &sync}) {
        const fs::path sub = dir / run->report.algorithm;
        fs::create_directories(sub / "checkpoints");
        export_trace(run->pretrain.trace, (sub / "trace.csv").string());
        export_error_curves(run->pretrain.trace, (sub / "curves.csv").string());
        write_finetune_log(sub / "finetune.csv", run->finetune.log);
        save_run_report(run->report, (sub / "summary").string());
        save_pretrain_checkpoint(sub, cfg, run->pretrain);
        SaeCheckpoint checkpoint;
        checkpoint.net = run->net;
        checkpoint.seed = cfg.seed;
        checkpoint.epochs_done = cfg.finetune_epochs;
        save_sae((sub / "checkpoints" / "model.sae").string(), checkpoint);
    }

    std::printf("\n%-14s %11s %11s %15s %15s\n", "algorithm", "train err", "test err",
                "pre-training", "fine-tuning");
    for (const auto* run : {&greedy, &sync})
        std::printf("%-14s %11.4f %11.4f %15s %15s\n", run->report.algorithm.c_str(),
                    run->report.train_err, run->report.test_err,
                    format_duration_ns(run->report.pretrain_wall_ns).c_str(),
                    format_duration_ns(run->report.finetune_wall_ns).c_str());

    const Speedup result = speedup(greedy.report, sync.report);
    std::printf("\nspeedup (pre-training time saved): %.2f%%\n",
                100.0 * result.pretrain_fraction);
    std::printf("speedup (total time saved):        %.2f%%\n", 100.0 * result.total_fraction);
    return kExitOk;
}

int cmd_trace_export(const std::string& trace_path, const std::string& out_path) {
    export_error_curves(parse_trace(trace_path), out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return kExitOk;
}

int cmd_synth_data(const std::string& out_dir, std::size_t per_class,
                   std::size_t test_per_class, std::uint64_t seed) {
    fs::create_directories(out_dir);
    // One corpus, row-split, so train and test share class prototypes.
    const LabeledDataset corpus = make_synthetic_digits(per_class + test_per_class, seed);
    const std::size_t train_rows = per_class * 10;
    LabeledDataset train, test;
    train.images = Matrix(train_rows, corpus.images.cols());
    test.images = Matrix(corpus.size() - train_rows, corpus.images.cols());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        LabeledDataset& dest = i < train_rows ? train : test;
        const std::size_t row = i < train_rows ? i : i - train_rows;
        std::copy(corpus.images.row(i), corpus.images.row(i) + corpus.images.cols(),
                  dest.images.row(row));
        dest.labels.push_back(corpus.labels[i]);
    }
    save_idx(train, out_dir + "/train-images-idx3-ubyte", out_dir + "/train-labels-idx1-ubyte");
    save_idx(test, out_dir + "/t10k-images-idx3-ubyte", out_dir + "/t10k-labels-idx1-ubyte");
    std::printf("wrote %zu train and %zu test examples under %s\n", train.size(), test.size(),
                out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep stacked-autoencoder trainer with greedy and synchronized layer-wise "
                 "pre-training"};
    app.require_subcommand(1);

    CommonOptions opts;

    auto* pretrain = app.add_subcommand("pretrain", "Run layer-wise pre-training");
    std::string algo;
    bool dry_run = false;
    pretrain->add_option("--algo", algo, "Algorithm: greedy or sync")
        ->required()
        ->check(CLI::IsMember({"greedy", "sync"}));
    pretrain->add_flag("--dry-run", dry_run, "Validate config and print the schedule");
    add_common_options(pretrain, opts);

    auto* finetune = app.add_subcommand("finetune", "Fine-tune a pre-trained model");
    std::string checkpoint_path;
    long epochs_flag = -1;
    finetune->add_option("--checkpoint", checkpoint_path, "Checkpoint to start from")
        ->required();
    finetune->add_option("--epochs", epochs_flag, "Additional epochs (default from config)");
    add_common_options(finetune, opts);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_checkpoint, eval_which = "test";
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate")->required();
    eval->add_option("--data", eval_which, "Dataset: train, valid or test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    add_common_options(eval, opts);

    auto* compare = app.add_subcommand("compare", "Run greedy and sync end to end, side by side");
    add_common_options(compare, opts);

    auto* trace_export = app.add_subcommand("trace-export", "Convert a trace CSV to curves CSV");
    std::string trace_in, trace_out = "curves.csv";
    trace_export->add_option("--trace", trace_in, "Input trace.csv")->required();
    trace_export->add_option("--out-file", trace_out, "Output curves path");

    auto* synth = app.add_subcommand("synth-data", "Generate a synthetic IDX dataset");
    std::string synth_dir = "data";
    std::size_t synth_per_class = 700, synth_test_per_class = 100;
    std::uint64_t synth_seed = 7;
    synth->add_option("--dir", synth_dir, "Output directory");
    synth->add_option("--per-class", synth_per_class, "Training examples per class");
    synth->add_option("--test-per-class", synth_test_per_class, "Test examples per class");
    synth->add_option("--seed", synth_seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (pretrain->parsed()) return cmd_pretrain(opts, algo, dry_run);
        if (finetune->parsed()) return cmd_finetune(opts, checkpoint_path, epochs_flag);
        if (eval->parsed()) return cmd_eval(opts, eval_checkpoint, eval_which);
        if (compare->parsed()) return cmd_compare(opts);
        if (trace_export->parsed()) return cmd_trace_export(trace_in, trace_out);
        if (synth->parsed())
            return cmd_synth_data(synth_dir, synth_per_class, synth_test_per_class, synth_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
