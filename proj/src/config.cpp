#include "sae/config.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sae {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, int line) {
    throw ConfigError("invalid value '" + value + "' for key '" + key + "'" +
                          (line ? " (line " + std::to_string(line) + ")" : ""),
                      line, key);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) bad_value(key, value, line);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, line);
    }
}

double parse_double(const std::string& key, const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) bad_value(key, value, line);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, line);
    }
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, line);
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value,
                                         int line) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value, line);
        out.push_back(static_cast<std::size_t>(parse_u64(key, item, line)));
    }
    if (out.empty()) bad_value(key, value, line);
    return out;
}

std::vector<MomentumStage> parse_momentum(const std::string& key, const std::string& value,
                                          int line) {
    std::vector<MomentumStage> stages;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) bad_value(key, value, line);
        MomentumStage stage;
        stage.from_epoch =
            static_cast<std::size_t>(parse_u64(key, trim(item.substr(0, colon)), line));
        stage.value = parse_double(key, trim(item.substr(colon + 1)), line);
        stages.push_back(stage);
    }
    if (stages.empty()) bad_value(key, value, line);
    return stages;
}

std::string momentum_to_string(const std::vector<MomentumStage>& stages) {
    std::string out;
    for (const auto& stage : stages) {
        if (!out.empty()) out += ",";
        char buf[48];
        std::snprintf(buf, sizeof buf, "%zu:%.17g", stage.from_epoch, stage.value);
        out += buf;
    }
    return out;
}

std::string size_list_to_string(const std::vector<std::size_t>& items) {
    std::string out;
    for (std::size_t v : items) {
        if (!out.empty()) out += ",";
        out += std::to_string(v);
    }
    return out;
}

}  // namespace

const char* pretrain_unit_name(PretrainUnit unit) {
    return unit == PretrainUnit::Rbm ? "rbm" : "autoencoder";
}

const char* sync_mode_name(SyncMode mode) {
    return mode == SyncMode::FreeRunning ? "free_running" : "deterministic_rounds";
}

const char* termination_name(Termination termination) {
    return termination == Termination::AllStipulated ? "all_stipulated" : "first_layer_done";
}

void apply_config_value(TrainingConfig& cfg, const std::string& key, const std::string& value,
                        int line) {
    if (key == "data.images") cfg.data.images = value;
    else if (key == "data.labels") cfg.data.labels = value;
    else if (key == "data.test_images") cfg.data.test_images = value;
    else if (key == "data.test_labels") cfg.data.test_labels = value;
    else if (key == "data.per_class_valid")
        cfg.data.per_class_valid = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "data.split_seed") cfg.data.split_seed = parse_u64(key, value, line);
    else if (key == "data.train_limit")
        cfg.data.train_limit = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "data.test_limit")
        cfg.data.test_limit = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "net.arch") {
        cfg.arch = parse_size_list(key, value, line);
    } else if (key == "pretrain.unit") {
        if (value == "rbm") cfg.unit = PretrainUnit::Rbm;
        else if (value == "autoencoder") cfg.unit = PretrainUnit::Autoencoder;
        else bad_value(key, value, line);
    } else if (key == "cd.learning_rate") cfg.cd.learning_rate = parse_double(key, value, line);
    else if (key == "cd.momentum") cfg.cd.momentum_schedule = parse_momentum(key, value, line);
    else if (key == "cd.steps")
        cfg.cd.cd_steps = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "cd.sample_hidden") cfg.cd.sample_hidden = parse_bool(key, value, line);
    else if (key == "backprop.learning_rate")
        cfg.backprop_learning_rate = parse_double(key, value, line);
    else if (key == "train.batch_size")
        cfg.batch_size = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "train.seed") cfg.seed = parse_u64(key, value, line);
    else if (key == "train.epochs_per_layer")
        cfg.epochs_per_layer = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "train.finetune_epochs")
        cfg.finetune_epochs = static_cast<std::size_t>(parse_u64(key, value, line));
    else if (key == "sync.mode") {
        if (value == "free_running") cfg.mode = SyncMode::FreeRunning;
        else if (value == "deterministic_rounds") cfg.mode = SyncMode::DeterministicRounds;
        else bad_value(key, value, line);
    } else if (key == "sync.termination") {
        if (value == "all_stipulated") cfg.schedule.termination = Termination::AllStipulated;
        else if (value == "first_layer_done")
            cfg.schedule.termination = Termination::FirstLayerDone;
        else bad_value(key, value, line);
    } else if (key == "sync.stipulated_epochs") {
        cfg.schedule.stipulated_epochs = parse_size_list(key, value, line);
    } else if (key == "sync.wake_epochs") {
        cfg.schedule.wake_epochs = static_cast<std::size_t>(parse_u64(key, value, line));
    } else if (key == "sync.extra_epochs") {
        if (value == "unlimited") cfg.schedule.extra_epochs.clear();
        else cfg.schedule.extra_epochs = parse_size_list(key, value, line);
    } else if (key == "sync.watchdog_seconds") {
        cfg.watchdog_seconds = parse_double(key, value, line);
    } else if (key == "workers.pin") cfg.pin_workers = parse_bool(key, value, line);
    else if (key == "out.dir") cfg.out_dir = value;
    else
        throw ConfigError("unknown key '" + key + "'" +
                              (line ? " (line " + std::to_string(line) + ")" : ""),
                          line, key);
}

void apply_config_text(TrainingConfig& cfg, const std::string& text, const std::string& origin) {
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'",
                              line_no);
        apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no);
    }
}

void apply_config_file(TrainingConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(cfg, buffer.str(), path);
}

TrainingConfig parse_config_text(const std::string& text, const std::string& origin) {
    TrainingConfig cfg;
    apply_config_text(cfg, text, origin);
    return cfg;
}

TrainingConfig parse_config_file(const std::string& path) {
    TrainingConfig cfg;
    apply_config_file(cfg, path);
    return cfg;
}

std::vector<std::size_t> TrainingConfig::stipulated() const {
    const std::size_t layers = layer_count();
    std::vector<std::size_t> out = schedule.stipulated_epochs;
    if (out.empty()) out.assign(layers, epochs_per_layer);
    else if (out.size() == 1) out.assign(layers, out.front());
    else if (out.size() != layers)
        throw ConfigError("sync.stipulated_epochs has " + std::to_string(out.size()) +
                              " entries for " + std::to_string(layers) + " layers",
                          0, "sync.stipulated_epochs");
    return out;
}

std::vector<std::size_t> TrainingConfig::extra_budget() const {
    const std::size_t layers = layer_count();
    std::vector<std::size_t> out = schedule.extra_epochs;
    if (out.empty()) out.assign(layers, kUnlimitedEpochs);
    else if (out.size() == 1) out.assign(layers, out.front());
    else if (out.size() != layers)
        throw ConfigError("sync.extra_epochs has " + std::to_string(out.size()) +
                              " entries for " + std::to_string(layers) + " layers",
                          0, "sync.extra_epochs");
    return out;
}

void TrainingConfig::validate() const {
    if (arch.size() < 2)
        throw ConfigError("net.arch needs at least an input and one hidden size", 0, "net.arch");
    for (std::size_t dim : arch)
        if (dim == 0) throw ConfigError("net.arch dimensions must be positive", 0, "net.arch");
    if (cd.learning_rate <= 0.0)
        throw ConfigError("cd.learning_rate must be positive", 0, "cd.learning_rate");
    if (cd.cd_steps == 0) throw ConfigError("cd.steps must be >= 1", 0, "cd.steps");
    for (const auto& stage : cd.momentum_schedule)
        if (stage.value < 0.0 || stage.value >= 1.0)
            throw ConfigError("cd.momentum values must lie in [0,1)", 0, "cd.momentum");
    if (backprop_learning_rate < 0.0)
        throw ConfigError("backprop.learning_rate must be >= 0", 0, "backprop.learning_rate");
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1", 0, "train.batch_size");
    if (epochs_per_layer == 0)
        throw ConfigError("train.epochs_per_layer must be >= 1", 0, "train.epochs_per_layer");
    if (schedule.wake_epochs == 0)
        throw ConfigError("sync.wake_epochs must be >= 1", 0, "sync.wake_epochs");
    for (std::size_t n : stipulated())
        if (n == 0)
            throw ConfigError("sync.stipulated_epochs entries must be >= 1", 0,
                              "sync.stipulated_epochs");
    extra_budget();  // shape check
    if (watchdog_seconds < 0.0)
        throw ConfigError("sync.watchdog_seconds must be >= 0", 0, "sync.watchdog_seconds");
}

void apply_preset(TrainingConfig& cfg, const std::string& name) {
    if (name == "paper") {
        cfg.arch = {784, 1000, 500, 250, 30};
        cfg.unit = PretrainUnit::Rbm;
        cfg.cd.learning_rate = 0.1;
        cfg.cd.momentum_schedule = {{0, 0.5}, {5, 0.9}};
        cfg.cd.cd_steps = 1;
        cfg.backprop_learning_rate = 0.001;
        cfg.batch_size = 100;
        cfg.epochs_per_layer = 20;
        cfg.finetune_epochs = 10;
        cfg.data.per_class_valid = 1000;
        cfg.data.train_limit = 0;
        cfg.data.test_limit = 0;
        cfg.schedule.stipulated_epochs = {20, 20, 20, 20};
        cfg.schedule.wake_epochs = 1;
        cfg.schedule.termination = Termination::FirstLayerDone;
        cfg.schedule.extra_epochs = {0, 5, 20, 40};
        cfg.mode = SyncMode::FreeRunning;
        cfg.pin_workers = true;
        cfg.watchdog_seconds = 1800.0;
    } else if (name == "desk") {
        cfg.arch = {784, 256, 128, 64, 16};
        cfg.unit = PretrainUnit::Rbm;
        cfg.cd.learning_rate = 0.1;
        cfg.cd.momentum_schedule = {{0, 0.5}, {5, 0.9}};
        cfg.cd.cd_steps = 1;
        cfg.backprop_learning_rate = 0.001;
        cfg.batch_size = 100;
        cfg.epochs_per_layer = 10;
        cfg.finetune_epochs = 5;
        cfg.data.per_class_valid = 100;
        cfg.data.train_limit = 5000;
        cfg.data.test_limit = 1000;
        cfg.schedule.stipulated_epochs = {10, 10, 10, 10};
        cfg.schedule.wake_epochs = 1;
        cfg.schedule.termination = Termination::FirstLayerDone;
        cfg.schedule.extra_epochs = {0, 5, 20, 40};
        cfg.mode = SyncMode::FreeRunning;
        cfg.pin_workers = true;
        cfg.watchdog_seconds = 300.0;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
}

std::string config_echo(const TrainingConfig& cfg) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", cfg.backprop_learning_rate);
    out << "backprop.learning_rate = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", cfg.cd.learning_rate);
    out << "cd.learning_rate = " << buf << "\n";
    out << "cd.momentum = " << momentum_to_string(cfg.cd.momentum_schedule) << "\n";
    out << "cd.sample_hidden = " << (cfg.cd.sample_hidden ? "true" : "false") << "\n";
    out << "cd.steps = " << cfg.cd.cd_steps << "\n";
    out << "data.images = " << cfg.data.images << "\n";
    out << "data.labels = " << cfg.data.labels << "\n";
    out << "data.per_class_valid = " << cfg.data.per_class_valid << "\n";
    out << "data.split_seed = " << cfg.data.split_seed << "\n";
    out << "data.test_images = " << cfg.data.test_images << "\n";
    out << "data.test_labels = " << cfg.data.test_labels << "\n";
    out << "data.test_limit = " << cfg.data.test_limit << "\n";
    out << "data.train_limit = " << cfg.data.train_limit << "\n";
    out << "net.arch = " << size_list_to_string(cfg.arch) << "\n";
    out << "out.dir = " << cfg.out_dir << "\n";
    out << "pretrain.unit = " << pretrain_unit_name(cfg.unit) << "\n";
    out << "sync.extra_epochs = "
        << (cfg.schedule.extra_epochs.empty() ? "unlimited"
                                              : size_list_to_string(cfg.schedule.extra_epochs))
        << "\n";
    out << "sync.mode = " << sync_mode_name(cfg.mode) << "\n";
    out << "sync.stipulated_epochs = " << size_list_to_string(cfg.stipulated()) << "\n";
    out << "sync.termination = " << termination_name(cfg.schedule.termination) << "\n";
    out << "sync.wake_epochs = " << cfg.schedule.wake_epochs << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", cfg.watchdog_seconds);
    out << "sync.watchdog_seconds = " << buf << "\n";
    out << "train.batch_size = " << cfg.batch_size << "\n";
    out << "train.epochs_per_layer = " << cfg.epochs_per_layer << "\n";
    out << "train.finetune_epochs = " << cfg.finetune_epochs << "\n";
    out << "train.seed = " << cfg.seed << "\n";
    out << "workers.pin = " << (cfg.pin_workers ? "true" : "false") << "\n";
    return out.str();
}

std::uint64_t config_hash(const TrainingConfig& cfg) {
    const std::string echo = config_echo(cfg);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    std::stringstream ss(echo);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.rfind("out.", 0) == 0) continue;  // output location is not semantic
        for (char c : line) {
            hash ^= static_cast<unsigned char>(c);
            hash *= 0x100000001b3ULL;
        }
        hash ^= '\n';
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace sae
