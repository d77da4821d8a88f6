#include "sae/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace sae {

double evaluate(const StackedAutoencoder& net, const Matrix& data) {
    return mse_per_example(data, forward(net, data).output());
}

void sort_events(std::vector<TraceEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const TraceEvent& a, const TraceEvent& b) {
        if (a.t_start_ns != b.t_start_ns) return a.t_start_ns < b.t_start_ns;
        if (a.worker_id != b.worker_id) return a.worker_id < b.worker_id;
        if (a.t_end_ns != b.t_end_ns) return a.t_end_ns < b.t_end_ns;
        return a.epoch_index < b.epoch_index;
    });
}

namespace {

constexpr char kTraceHeader[] =
    "worker,epoch,event,input_version,train_err,valid_err,t_start_ns,t_end_ns";

void write_event_fields(std::FILE* out, const TraceEvent& e) {
    std::fprintf(out, "%u,%" PRIu64 ",%s,%" PRId64 ",%.17g,%.17g,%" PRId64 ",%" PRId64,
                 e.worker_id, e.epoch_index, event_kind_name(e.kind), e.input_version,
                 e.train_err, e.valid_err, e.t_start_ns, e.t_end_ns);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_write(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "w"));
    if (!f) throw IoError(path, "cannot write " + path);
    return f;
}

void export_events(const std::vector<TraceEvent>& events, const std::string& path,
                   bool with_relative_time) {
    std::vector<TraceEvent> sorted = events;
    sort_events(sorted);
    FilePtr out = open_for_write(path);
    std::fprintf(out.get(), "%s%s\n", kTraceHeader, with_relative_time ? ",t_rel_s" : "");
    const std::int64_t origin = sorted.empty() ? 0 : sorted.front().t_start_ns;
    for (const TraceEvent& e : sorted) {
        write_event_fields(out.get(), e);
        if (with_relative_time)
            std::fprintf(out.get(), ",%.9f",
                         static_cast<double>(e.t_start_ns - origin) / 1e9);
        std::fputc('\n', out.get());
    }
    if (std::ferror(out.get())) throw IoError(path, "failed writing " + path);
}

}  // namespace

void export_trace(const std::vector<TraceEvent>& events, const std::string& path) {
    export_events(events, path, false);
}

void export_error_curves(const std::vector<TraceEvent>& events, const std::string& path) {
    export_events(events, path, true);
}

std::vector<TraceEvent> parse_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw TraceError("empty trace file " + path);
    if (line.rfind(kTraceHeader, 0) != 0)
        throw TraceError("unexpected trace header in " + path + ": " + line);

    std::vector<TraceEvent> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 8)
            throw TraceError(path + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                             std::to_string(fields.size()));
        TraceEvent e;
        try {
            e.worker_id = static_cast<std::uint32_t>(std::stoul(fields[0]));
            e.epoch_index = std::stoull(fields[1]);
            e.kind = event_kind_from_name(fields[2]);
            e.input_version = std::stoll(fields[3]);
            e.train_err = std::stod(fields[4]);
            e.valid_err = std::stod(fields[5]);
            e.t_start_ns = std::stoll(fields[6]);
            e.t_end_ns = std::stoll(fields[7]);
        } catch (const std::exception& ex) {
            throw TraceError(path + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        if (e.t_end_ns < e.t_start_ns)
            throw TraceError(path + ":" + std::to_string(line_no) + ": t_end before t_start");
        events.push_back(e);
    }
    return events;
}

std::int64_t trace_span_ns(const std::vector<TraceEvent>& events) {
    if (events.empty()) return 0;
    std::int64_t lo = events.front().t_start_ns, hi = events.front().t_end_ns;
    for (const TraceEvent& e : events) {
        lo = std::min(lo, e.t_start_ns);
        hi = std::max(hi, e.t_end_ns);
    }
    return hi - lo;
}

std::int64_t IdleReport::total_busy_ns() const {
    std::int64_t total = 0;
    for (const auto& w : workers) total += w.busy_ns;
    return total;
}

std::int64_t IdleReport::total_idle_ns() const {
    std::int64_t total = 0;
    for (const auto& w : workers) total += w.idle_ns;
    return total;
}

std::int64_t IdleReport::total_waiting_ns() const {
    std::int64_t total = 0;
    for (const auto& w : workers) total += w.waiting_ns;
    return total;
}

IdleReport idle_time_report(const std::vector<TraceEvent>& events) {
    IdleReport report;
    if (events.empty()) return report;

    std::map<std::uint32_t, IdleReport::PerWorker> per_worker;
    for (const TraceEvent& e : events) {
        if (e.t_end_ns < e.t_start_ns)
            throw TraceError("malformed trace: event ends before it starts (worker " +
                             std::to_string(e.worker_id) + ")");
        auto& w = per_worker[e.worker_id];
        w.worker_id = e.worker_id;
        const std::int64_t duration = e.t_end_ns - e.t_start_ns;
        switch (e.kind) {
            case EventKind::Epoch:
            case EventKind::Publish: w.busy_ns += duration; break;
            case EventKind::Wait:
            case EventKind::Sleep: w.waiting_ns += duration; break;
            case EventKind::Wake:
            case EventKind::Done: break;
        }
    }

    report.span_ns = trace_span_ns(events);
    for (auto& [id, w] : per_worker) {
        w.idle_ns = report.span_ns - w.busy_ns - w.waiting_ns;
        report.workers.push_back(w);
    }
    return report;
}

void save_run_report(const RunReport& report, const std::string& path) {
    FilePtr out = open_for_write(path);
    std::fprintf(out.get(),
                 "report.algorithm = %s\n"
                 "report.pretrain_wall_ns = %" PRId64 "\n"
                 "report.finetune_wall_ns = %" PRId64 "\n"
                 "report.train_err = %.17g\n"
                 "report.test_err = %.17g\n"
                 "report.config_hash = %" PRIu64 "\n"
                 "report.seed = %" PRIu64 "\n",
                 report.algorithm.c_str(), report.pretrain_wall_ns, report.finetune_wall_ns,
                 report.train_err, report.test_err, report.config_hash, report.seed);
    if (std::ferror(out.get())) throw IoError(path, "failed writing " + path);
}

RunReport load_run_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open " + path);
    RunReport report;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "report.algorithm") report.algorithm = value;
        else if (key == "report.pretrain_wall_ns") report.pretrain_wall_ns = std::stoll(value);
        else if (key == "report.finetune_wall_ns") report.finetune_wall_ns = std::stoll(value);
        else if (key == "report.train_err") report.train_err = std::stod(value);
        else if (key == "report.test_err") report.test_err = std::stod(value);
        else if (key == "report.config_hash") report.config_hash = std::stoull(value);
        else if (key == "report.seed") report.seed = std::stoull(value);
    }
    return report;
}

Speedup speedup(const RunReport& baseline, const RunReport& contender) {
    if (baseline.config_hash != contender.config_hash)
        throw Error("speedup: reports come from different configurations (hash " +
                    std::to_string(baseline.config_hash) + " vs " +
                    std::to_string(contender.config_hash) + ")");
    Speedup s;
    const double base_pre = static_cast<double>(baseline.pretrain_wall_ns);
    const double base_total =
        static_cast<double>(baseline.pretrain_wall_ns + baseline.finetune_wall_ns);
    s.pretrain_fraction =
        base_pre == 0.0
            ? 0.0
            : (base_pre - static_cast<double>(contender.pretrain_wall_ns)) / base_pre;
    s.total_fraction =
        base_total == 0.0
            ? 0.0
            : (base_total -
               static_cast<double>(contender.pretrain_wall_ns + contender.finetune_wall_ns)) /
                  base_total;
    return s;
}

}  // namespace sae
