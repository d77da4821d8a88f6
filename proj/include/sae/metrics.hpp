#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/autoencoder.hpp"
#include "sae/trace.hpp"

namespace sae {

/// Average squared reconstruction error per example of a full forward pass.
double evaluate(const StackedAutoencoder& net, const Matrix& data);

/// Canonical trace order: (t_start, worker_id, t_end, epoch).
void sort_events(std::vector<TraceEvent>& events);

/// CSV with header worker,epoch,event,input_version,train_err,valid_err,
/// t_start_ns,t_end_ns. Values round-trip exactly through parse_trace.
void export_trace(const std::vector<TraceEvent>& events, const std::string& path);

/// Same schema plus a trailing t_rel_s column (seconds since the first
/// event), convenient for plotting error curves and space-time charts.
void export_error_curves(const std::vector<TraceEvent>& events, const std::string& path);

std::vector<TraceEvent> parse_trace(const std::string& path);

/// Per-worker partition of the pre-training span. busy covers EPOCH and
/// PUBLISH intervals, waiting covers WAIT and SLEEP intervals, idle is the
/// rest of the global span.
struct IdleReport {
    struct PerWorker {
        std::uint32_t worker_id = 0;
        std::int64_t busy_ns = 0;
        std::int64_t idle_ns = 0;
        std::int64_t waiting_ns = 0;
    };

    std::vector<PerWorker> workers;
    std::int64_t span_ns = 0;

    std::int64_t total_busy_ns() const;
    std::int64_t total_idle_ns() const;
    std::int64_t total_waiting_ns() const;
};

IdleReport idle_time_report(const std::vector<TraceEvent>& events);

/// Wall span of a trace: max t_end - min t_start (0 for an empty trace).
std::int64_t trace_span_ns(const std::vector<TraceEvent>& events);

struct RunReport {
    std::string algorithm;
    std::int64_t pretrain_wall_ns = 0;
    std::int64_t finetune_wall_ns = 0;
    double train_err = 0.0;
    double test_err = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

void save_run_report(const RunReport& report, const std::string& path);
RunReport load_run_report(const std::string& path);

/// Time saved by the second run relative to the first, on the pre-training
/// phase alone and on the total (pre-train + fine-tune) time. Negative when
/// the second run is slower. Requires matching config hashes.
struct Speedup {
    double pretrain_fraction = 0.0;
    double total_fraction = 0.0;
};

Speedup speedup(const RunReport& baseline, const RunReport& contender);

}  // namespace sae
