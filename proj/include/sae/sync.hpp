#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "sae/config.hpp"
#include "sae/rbm.hpp"
#include "sae/trace.hpp"

namespace sae {

/// Immutable (train, valid) payload handed between workers, carrying a
/// checksum so torn transfers are detectable.
struct DataSnapshot {
    Matrix train;
    Matrix valid;
    std::uint64_t checksum = 0;
};

std::uint64_t snapshot_checksum(const Matrix& train, const Matrix& valid);
DataSnapshot make_snapshot(Matrix train, Matrix valid);

/// Throws SyncError(worker) when the stored checksum does not match.
void verify_snapshot(const DataSnapshot& snapshot, int worker);

/// Single-slot latest-value buffer with one writer and one reader. The
/// version counts publications; a seeded initial payload is version 0, so a
/// reader that needs published data waits for version >= 1. A newer
/// publication overwrites an unconsumed older one.
class VersionedBuffer {
public:
    using Payload = std::shared_ptr<const DataSnapshot>;

    /// Installs the initial payload; the version stays 0.
    void seed(DataSnapshot snapshot);

    /// Publishes a new payload, incrementing the version.
    void publish(DataSnapshot snapshot);

    /// Declares that no further publication will ever happen.
    void close();

    /// Latest (version, payload) without waiting; payload is null until the
    /// buffer has been seeded or published to.
    std::pair<std::int64_t, Payload> read() const;

    struct WaitResult {
        std::int64_t version = 0;
        Payload payload;
        bool closed = false;
    };

    /// Blocks until version > seen, the buffer is closed, or `cancelled`
    /// returns true; re-polls cancellation periodically.
    WaitResult wait_newer(std::int64_t seen, const std::function<bool()>& cancelled);

    std::int64_t version() const;
    bool closed() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    Payload payload_;
    std::int64_t version_ = 0;
    bool closed_ = false;
};

/// Fires when a shared progress counter stops moving for `timeout_seconds`.
/// Used by sync_pretrain to turn a silent stall into a structured error.
class ProgressWatchdog {
public:
    ProgressWatchdog(const std::atomic<std::uint64_t>& progress, double timeout_seconds);

    /// Returns true (and latches) if no progress happened for the timeout.
    /// Call periodically; timeout_seconds <= 0 disables the check.
    bool expired();

private:
    const std::atomic<std::uint64_t>& progress_;
    double timeout_seconds_;
    std::uint64_t last_value_;
    std::int64_t last_change_ns_;
    bool expired_ = false;
};

/// Synchronized layer-wise pre-training: one worker per layer, cascading
/// versioned data downstream after every epoch, sleep/wake after the
/// stipulated budget, termination per cfg.schedule.termination. Aborts with
/// SyncError when a worker fails or the watchdog fires.
std::vector<RbmParams> sync_pretrain(const TrainingConfig& cfg, const Matrix& train,
                                     const Matrix& valid, TraceSink& trace);

/// Reproducible single-threaded variant: global rounds in which every
/// eligible worker trains exactly one epoch, publications applied at a
/// barrier between rounds in layer order. The schedule is a pure function of
/// the configuration.
std::vector<RbmParams> run_deterministic_rounds(const TrainingConfig& cfg, const Matrix& train,
                                                const Matrix& valid, TraceSink& trace);

}  // namespace sae
