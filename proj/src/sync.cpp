#include "sae/sync.hpp"

#include "sae/greedy.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <limits>
#include <thread>

#ifdef __linux__
#include <pthread.h>
#endif

namespace sae {

std::uint64_t snapshot_checksum(const Matrix& train, const Matrix& valid) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    const auto mix = [&hash](std::uint64_t word) {
        hash ^= word;
        hash *= 0x100000001b3ULL;
    };
    mix(train.rows());
    mix(train.cols());
    mix(valid.rows());
    mix(valid.cols());
    for (double d : train.values()) mix(std::bit_cast<std::uint64_t>(d));
    for (double d : valid.values()) mix(std::bit_cast<std::uint64_t>(d));
    return hash;
}

DataSnapshot make_snapshot(Matrix train, Matrix valid) {
    DataSnapshot snapshot;
    snapshot.checksum = snapshot_checksum(train, valid);
    snapshot.train = std::move(train);
    snapshot.valid = std::move(valid);
    return snapshot;
}

void verify_snapshot(const DataSnapshot& snapshot, int worker) {
    if (snapshot_checksum(snapshot.train, snapshot.valid) != snapshot.checksum)
        throw SyncError(worker, "worker " + std::to_string(worker) +
                                    ": payload checksum mismatch (torn read)");
}

void VersionedBuffer::seed(DataSnapshot snapshot) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        payload_ = std::make_shared<const DataSnapshot>(std::move(snapshot));
    }
    cv_.notify_all();
}

void VersionedBuffer::publish(DataSnapshot snapshot) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        payload_ = std::make_shared<const DataSnapshot>(std::move(snapshot));
        ++version_;
    }
    cv_.notify_all();
}

void VersionedBuffer::close() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::pair<std::int64_t, VersionedBuffer::Payload> VersionedBuffer::read() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return {version_, payload_};
}

VersionedBuffer::WaitResult VersionedBuffer::wait_newer(std::int64_t seen,
                                                        const std::function<bool()>& cancelled) {
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
        if (version_ > seen && payload_) return {version_, payload_, closed_};
        if (closed_) return {version_, payload_, true};
        if (cancelled && cancelled()) return {version_, payload_, closed_};
        cv_.wait_for(lock, std::chrono::milliseconds(20));
    }
}

std::int64_t VersionedBuffer::version() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return version_;
}

bool VersionedBuffer::closed() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return closed_;
}

ProgressWatchdog::ProgressWatchdog(const std::atomic<std::uint64_t>& progress,
                                   double timeout_seconds)
    : progress_(progress),
      timeout_seconds_(timeout_seconds),
      last_value_(progress.load(std::memory_order_relaxed)),
      last_change_ns_(monotonic_now_ns()) {}

bool ProgressWatchdog::expired() {
    if (expired_) return true;
    if (timeout_seconds_ <= 0.0) return false;
    const std::uint64_t value = progress_.load(std::memory_order_relaxed);
    const std::int64_t now = monotonic_now_ns();
    if (value != last_value_) {
        last_value_ = value;
        last_change_ns_ = now;
        return false;
    }
    if (static_cast<double>(now - last_change_ns_) > timeout_seconds_ * 1e9) expired_ = true;
    return expired_;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_pretrain_inputs(const TrainingConfig& cfg, const Matrix& train,
                              const Matrix& valid) {
    cfg.validate();
    if (train.cols() != cfg.arch.front() || valid.cols() != cfg.arch.front())
        throw DimensionError("pretrain: data has " + std::to_string(train.cols()) +
                             " features, net.arch starts at " + std::to_string(cfg.arch.front()));
    if (train.rows() == 0) throw DataError("pretrain: empty training set");
}

// Worker 1 trains the widest layer and is the schedule's critical path, so
// with fewer cores than workers it keeps core 0 to itself and the remaining
// workers share the other cores. With enough cores every worker gets its own.
void pin_to_core(std::size_t layer) {
#ifdef __linux__
    const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
    unsigned core = 0;
    if (layer > 0) core = cores > 1 ? 1 + (layer - 1) % (cores - 1) : 0;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(core, &set);
    pthread_setaffinity_np(pthread_self(), sizeof set, &set);
#else
    (void)layer;
#endif
}

struct SyncShared {
    std::atomic<bool> stop{false};
    std::atomic<bool> failed{false};
    std::atomic<std::uint64_t> progress{0};
    std::mutex error_mutex;
    std::string error_message;
    int error_worker = 0;

    void record_failure(int worker, const std::string& message) {
        {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!failed.exchange(true)) {  // first failure wins
                error_worker = worker;
                error_message = message;
            }
        }
        stop.store(true);
    }

    bool cancelled() const { return stop.load() || failed.load(); }
};

struct WorkerContext {
    const TrainingConfig* cfg = nullptr;
    std::size_t layer = 0;
    std::size_t stipulated = 0;
    std::size_t extra = 0;
    VersionedBuffer* in = nullptr;
    VersionedBuffer* out = nullptr;
    TraceSink* trace = nullptr;
    SyncShared* shared = nullptr;
    RbmParams* result = nullptr;
};

void worker_main(const WorkerContext& ctx) {
    const TrainingConfig& cfg = *ctx.cfg;
    SyncShared& shared = *ctx.shared;
    const std::uint32_t id = static_cast<std::uint32_t>(ctx.layer + 1);
    const auto cancelled = [&shared] { return shared.cancelled(); };
    const std::function<void()> tick = [&shared] {
        shared.progress.fetch_add(1, std::memory_order_relaxed);
    };

    Rng init_rng = layer_init_rng(cfg.seed, ctx.layer);
    Rng sampling_rng = layer_sampling_rng(cfg.seed, ctx.layer);
    RbmParams rbm = init_rbm(cfg.arch[ctx.layer], cfg.arch[ctx.layer + 1], init_rng);

    VersionedBuffer::Payload snap;
    std::int64_t seen = -1;
    std::uint64_t epoch = 0;
    std::size_t extra = ctx.extra;

    const auto emit = [&](EventKind kind, std::int64_t version, double train_err,
                          double valid_err, std::int64_t t_start, std::int64_t t_end) {
        TraceEvent event;
        event.worker_id = id;
        event.epoch_index = epoch;
        event.kind = kind;
        event.input_version = version;
        event.train_err = train_err;
        event.valid_err = valid_err;
        event.t_start_ns = t_start;
        event.t_end_ns = t_end;
        ctx.trace->append(event);
    };

    const auto adopt_latest = [&] {
        auto [version, payload] = ctx.in->read();
        if (payload && version > seen) {
            verify_snapshot(*payload, static_cast<int>(id));
            snap = std::move(payload);
            seen = version;
        }
    };

    const auto finish = [&] {
        ctx.out->close();
        const std::int64_t now = monotonic_now_ns();
        emit(EventKind::Done, seen, kNaN, kNaN, now, now);
        *ctx.result = std::move(rbm);
    };

    // The epoch's error evaluation already computes the transformed data, so
    // the publication that follows only checksums and swaps the payload.
    Matrix pending_train, pending_valid;
    const auto train_one = [&] {
        const std::int64_t t0 = monotonic_now_ns();
        cd_epoch(rbm, snap->train, cfg.cd, cfg.batch_size, epoch,
                 pretrain_shuffle_seed(cfg.seed, ctx.layer, epoch), sampling_rng, tick);
        EpochStats stats = epoch_stats(rbm, snap->train, snap->valid);
        emit(EventKind::Epoch, seen, stats.train_err, stats.valid_err, t0, monotonic_now_ns());
        pending_train = std::move(stats.train_hidden);
        pending_valid = std::move(stats.valid_hidden);
        tick();
    };

    const auto publish_one = [&] {
        const std::int64_t t0 = monotonic_now_ns();
        ctx.out->publish(make_snapshot(std::move(pending_train), std::move(pending_valid)));
        emit(EventKind::Publish, ctx.out->version(), kNaN, kNaN, t0, monotonic_now_ns());
        tick();
    };

    // Startup: layer 1 owns the immutable version-0 input; every other layer
    // blocks until its upstream has published at least once.
    if (ctx.layer == 0) {
        adopt_latest();
    } else {
        const std::int64_t t0 = monotonic_now_ns();
        auto result = ctx.in->wait_newer(0, cancelled);
        emit(EventKind::Wait, result.version, kNaN, kNaN, t0, monotonic_now_ns());
        if (!cancelled() && result.payload && result.version > seen) {
            verify_snapshot(*result.payload, static_cast<int>(id));
            snap = std::move(result.payload);
            seen = result.version;
        }
    }
    if (cancelled() || !snap) {
        finish();
        return;
    }

    // Stipulated phase: one epoch after another on the freshest available
    // payload, publishing the transformed data after every epoch. The stop
    // check sits after the adopt: a payload published after the stop flag is
    // then provably never trained on (the buffer mutex orders the flag store
    // before the payload handoff).
    while (epoch < ctx.stipulated) {
        adopt_latest();
        if (cancelled()) {
            finish();
            return;
        }
        train_one();
        if (ctx.layer == 0 && epoch + 1 == ctx.stipulated &&
            cfg.schedule.termination == Termination::FirstLayerDone)
            shared.stop.store(true);  // raised before the final publication
        publish_one();
        ++epoch;
    }

    // Sleep/wake phase. Layer 1's input never changes, so it retires at once.
    if (ctx.layer > 0) {
        for (;;) {
            if (cancelled()) break;
            if (extra != kUnlimitedEpochs && extra == 0) break;
            const std::int64_t sleep_start = monotonic_now_ns();
            auto result = ctx.in->wait_newer(seen, cancelled);
            emit(EventKind::Sleep, seen, kNaN, kNaN, sleep_start, monotonic_now_ns());
            if (cancelled()) break;
            if (result.version > seen && result.payload) {
                const std::int64_t woke = monotonic_now_ns();
                emit(EventKind::Wake, result.version, kNaN, kNaN, woke, woke);
                verify_snapshot(*result.payload, static_cast<int>(id));
                snap = std::move(result.payload);
                seen = result.version;
                std::size_t run = cfg.schedule.wake_epochs;
                if (extra != kUnlimitedEpochs) run = std::min(run, extra);
                for (std::size_t i = 0; i < run; ++i) {
                    adopt_latest();
                    if (cancelled()) break;
                    train_one();
                    publish_one();
                    ++epoch;
                    if (extra != kUnlimitedEpochs) --extra;
                }
            } else if (result.closed) {
                break;
            }
        }
    }
    finish();
}

}  // namespace

std::vector<RbmParams> sync_pretrain(const TrainingConfig& cfg, const Matrix& train,
                                     const Matrix& valid, TraceSink& trace) {
    if (cfg.mode == SyncMode::DeterministicRounds)
        return run_deterministic_rounds(cfg, train, valid, trace);

    validate_pretrain_inputs(cfg, train, valid);
    const std::size_t layers = cfg.layer_count();
    const auto stipulated = cfg.stipulated();
    const auto extra = cfg.extra_budget();

    std::vector<std::unique_ptr<VersionedBuffer>> buffers;
    buffers.reserve(layers + 1);
    for (std::size_t i = 0; i <= layers; ++i) buffers.push_back(std::make_unique<VersionedBuffer>());
    buffers.front()->seed(make_snapshot(train, valid));

    SyncShared shared;
    std::vector<RbmParams> results(layers);
    std::vector<std::thread> workers;
    workers.reserve(layers);
    for (std::size_t layer = 0; layer < layers; ++layer) {
        workers.emplace_back([&, layer] {
            try {
                if (cfg.pin_workers) pin_to_core(layer);
                WorkerContext ctx;
                ctx.cfg = &cfg;
                ctx.layer = layer;
                ctx.stipulated = stipulated[layer];
                ctx.extra = extra[layer];
                ctx.in = buffers[layer].get();
                ctx.out = buffers[layer + 1].get();
                ctx.trace = &trace;
                ctx.shared = &shared;
                ctx.result = &results[layer];
                worker_main(ctx);
            } catch (const std::exception& ex) {
                shared.record_failure(static_cast<int>(layer + 1),
                                      "worker " + std::to_string(layer + 1) + " failed: " +
                                          ex.what());
            }
        });
    }

    std::atomic<bool> joined{false};
    std::thread watchdog([&] {
        ProgressWatchdog dog(shared.progress, cfg.watchdog_seconds);
        while (!joined.load()) {
            if (dog.expired()) {
                shared.record_failure(
                    0, "watchdog: no worker progress for " +
                           std::to_string(cfg.watchdog_seconds) + "s, aborting pre-training");
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });

    for (auto& worker : workers) worker.join();
    joined.store(true);
    watchdog.join();

    if (shared.failed.load()) {
        std::lock_guard<std::mutex> lock(shared.error_mutex);
        throw SyncError(shared.error_worker, shared.error_message);
    }
    return results;
}

namespace {

struct SimBuffer {
    VersionedBuffer::Payload payload;
    std::int64_t version = 0;
    bool closed = false;
};

struct SimWorker {
    RbmParams rbm;
    Rng sampling_rng{0};
    std::uint64_t epoch = 0;
    std::int64_t seen = -1;
    VersionedBuffer::Payload snap;
    std::size_t stipulated = 0;
    std::size_t extra = 0;
    std::size_t pending_wake = 0;
    enum class Phase { WaitStart, Stipulated, PostStipulation, Done } phase = Phase::WaitStart;
    std::int64_t wait_start_ns = 0;
    std::int64_t sleep_start_ns = 0;
};

}  // namespace

std::vector<RbmParams> run_deterministic_rounds(const TrainingConfig& cfg, const Matrix& train,
                                                const Matrix& valid, TraceSink& trace) {
    validate_pretrain_inputs(cfg, train, valid);
    if (cfg.mode != SyncMode::DeterministicRounds)
        throw ConfigError("run_deterministic_rounds requires sync.mode = deterministic_rounds",
                          0, "sync.mode");

    const std::size_t layers = cfg.layer_count();
    const auto stipulated = cfg.stipulated();
    const auto extra = cfg.extra_budget();

    std::vector<SimBuffer> buffers(layers + 1);
    buffers.front().payload = std::make_shared<const DataSnapshot>(make_snapshot(train, valid));

    std::vector<SimWorker> workers(layers);
    const std::int64_t start_ns = monotonic_now_ns();
    for (std::size_t l = 0; l < layers; ++l) {
        SimWorker& w = workers[l];
        Rng init_rng = layer_init_rng(cfg.seed, l);
        w.rbm = init_rbm(cfg.arch[l], cfg.arch[l + 1], init_rng);
        w.sampling_rng = layer_sampling_rng(cfg.seed, l);
        w.stipulated = stipulated[l];
        w.extra = extra[l];
        w.wait_start_ns = start_ns;
    }

    // Upper bound on total epochs: E_l <= stipulated_l + wake * E_{l-1}.
    std::uint64_t round_cap = 2 * layers + 4;
    {
        std::uint64_t upstream = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            std::uint64_t own = stipulated[l];
            const std::uint64_t wakeable =
                upstream > (1ULL << 40) / std::max<std::size_t>(1, cfg.schedule.wake_epochs)
                    ? (1ULL << 40)
                    : upstream * cfg.schedule.wake_epochs;
            own += extra[l] == kUnlimitedEpochs ? wakeable : std::min<std::uint64_t>(extra[l], wakeable);
            round_cap += own;
            upstream = own;
        }
    }

    std::vector<RbmParams> results(layers);
    std::vector<std::unique_ptr<DataSnapshot>> staged(layers + 1);
    std::vector<char> staged_close(layers + 1, 0);
    bool stop_staged = false;
    bool stopped = false;
    std::size_t done_count = 0;

    const auto emit = [&trace](std::uint32_t id, EventKind kind, std::uint64_t epoch,
                               std::int64_t version, double train_err, double valid_err,
                               std::int64_t t0, std::int64_t t1) {
        TraceEvent event;
        event.worker_id = id;
        event.epoch_index = epoch;
        event.kind = kind;
        event.input_version = version;
        event.train_err = train_err;
        event.valid_err = valid_err;
        event.t_start_ns = t0;
        event.t_end_ns = t1;
        trace.append(event);
    };

    const auto retire = [&](std::size_t l) {
        SimWorker& w = workers[l];
        const std::int64_t now = monotonic_now_ns();
        emit(static_cast<std::uint32_t>(l + 1), EventKind::Done, w.epoch, w.seen, kNaN, kNaN,
             now, now);
        staged_close[l + 1] = 1;
        w.phase = SimWorker::Phase::Done;
        w.snap.reset();
        results[l] = std::move(w.rbm);
        ++done_count;
    };

    for (std::uint64_t round = 1; done_count < layers; ++round) {
        if (round > round_cap)
            throw SyncError(0, "deterministic rounds exceeded the schedule bound of " +
                                   std::to_string(round_cap) + " rounds");

        for (std::size_t l = 0; l < layers; ++l) {
            SimWorker& w = workers[l];
            if (w.phase == SimWorker::Phase::Done) continue;
            const SimBuffer& in = buffers[l];
            const std::uint32_t id = static_cast<std::uint32_t>(l + 1);

            const auto adopt_if_newer = [&] {
                if (in.payload && in.version > w.seen) {
                    verify_snapshot(*in.payload, static_cast<int>(id));
                    w.snap = in.payload;
                    w.seen = in.version;
                }
            };

            bool trains = false;
            if (w.phase == SimWorker::Phase::WaitStart) {
                const bool ready = in.payload && (l == 0 || in.version >= 1);
                if (!ready) continue;
                if (l > 0)
                    emit(id, EventKind::Wait, 0, in.version, kNaN, kNaN, w.wait_start_ns,
                         monotonic_now_ns());
                adopt_if_newer();
                w.phase = SimWorker::Phase::Stipulated;
                trains = true;
            } else if (w.phase == SimWorker::Phase::Stipulated) {
                adopt_if_newer();
                trains = true;
            } else {  // PostStipulation
                if (w.pending_wake > 0) {
                    adopt_if_newer();
                    trains = true;
                } else if (w.extra != kUnlimitedEpochs && w.extra == 0) {
                    retire(l);
                    continue;
                } else if (in.payload && in.version > w.seen) {
                    const std::int64_t now = monotonic_now_ns();
                    emit(id, EventKind::Sleep, w.epoch, w.seen, kNaN, kNaN, w.sleep_start_ns,
                         now);
                    emit(id, EventKind::Wake, w.epoch, in.version, kNaN, kNaN, now, now);
                    adopt_if_newer();
                    w.pending_wake = cfg.schedule.wake_epochs;
                    if (w.extra != kUnlimitedEpochs)
                        w.pending_wake = std::min(w.pending_wake, w.extra);
                    trains = true;
                } else if (in.closed) {
                    const std::int64_t now = monotonic_now_ns();
                    emit(id, EventKind::Sleep, w.epoch, w.seen, kNaN, kNaN, w.sleep_start_ns,
                         now);
                    retire(l);
                    continue;
                } else {
                    continue;  // keeps sleeping
                }
            }

            if (!trains) continue;
            const std::int64_t t0 = monotonic_now_ns();
            cd_epoch(w.rbm, w.snap->train, cfg.cd, cfg.batch_size, w.epoch,
                     pretrain_shuffle_seed(cfg.seed, l, w.epoch), w.sampling_rng);
            EpochStats stats = epoch_stats(w.rbm, w.snap->train, w.snap->valid);
            emit(id, EventKind::Epoch, w.epoch, w.seen, stats.train_err, stats.valid_err, t0,
                 monotonic_now_ns());

            const std::int64_t publish_start = monotonic_now_ns();
            staged[l + 1] = std::make_unique<DataSnapshot>(
                make_snapshot(std::move(stats.train_hidden), std::move(stats.valid_hidden)));
            emit(id, EventKind::Publish, w.epoch, buffers[l + 1].version + 1, kNaN, kNaN,
                 publish_start, monotonic_now_ns());
            ++w.epoch;

            if (w.phase == SimWorker::Phase::Stipulated) {
                if (w.epoch == w.stipulated) {
                    if (l == 0 && cfg.schedule.termination == Termination::FirstLayerDone)
                        stop_staged = true;
                    if (l == 0) {
                        retire(l);
                    } else {
                        w.phase = SimWorker::Phase::PostStipulation;
                        w.sleep_start_ns = monotonic_now_ns();
                    }
                }
            } else {
                --w.pending_wake;
                if (w.extra != kUnlimitedEpochs) --w.extra;
                if (w.pending_wake == 0) w.sleep_start_ns = monotonic_now_ns();
            }
        }

        // Barrier: publications land in layer order, then closes, then stop.
        for (std::size_t b = 0; b <= layers; ++b) {
            if (staged[b]) {
                buffers[b].payload =
                    std::make_shared<const DataSnapshot>(std::move(*staged[b]));
                ++buffers[b].version;
                staged[b].reset();
            }
            if (staged_close[b]) buffers[b].closed = true;
        }
        if (stop_staged && !stopped) {
            stopped = true;
            for (std::size_t l = 0; l < layers; ++l)
                if (workers[l].phase != SimWorker::Phase::Done) retire(l);
        }
    }
    return results;
}

}  // namespace sae
