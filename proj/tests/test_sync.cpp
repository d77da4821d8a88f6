#include <doctest.h>

#include <atomic>
#include <map>
#include <thread>

#include "sae/greedy.hpp"
#include "sae/sync.hpp"
#include "testutil.hpp"

using namespace sae;

namespace {

TrainingConfig sync_config(std::vector<std::size_t> arch, std::vector<std::size_t> stipulated,
                           std::uint64_t seed) {
    TrainingConfig cfg;
    cfg.arch = std::move(arch);
    cfg.batch_size = 10;
    cfg.seed = seed;
    cfg.schedule.stipulated_epochs = std::move(stipulated);
    cfg.schedule.termination = Termination::AllStipulated;
    cfg.watchdog_seconds = 30.0;
    return cfg;
}

bool rbms_equal(const RbmParams& a, const RbmParams& b) {
    return testutil::matrices_equal(a.weights, b.weights) && a.visible_bias == b.visible_bias &&
           a.hidden_bias == b.hidden_bias &&
           testutil::matrices_equal(a.vel_weights, b.vel_weights) &&
           a.vel_visible_bias == b.vel_visible_bias && a.vel_hidden_bias == b.vel_hidden_bias;
}

struct EventKey {
    std::uint32_t worker;
    std::uint64_t epoch;
    EventKind kind;
    std::int64_t version;

    bool operator==(const EventKey&) const = default;
};

std::vector<EventKey> event_keys(const std::vector<TraceEvent>& events) {
    std::vector<EventKey> keys;
    for (const TraceEvent& e : events)
        keys.push_back({e.worker_id, e.epoch_index, e.kind, e.input_version});
    return keys;
}

std::vector<TraceEvent> events_of(const std::vector<TraceEvent>& events, std::uint32_t worker,
                                  EventKind kind) {
    std::vector<TraceEvent> out;
    for (const TraceEvent& e : events)
        if (e.worker_id == worker && e.kind == kind) out.push_back(e);
    return out;
}

}  // namespace

TEST_CASE("VersionedBuffer: seed is version 0, publications increment") {
    VersionedBuffer buffer;
    CHECK(buffer.read().second == nullptr);
    CHECK(buffer.read().first == 0);

    buffer.seed(make_snapshot(Matrix(1, 1, 0.25), Matrix(1, 1, 0.5)));
    auto [v0, p0] = buffer.read();
    CHECK(v0 == 0);
    REQUIRE(p0 != nullptr);
    CHECK(p0->train(0, 0) == 0.25);

    buffer.publish(make_snapshot(Matrix(1, 1, 0.1), Matrix(1, 1, 0.2)));
    buffer.publish(make_snapshot(Matrix(1, 1, 0.3), Matrix(1, 1, 0.4)));
    auto [v2, p2] = buffer.read();
    CHECK(v2 == 2);             // strictly increasing
    CHECK(p2->train(0, 0) == 0.3);  // latest value overwrote the unconsumed one
}

TEST_CASE("VersionedBuffer: wait_newer returns on publication, close, or cancellation") {
    VersionedBuffer buffer;

    std::thread publisher([&buffer] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        buffer.publish(make_snapshot(Matrix(1, 1, 0.9), Matrix(1, 1, 0.9)));
    });
    auto got = buffer.wait_newer(0, {});
    CHECK(got.version == 1);
    REQUIRE(got.payload != nullptr);
    publisher.join();

    std::thread closer([&buffer] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        buffer.close();
    });
    auto after_close = buffer.wait_newer(1, {});
    CHECK(after_close.closed);
    CHECK(after_close.version == 1);
    closer.join();

    std::atomic<bool> cancel{false};
    std::thread canceller([&cancel] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        cancel.store(true);
    });
    VersionedBuffer quiet;
    auto cancelled = quiet.wait_newer(0, [&cancel] { return cancel.load(); });
    CHECK(cancelled.payload == nullptr);
    canceller.join();
}

TEST_CASE("VersionedBuffer: concurrent writer/reader sees intact, ordered payloads") {
    VersionedBuffer buffer;
    constexpr int kPublications = 2000;

    std::thread writer([&buffer] {
        Rng rng(3);
        for (int i = 1; i <= kPublications; ++i) {
            Matrix train(3, 4);
            for (double& v : train.values()) v = rng.uniform();
            buffer.publish(make_snapshot(std::move(train), Matrix(1, 4, 0.5)));
        }
        buffer.close();
    });

    std::int64_t seen = 0;
    int adopted = 0;
    for (;;) {
        auto result = buffer.wait_newer(seen, {});
        if (result.version > seen && result.payload) {
            CHECK(result.version > seen);  // non-decreasing, strictly newer
            verify_snapshot(*result.payload, 1);
            seen = result.version;
            ++adopted;
        } else if (result.closed) {
            break;
        }
    }
    writer.join();
    CHECK(seen == kPublications);
    CHECK(adopted > 0);
}

TEST_CASE("verify_snapshot detects corruption") {
    DataSnapshot snapshot = make_snapshot(Matrix(2, 2, 0.5), Matrix(1, 2, 0.25));
    verify_snapshot(snapshot, 3);  // intact
    snapshot.train(0, 0) = 0.75;
    CHECK_THROWS_AS(verify_snapshot(snapshot, 3), SyncError);
}

TEST_CASE("single-layer sync equals greedy bit for bit, both modes") {
    const Matrix train = testutil::random_matrix(50, 16, 21);
    const Matrix valid = testutil::random_matrix(10, 16, 22);
    TrainingConfig cfg = sync_config({16, 6}, {3}, 77);
    cfg.epochs_per_layer = 3;

    TraceSink greedy_sink;
    const auto greedy_rbms = greedy_pretrain(cfg, train, valid, greedy_sink);

    for (Termination termination : {Termination::AllStipulated, Termination::FirstLayerDone}) {
        cfg.schedule.termination = termination;

        cfg.mode = SyncMode::FreeRunning;
        TraceSink threaded_sink;
        const auto threaded = sync_pretrain(cfg, train, valid, threaded_sink);
        REQUIRE(threaded.size() == 1);
        CHECK(rbms_equal(threaded[0], greedy_rbms[0]));

        cfg.mode = SyncMode::DeterministicRounds;
        TraceSink rounds_sink;
        const auto rounds = run_deterministic_rounds(cfg, train, valid, rounds_sink);
        REQUIRE(rounds.size() == 1);
        CHECK(rbms_equal(rounds[0], greedy_rbms[0]));
        CHECK(events_of(rounds_sink.snapshot(), 1, EventKind::Epoch).size() == 3);
    }
}

TEST_CASE("deterministic rounds: hand-simulated N=[3,3] schedule") {
    const Matrix train = testutil::random_matrix(30, 6, 31);
    const Matrix valid = testutil::random_matrix(8, 6, 32);
    TrainingConfig cfg = sync_config({6, 5, 4}, {3, 3}, 99);
    cfg.mode = SyncMode::DeterministicRounds;

    TraceSink sink;
    run_deterministic_rounds(cfg, train, valid, sink);
    const auto events = sink.snapshot();

    // Worker 1 trains three epochs on the fixed version-0 input.
    const auto w1_epochs = events_of(events, 1, EventKind::Epoch);
    REQUIRE(w1_epochs.size() == 3);
    for (const TraceEvent& e : w1_epochs) CHECK(e.input_version == 0);

    // Worker 2 waits one round, then consumes versions 1, 2, 3 in order.
    const auto w2_epochs = events_of(events, 2, EventKind::Epoch);
    REQUIRE(w2_epochs.size() == 3);
    CHECK(w2_epochs[0].input_version == 1);
    CHECK(w2_epochs[1].input_version == 2);
    CHECK(w2_epochs[2].input_version == 3);
    CHECK(events_of(events, 2, EventKind::Wait).size() == 1);

    // Every epoch published; no wakes were needed.
    CHECK(events_of(events, 1, EventKind::Publish).size() == 3);
    CHECK(events_of(events, 2, EventKind::Publish).size() == 3);
    for (const TraceEvent& e : events) CHECK(e.kind != EventKind::Wake);

    // Both workers retire.
    CHECK(events_of(events, 1, EventKind::Done).size() == 1);
    CHECK(events_of(events, 2, EventKind::Done).size() == 1);
}

TEST_CASE("deterministic rounds: single worker runs exactly its stipulation") {
    const Matrix train = testutil::random_matrix(20, 8, 41);
    const Matrix valid = testutil::random_matrix(5, 8, 42);
    TrainingConfig cfg = sync_config({8, 4}, {4}, 55);
    cfg.mode = SyncMode::DeterministicRounds;

    TraceSink sink;
    run_deterministic_rounds(cfg, train, valid, sink);
    CHECK(events_of(sink.snapshot(), 1, EventKind::Epoch).size() == 4);
}

TEST_CASE("deterministic rounds: ALL_STIPULATED drains every published version") {
    const Matrix train = testutil::random_matrix(30, 6, 51);
    const Matrix valid = testutil::random_matrix(8, 6, 52);
    TrainingConfig cfg = sync_config({6, 5, 4}, {4, 2}, 60);
    cfg.mode = SyncMode::DeterministicRounds;

    TraceSink sink;
    run_deterministic_rounds(cfg, train, valid, sink);
    const auto events = sink.snapshot();

    const auto w2_epochs = events_of(events, 2, EventKind::Epoch);
    REQUIRE(w2_epochs.size() == 4);  // 2 stipulated + 2 wakes
    CHECK(w2_epochs.back().input_version == 4);  // every version consumed
    CHECK(events_of(events, 2, EventKind::Wake).size() == 2);
    CHECK(events_of(events, 2, EventKind::Sleep).size() == 3);  // 2 wakes + final retire
}

TEST_CASE("deterministic rounds: FIRST_LAYER_DONE stops the cascade at N1") {
    const Matrix train = testutil::random_matrix(30, 6, 61);
    const Matrix valid = testutil::random_matrix(8, 6, 62);
    TrainingConfig cfg = sync_config({6, 5, 4}, {3, 3}, 70);
    cfg.mode = SyncMode::DeterministicRounds;
    cfg.schedule.termination = Termination::FirstLayerDone;

    TraceSink sink;
    run_deterministic_rounds(cfg, train, valid, sink);
    const auto events = sink.snapshot();

    CHECK(events_of(events, 1, EventKind::Epoch).size() == 3);
    CHECK(events_of(events, 1, EventKind::Publish).size() == 3);

    // Worker 2 ran only while worker 1 was still going and never saw the
    // final publication.
    const auto w2_epochs = events_of(events, 2, EventKind::Epoch);
    CHECK(w2_epochs.size() == 2);
    for (const TraceEvent& e : w2_epochs) CHECK(e.input_version < 3);
}

TEST_CASE("deterministic rounds: exhausted extra budget ignores publications") {
    const Matrix train = testutil::random_matrix(30, 6, 71);
    const Matrix valid = testutil::random_matrix(8, 6, 72);
    TrainingConfig cfg = sync_config({6, 5, 4}, {5, 1}, 80);
    cfg.mode = SyncMode::DeterministicRounds;
    cfg.schedule.extra_epochs = {0, 0};

    TraceSink sink;
    run_deterministic_rounds(cfg, train, valid, sink);
    const auto events = sink.snapshot();
    CHECK(events_of(events, 2, EventKind::Epoch).size() == 1);
    CHECK(events_of(events, 2, EventKind::Wake).empty());
    CHECK(events_of(events, 2, EventKind::Sleep).empty());
}

TEST_CASE("deterministic rounds: identical runs produce identical traces and parameters") {
    const Matrix train = testutil::random_matrix(40, 8, 81);
    const Matrix valid = testutil::random_matrix(10, 8, 82);
    TrainingConfig cfg = sync_config({8, 6, 4, 3}, {3, 3, 3}, 90);
    cfg.mode = SyncMode::DeterministicRounds;
    cfg.schedule.extra_epochs = {0, 2, 4};
    cfg.schedule.termination = Termination::FirstLayerDone;

    TraceSink sink_a, sink_b;
    const auto run_a = run_deterministic_rounds(cfg, train, valid, sink_a);
    const auto run_b = run_deterministic_rounds(cfg, train, valid, sink_b);
    REQUIRE(run_a.size() == run_b.size());
    for (std::size_t l = 0; l < run_a.size(); ++l) CHECK(rbms_equal(run_a[l], run_b[l]));
    CHECK(event_keys(sink_a.snapshot()) == event_keys(sink_b.snapshot()));
}

TEST_CASE("free-running sync: cascade invariants hold on a 3-layer run") {
    const Matrix train = testutil::random_matrix(60, 10, 91);
    const Matrix valid = testutil::random_matrix(12, 10, 92);
    TrainingConfig cfg = sync_config({10, 8, 6, 4}, {3, 3, 3}, 95);
    cfg.mode = SyncMode::FreeRunning;

    TraceSink sink;
    const auto rbms = sync_pretrain(cfg, train, valid, sink);
    REQUIRE(rbms.size() == 3);
    const auto events = sink.snapshot();

    for (std::uint32_t worker = 1; worker <= 3; ++worker) {
        const auto epochs = events_of(events, worker, EventKind::Epoch);
        const auto publishes = events_of(events, worker, EventKind::Publish);
        CHECK(epochs.size() >= 3);                  // stipulation plus possible wakes
        CHECK(publishes.size() == epochs.size());  // every epoch published

        std::int64_t last_version = -1;
        std::map<std::uint64_t, std::size_t> epoch_seen;
        for (const TraceEvent& e : epochs) {
            CHECK(e.input_version >= last_version);  // consumed versions non-decreasing
            last_version = e.input_version;
            ++epoch_seen[e.epoch_index];
        }
        for (const auto& [epoch, count] : epoch_seen) CHECK(count == 1);

        CHECK(events_of(events, worker, EventKind::Done).size() == 1);
        if (worker > 1) CHECK(events_of(events, worker, EventKind::Wait).size() == 1);
    }
}

TEST_CASE("free-running FIRST_LAYER_DONE: final publication is never consumed") {
    const Matrix train = testutil::random_matrix(60, 10, 101);
    const Matrix valid = testutil::random_matrix(12, 10, 102);
    TrainingConfig cfg = sync_config({10, 6, 4}, {4, 4}, 105);
    cfg.mode = SyncMode::FreeRunning;
    cfg.schedule.termination = Termination::FirstLayerDone;

    TraceSink sink;
    sync_pretrain(cfg, train, valid, sink);
    const auto events = sink.snapshot();

    CHECK(events_of(events, 1, EventKind::Epoch).size() == 4);
    for (const TraceEvent& e : events_of(events, 2, EventKind::Epoch))
        CHECK(e.input_version < 4);

    // The run ends promptly once worker 1 finishes: no worker-2 epoch starts
    // after worker 1's DONE plus one epoch-length of slack.
    const auto w1_done = events_of(events, 1, EventKind::Done);
    REQUIRE(w1_done.size() == 1);
    const std::int64_t slack = 500'000'000;  // 0.5s on toy-sized layers
    for (const TraceEvent& e : events) CHECK(e.t_start_ns <= w1_done[0].t_end_ns + slack);
}

TEST_CASE("a failing worker aborts the whole run with its id") {
    // A sink that fails once worker 2 reports its first epoch.
    class ThrowingSink : public TraceSink {
    public:
        void append(const TraceEvent& event) override {
            if (event.worker_id == 2 && event.kind == EventKind::Epoch)
                throw std::runtime_error("injected trace failure");
            TraceSink::append(event);
        }
    };

    const Matrix train = testutil::random_matrix(40, 8, 111);
    const Matrix valid = testutil::random_matrix(8, 8, 112);
    TrainingConfig cfg = sync_config({8, 6, 4}, {3, 3}, 115);
    cfg.mode = SyncMode::FreeRunning;

    ThrowingSink sink;
    try {
        sync_pretrain(cfg, train, valid, sink);
        FAIL("expected SyncError");
    } catch (const SyncError& e) {
        CHECK(e.worker() == 2);
        CHECK(std::string(e.what()).find("worker 2") != std::string::npos);
    }
}

TEST_CASE("ProgressWatchdog: fires only when the counter stalls") {
    std::atomic<std::uint64_t> progress{0};

    ProgressWatchdog stalled(progress, 0.05);
    CHECK_FALSE(stalled.expired());
    std::this_thread::sleep_for(std::chrono::milliseconds(120));
    CHECK(stalled.expired());
    CHECK(stalled.expired());  // latched

    // Generous timeout versus tick interval so scheduling jitter cannot
    // produce a false positive.
    ProgressWatchdog moving(progress, 2.0);
    for (int i = 0; i < 4; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        progress.fetch_add(1);
        CHECK_FALSE(moving.expired());
    }

    ProgressWatchdog disabled(progress, 0.0);
    std::this_thread::sleep_for(std::chrono::milliseconds(80));
    CHECK_FALSE(disabled.expired());
}

TEST_CASE("run_deterministic_rounds rejects a free-running config") {
    TrainingConfig cfg = sync_config({6, 4}, {2}, 5);
    cfg.mode = SyncMode::FreeRunning;
    TraceSink sink;
    CHECK_THROWS_AS(
        run_deterministic_rounds(cfg, Matrix(10, 6, 0.5), Matrix(4, 6, 0.5), sink), ConfigError);
}
