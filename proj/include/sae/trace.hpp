#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

namespace sae {

enum class EventKind { Wait, Epoch, Publish, Sleep, Wake, Done };

const char* event_kind_name(EventKind kind);
EventKind event_kind_from_name(const std::string& name);

/// One timestamped record of worker activity. Timestamps are nanoseconds on
/// the monotonic clock; errors are NaN for events that carry none.
struct TraceEvent {
    std::uint32_t worker_id = 0;  // 1-based
    std::uint64_t epoch_index = 0;
    EventKind kind = EventKind::Epoch;
    std::int64_t input_version = -1;
    double train_err = 0.0;
    double valid_err = 0.0;
    std::int64_t t_start_ns = 0;
    std::int64_t t_end_ns = 0;
};

std::int64_t monotonic_now_ns();

/// Collects events from any number of workers. append is safe to call
/// concurrently; virtual so tests can interpose.
class TraceSink {
public:
    virtual ~TraceSink() = default;

    virtual void append(const TraceEvent& event) {
        std::lock_guard<std::mutex> lock(mutex_);
        events_.push_back(event);
    }

    std::vector<TraceEvent> snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return events_;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return events_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<TraceEvent> events_;
};

}  // namespace sae
