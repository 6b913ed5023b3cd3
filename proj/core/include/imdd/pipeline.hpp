#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imdd/quantized.hpp"

namespace imdd {

/// Blocking bounded queue for one producer and one consumer. Producers stall
/// while the queue is full. Each wait longer than the watchdog period is
/// counted as a stall.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity, std::chrono::milliseconds watchdog = std::chrono::seconds(5))
        : capacity_(capacity), watchdog_(watchdog) {
        if (capacity_ < 1) throw Error("pipeline", "queue capacity must be >= 1");
    }

    /// False if the queue was closed before the item could be enqueued.
    bool push(T item) {
        std::unique_lock lock(mutex_);
        while (!closed_ && items_.size() >= capacity_) {
            if (not_full_.wait_for(lock, watchdog_) == std::cv_status::timeout && !closed_ &&
                items_.size() >= capacity_)
                ++stalls_;
        }
        if (closed_) return false;
        items_.push_back(std::move(item));
        const std::size_t n = items_.size();
        max_occupancy_ = std::max(max_occupancy_, n);
        occupancy_sum_ += n;
        ++pushes_;
        not_empty_.notify_one();
        return true;
    }

    /// Empty optional once the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        while (items_.empty() && !closed_) {
            if (not_empty_.wait_for(lock, watchdog_) == std::cv_status::timeout && items_.empty() && !closed_)
                ++stalls_;
        }
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    /// Producer side end-of-stream; pending items are still delivered.
    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    /// Drops pending items and wakes everyone; used on error shutdown.
    void abort() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        items_.clear();
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t max_occupancy() const {
        std::lock_guard lock(mutex_);
        return max_occupancy_;
    }
    double mean_occupancy() const {
        std::lock_guard lock(mutex_);
        return pushes_ ? static_cast<double>(occupancy_sum_) / static_cast<double>(pushes_) : 0.0;
    }
    std::uint64_t stalls() const {
        std::lock_guard lock(mutex_);
        return stalls_;
    }

private:
    const std::size_t capacity_;
    const std::chrono::milliseconds watchdog_;
    mutable std::mutex mutex_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> items_;
    bool closed_ = false;
    std::size_t max_occupancy_ = 0;
    std::uint64_t occupancy_sum_ = 0;
    std::uint64_t pushes_ = 0;
    std::uint64_t stalls_ = 0;
};

inline constexpr std::size_t kDefaultChunkSamples = 1024;
inline constexpr std::size_t kDefaultQueueDepth = 1024;

struct StreamChunk {
    std::uint64_t sequence_index = 0;
    std::vector<std::int32_t> payload;
};

/// Static description of the streaming graph: per instance one stage per
/// convolution layer plus a depth-to-sequence stage; with more than one
/// instance a splitter and a merger bracket the chains.
struct StageGraph {
    std::shared_ptr<const QuantizedModel> model;
    int n_instances = 1;
    std::size_t queue_depth = kDefaultQueueDepth;
    /// Samples of context duplicated on each side of every chunk.
    std::size_t margin = 0;
    std::vector<std::string> instance_stages;
    bool has_splitter = false;
    bool has_merger = false;

    std::size_t edges_per_instance() const { return instance_stages.size() + 1; }
};

StageGraph build(std::shared_ptr<const QuantizedModel> model, int n_instances,
                 std::size_t queue_depth = kDefaultQueueDepth);

struct EdgeStats {
    std::string name;
    std::size_t capacity = 0;
    std::size_t max_occupancy = 0;
    double mean_occupancy = 0.0;
};

struct RunStats {
    double wall_seconds = 0.0;
    std::size_t samples = 0;
    std::size_t chunks = 0;
    std::uint64_t stalls = 0;
    std::uint64_t saturations = 0;
    std::vector<EdgeStats> edges;
};

struct StreamResult {
    std::vector<StreamChunk> output;
    RunStats stats;
};

/// Executes the graph on concurrent workers. Output chunk i covers the same
/// samples as input chunk i and is bit-identical to quantized_forward over
/// the concatenated input. Chunk sizes must be multiples of the total stride.
StreamResult run_stream(const StageGraph& graph, std::span<const StreamChunk> input);

/// Cuts codes into consecutive chunks of `chunk_samples` (last may be shorter).
std::vector<StreamChunk> make_chunks(std::span<const std::int32_t> codes, std::size_t chunk_samples);
std::vector<std::int32_t> concatenate(std::span<const StreamChunk> chunks);

/// Round-robin assignment: instance i receives chunks i, i+n, i+2n, ...
std::vector<std::vector<StreamChunk>> split_round_robin(std::span<const StreamChunk> chunks, int n);

/// Re-serializes per-instance outputs by sequence_index; a missing or
/// duplicated index is a fatal ordering error.
std::vector<StreamChunk> merge_by_sequence(std::vector<std::vector<StreamChunk>> streams);

struct ThroughputReport {
    double samples_per_second = 0.0;
    double symbols_per_second = 0.0;
    std::vector<EdgeStats> edges;
};

ThroughputReport throughput_report(const StageGraph& graph, const RunStats& stats, int samples_per_symbol = 2);

}  // namespace imdd
