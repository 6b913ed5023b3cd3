#include "imdd/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

namespace imdd {

namespace {

struct Work {
    std::uint64_t seq = 0;
    long long first = 0;  // global index of data position 0 at this stage's rate
    std::size_t len = 0;  // positions per channel
    std::vector<std::int32_t> data;
    long long core_begin = 0;  // output samples this chunk owns
    std::size_t core_len = 0;
};

using WorkQueue = BoundedQueue<Work>;

class ErrorSink {
public:
    template <typename F>
    void guard(F&& body, std::vector<std::unique_ptr<WorkQueue>>& all_queues) {
        try {
            body();
        } catch (...) {
            {
                std::lock_guard lock(mutex_);
                if (!error_) error_ = std::current_exception();
            }
            for (auto& q : all_queues) q->abort();
        }
    }
    void rethrow() {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

}  // namespace

StageGraph build(std::shared_ptr<const QuantizedModel> model, int n_instances, std::size_t queue_depth) {
    if (!model) throw Error("pipeline", "no model");
    model->validate();
    if (n_instances < 1) throw Error("pipeline", "n_instances must be >= 1");
    if (queue_depth < 2) throw Error("pipeline", "queue_depth must be >= 2");

    StageGraph g;
    g.n_instances = n_instances;
    g.queue_depth = queue_depth;
    const std::size_t stride = static_cast<std::size_t>(model->config.total_stride());
    const std::size_t raw = static_cast<std::size_t>(model->config.receptive_margin());
    g.margin = (raw + stride - 1) / stride * stride;
    for (std::size_t l = 0; l < model->layers.size(); ++l) g.instance_stages.push_back("conv" + std::to_string(l + 1));
    g.instance_stages.push_back("reshape");
    g.has_splitter = n_instances > 1;
    g.has_merger = n_instances > 1;
    g.model = std::move(model);
    return g;
}

std::vector<StreamChunk> make_chunks(std::span<const std::int32_t> codes, std::size_t chunk_samples) {
    if (chunk_samples == 0) throw Error("pipeline", "chunk size must be > 0");
    std::vector<StreamChunk> chunks;
    for (std::size_t off = 0, i = 0; off < codes.size(); off += chunk_samples, ++i) {
        const std::size_t n = std::min(chunk_samples, codes.size() - off);
        chunks.push_back({i, std::vector<std::int32_t>(codes.begin() + static_cast<std::ptrdiff_t>(off),
                                                       codes.begin() + static_cast<std::ptrdiff_t>(off + n))});
    }
    return chunks;
}

std::vector<std::int32_t> concatenate(std::span<const StreamChunk> chunks) {
    std::vector<std::int32_t> out;
    for (const auto& c : chunks) out.insert(out.end(), c.payload.begin(), c.payload.end());
    return out;
}

std::vector<std::vector<StreamChunk>> split_round_robin(std::span<const StreamChunk> chunks, int n) {
    if (n < 1) throw Error("pipeline", "split needs n >= 1");
    std::vector<std::vector<StreamChunk>> out(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < chunks.size(); ++i) out[i % n].push_back(chunks[i]);
    return out;
}

std::vector<StreamChunk> merge_by_sequence(std::vector<std::vector<StreamChunk>> streams) {
    std::size_t total = 0;
    for (const auto& s : streams) total += s.size();
    std::vector<std::optional<StreamChunk>> slots(total);
    for (auto& s : streams) {
        for (auto& c : s) {
            if (c.sequence_index >= total || slots[c.sequence_index])
                throw Error("pipeline", "ordering bug: unexpected sequence index " + std::to_string(c.sequence_index));
            const auto idx = c.sequence_index;
            slots[idx] = std::move(c);
        }
    }
    std::vector<StreamChunk> out;
    out.reserve(total);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

StreamResult run_stream(const StageGraph& graph, std::span<const StreamChunk> input) {
    if (!graph.model) throw Error("pipeline", "graph has no model");
    const QuantizedModel& model = *graph.model;
    const std::size_t stride = static_cast<std::size_t>(model.config.total_stride());
    const int n = graph.n_instances;
    const std::size_t n_layers = model.layers.size();

    // Global layout of the concatenated input.
    std::vector<long long> offsets(input.size() + 1, 0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i].sequence_index != i) throw Error("pipeline", "input sequence indices must be dense from 0");
        if (input[i].payload.size() % stride != 0 || input[i].payload.empty())
            throw Error("pipeline", "chunk size must be a nonzero multiple of the total stride");
        for (auto c : input[i].payload)
            if (c < model.input_fmt.min_raw() || c > model.input_fmt.max_raw())
                throw Error("pipeline", "input code outside " + model.input_fmt.to_string());
        offsets[i + 1] = offsets[i] + static_cast<long long>(input[i].payload.size());
    }
    const long long total = offsets.back();
    const long long margin = static_cast<long long>(graph.margin);

    StreamResult result;
    result.stats.samples = static_cast<std::size_t>(total);
    result.stats.chunks = input.size();
    if (input.empty()) return result;

    // queues[i * per + e]: edge e of instance i (0 = splitter -> conv1, last = reshape -> merger).
    const std::size_t per = n_layers + 2;
    std::vector<std::unique_ptr<WorkQueue>> queues;
    for (int i = 0; i < n; ++i)
        for (std::size_t e = 0; e < per; ++e) queues.push_back(std::make_unique<WorkQueue>(graph.queue_depth));
    auto queue = [&](int inst, std::size_t edge) -> WorkQueue& { return *queues[inst * per + edge]; };

    ErrorSink errors;
    std::atomic<std::uint64_t> saturations{0};
    std::vector<std::thread> workers;
    const auto t0 = std::chrono::steady_clock::now();

    // Splitter: attaches duplicated margins, deals chunks round-robin.
    workers.emplace_back([&] {
        errors.guard(
            [&] {
                std::size_t left = 0;  // first chunk that may overlap the window
                for (std::size_t i = 0; i < input.size(); ++i) {
                    const long long begin = offsets[i] - margin;
                    const long long end = offsets[i + 1] + margin;
                    Work w;
                    w.seq = i;
                    w.first = begin;
                    w.len = static_cast<std::size_t>(end - begin);
                    w.data.assign(w.len, 0);
                    w.core_begin = offsets[i];
                    w.core_len = input[i].payload.size();
                    while (offsets[left + 1] <= begin) ++left;
                    for (std::size_t j = left; j < input.size() && offsets[j] < end; ++j) {
                        const long long lo = std::max(begin, offsets[j]);
                        const long long hi = std::min(end, offsets[j + 1]);
                        for (long long g = lo; g < hi; ++g)
                            w.data[static_cast<std::size_t>(g - begin)] =
                                input[j].payload[static_cast<std::size_t>(g - offsets[j])];
                    }
                    if (!queue(static_cast<int>(i % n), 0).push(std::move(w))) return;
                }
                for (int inst = 0; inst < n; ++inst) queue(inst, 0).close();
            },
            queues);
    });

    // Per-instance convolution stages.
    for (int inst = 0; inst < n; ++inst) {
        for (std::size_t l = 0; l < n_layers; ++l) {
            workers.emplace_back([&, inst, l] {
                errors.guard(
                    [&] {
                        const QuantizedLayer& layer = model.layers[l];
                        const int in_frac = l == 0 ? model.input_fmt.frac_bits : model.layers[l - 1].act_fmt.frac_bits;
                        long long rate_div = 1;
                        for (std::size_t j = 0; j <= l; ++j) rate_div *= model.layers[j].spec.stride;
                        const long long global_positions = total / rate_div;
                        QuantizedStats stats;
                        while (auto w = queue(inst, l).pop()) {
                            const long long s = layer.spec.stride;
                            Work out;
                            out.seq = w->seq;
                            out.first = w->first / s;
                            out.len = w->len / static_cast<std::size_t>(s);
                            out.core_begin = w->core_begin;
                            out.core_len = w->core_len;
                            out.data = quantized_layer(layer, in_frac, w->data, w->len, out.first, global_positions, &stats);
                            if (!queue(inst, l + 1).push(std::move(out))) return;
                        }
                        saturations += stats.saturations;
                        queue(inst, l + 1).close();
                    },
                    queues);
            });
        }
        // Depth-to-sequence and margin trimming.
        workers.emplace_back([&, inst] {
            errors.guard(
                [&] {
                    const int channels = model.layers.back().spec.out_ch;
                    while (auto w = queue(inst, n_layers).pop()) {
                        auto samples = depth_to_sequence<std::int32_t>(w->data, channels, w->len);
                        const long long sample_first = w->first * static_cast<long long>(stride);
                        const auto from = static_cast<std::ptrdiff_t>(w->core_begin - sample_first);
                        Work out;
                        out.seq = w->seq;
                        out.core_begin = w->core_begin;
                        out.core_len = w->core_len;
                        out.data.assign(samples.begin() + from,
                                        samples.begin() + from + static_cast<std::ptrdiff_t>(w->core_len));
                        if (!queue(inst, n_layers + 1).push(std::move(out))) return;
                    }
                    queue(inst, n_layers + 1).close();
                },
                queues);
        });
    }

    // Merger: consumes instances in the same round-robin order.
    workers.emplace_back([&] {
        errors.guard(
            [&] {
                for (std::size_t expected = 0; expected < input.size(); ++expected) {
                    auto w = queue(static_cast<int>(expected % n), n_layers + 1).pop();
                    if (!w) throw Error("pipeline", "ordering bug: chunk " + std::to_string(expected) + " missing");
                    if (w->seq != expected)
                        throw Error("pipeline", "ordering bug: expected chunk " + std::to_string(expected) +
                                                    ", got " + std::to_string(w->seq));
                    result.output.push_back({w->seq, std::move(w->data)});
                }
            },
            queues);
    });

    for (auto& t : workers) t.join();
    errors.rethrow();

    result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.stats.saturations = saturations.load();
    for (int inst = 0; inst < n; ++inst) {
        for (std::size_t e = 0; e < per; ++e) {
            const WorkQueue& q = queue(inst, e);
            const std::string from = e == 0 ? "splitter" : graph.instance_stages[e - 1];
            const std::string to = e + 1 == per ? "merger" : graph.instance_stages[e];
            result.stats.edges.push_back({"i" + std::to_string(inst) + ":" + from + "->" + to, q.capacity(),
                                          q.max_occupancy(), q.mean_occupancy()});
            result.stats.stalls += q.stalls();
        }
    }
    return result;
}

ThroughputReport throughput_report(const StageGraph& graph, const RunStats& stats, int samples_per_symbol) {
    (void)graph;
    ThroughputReport r;
    if (stats.wall_seconds > 0.0) {
        r.samples_per_second = static_cast<double>(stats.samples) / stats.wall_seconds;
        r.symbols_per_second = r.samples_per_second / samples_per_symbol;
    }
    r.edges = stats.edges;
    return r;
}

}  // namespace imdd
