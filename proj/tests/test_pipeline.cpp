#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "imdd/pipeline.hpp"

using namespace imdd;

namespace {

std::shared_ptr<const QuantizedModel> model(std::uint64_t seed) {
    CnnModel m = CnnModel::he_init(CnnConfig::demonstrator(), seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& l : m.layers)
        for (auto& b : l.bias) b = u(rng);
    return std::make_shared<const QuantizedModel>(quantize_model(bn_fold(m), {8, 6}, {16, 10}));
}

std::vector<std::int32_t> random_codes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::int32_t> c(n);
    for (auto& v : c) v = static_cast<std::int32_t>(rng() % 64) - 32;
    return c;
}

}  // namespace

TEST(Build, Structure) {
    const auto q = model(1);
    const auto one = build(q, 1);
    EXPECT_EQ(one.instance_stages, (std::vector<std::string>{"conv1", "conv2", "conv3", "reshape"}));
    EXPECT_FALSE(one.has_splitter);
    EXPECT_FALSE(one.has_merger);
    EXPECT_EQ(one.queue_depth, 1024u);
    // Receptive margin 8 + 8*8 + 8*8 = 136 samples, already stride aligned.
    EXPECT_EQ(one.margin, 136u);

    const auto four = build(q, 4, 16);
    EXPECT_EQ(four.n_instances, 4);
    EXPECT_TRUE(four.has_splitter);
    EXPECT_TRUE(four.has_merger);
    EXPECT_EQ(four.instance_stages.size(), 4u);

    EXPECT_THROW(build(q, 0), Error);
    EXPECT_THROW(build(q, 1, 1), Error);
    EXPECT_THROW(build(nullptr, 1), Error);
}

TEST(SplitMerge, RoundRobinAndIdentity) {
    std::vector<StreamChunk> chunks;
    for (std::uint64_t i = 0; i < 9; ++i) chunks.push_back({i, {static_cast<std::int32_t>(i)}});
    const auto three = split_round_robin(chunks, 3);
    ASSERT_EQ(three.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        ASSERT_EQ(three[i].size(), 3u);
        for (int j = 0; j < 3; ++j) EXPECT_EQ(three[i][j].sequence_index, static_cast<std::uint64_t>(i + 3 * j));
    }
    const auto merged = merge_by_sequence(three);
    ASSERT_EQ(merged.size(), 9u);
    for (std::uint64_t i = 0; i < 9; ++i) EXPECT_EQ(merged[i].sequence_index, i);

    const auto one = split_round_robin(chunks, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(merge_by_sequence(one).size(), 9u);
    EXPECT_THROW(split_round_robin(chunks, 0), Error);
}

TEST(SplitMerge, MissingOrDuplicateIndexIsFatal) {
    std::vector<std::vector<StreamChunk>> gap = {{{0, {}}, {2, {}}}, {{3, {}}}};
    EXPECT_THROW(merge_by_sequence(gap), Error);
    std::vector<std::vector<StreamChunk>> dup = {{{0, {}}, {1, {}}}, {{1, {}}}};
    EXPECT_THROW(merge_by_sequence(dup), Error);
}

TEST(Chunks, MakeAndConcatenate) {
    const auto codes = random_codes(2500, 1);
    const auto chunks = make_chunks(codes, 1024);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[2].payload.size(), 452u);
    EXPECT_EQ(concatenate(chunks), codes);
    EXPECT_THROW(make_chunks(codes, 0), Error);
}

TEST(RunStream, MatchesBatchForEveryConfiguration) {
    const auto q = model(2);
    const auto codes = random_codes(64 * 1024, 3);
    const auto batch = quantized_forward(*q, codes);
    for (int n : {1, 2, 3, 4})
        for (std::size_t depth : {std::size_t{2}, std::size_t{1024}})
            for (std::size_t chunk : {std::size_t{8}, std::size_t{136}, std::size_t{1024}, std::size_t{4096}}) {
                if (chunk == 8 && depth == 1024) continue;  // same coverage, slow
                const auto graph = build(q, n, depth);
                const auto r = run_stream(graph, make_chunks(codes, chunk));
                ASSERT_EQ(r.output.size(), (codes.size() + chunk - 1) / chunk);
                for (std::size_t i = 0; i < r.output.size(); ++i) EXPECT_EQ(r.output[i].sequence_index, i);
                EXPECT_EQ(concatenate(r.output), batch) << "n=" << n << " depth=" << depth << " chunk=" << chunk;
                for (const auto& e : r.stats.edges) {
                    EXPECT_EQ(e.capacity, depth);
                    EXPECT_LE(e.max_occupancy, e.capacity) << e.name;
                    EXPECT_GE(e.mean_occupancy, 0.0);
                    EXPECT_LE(e.mean_occupancy, static_cast<double>(e.capacity));
                }
                EXPECT_EQ(r.stats.samples, codes.size());
            }
}

TEST(RunStream, ShortLastChunkAndShortSignal) {
    const auto q = model(4);
    const auto codes = random_codes(1024 * 5 + 8 * 7, 5);
    const auto batch = quantized_forward(*q, codes);
    EXPECT_EQ(concatenate(run_stream(build(q, 2, 4), make_chunks(codes, 1024)).output), batch);
    // A single chunk shorter than the margin still equals the batch path
    // (whole-signal zero padding on both sides).
    const auto small = random_codes(144, 6);
    EXPECT_EQ(concatenate(run_stream(build(q, 3, 2), make_chunks(small, 16)).output), quantized_forward(*q, small));
}

TEST(RunStream, EmptyInputShutsDownCleanly) {
    const auto q = model(5);
    for (int n : {1, 4}) {
        const auto r = run_stream(build(q, n, 2), {});
        EXPECT_TRUE(r.output.empty());
        EXPECT_EQ(r.stats.samples, 0u);
    }
}

TEST(RunStream, RejectsMalformedInput) {
    const auto q = model(6);
    const auto graph = build(q, 2, 4);
    auto chunks = make_chunks(random_codes(4096, 7), 1024);
    auto bad_size = chunks;
    bad_size[1].payload.resize(1001);  // not a multiple of the stride
    EXPECT_THROW(run_stream(graph, bad_size), Error);
    auto bad_index = chunks;
    bad_index[2].sequence_index = 7;
    EXPECT_THROW(run_stream(graph, bad_index), Error);
    auto bad_code = chunks;
    bad_code[3].payload[5] = 99;
    EXPECT_THROW(run_stream(graph, bad_code), Error);
    // The graph remains usable after a failed run.
    EXPECT_EQ(run_stream(graph, chunks).output.size(), 4u);
}

TEST(RunStream, DeterministicUnderRepetition) {
    const auto q = model(7);
    const auto chunks = make_chunks(random_codes(32 * 1024, 8), 512);
    const auto graph = build(q, 4, 2);
    const auto first = concatenate(run_stream(graph, chunks).output);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(concatenate(run_stream(graph, chunks).output), first);
}

TEST(Throughput, ReportArithmetic) {
    RunStats s;
    s.wall_seconds = 2.0;
    s.samples = 1000;
    s.edges = {{"i0:conv1->conv2", 4, 3, 1.5}};
    const auto t = throughput_report(StageGraph{}, s);
    EXPECT_DOUBLE_EQ(t.samples_per_second, 500.0);
    EXPECT_DOUBLE_EQ(t.symbols_per_second, 250.0);
    ASSERT_EQ(t.edges.size(), 1u);
    EXPECT_EQ(t.edges[0].name, "i0:conv1->conv2");
}

TEST(BoundedQueue, BackpressureAndClose) {
    BoundedQueue<int> q(2);
    std::thread producer([&] {
        for (int i = 0; i < 100; ++i) ASSERT_TRUE(q.push(i));
        q.close();
    });
    int expected = 0;
    while (auto v = q.pop()) EXPECT_EQ(*v, expected++);
    producer.join();
    EXPECT_EQ(expected, 100);
    EXPECT_LE(q.max_occupancy(), 2u);
    EXPECT_FALSE(q.push(1));
    EXPECT_THROW(BoundedQueue<int>(0), Error);
}

TEST(BoundedQueue, AbortWakesBlockedProducer) {
    BoundedQueue<int> q(1);
    ASSERT_TRUE(q.push(0));
    bool result = true;
    std::thread producer([&] { result = q.push(1); });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    q.abort();
    producer.join();
    EXPECT_FALSE(result);
    EXPECT_FALSE(q.pop().has_value());
}
