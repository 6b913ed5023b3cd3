#include "imdd/ber.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "json.hpp"

namespace imdd {

namespace {

constexpr std::size_t kSearchWindow = 8192;

std::vector<std::uint64_t> pack_bits(std::span<const Bit> bits) {
    std::vector<std::uint64_t> words(bits.size() / 64 + 2, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) words[i / 64] |= std::uint64_t{1} << (i % 64);
    return words;
}

// 64 bits of `words` starting at bit offset `pos`.
std::uint64_t extract(const std::vector<std::uint64_t>& words, std::size_t pos) {
    const std::size_t w = pos / 64, s = pos % 64;
    if (s == 0) return words[w];
    return (words[w] >> s) | (words[w + 1] << (64 - s));
}

// Positions k in [0, n) where received[k + delay] != reference[k].
std::uint64_t count_mismatches(const std::vector<std::uint64_t>& ref, const std::vector<std::uint64_t>& rx,
                               std::size_t delay, std::size_t n) {
    std::uint64_t mism = 0;
    std::size_t k = 0;
    for (; k + 64 <= n; k += 64) mism += std::popcount(extract(ref, k) ^ extract(rx, k + delay));
    if (k < n) {
        const std::uint64_t mask = (std::uint64_t{1} << (n - k)) - 1;
        mism += std::popcount((extract(ref, k) ^ extract(rx, k + delay)) & mask);
    }
    return mism;
}

}  // namespace

ConfidenceInterval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::uint64_t Histogram::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

double Histogram::bin_lo(std::size_t i) const {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size());
}

double Histogram::bin_hi(std::size_t i) const { return bin_lo(i + 1); }

namespace {

std::size_t bin_of(double v, std::size_t bins, double lo, double hi) {
    const double f = std::floor((v - lo) / (hi - lo) * static_cast<double>(bins));
    if (!(f >= 0.0)) return 0;
    return std::min(static_cast<std::size_t>(f), bins - 1);
}

}  // namespace

Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
    if (bins == 0 || !(hi > lo)) throw Error("histogram", "need bins > 0 and hi > lo");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(bins, 0);
    for (double v : values) ++h.counts[bin_of(v, bins, lo, hi)];
    return h;
}

double center_mass(std::span<const double> values, double half_width) {
    if (values.empty()) return 0.0;
    std::size_t inside = 0;
    for (double v : values) inside += std::abs(v) < half_width;
    return static_cast<double>(inside) / static_cast<double>(values.size());
}

EyeDiagram make_eye(std::span<const double> samples, int phases, std::size_t bins, double lo, double hi) {
    if (phases < 1 || bins == 0 || !(hi > lo)) throw Error("eye", "need phases >= 1, bins > 0, hi > lo");
    EyeDiagram e;
    e.phases = phases;
    e.bins = bins;
    e.lo = lo;
    e.hi = hi;
    e.counts.assign(static_cast<std::size_t>(phases) * bins, 0);
    for (std::size_t i = 0; i < samples.size(); ++i)
        ++e.counts[(i % static_cast<std::size_t>(phases)) * bins + bin_of(samples[i], bins, lo, hi)];
    return e;
}

BerReport align_and_count(std::span<const Bit> reference, std::span<const Bit> received, std::size_t max_delay) {
    if (received.size() < 2 * max_delay || received.size() <= max_delay)
        throw Error("ber", "received sequence must hold at least 2*max_delay bits");
    if (reference.empty()) throw Error("ber", "empty reference");

    const auto ref = pack_bits(reference);
    const auto rx = pack_bits(received);
    const std::size_t window = std::min({kSearchWindow, received.size() - max_delay, reference.size()});

    std::size_t best_delay = 0;
    bool best_inverted = false;
    std::uint64_t best_agree = 0;
    for (std::size_t d = 0; d <= max_delay; ++d) {
        const std::uint64_t mism = count_mismatches(ref, rx, d, window);
        const std::uint64_t agree_normal = window - mism;
        if (agree_normal > best_agree) {
            best_agree = agree_normal;
            best_delay = d;
            best_inverted = false;
        }
        if (mism > best_agree) {
            best_agree = mism;
            best_delay = d;
            best_inverted = true;
        }
    }
    const double agreement = static_cast<double>(best_agree) / static_cast<double>(window);
    if (agreement < kNoSyncAgreement)
        throw NoSyncError("no sync: best agreement " + std::to_string(agreement) + " below threshold");

    BerReport r;
    r.alignment = {best_delay, best_inverted};
    const std::size_t n = std::min(received.size() - best_delay, reference.size());
    const std::uint64_t mism = count_mismatches(ref, rx, best_delay, n);
    r.bits_counted = n;
    r.bit_errors = best_inverted ? n - mism : mism;
    r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(n);
    r.ci = wilson_interval(r.bit_errors, r.bits_counted);
    return r;
}

BerReport no_sync_report(const std::string& equalizer) {
    BerReport r;
    r.equalizer = equalizer;
    r.synced = false;
    r.ber = kNoSyncBer;
    r.ci = {kNoSyncBer, kNoSyncBer};
    return r;
}

std::string report_to_json(const BerReport& r, int indent) {
    using nlohmann::ordered_json;
    auto hist = [](const Histogram& h) {
        return ordered_json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
    };
    ordered_json j;
    j["equalizer"] = r.equalizer;
    j["synced"] = r.synced;
    j["bits_counted"] = r.bits_counted;
    j["bit_errors"] = r.bit_errors;
    j["ber"] = r.ber;
    j["ci95"] = {r.ci.lo, r.ci.hi};
    j["alignment"] = {{"delay", r.alignment.delay}, {"polarity", r.alignment.inverted ? "inverted" : "normal"}};
    j["pre_center_mass"] = r.pre_center_mass;
    j["post_center_mass"] = r.post_center_mass;
    j["pre_histogram"] = hist(r.pre_histogram);
    j["post_histogram"] = hist(r.post_histogram);
    j["eye"] = {{"phases", r.eye.phases}, {"bins", r.eye.bins}, {"lo", r.eye.lo}, {"hi", r.eye.hi},
                {"counts", r.eye.counts}};
    ordered_json diag = ordered_json::object();
    for (const auto& [k, v] : r.diagnostics) diag[k] = v;
    j["diagnostics"] = diag;
    return j.dump(indent);
}

}  // namespace imdd
