#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"

namespace protosynth {

inline constexpr std::array<int, 7> reported_percentiles{1, 5, 25, 50, 75, 95, 99};
inline constexpr std::size_t quantile_grid_steps = 1000;
inline constexpr std::size_t default_top_k = 1000;

struct NumericSummary {
    double mean = 0;
    double variance = 0;  // sample variance, n-1 divisor
    double min = 0;
    double max = 0;
    std::map<int, double> percentiles;
    // Nearest-rank quantiles at u = i/1000, i = 0..1000 (u = 0 is the minimum).
    std::vector<double> quantiles;

    bool operator==(const NumericSummary&) const = default;
};

struct FieldStats {
    std::uint64_t count = 0;
    std::uint64_t present_count = 0;
    std::optional<NumericSummary> numeric;
    // Top-K values by count (descending, ties by key), plus the mass left out.
    std::vector<std::pair<std::string, std::uint64_t>> frequencies;
    std::uint64_t overflow = 0;
    std::uint64_t distinct = 0;

    bool operator==(const FieldStats&) const = default;

    bool frequencies_complete() const { return overflow == 0; }
    // Values repeat and the full table is known: resample it categorically.
    bool categorical_like() const {
        return present_count > 0 && frequencies_complete() && distinct * 2 <= present_count;
    }
};

// Nearest-rank order statistic: the ceil(q * n)-th smallest value, q = num/den.
inline double nearest_rank(std::span<const double> sorted, std::uint64_t num, std::uint64_t den) {
    const std::uint64_t n = sorted.size();
    std::uint64_t rank = (num * n + den - 1) / den;
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

inline NumericSummary summarize_sorted(std::span<const double> sorted) {
    NumericSummary s;
    const auto n = sorted.size();
    s.min = sorted.front();
    s.max = sorted.back();
    double sum = 0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(n);
    if (n > 1) {
        double ss = 0;
        for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
        s.variance = ss / static_cast<double>(n - 1);
    }
    for (int p : reported_percentiles) s.percentiles[p] = nearest_rank(sorted, static_cast<std::uint64_t>(p), 100);
    s.quantiles.reserve(quantile_grid_steps + 1);
    for (std::size_t i = 0; i <= quantile_grid_steps; ++i)
        s.quantiles.push_back(i == 0 ? s.min : nearest_rank(sorted, i, quantile_grid_steps));
    return s;
}

// Streaming accumulator for one field path. Merging is associative and the
// finalized stats are independent of insertion order.
class StatsAccumulator {
public:
    void add_missing() { ++count_; }

    void add(std::string_view key) {
        ++count_;
        ++present_;
        ++counts_[std::string(key)];
    }

    void add(double numeric, std::string_view key) {
        add(key);
        values_.push_back(numeric);
        numeric_ = true;
    }

    // Present value that is not itself recorded (e.g. message-typed fields).
    void add_present() {
        ++count_;
        ++present_;
    }

    void merge(const StatsAccumulator& other) {
        count_ += other.count_;
        present_ += other.present_;
        numeric_ = numeric_ || other.numeric_;
        values_.insert(values_.end(), other.values_.begin(), other.values_.end());
        for (const auto& [k, c] : other.counts_) counts_[k] += c;
    }

    std::uint64_t count() const { return count_; }
    std::uint64_t present() const { return present_; }

    FieldStats finalize(std::size_t top_k = default_top_k) const {
        FieldStats s;
        s.count = count_;
        s.present_count = present_;
        if (numeric_ && !values_.empty()) {
            std::vector<double> sorted = values_;
            std::sort(sorted.begin(), sorted.end());
            s.numeric = summarize_sorted(sorted);
        }
        std::vector<std::pair<std::string, std::uint64_t>> all(counts_.begin(), counts_.end());
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        s.distinct = all.size();
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (i < top_k)
                s.frequencies.push_back(std::move(all[i]));
            else
                s.overflow += all[i].second;
        }
        return s;
    }

private:
    std::uint64_t count_ = 0;
    std::uint64_t present_ = 0;
    bool numeric_ = false;
    std::vector<double> values_;
    std::unordered_map<std::string, std::uint64_t> counts_;
};

// Statistics of a numeric sample. Frequency keys use the shortest round-trip
// decimal form.
inline FieldStats compute_stats(std::span<const double> values, std::size_t top_k = default_top_k) {
    StatsAccumulator acc;
    for (double v : values) acc.add(v, format_double(v));
    return acc.finalize(top_k);
}

inline FieldStats compute_stats(std::span<const std::string> values, std::size_t top_k = default_top_k) {
    StatsAccumulator acc;
    for (const auto& v : values) acc.add(v);
    return acc.finalize(top_k);
}

// Pearson product-moment correlation. nullopt when either series is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("pearson: series lengths differ");
    if (x.size() < 2) throw ValidationError("pearson: need at least two observations");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace protosynth
