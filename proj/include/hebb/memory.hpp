#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "hebb/core.hpp"
#include "hebb/snapshot_io.hpp"

namespace hebb {

struct MemoryEntry {
    Vec key;
    std::uint32_t value = 0;
    std::uint64_t seq = 0;

    bool operator==(const MemoryEntry&) const = default;
};

struct CapacityPolicy {
    enum class Kind : std::uint8_t { Unbounded = 0, RingBuffer = 1 };

    Kind kind = Kind::Unbounded;
    std::uint64_t max_size = 0;

    static CapacityPolicy unbounded() { return {}; }

    static CapacityPolicy ring_buffer(std::uint64_t m) {
        require(m > 0, "ring buffer capacity must be positive");
        return {Kind::RingBuffer, m};
    }

    bool operator==(const CapacityPolicy&) const = default;
};

struct NeighborhoodItem {
    Vec key;                  // h_k
    std::uint32_t value = 0;  // y_k
    double closeness = 0.0;   // c_k
    std::uint64_t seq = 0;
};

// K retrieved neighbors, sorted by descending closeness (ascending squared
// distance), ties broken by ascending seq.
struct Neighborhood {
    std::vector<NeighborhoodItem> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

// Episodic key-value memory: input representations as keys, class labels as
// values. Single writer, concurrent readers.
class EpisodicMemory {
  public:
    explicit EpisodicMemory(std::size_t dim, CapacityPolicy capacity = CapacityPolicy::unbounded())
        : dim_(dim), capacity_(capacity) {
        require(dim > 0, "memory dimension must be positive");
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const CapacityPolicy& capacity() const { return capacity_; }
    const std::deque<MemoryEntry>& entries() const { return entries_; }
    std::uint64_t next_seq() const { return next_seq_; }

    void write(const Vec& h, std::uint32_t y) {
        require(h.size() == dim_, "write: key dimension mismatch");
        require(all_finite(h), "write: key has non-finite components");
        entries_.push_back(MemoryEntry{h, y, next_seq_++});
        ++class_counts_[y];
        if (capacity_.kind == CapacityPolicy::Kind::RingBuffer &&
            entries_.size() > capacity_.max_size) {
            // Oldest entry has the smallest seq; entries_ is seq-ordered.
            const MemoryEntry& evicted = entries_.front();
            auto it = class_counts_.find(evicted.value);
            if (--it->second == 0) class_counts_.erase(it);
            entries_.pop_front();
        }
    }

    std::uint64_t class_count(std::uint32_t i) const {
        auto it = class_counts_.find(i);
        return it == class_counts_.end() ? 0 : it->second;
    }

    const std::map<std::uint32_t, std::uint64_t>& class_counts() const { return class_counts_; }

    // Exact K-NN: linear scan with a bounded max-heap of size k.
    Neighborhood retrieve_knn(const Vec& h, std::size_t k, double eps) const {
        require(!entries_.empty(), "retrieve_knn: empty memory");
        require(k > 0, "retrieve_knn: k must be positive");
        require(h.size() == dim_, "retrieve_knn: query dimension mismatch");
        require(eps > 0.0, "retrieve_knn: eps must be positive");

        struct Cand {
            double d2;
            std::uint64_t seq;
            const MemoryEntry* entry;
        };
        auto worse = [](const Cand& a, const Cand& b) {
            if (a.d2 != b.d2) return a.d2 < b.d2;
            return a.seq < b.seq;
        };
        std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> heap(worse);
        for (const MemoryEntry& e : entries_) {
            heap.push(Cand{squared_distance(h, e.key), e.seq, &e});
            if (heap.size() > k) heap.pop();
        }

        std::vector<Cand> best;
        best.reserve(heap.size());
        while (!heap.empty()) {
            best.push_back(heap.top());
            heap.pop();
        }
        std::reverse(best.begin(), best.end());

        Neighborhood nbrs;
        nbrs.items.reserve(best.size());
        for (const Cand& c : best)
            nbrs.items.push_back(
                NeighborhoodItem{c.entry->key, c.entry->value, 1.0 / (eps + c.d2), c.seq});
        return nbrs;
    }

    std::vector<std::uint8_t> snapshot() const {
        io::Writer w;
        w.magic("HEBM");
        w.u16(kFormatVersion);
        w.u32(static_cast<std::uint32_t>(dim_));
        w.u8(static_cast<std::uint8_t>(capacity_.kind));
        w.u64(capacity_.max_size);
        w.u64(entries_.size());
        for (const MemoryEntry& e : entries_) {
            w.u64(e.seq);
            w.u32(e.value);
            for (double x : e.key) w.f64(x);
        }
        return w.bytes();
    }

    static EpisodicMemory restore(const std::vector<std::uint8_t>& bytes) {
        io::Reader r(bytes);
        r.magic("HEBM");
        const std::uint16_t version = r.u16();
        if (version != kFormatVersion)
            throw io::DecodeError("unsupported memory snapshot version " +
                                  std::to_string(version));
        const std::uint32_t dim = r.u32();
        const std::uint8_t tag = r.u8();
        const std::uint64_t cap_size = r.u64();
        if (tag > 1) throw io::DecodeError("unknown capacity policy tag");
        CapacityPolicy cap = tag == 0 ? CapacityPolicy::unbounded()
                                      : CapacityPolicy::ring_buffer(cap_size);
        if (dim == 0) throw io::DecodeError("zero dimension in snapshot");

        EpisodicMemory mem(dim, cap);
        const std::uint64_t count = r.u64();
        for (std::uint64_t n = 0; n < count; ++n) {
            MemoryEntry e;
            e.seq = r.u64();
            e.value = r.u32();
            e.key.resize(dim);
            for (std::uint32_t j = 0; j < dim; ++j) e.key[j] = r.f64();
            if (!mem.entries_.empty() && e.seq <= mem.entries_.back().seq)
                throw io::DecodeError("non-increasing seq in snapshot");
            mem.entries_.push_back(std::move(e));
            ++mem.class_counts_[mem.entries_.back().value];
        }
        if (!r.at_end()) throw io::DecodeError("trailing bytes after entries");
        // The most recent write always survives eviction, so next_seq is
        // recoverable from the last entry.
        mem.next_seq_ = mem.entries_.empty() ? 0 : mem.entries_.back().seq + 1;
        return mem;
    }

    bool operator==(const EpisodicMemory&) const = default;

  private:
    static constexpr std::uint16_t kFormatVersion = 1;

    std::size_t dim_;
    CapacityPolicy capacity_;
    std::deque<MemoryEntry> entries_;  // ascending seq
    std::map<std::uint32_t, std::uint64_t> class_counts_;
    std::uint64_t next_seq_ = 0;
};

// Split a neighborhood into (N_i, complement) by label.
inline std::pair<Neighborhood, Neighborhood> partition(const Neighborhood& nbrs,
                                                       std::uint32_t i) {
    std::pair<Neighborhood, Neighborhood> out;
    for (const NeighborhoodItem& item : nbrs.items)
        (item.value == i ? out.first : out.second).items.push_back(item);
    return out;
}

// Neighbors whose labels were not seen during pre-training (N^new). An empty
// pretrain set keeps the full neighborhood.
inline Neighborhood select_new(const Neighborhood& nbrs,
                               const std::set<std::uint32_t>& pretrain_classes) {
    if (pretrain_classes.empty()) return nbrs;
    Neighborhood out;
    for (const NeighborhoodItem& item : nbrs.items)
        if (!pretrain_classes.contains(item.value)) out.items.push_back(item);
    return out;
}

}  // namespace hebb
