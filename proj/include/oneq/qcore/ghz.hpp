#pragma once

#include <oneq/qcore/werner.hpp>

#include <algorithm>
#include <variant>
#include <vector>

namespace oneq::qcore {

/// N-party GHZ resource: ideal with probability w, fully dephased otherwise.
class GhzResource {
public:
    GhzResource(ResourceId id, std::vector<NodeId> holders, double w, double created_at)
        : id_(id), holders_(std::move(holders)), w_(w), created_at_(created_at) {
        check_werner(w, "GhzResource");
        if (holders_.size() < 3) throw DomainError("GhzResource: needs at least 3 holders");
        auto sorted = holders_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DomainError("GhzResource: one qubit per holder");
        }
    }

    GhzResource(const GhzResource&) = delete;
    GhzResource& operator=(const GhzResource&) = delete;
    GhzResource(GhzResource&& o) noexcept
        : id_(o.id_), holders_(std::move(o.holders_)), w_(o.w_), created_at_(o.created_at_),
          consumed_(o.consumed_), correction_pending_(o.correction_pending_) {
        o.consumed_ = true;
    }
    GhzResource& operator=(GhzResource&& o) noexcept {
        if (this != &o) {
            id_ = o.id_;
            holders_ = std::move(o.holders_);
            w_ = o.w_;
            created_at_ = o.created_at_;
            consumed_ = o.consumed_;
            correction_pending_ = o.correction_pending_;
            o.consumed_ = true;
        }
        return *this;
    }

    ResourceId id() const { return id_; }
    const std::vector<NodeId>& holders() const { return holders_; }
    std::size_t size() const { return holders_.size(); }
    double w() const { return w_; }
    double created_at() const { return created_at_; }
    bool consumed() const { return consumed_; }
    bool correction_pending() const { return correction_pending_; }

    void mark_correction_pending() { correction_pending_ = true; }
    void apply_correction() {
        if (consumed_) throw ResourceError("GhzResource::apply_correction: consumed");
        correction_pending_ = false;
    }
    void consume() {
        if (consumed_) throw ResourceError("GHZ resource " + to_string(id_) + " already consumed");
        consumed_ = true;
    }

private:
    ResourceId id_;
    std::vector<NodeId> holders_;
    double w_;
    double created_at_;
    bool consumed_ = false;
    bool correction_pending_ = false;
};

struct GhzReduction {
    /// X-basis outcome; 1 means the survivors hold the Z-flipped state until corrected.
    int correction_bit;
    std::variant<GhzResource, WernerPair> remaining;
};

/// LOCC reduction: `party` measures X and leaves. The survivors inherit w and must
/// receive `correction_bit` before using the resource.
inline GhzReduction ghz_x_reduce(GhzResource& ghz, const NodeId& party, IdAllocator& ids, Rng& rng,
                                 double now) {
    if (ghz.consumed()) throw ResourceError("ghz_x_reduce: resource already consumed");
    const auto& hs = ghz.holders();
    auto it = std::find(hs.begin(), hs.end(), party);
    if (it == hs.end()) throw DomainError("ghz_x_reduce: " + party + " is not a holder");

    std::vector<NodeId> rest;
    for (const auto& h : hs) {
        if (h != party) rest.push_back(h);
    }
    const double w = ghz.w();
    ghz.consume();
    // The X outcome is a fair coin for both the ideal and the dephased component.
    const int bit = rng.bit();
    if (rest.size() == 2) {
        WernerPair pair(ids.next(), rest[0], rest[1], w, now);
        pair.mark_correction_pending();
        return {bit, std::move(pair)};
    }
    GhzResource smaller(ids.next(), std::move(rest), w, now);
    smaller.mark_correction_pending();
    return {bit, std::move(smaller)};
}

}  // namespace oneq::qcore
