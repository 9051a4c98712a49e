#pragma once

#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "address_space.hpp"
#include "sim_core.hpp"

namespace mpsim {

enum class PagerPolicy : std::uint8_t { AnonymousZeroFill, FixedBacking, Rejecting, Reflecting };

std::string_view to_string(PagerPolicy policy) noexcept;

struct MarkerRule {
    enum class Kind : std::uint8_t { Zero, PageNumber, Constant };
    Kind kind = Kind::Zero;
    Marker value = 0;

    Marker apply(Vaddr page) const noexcept;
    bool operator==(const MarkerRule&) const = default;
};

struct PagerBehavior {
    PagerPolicy policy = PagerPolicy::AnonymousZeroFill;
    std::map<Vaddr, Frame> backing;  // page base -> frame, FixedBacking only
    std::optional<std::uint32_t> revoke_after;
    MarkerRule marker;

    bool operator==(const PagerBehavior&) const = default;
};

// Bump allocator over [0, limit), skipping frames reserved for fixed backing.
class FrameAllocator {
public:
    explicit FrameAllocator(Frame limit = Frame{1} << 20, std::set<Frame> reserved = {})
        : limit_(limit), reserved_(std::move(reserved)) {}

    Frame allocate();
    Frame next() const noexcept { return next_; }

private:
    Frame limit_;
    Frame next_ = 0;
    std::set<Frame> reserved_;
};

// Region-mapper table: non-overlapping half-open address ranges, each served
// by one target pager.
class MappingDatabase {
public:
    struct Entry {
        Vaddr start;
        Vaddr end;
        Tid target;
        bool operator==(const Entry&) const = default;
    };

    void insert(Vaddr start, Vaddr end, Tid target);
    // Throws SimError(NoDatabaseEntry) when no range covers `vaddr`.
    Tid lookup(Vaddr vaddr) const;
    std::optional<Tid> find(Vaddr vaddr) const;
    void erase_overlapping(Vaddr start, Vaddr end);

    std::vector<Entry> entries() const;
    std::size_t size() const noexcept { return ranges_.size(); }

private:
    std::map<Vaddr, Entry> ranges_;  // keyed by start
};

namespace action {
struct MapAndReply {
    Asid asid;
    Vaddr vaddr;
    Frame frame;
    Marker marker;
    Tid faulter;
};
struct Reply {
    Tid faulter;
};
struct Forward {
    Tid target;
    Tid faulter;
};
struct Unmap {
    Asid asid;
    Vaddr vaddr;
    bool revoke;
};
struct Ignore {};
}  // namespace action

using PagerAction =
    std::variant<action::MapAndReply, action::Reply, action::Forward, action::Unmap, action::Ignore>;

// Pager server model. Given a page-fault payload it decides what to do; the
// caller turns the resulting actions into system calls. Actions after the
// reply (revocation unmaps) run once the faulter has been restarted.
class PagerServer {
public:
    PagerServer(Tid tid, PagerBehavior behavior, const LayoutConfig& layout)
        : tid_(tid), behavior_(std::move(behavior)), layout_(layout) {}

    Tid tid() const noexcept { return tid_; }
    const PagerBehavior& behavior() const noexcept { return behavior_; }

    std::vector<PagerAction> on_page_fault(const FaultPayload& fault, FrameAllocator& frames,
                                           const MappingDatabase* database = nullptr);

    // Keeps the pager's own view in sync with unmaps initiated elsewhere.
    void note_unmapped(Asid asid, Vaddr vaddr);

private:
    using RegionKey = std::pair<Asid, Rid>;

    Tid tid_;
    PagerBehavior behavior_;
    LayoutConfig layout_;
    std::map<RegionKey, std::set<Vaddr>> mapped_;
    std::map<RegionKey, std::uint32_t> resolved_;
};

}  // namespace mpsim
