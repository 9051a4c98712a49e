#include "pagers.hpp"

namespace mpsim {

std::string_view to_string(PagerPolicy policy) noexcept {
    switch (policy) {
        case PagerPolicy::AnonymousZeroFill: return "zero-fill";
        case PagerPolicy::FixedBacking: return "fixed";
        case PagerPolicy::Rejecting: return "rejecting";
        case PagerPolicy::Reflecting: return "reflecting";
    }
    return "?";
}

Marker MarkerRule::apply(Vaddr page) const noexcept {
    switch (kind) {
        case Kind::Zero: return 0;
        case Kind::PageNumber: return static_cast<Marker>(page_number(page) & (kMarkerLimit - 1));
        case Kind::Constant: return value;
    }
    return 0;
}

Frame FrameAllocator::allocate() {
    while (next_ < limit_ && reserved_.contains(next_)) ++next_;
    if (next_ >= limit_) {
        throw SimError(ErrorCode::OutOfFrames, "frame allocator exhausted");
    }
    return next_++;
}

void MappingDatabase::insert(Vaddr start, Vaddr end, Tid target) {
    if (start >= end) {
        throw SimError(ErrorCode::InvalidArgument, "empty database range");
    }
    auto next = ranges_.lower_bound(start);
    if (next != ranges_.end() && next->second.start < end) {
        throw SimError(ErrorCode::OverlappingRange,
                       "range " + hex32(start) + ".." + hex32(end) + " overlaps " +
                           hex32(next->second.start));
    }
    if (next != ranges_.begin()) {
        auto prev = std::prev(next);
        if (prev->second.end > start) {
            throw SimError(ErrorCode::OverlappingRange,
                           "range " + hex32(start) + ".." + hex32(end) + " overlaps " +
                               hex32(prev->second.start));
        }
    }
    ranges_.emplace(start, Entry{start, end, target});
}

std::optional<Tid> MappingDatabase::find(Vaddr vaddr) const {
    auto it = ranges_.upper_bound(vaddr);
    if (it == ranges_.begin()) return std::nullopt;
    --it;
    if (vaddr < it->second.end) return it->second.target;
    return std::nullopt;
}

Tid MappingDatabase::lookup(Vaddr vaddr) const {
    if (auto t = find(vaddr)) return *t;
    throw SimError(ErrorCode::NoDatabaseEntry, "no database entry covers " + hex32(vaddr));
}

void MappingDatabase::erase_overlapping(Vaddr start, Vaddr end) {
    for (auto it = ranges_.begin(); it != ranges_.end();) {
        if (it->second.start < end && start < it->second.end) {
            it = ranges_.erase(it);
        } else {
            ++it;
        }
    }
}

std::vector<MappingDatabase::Entry> MappingDatabase::entries() const {
    std::vector<Entry> out;
    out.reserve(ranges_.size());
    for (const auto& [start, e] : ranges_) out.push_back(e);
    return out;
}

std::vector<PagerAction> PagerServer::on_page_fault(const FaultPayload& fault,
                                                    FrameAllocator& frames,
                                                    const MappingDatabase* database) {
    switch (behavior_.policy) {
        case PagerPolicy::Rejecting:
            return {action::Ignore{}};
        case PagerPolicy::Reflecting:
            if (database == nullptr) {
                throw SimError(ErrorCode::SchemeMismatch, "reflecting pager without a database");
            }
            return {action::Forward{database->lookup(fault.vaddr), fault.faulter}};
        case PagerPolicy::AnonymousZeroFill:
        case PagerPolicy::FixedBacking:
            break;
    }

    const Vaddr page = page_base(fault.vaddr);
    const auto rid = region_id_of(layout_, page);
    const RegionKey key{fault.asid, rid.value_or(layout_.region_count)};
    auto& mine = mapped_[key];

    // Already resolved by an earlier message for the same page.
    if (mine.contains(page)) return {action::Reply{fault.faulter}};

    Frame frame;
    if (behavior_.policy == PagerPolicy::FixedBacking) {
        auto it = behavior_.backing.find(page);
        if (it == behavior_.backing.end()) {
            throw SimError(ErrorCode::OutOfFrames, "no backing frame for " + hex32(page));
        }
        frame = it->second;
    } else {
        frame = frames.allocate();
    }
    mine.insert(page);

    std::vector<PagerAction> actions;
    actions.emplace_back(action::MapAndReply{fault.asid, page, frame,
                                             behavior_.marker.apply(page), fault.faulter});

    auto& count = resolved_[key];
    ++count;
    if (behavior_.revoke_after && count >= *behavior_.revoke_after) {
        std::size_t left = mine.size();
        for (Vaddr p : mine) {
            actions.emplace_back(action::Unmap{fault.asid, p, --left == 0});
        }
        mine.clear();
        count = 0;
    }
    return actions;
}

void PagerServer::note_unmapped(Asid asid, Vaddr vaddr) {
    const Vaddr page = page_base(vaddr);
    const auto rid = region_id_of(layout_, page);
    auto it = mapped_.find({asid, rid.value_or(layout_.region_count)});
    if (it != mapped_.end()) it->second.erase(page);
}

}  // namespace mpsim
