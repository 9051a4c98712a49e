#include "address_space.hpp"

#include <bit>
#include <string>

namespace mpsim {

unsigned LayoutConfig::region_shift() const noexcept {
    return static_cast<unsigned>(std::countr_zero(region_size));
}

void LayoutConfig::validate() const {
    auto fail = [](const std::string& what) {
        throw SimError(ErrorCode::InvalidArgument, "layout: " + what);
    };
    if (region_count == 0) fail("region_count must be positive");
    if (pages_per_region == 0) fail("pages_per_region must be positive");
    if (!std::has_single_bit(region_size)) fail("region_size must be a power of two");
    if (region_size != std::uint64_t{pages_per_region} * kPageSize) {
        fail("region_size must equal pages_per_region * page size");
    }
    if (user_base % kPageSize != 0) fail("user_base must be page aligned");
    if (user_base >= kAddressLimit ||
        region_size * region_count > kAddressLimit - user_base) {
        fail("user range exceeds the 32-bit address space");
    }
    if (std::uint64_t{region_count} * RegionTable::kManagerIdBytes > RegionTable::kPageBudget) {
        fail("region table does not fit in one page");
    }
}

std::optional<Rid> region_id_of(const LayoutConfig& cfg, Vaddr vaddr) noexcept {
    if (vaddr < cfg.user_base || vaddr >= cfg.user_end()) return std::nullopt;
    return static_cast<Rid>((vaddr - cfg.user_base) / cfg.region_size);
}

std::optional<Rid> region_id_of_shift(const LayoutConfig& cfg, Vaddr vaddr) noexcept {
    if (vaddr < cfg.user_base || vaddr >= cfg.user_end()) return std::nullopt;
    return static_cast<Rid>((vaddr - cfg.user_base) >> cfg.region_shift());
}

Vaddr region_start(const LayoutConfig& cfg, Rid rid) noexcept {
    return cfg.user_base + std::uint64_t{rid} * cfg.region_size;
}

std::string_view to_string(ContractState state) noexcept {
    switch (state) {
        case ContractState::Unassigned: return "UNASSIGNED";
        case ContractState::Assigned: return "ASSIGNED";
        case ContractState::Accepted: return "ACCEPTED";
        case ContractState::Revoked: return "REVOKED";
    }
    return "?";
}

bool is_allowed_transition(ContractState from, ContractState to) noexcept {
    switch (to) {
        case ContractState::Assigned: return true;  // (re)assignment by the consumer
        case ContractState::Accepted: return from == ContractState::Assigned;
        case ContractState::Revoked: return from == ContractState::Accepted;
        case ContractState::Unassigned: return false;
    }
    return false;
}

RegionTable::RegionTable(std::uint32_t region_count) : slots_(region_count) {}

void RegionTable::check(Rid rid) const {
    if (rid >= slots_.size()) {
        throw SimError(ErrorCode::BadRegion, "region " + std::to_string(rid) +
                                                 " out of range (count " +
                                                 std::to_string(slots_.size()) + ")");
    }
}

void RegionTable::assign(Rid rid, Tid pager) {
    check(rid);
    if (pager == kNoThread) {
        throw SimError(ErrorCode::InvalidArgument, "cannot assign thread 0 as manager");
    }
    slots_[rid] = {pager, ContractState::Assigned};
}

const RegionSlot& RegionTable::lookup(Rid rid) const {
    check(rid);
    return slots_[rid];
}

void RegionTable::transition(Rid rid, ContractState to) {
    check(rid);
    auto& slot = slots_[rid];
    if (!is_allowed_transition(slot.contract, to)) {
        throw SimError(ErrorCode::InvalidArgument,
                       std::string("illegal contract transition ") +
                           std::string(to_string(slot.contract)) + " -> " +
                           std::string(to_string(to)));
    }
    slot.contract = to;
}

std::vector<std::uint8_t> RegionTable::serialize_managers() const {
    std::vector<std::uint8_t> out;
    out.reserve(slots_.size() * kManagerIdBytes);
    for (const auto& slot : slots_) {
        const auto id = raw(slot.manager);
        for (std::size_t b = 0; b < kManagerIdBytes; ++b) {
            out.push_back(static_cast<std::uint8_t>(id >> (8 * b)));
        }
    }
    return out;
}

PageTableEntry PageTable::entry(Vaddr vaddr) const {
    auto it = entries_.find(page_number(vaddr));
    return it == entries_.end() ? PageTableEntry{} : it->second;
}

void PageTable::set(Vaddr vaddr, const PageTableEntry& pte) {
    entries_[page_number(vaddr)] = pte;
}

std::vector<std::pair<Vaddr, PageTableEntry>> PageTable::present_entries() const {
    std::vector<std::pair<Vaddr, PageTableEntry>> out;
    for (const auto& [page, pte] : entries_) {
        if (pte.present) out.emplace_back(page << kPageShift, pte);
    }
    return out;
}

}  // namespace mpsim
