#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "types.hpp"

namespace mpsim {

// User part of the address space is split into `region_count` equal regions
// of `pages_per_region` pages starting at `user_base`. Everything outside
// [user_base, user_end()) is the kernel range.
struct LayoutConfig {
    Vaddr user_base = 0;
    std::uint64_t region_size = std::uint64_t{4} << 20;
    std::uint32_t region_count = 1020;
    std::uint32_t pages_per_region = 1024;

    static LayoutConfig standard() { return {}; }
    // 8 regions x 4 pages; small enough for exhaustive checks.
    static LayoutConfig small() { return {0, 4 * kPageSize, 8, 4}; }

    Vaddr user_end() const noexcept { return user_base + region_size * region_count; }
    unsigned region_shift() const noexcept;

    // Throws SimError(InvalidArgument) when the layout is not usable.
    void validate() const;

    bool operator==(const LayoutConfig&) const = default;
};

// Region index of `vaddr`, or nullopt for the kernel range.
std::optional<Rid> region_id_of(const LayoutConfig& cfg, Vaddr vaddr) noexcept;
// Same result computed with a shift instead of a division.
std::optional<Rid> region_id_of_shift(const LayoutConfig& cfg, Vaddr vaddr) noexcept;

Vaddr region_start(const LayoutConfig& cfg, Rid rid) noexcept;

enum class ContractState : std::uint8_t { Unassigned, Assigned, Accepted, Revoked };

std::string_view to_string(ContractState state) noexcept;

struct RegionSlot {
    Tid manager = kNoThread;
    ContractState contract = ContractState::Unassigned;

    bool operator==(const RegionSlot&) const = default;
};

// One slot per region. The kernel-visible part is the manager-id array; the
// contract state is simulator bookkeeping kept alongside it.
class RegionTable {
public:
    static constexpr std::size_t kManagerIdBytes = 4;
    static constexpr std::size_t kPageBudget = 4096;

    explicit RegionTable(std::uint32_t region_count);

    std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(slots_.size()); }

    // Last writer wins; the contract restarts at Assigned.
    void assign(Rid rid, Tid pager);
    const RegionSlot& lookup(Rid rid) const;

    // Only the transitions allowed by the contract rules are accepted.
    void transition(Rid rid, ContractState to);

    // Little-endian manager ids, one 4-byte word per region.
    std::vector<std::uint8_t> serialize_managers() const;

private:
    void check(Rid rid) const;

    std::vector<RegionSlot> slots_;
};

bool is_allowed_transition(ContractState from, ContractState to) noexcept;

struct PageTableEntry {
    bool present = false;
    Frame frame = 0;
    Marker marker = 0;

    bool operator==(const PageTableEntry&) const = default;
};

// Sparse, flat page table keyed by page number. Pages never touched read back
// as absent with marker 0.
class PageTable {
public:
    PageTableEntry entry(Vaddr vaddr) const;
    void set(Vaddr vaddr, const PageTableEntry& pte);

    // Present entries only, ordered by page number.
    std::vector<std::pair<Vaddr, PageTableEntry>> present_entries() const;

private:
    std::map<std::uint64_t, PageTableEntry> entries_;
};

struct AddressSpace {
    AddressSpace(Asid id, const LayoutConfig& cfg)
        : asid(id), layout(cfg), regions(cfg.region_count),
          present_in_region(cfg.region_count, 0) {}

    Asid asid;
    LayoutConfig layout;
    PageTable pages;
    RegionTable regions;
    std::vector<std::uint32_t> present_in_region;
};

}  // namespace mpsim
