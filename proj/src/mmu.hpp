#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "address_space.hpp"
#include "trace.hpp"

namespace mpsim {

struct MemoryAccess {
    Tid tid = kNoThread;
    Vaddr vaddr = 0;
    AccessType access = AccessType::Read;
};

struct FaultEvent {
    Tid tid = kNoThread;
    Asid asid{0};
    Vaddr vaddr = 0;
    AccessType access = AccessType::Read;

    bool operator==(const FaultEvent&) const = default;
};

enum class UnmapOutcome : std::uint8_t {
    Unmapped,
    Revoked,            // last present page of an accepted region, revoke flag set
    RevokeIneffective,  // revoke flag ignored: other pages remain or region not accepted
};

// Page-granular translation over per-address-space page tables. Mapping into
// a user region also drives the region's contract: the first map flips
// Assigned to Accepted, and revoking the last page flips Accepted to Revoked.
class Mmu {
public:
    explicit Mmu(Trace& trace) : trace_(trace) {}

    AddressSpace& create_space(Asid asid, const LayoutConfig& layout);
    bool has_space(Asid asid) const { return spaces_.contains(asid); }
    AddressSpace& space(Asid asid);
    const AddressSpace& space(Asid asid) const;
    const std::map<Asid, AddressSpace>& spaces() const noexcept { return spaces_; }

    // A fault is a normal result, not an error.
    std::variant<Frame, FaultEvent> translate(Asid asid, const MemoryAccess& access) const;

    void map_page(Asid asid, Vaddr vaddr, Frame frame, Marker marker,
                  CycleId cycle = kNoCycle);
    UnmapOutcome unmap_page(Asid asid, Vaddr vaddr, bool revoke, CycleId cycle = kNoCycle);

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    Trace& trace_;
    std::map<Asid, AddressSpace> spaces_;
    std::vector<std::string> warnings_;
};

void check_address(Vaddr vaddr);

}  // namespace mpsim
