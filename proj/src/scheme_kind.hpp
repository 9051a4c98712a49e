#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mpsim {

// Page-fault handling architectures, in the row order of the comparison report.
enum class SchemeKind : std::uint8_t {
    Monolithic,
    L4SinglePager,
    ProposedRegionDispatch,
    L4PlusL4Re,
};

inline constexpr std::array<SchemeKind, 4> kAllSchemes{
    SchemeKind::Monolithic,
    SchemeKind::L4SinglePager,
    SchemeKind::ProposedRegionDispatch,
    SchemeKind::L4PlusL4Re,
};

constexpr std::string_view to_string(SchemeKind kind) noexcept {
    switch (kind) {
        case SchemeKind::Monolithic: return "monolithic";
        case SchemeKind::L4SinglePager: return "l4-single";
        case SchemeKind::ProposedRegionDispatch: return "proposed";
        case SchemeKind::L4PlusL4Re: return "l4re";
    }
    return "?";
}

constexpr std::optional<SchemeKind> parse_scheme(std::string_view text) noexcept {
    for (auto k : kAllSchemes) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

}  // namespace mpsim
