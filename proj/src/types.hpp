#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace mpsim {

// Thread and address-space identifiers are distinct types so they cannot be
// swapped by accident. Tid 0 is reserved for "no thread" (idle CPU, unassigned
// region slot).
enum class Tid : std::uint32_t {};
enum class Asid : std::uint32_t {};

inline constexpr Tid kNoThread{0};

using Vaddr = std::uint64_t;
using Frame = std::uint64_t;
using Marker = std::uint32_t;
using Rid = std::uint32_t;
using CycleId = std::int64_t;

inline constexpr CycleId kNoCycle = -1;

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr unsigned kPageShift = 12;
inline constexpr std::uint64_t kAddressLimit = std::uint64_t{1} << 32;
inline constexpr std::uint64_t kMarkerLimit = std::uint64_t{1} << 31;

template <typename E>
constexpr auto raw(E e) noexcept {
    return static_cast<std::underlying_type_t<E>>(e);
}

constexpr Vaddr page_base(Vaddr v) noexcept { return v & ~(kPageSize - 1); }
constexpr std::uint64_t page_number(Vaddr v) noexcept { return v >> kPageShift; }

enum class AccessType : std::uint8_t { Read, Write };

enum class ErrorCode : std::uint8_t {
    InvalidArgument,
    Deadlock,
    NotRunnable,
    UnknownReceiver,
    MarkerOverflow,
    BadAddress,
    NotMapped,
    BadRegion,
    NoOutstandingFault,
    WrongPager,
    OutOfFrames,
    NoDatabaseEntry,
    OverlappingRange,
    SchemeMismatch,
    IncompleteCycle,
    ParseError,
    SemanticError,
    MissingFixture,
    Livelock,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

class SimError : public std::runtime_error {
public:
    SimError(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Scenario parse failures carry the 1-based line they were found on.
class ParseError : public SimError {
public:
    ParseError(std::size_t line, const std::string& message)
        : SimError(ErrorCode::ParseError,
                   "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace mpsim
