#pragma once

// Binary configuration images (.acfg) and sparse reconfiguration scripts (.acdl).
//
// Image layout, all multi-byte fields little-endian:
//   0..3   "ACFG"
//   4      format version
//   U      per lane, ceil(out_rows/8) bytes: bit r set = lane sourced by out-row r
//   C      per lane, int16 coefficient code
//   I      per lane, ceil(in_rows/8) bytes: bit r set = lane feeds in-row r
//
// Delta layout: "ACDL", version byte, uint32 op count, then 5-byte records
// {opcode, uint16 lane, uint16 payload}; payload 0xFFFF clears a row.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "analogc/machine.hpp"

namespace analogc::bitstream {

inline constexpr std::uint8_t kImageVersion = 1;
inline constexpr std::uint8_t kDeltaVersion = 1;
inline constexpr std::uint16_t kNoRow = 0xFFFF;
inline constexpr std::size_t kHeaderSize = 5;

using Bytes = std::vector<std::uint8_t>;

class FormatError : public Error {
public:
    FormatError(std::size_t offset, const std::string& reason)
        : Error("format error at offset " + std::to_string(offset) + ": " + reason), offset_(offset), reason_(reason)
    {
    }

    std::size_t offset() const { return offset_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

class SpecMismatch : public Error {
public:
    SpecMismatch() : Error("configurations target different machine specs") {}
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<machine::Violation> violations);

    const std::vector<machine::Violation>& violations() const { return violations_; }

private:
    std::vector<machine::Violation> violations_;
};

std::size_t image_size(const machine::MachineSpec& spec);

Bytes encode(const machine::MachineConfig& config);

/// Rebuild the interconnect of an image. Initial states are zero and taps empty,
/// since the image does not carry them.
machine::MachineConfig decode(std::span<const std::uint8_t> image, const machine::MachineSpec& spec);

enum class Opcode : std::uint8_t { SetUSource = 1, SetCoeff = 2, SetIDest = 3 };

struct DeltaOp {
    Opcode opcode = Opcode::SetUSource;
    std::uint16_t lane = 0;
    /// Row index or kNoRow for SetUSource/SetIDest; int16 code bits for SetCoeff.
    std::uint16_t payload = kNoRow;

    static DeltaOp set_source(int lane, std::optional<int> row);
    static DeltaOp set_coeff(int lane, int code);
    static DeltaOp set_dest(int lane, std::optional<int> row);

    friend bool operator==(const DeltaOp&, const DeltaOp&) = default;
};

struct DeltaScript {
    std::vector<DeltaOp> ops;

    friend bool operator==(const DeltaScript&, const DeltaScript&) = default;
};

/// One op per lane field that differs, in lane order (U, C, I within a lane).
DeltaScript diff(const machine::MachineConfig& from, const machine::MachineConfig& to);

/// All-or-nothing: throws RangeError or ValidationError and leaves `config` untouched.
machine::MachineConfig apply(const machine::MachineConfig& config, const DeltaScript& script);

Bytes encode_delta(const DeltaScript& script);
DeltaScript decode_delta(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace analogc::bitstream
