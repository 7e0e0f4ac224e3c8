#include "analogc/bitstream.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace analogc::bitstream {

using machine::CoeffKind;
using machine::CoefficientCode;
using machine::MachineConfig;
using machine::MachineSpec;

namespace {

constexpr char kImageMagic[4] = {'A', 'C', 'F', 'G'};
constexpr char kDeltaMagic[4] = {'A', 'C', 'D', 'L'};
constexpr std::size_t kRecordSize = 5;

std::size_t row_field_bytes(int rows) { return static_cast<std::size_t>(rows + 7) / 8; }

void put_u16(Bytes& out, std::size_t at, std::uint16_t v)
{
    out[at] = static_cast<std::uint8_t>(v & 0xFF);
    out[at + 1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at)
{
    return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

struct Sections {
    std::size_t u_offset, u_stride;
    std::size_t c_offset;
    std::size_t i_offset, i_stride;
    std::size_t total;
};

Sections layout(const MachineSpec& spec)
{
    Sections s{};
    const auto lanes = static_cast<std::size_t>(spec.n_lanes);
    s.u_stride = row_field_bytes(spec.out_rows);
    s.i_stride = row_field_bytes(spec.in_rows);
    s.u_offset = kHeaderSize;
    s.c_offset = s.u_offset + lanes * s.u_stride;
    s.i_offset = s.c_offset + lanes * 2;
    s.total = s.i_offset + lanes * s.i_stride;
    return s;
}

// At most one row bit per lane field; bits past `rows` must be clear.
std::optional<int> read_row_field(std::span<const std::uint8_t> image, std::size_t offset, std::size_t stride,
                                  int rows, const char* what)
{
    std::optional<int> row;
    for (std::size_t b = 0; b < stride; ++b) {
        std::uint8_t byte = image[offset + b];
        for (int bit = 0; bit < 8 && byte; ++bit) {
            if (!(byte & (1u << bit)))
                continue;
            int r = static_cast<int>(b * 8) + bit;
            if (r >= rows)
                throw FormatError(offset + b, std::string(what) + " row bit beyond row count");
            if (row)
                throw FormatError(offset + b, std::string("multi-") + what + " lane");
            row = r;
        }
    }
    return row;
}

} // namespace

ValidationError::ValidationError(std::vector<machine::Violation> violations)
    : Error("configuration invalid: " +
            (violations.empty() ? std::string("unknown") : machine::to_string(violations.front()))),
      violations_(std::move(violations))
{
}

std::size_t image_size(const MachineSpec& spec)
{
    return layout(spec).total;
}

Bytes encode(const MachineConfig& config)
{
    const MachineSpec& spec = config.spec;
    const Sections s = layout(spec);
    Bytes out(s.total, 0);
    std::memcpy(out.data(), kImageMagic, 4);
    out[4] = kImageVersion;

    for (std::size_t k = 0; k < config.lanes.size(); ++k) {
        const auto& lane = config.lanes[k];
        if (lane.source) {
            auto r = static_cast<std::size_t>(*lane.source);
            out[s.u_offset + k * s.u_stride + r / 8] |= static_cast<std::uint8_t>(1u << (r % 8));
        }
        put_u16(out, s.c_offset + k * 2, static_cast<std::uint16_t>(static_cast<std::int16_t>(lane.coeff.code)));
        if (lane.dest) {
            auto r = static_cast<std::size_t>(*lane.dest);
            out[s.i_offset + k * s.i_stride + r / 8] |= static_cast<std::uint8_t>(1u << (r % 8));
        }
    }
    return out;
}

MachineConfig decode(std::span<const std::uint8_t> image, const MachineSpec& spec)
{
    const Sections s = layout(spec);
    if (image.size() < kHeaderSize)
        throw FormatError(image.size(), "length: image shorter than header");
    if (std::memcmp(image.data(), kImageMagic, 4) != 0)
        throw FormatError(0, "bad magic");
    if (image[4] != kImageVersion)
        throw FormatError(4, "unsupported version " + std::to_string(image[4]));
    if (image.size() != s.total)
        throw FormatError(std::min(image.size(), s.total),
                          "length: expected " + std::to_string(s.total) + " bytes, got " + std::to_string(image.size()));

    MachineConfig config = MachineConfig::empty(spec);
    for (std::size_t k = 0; k < config.lanes.size(); ++k) {
        auto& lane = config.lanes[k];
        lane.source = read_row_field(image, s.u_offset + k * s.u_stride, s.u_stride, spec.out_rows, "source");
        lane.dest = read_row_field(image, s.i_offset + k * s.i_stride, s.i_stride, spec.in_rows, "destination");
        auto raw = static_cast<std::int16_t>(get_u16(image, s.c_offset + k * 2));
        lane.coeff = CoefficientCode{spec.is_lowres(static_cast<int>(k)) ? CoeffKind::LowRes : CoeffKind::HighRes, raw};
        if (!machine::code_in_range(lane.coeff))
            throw FormatError(s.c_offset + k * 2, "coefficient code " + std::to_string(raw) + " out of range");
    }
    return config;
}

DeltaOp DeltaOp::set_source(int lane, std::optional<int> row)
{
    return {Opcode::SetUSource, static_cast<std::uint16_t>(lane), row ? static_cast<std::uint16_t>(*row) : kNoRow};
}

DeltaOp DeltaOp::set_coeff(int lane, int code)
{
    return {Opcode::SetCoeff, static_cast<std::uint16_t>(lane),
            static_cast<std::uint16_t>(static_cast<std::int16_t>(code))};
}

DeltaOp DeltaOp::set_dest(int lane, std::optional<int> row)
{
    return {Opcode::SetIDest, static_cast<std::uint16_t>(lane), row ? static_cast<std::uint16_t>(*row) : kNoRow};
}

DeltaScript diff(const MachineConfig& from, const MachineConfig& to)
{
    if (!(from.spec == to.spec) || from.lanes.size() != to.lanes.size())
        throw SpecMismatch();
    DeltaScript script;
    for (std::size_t k = 0; k < from.lanes.size(); ++k) {
        const auto& a = from.lanes[k];
        const auto& b = to.lanes[k];
        const int lane = static_cast<int>(k);
        if (a.source != b.source)
            script.ops.push_back(DeltaOp::set_source(lane, b.source));
        if (!(a.coeff == b.coeff))
            script.ops.push_back(DeltaOp::set_coeff(lane, b.coeff.code));
        if (a.dest != b.dest)
            script.ops.push_back(DeltaOp::set_dest(lane, b.dest));
    }
    return script;
}

MachineConfig apply(const MachineConfig& config, const DeltaScript& script)
{
    const MachineSpec& spec = config.spec;
    MachineConfig out = config;
    for (std::size_t i = 0; i < script.ops.size(); ++i) {
        const DeltaOp& op = script.ops[i];
        const std::string where = "op " + std::to_string(i) + ": ";
        if (op.lane >= spec.n_lanes)
            throw RangeError(where + "lane " + std::to_string(op.lane) + " out of range");
        auto& lane = out.lanes[op.lane];
        switch (op.opcode) {
        case Opcode::SetUSource:
            if (op.payload != kNoRow && op.payload >= spec.out_rows)
                throw RangeError(where + "source row " + std::to_string(op.payload) + " out of range");
            lane.source = op.payload == kNoRow ? std::nullopt : std::optional<int>(op.payload);
            break;
        case Opcode::SetIDest:
            if (op.payload != kNoRow && op.payload >= spec.in_rows)
                throw RangeError(where + "destination row " + std::to_string(op.payload) + " out of range");
            lane.dest = op.payload == kNoRow ? std::nullopt : std::optional<int>(op.payload);
            break;
        case Opcode::SetCoeff: {
            CoefficientCode code{spec.is_lowres(op.lane) ? CoeffKind::LowRes : CoeffKind::HighRes,
                                 static_cast<std::int16_t>(op.payload)};
            if (!machine::code_in_range(code))
                throw RangeError(where + "code " + std::to_string(code.code) + " out of range for lane " +
                                 std::to_string(op.lane));
            lane.coeff = code;
            break;
        }
        default:
            throw RangeError(where + "unknown opcode " + std::to_string(static_cast<int>(op.opcode)));
        }
    }
    auto violations = machine::validate_config(out);
    if (!violations.empty())
        throw ValidationError(std::move(violations));
    return out;
}

Bytes encode_delta(const DeltaScript& script)
{
    Bytes out(9 + script.ops.size() * kRecordSize, 0);
    std::memcpy(out.data(), kDeltaMagic, 4);
    out[4] = kDeltaVersion;
    auto n = static_cast<std::uint32_t>(script.ops.size());
    for (int b = 0; b < 4; ++b)
        out[5 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(n >> (8 * b));
    std::size_t at = 9;
    for (const auto& op : script.ops) {
        out[at] = static_cast<std::uint8_t>(op.opcode);
        put_u16(out, at + 1, op.lane);
        put_u16(out, at + 3, op.payload);
        at += kRecordSize;
    }
    return out;
}

DeltaScript decode_delta(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 9)
        throw FormatError(bytes.size(), "length: delta shorter than header");
    if (std::memcmp(bytes.data(), kDeltaMagic, 4) != 0)
        throw FormatError(0, "bad magic");
    if (bytes[4] != kDeltaVersion)
        throw FormatError(4, "unsupported version " + std::to_string(bytes[4]));
    std::uint32_t n = 0;
    for (int b = 0; b < 4; ++b)
        n |= static_cast<std::uint32_t>(bytes[5 + static_cast<std::size_t>(b)]) << (8 * b);
    if (bytes.size() != 9 + std::size_t{n} * kRecordSize)
        throw FormatError(bytes.size(), "length: op count " + std::to_string(n) + " does not match record bytes");
    DeltaScript script;
    script.ops.reserve(n);
    std::size_t at = 9;
    for (std::uint32_t i = 0; i < n; ++i, at += kRecordSize) {
        std::uint8_t opcode = bytes[at];
        if (opcode < 1 || opcode > 3)
            throw FormatError(at, "unknown opcode " + std::to_string(opcode));
        script.ops.push_back({static_cast<Opcode>(opcode), get_u16(bytes, at + 1), get_u16(bytes, at + 3)});
    }
    return script;
}

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("write failed for " + path.string());
}

} // namespace analogc::bitstream
