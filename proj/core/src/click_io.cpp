#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ipw/errors.hpp"
#include "ipw/photon_statistics.hpp"

namespace ipw {

namespace {

constexpr std::array<char, 8> kMagic = {'I', 'P', 'W', 'T', 'A', 'G', '0', '1'};
constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kRecordBytes = 16;

template <class T>
void put_le(std::ostream& os, T value) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    os.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
    return value;
}

std::string at_record(std::uint64_t index) {
    return "record " + std::to_string(index) + " (byte offset " + std::to_string(kHeaderBytes + index * kRecordBytes) +
           ")";
}

}  // namespace

void write_binary(std::ostream& os, std::span<const ClickRecord> stream) {
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint64_t>(os, stream.size());
    for (const auto& c : stream) {
        put_le<std::uint64_t>(os, c.time_ps);
        put_le<std::uint32_t>(os, c.channel);
        put_le<std::uint32_t>(os, 0);
    }
    if (!os) throw DataError("failed writing binary click stream");
}

ClickStream read_binary(std::istream& is) {
    std::array<unsigned char, kHeaderBytes> header{};
    is.read(reinterpret_cast<char*>(header.data()), header.size());
    if (is.gcount() != static_cast<std::streamsize>(header.size())) {
        throw DataError("binary click stream: truncated header (byte offset 0)");
    }
    if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
        throw DataError("binary click stream: bad magic at byte offset 0, expected IPWTAG01");
    }
    const auto count = get_le<std::uint64_t>(header.data() + 8);

    ClickStream stream;
    std::array<unsigned char, kRecordBytes> rec{};
    for (std::uint64_t i = 0; i < count; ++i) {
        is.read(reinterpret_cast<char*>(rec.data()), rec.size());
        if (is.gcount() != static_cast<std::streamsize>(rec.size())) {
            throw DataError("binary click stream: truncated at " + at_record(i) + ", header declares " +
                            std::to_string(count) + " records");
        }
        ClickRecord c{get_le<std::uint32_t>(rec.data() + 8), get_le<std::uint64_t>(rec.data())};
        if (get_le<std::uint32_t>(rec.data() + 12) != 0) {
            throw DataError("binary click stream: nonzero reserved field at " + at_record(i));
        }
        if (c.channel > 1) throw DataError("binary click stream: channel " + std::to_string(c.channel) + " at " + at_record(i));
        if (!stream.empty() && click_less(c, stream.back())) {
            throw DataError("binary click stream: unsorted at " + at_record(i));
        }
        stream.push_back(c);
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw DataError("binary click stream: trailing bytes after " + std::to_string(count) + " records");
    }
    return stream;
}

void write_text(std::ostream& os, std::span<const ClickRecord> stream) {
    os << "channel,time_ps\n";
    for (const auto& c : stream) os << c.channel << ',' << c.time_ps << '\n';
    if (!os) throw DataError("failed writing text click stream");
}

ClickStream read_text(std::istream& is) {
    ClickStream stream;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!have_header) {
            if (line != "channel,time_ps") {
                throw DataError("text click stream line " + std::to_string(line_no) + ": expected header channel,time_ps");
            }
            have_header = true;
            continue;
        }
        const auto comma = line.find(',');
        ClickRecord c;
        const char* end = line.data() + line.size();
        const auto r1 = std::from_chars(line.data(), line.data() + (comma == std::string::npos ? 0 : comma), c.channel);
        const auto r2 = comma == std::string::npos ? std::from_chars_result{end, std::errc::invalid_argument}
                                                   : std::from_chars(line.data() + comma + 1, end, c.time_ps);
        if (comma == std::string::npos || r1.ec != std::errc{} || r2.ec != std::errc{} || r2.ptr != end ||
            r1.ptr != line.data() + comma) {
            throw DataError("text click stream line " + std::to_string(line_no) + ": malformed record '" + line + "'");
        }
        if (c.channel > 1) throw DataError("text click stream line " + std::to_string(line_no) + ": channel must be 0 or 1");
        if (!stream.empty() && click_less(c, stream.back())) {
            throw DataError("text click stream line " + std::to_string(line_no) + ": unsorted record");
        }
        stream.push_back(c);
    }
    if (!have_header) throw DataError("text click stream: missing header channel,time_ps");
    return stream;
}

ClickStream read_stream_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open click stream file: " + path);
    std::array<char, 8> lead{};
    in.read(lead.data(), lead.size());
    const bool binary = in.gcount() == static_cast<std::streamsize>(lead.size()) && lead == kMagic;
    in.clear();
    in.seekg(0);
    return binary ? read_binary(in) : read_text(in);
}

}  // namespace ipw
