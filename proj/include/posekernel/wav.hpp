#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posekernel/signals.hpp"

namespace pk::wav {

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Writes a mono RIFF/WAVE file with format code 3 (IEEE float 32-bit LE).
/// Samples are quantized to float32; the sample rate is rounded to an
/// integer as WAV headers require.
inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
    if (!(w.sample_rate_hz > 0.0)) throw std::invalid_argument("write_wav: sample rate must be positive");

    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 4);
    const auto rate = static_cast<std::uint32_t>(std::llround(w.sample_rate_hz));

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    detail::put_u32(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    detail::put_u32(out, 16);
    detail::put_u16(out, 3);   // IEEE float
    detail::put_u16(out, 1);   // mono
    detail::put_u32(out, rate);
    detail::put_u32(out, rate * 4);
    detail::put_u16(out, 4);   // block align
    detail::put_u16(out, 32);  // bits per sample
    out += "data";
    detail::put_u32(out, data_bytes);
    for (double s : w.samples) {
        const float f = static_cast<float>(s);
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        detail::put_u32(out, bits);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_wav: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_wav: short write to " + path.string());
}

/// Reads a mono WAV file. Accepts format code 3 (float32) and format code 1
/// (PCM16, converted by /32768 into [-1, 1)).
inline Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_wav: cannot open " + path.string());
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
        std::memcmp(raw.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("read_wav: malformed RIFF header in " + path.string());
    }

    std::uint16_t format_code = 0;
    std::uint16_t channels = 0;
    std::uint16_t bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        const char* id = reinterpret_cast<const char*>(raw.data() + pos);
        const std::uint32_t len = detail::get_u32(raw.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > raw.size()) throw std::runtime_error("read_wav: truncated chunk in " + path.string());
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw std::runtime_error("read_wav: malformed fmt chunk in " + path.string());
            format_code = detail::get_u16(raw.data() + body);
            channels = detail::get_u16(raw.data() + body + 2);
            rate = detail::get_u32(raw.data() + body + 4);
            bits = detail::get_u16(raw.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = raw.data() + body;
            data_len = len;
        }
        pos = body + len + (len % 2);  // chunks are word-aligned
    }

    if (!have_fmt || data == nullptr) throw std::runtime_error("read_wav: missing fmt or data chunk in " + path.string());
    if (channels != 1) throw std::runtime_error("read_wav: only mono files are supported");

    Waveform w;
    w.sample_rate_hz = static_cast<double>(rate);
    if (format_code == 3 && bits == 32) {
        const std::size_t count = data_len / 4;
        w.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint32_t v = detail::get_u32(data + 4 * i);
            w.samples[i] = static_cast<double>(std::bit_cast<float>(v));
        }
    } else if (format_code == 1 && bits == 16) {
        const std::size_t count = data_len / 2;
        w.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto v = static_cast<std::int16_t>(detail::get_u16(data + 2 * i));
            w.samples[i] = static_cast<double>(v) / 32768.0;
        }
    } else {
        throw std::runtime_error("read_wav: unsupported format code " + std::to_string(format_code) +
                                 " (" + std::to_string(bits) + " bit)");
    }
    return w;
}

}  // namespace pk::wav
