#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dex {

/// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t ch);

/// Number of scalar values in a UTF-8 string.
std::size_t char_length(std::string_view text);

/// Splits on ASCII whitespace, dropping empty fields.
std::vector<std::string> split_ws(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

std::string_view trim(std::string_view text);

/// Reads a UTF-8 text file line by line; a trailing '\r' is stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a. Used for content hashes and named sub-seeds, never for security.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value);

/// Hash of a file's bytes, rendered as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

} // namespace dex
