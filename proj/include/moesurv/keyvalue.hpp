#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace moesurv {

/// Ordered `key = value` text. Blank lines and `#` comments are ignored.
/// Getters throw ConfigError on missing or malformed values.
class KeyValues {
public:
    static KeyValues parse(std::string_view text, const std::string& source = "<text>");
    static KeyValues load(const std::filesystem::path& path);

    std::string str() const;

    void set(const std::string& key, std::string value);
    bool has(std::string_view key) const;
    const std::string& get(std::string_view key) const;

    std::string get_or(std::string_view key, std::string fallback) const;
    long long get_int(std::string_view key, long long fallback) const;
    double get_double(std::string_view key, double fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;
    /// Comma-separated list, items trimmed, empty items dropped.
    std::vector<std::string> get_list(std::string_view key) const;

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    KeyValues with_prefix(std::string_view prefix) const;
    /// Copy of `other` with `prefix` prepended to every key, appended here.
    void merge(const KeyValues& other, std::string_view prefix = {});

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    /// Throws ConfigError naming the first key not in `known`.
    void require_known(std::initializer_list<std::string_view> known, std::string_view what) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::string source_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');
std::string format_double(double v);

}  // namespace moesurv
