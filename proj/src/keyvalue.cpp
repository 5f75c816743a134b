#include "moesurv/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "moesurv/error.hpp"

namespace moesurv {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) pos = s.size();
        std::string item = trim(s.substr(start, pos - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = pos + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
    KeyValues kv;
    kv.source_ = source;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        if (kv.has(key)) throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.entries_.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string KeyValues::str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

void KeyValues::set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = std::move(value);
            return;
        }
    entries_.emplace_back(key, std::move(value));
}

bool KeyValues::has(std::string_view key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValues::get(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw ConfigError(source_ + ": missing key '" + std::string(key) + "'");
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
    return has(key) ? get(key) : std::move(fallback);
}

long long KeyValues::get_int(std::string_view key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = get(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError(source_ + ": key '" + std::string(key) + "' is not an integer: " + s);
    return v;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = get(key);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError(source_ + ": key '" + std::string(key) + "' is not a number: " + s);
    return v;
}

bool KeyValues::get_bool(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(source_ + ": key '" + std::string(key) + "' is not a boolean: " + s);
}

std::vector<std::string> KeyValues::get_list(std::string_view key) const {
    if (!has(key)) return {};
    return split_list(get(key));
}

KeyValues KeyValues::with_prefix(std::string_view prefix) const {
    KeyValues out;
    out.source_ = source_;
    for (const auto& [k, v] : entries_)
        if (k.starts_with(prefix)) out.entries_.emplace_back(k.substr(prefix.size()), v);
    return out;
}

void KeyValues::merge(const KeyValues& other, std::string_view prefix) {
    for (const auto& [k, v] : other.entries_) set(std::string(prefix) + k, v);
}

void KeyValues::require_known(std::initializer_list<std::string_view> known, std::string_view what) const {
    for (const auto& [k, v] : entries_)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError(source_ + ": unknown " + std::string(what) + " key '" + k + "'");
}

}  // namespace moesurv
