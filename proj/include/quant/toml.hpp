#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace quant::toml {

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
          line(line_no) {}
};

using Value = std::variant<bool, double, std::string, std::vector<double>,
                           std::vector<std::string>>;

/// Flat key/value view of a TOML file: keys inside [section] blocks are
/// exposed as "section.key". Supports the subset used by the configs:
/// strings, numbers, booleans and homogeneous arrays of either.
class Table {
public:
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::string str(const std::string& key) const;
    std::string str_or(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::string> strings(const std::string& key) const;

    std::vector<std::string> keys() const;

    void set(const std::string& key, Value v) { kv_[key] = std::move(v); }

private:
    std::map<std::string, Value> kv_;
};

Table parse(const std::string& text);
Table parse_file(const std::string& path);

}  // namespace quant::toml
