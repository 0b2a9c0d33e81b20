#include "quant/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace quant::toml {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// strip a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

bool parse_number(const std::string& tok, double& out) {
    try {
        size_t used = 0;
        out = std::stod(tok, &used);
        return used == tok.size();
    } catch (...) {
        return false;
    }
}

Value parse_scalar(const std::string& tok, int line) {
    if (tok.empty()) throw ParseError(line, "missing value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"')
            throw ParseError(line, "unterminated string");
        return tok.substr(1, tok.size() - 2);
    }
    double num = 0.0;
    if (parse_number(tok, num)) return num;
    throw ParseError(line, "cannot parse value '" + tok + "'");
}

Value parse_array(const std::string& body, int line) {
    std::vector<std::string> toks;
    std::string cur;
    bool quoted = false;
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            toks.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) toks.push_back(trim(cur));

    std::vector<double> nums;
    std::vector<std::string> strs;
    for (const std::string& t : toks) {
        Value v = parse_scalar(t, line);
        if (std::holds_alternative<double>(v))
            nums.push_back(std::get<double>(v));
        else if (std::holds_alternative<std::string>(v))
            strs.push_back(std::get<std::string>(v));
        else
            throw ParseError(line, "boolean arrays are not supported");
    }
    if (!nums.empty() && !strs.empty())
        throw ParseError(line, "mixed-type array");
    if (!strs.empty()) return strs;
    return nums;
}

}  // namespace

double Table::number(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::out_of_range("missing config key: " + key);
    if (auto* d = std::get_if<double>(&it->second)) return *d;
    throw std::out_of_range("config key is not a number: " + key);
}

double Table::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

bool Table::boolean_or(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (auto* b = std::get_if<bool>(&it->second)) return *b;
    throw std::out_of_range("config key is not a boolean: " + key);
}

std::string Table::str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::out_of_range("missing config key: " + key);
    if (auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw std::out_of_range("config key is not a string: " + key);
}

std::string Table::str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
}

std::vector<double> Table::numbers(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::out_of_range("missing config key: " + key);
    if (auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
    if (auto* d = std::get_if<double>(&it->second)) return {*d};
    throw std::out_of_range("config key is not a number array: " + key);
}

std::vector<std::string> Table::strings(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::out_of_range("missing config key: " + key);
    if (auto* v = std::get_if<std::vector<std::string>>(&it->second)) return *v;
    if (auto* s = std::get_if<std::string>(&it->second)) return {*s};
    throw std::out_of_range("config key is not a string array: " + key);
}

std::vector<std::string> Table::keys() const {
    std::vector<std::string> out;
    out.reserve(kv_.size());
    for (const auto& [k, v] : kv_) out.push_back(k);
    return out;
}

Table parse(const std::string& text) {
    Table tab;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ParseError(line_no, "empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "empty key");
        for (char c : key)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' &&
                c != '.')
                throw ParseError(line_no, "invalid key character");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']') throw ParseError(line_no, "unterminated array");
            tab.set(full, parse_array(val.substr(1, val.size() - 2), line_no));
        } else {
            tab.set(full, parse_scalar(val, line_no));
        }
    }
    return tab;
}

Table parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

}  // namespace quant::toml
