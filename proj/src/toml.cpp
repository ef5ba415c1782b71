#include "usq/toml.hpp"

#include "usq/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace usq {

namespace {

using nlohmann::json;

class Reader {
public:
    explicit Reader(std::string_view text) : s_(text) {}

    json parse() {
        json root = json::object();
        json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) {
                break;
            }
            if (peek() == '[') {
                table = header(root);
            } else {
                key_value(*table);
            }
            end_of_line();
        }
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    int line_ = 1;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("toml line " + std::to_string(line_) + ": " + what);
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
    char get() {
        const char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
        }
        return c;
    }
    void expect(char c) {
        if (eof() || peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        get();
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) {
            get();
        }
    }
    void skip_comment() {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') {
                get();
            }
        }
    }
    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\r' && peek(1) == '\n') {
                get();
            }
            if (peek() == '\n') {
                get();
            } else {
                return;
            }
        }
    }
    // Whitespace, comments and newlines inside arrays.
    void skip_all() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') {
                get();
            } else {
                return;
            }
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (peek() == '\r') {
            get();
        }
        if (!eof() && peek() != '\n') {
            fail("unexpected trailing characters");
        }
    }

    std::vector<std::string> key_path() {
        std::vector<std::string> path;
        while (true) {
            skip_ws();
            path.push_back(key_part());
            skip_ws();
            if (peek() != '.') {
                return path;
            }
            get();
        }
    }

    std::string key_part() {
        if (peek() == '"') {
            return basic_string();
        }
        if (peek() == '\'') {
            return literal_string();
        }
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            k.push_back(get());
        }
        if (k.empty()) {
            fail("expected a key");
        }
        return k;
    }

    json* descend(json& root, const std::vector<std::string>& path, std::size_t count) {
        json* node = &root;
        for (std::size_t i = 0; i < count; ++i) {
            json& child = (*node)[path[i]];
            if (child.is_null()) {
                child = json::object();
            }
            if (child.is_array() && !child.empty() && child.back().is_object()) {
                node = &child.back();
            } else if (child.is_object()) {
                node = &child;
            } else {
                fail("key '" + path[i] + "' is not a table");
            }
        }
        return node;
    }

    json* header(json& root) {
        get();
        const bool array = peek() == '[';
        if (array) {
            get();
        }
        const auto path = key_path();
        skip_ws();
        expect(']');
        if (array) {
            expect(']');
        }
        json* parent = descend(root, path, path.size() - 1);
        json& target = (*parent)[path.back()];
        if (array) {
            if (target.is_null()) {
                target = json::array();
            }
            if (!target.is_array()) {
                fail("'" + path.back() + "' is not an array of tables");
            }
            target.push_back(json::object());
            return &target.back();
        }
        if (target.is_null()) {
            target = json::object();
        } else if (!target.is_object()) {
            fail("'" + path.back() + "' redefined as a table");
        }
        return &target;
    }

    void key_value(json& table) {
        const auto path = key_path();
        skip_ws();
        expect('=');
        skip_ws();
        json* parent = descend(table, path, path.size() - 1);
        if (parent->contains(path.back())) {
            fail("duplicate key '" + path.back() + "'");
        }
        (*parent)[path.back()] = value();
    }

    json value() {
        const char c = peek();
        if (c == '"') {
            return basic_string();
        }
        if (c == '\'') {
            return literal_string();
        }
        if (c == '[') {
            return array();
        }
        if (c == '{') {
            return inline_table();
        }
        if (s_.substr(pos_).starts_with("true")) {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_).starts_with("false")) {
            pos_ += 5;
            return false;
        }
        return number();
    }

    std::string basic_string() {
        expect('"');
        if (peek() == '"' && peek(1) == '"') {
            fail("multi-line strings are not supported");
        }
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') {
                fail("unterminated string");
            }
            const char c = get();
            if (c == '"') {
                return out;
            }
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            const char e = get();
            switch (e) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            case 'b': out.push_back('\b'); break;
            case 'f': out.push_back('\f'); break;
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            default: fail(std::string("unsupported escape '\\") + e + "'");
            }
        }
    }

    std::string literal_string() {
        expect('\'');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') {
                fail("unterminated string");
            }
            const char c = get();
            if (c == '\'') {
                return out;
            }
            out.push_back(c);
        }
    }

    json array() {
        expect('[');
        json out = json::array();
        while (true) {
            skip_all();
            if (peek() == ']') {
                get();
                return out;
            }
            out.push_back(value());
            skip_all();
            if (peek() == ',') {
                get();
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
    }

    json inline_table() {
        expect('{');
        json out = json::object();
        skip_ws();
        if (peek() == '}') {
            get();
            return out;
        }
        while (true) {
            key_value(out);
            skip_ws();
            if (peek() == ',') {
                get();
                skip_ws();
            } else if (peek() == '}') {
                get();
                return out;
            } else {
                fail("expected ',' or '}' in inline table");
            }
        }
    }

    json number() {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_')) {
            const char c = get();
            if (c != '_') {
                tok.push_back(c);
            }
        }
        if (tok.empty()) {
            fail("expected a value");
        }
        std::string body = tok;
        const bool negative = !body.empty() && body[0] == '-';
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
            body.erase(0, 1);
        }
        if (body == "inf") {
            return negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        }
        if (body == "nan") {
            return std::numeric_limits<double>::quiet_NaN();
        }
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
        const char* last = tok.data() + tok.size();
        if (is_float) {
            double v = 0.0;
            const auto r = std::from_chars(first, last, v);
            if (r.ec != std::errc() || r.ptr != last) {
                fail("invalid number '" + tok + "'");
            }
            return v;
        }
        std::int64_t v = 0;
        const auto r = std::from_chars(first, last, v);
        if (r.ec != std::errc() || r.ptr != last) {
            fail("invalid value '" + tok + "'");
        }
        return v;
    }
};

} // namespace

nlohmann::json parse_toml(std::string_view text) { return Reader(text).parse(); }

} // namespace usq
