#include "usq/expression.hpp"

#include "usq/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace usq {

namespace {

class Parser {
public:
    Parser(std::string_view text, const ExpressionContext& ctx) : s_(text), ctx_(ctx) {}

    double run() {
        const double v = expr();
        skip();
        if (pos_ != s_.size()) {
            fail("unexpected '" + std::string(s_.substr(pos_)) + "'");
        }
        return v;
    }

private:
    std::string_view s_;
    const ExpressionContext& ctx_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression '" + std::string(s_) + "': " + what);
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    double expr() {
        double v = term();
        while (true) {
            if (accept('+')) {
                v += term();
            } else if (accept('-')) {
                v -= term();
            } else {
                return v;
            }
        }
    }

    double term() {
        double v = factor();
        while (true) {
            if (accept('*')) {
                v *= factor();
            } else if (accept('/')) {
                v /= factor();
            } else {
                return v;
            }
        }
    }

    double factor() {
        if (accept('+')) {
            return factor();
        }
        if (accept('-')) {
            return -factor();
        }
        if (accept('(')) {
            const double v = expr();
            if (!accept(')')) {
                fail("missing ')'");
            }
            return v;
        }
        skip();
        if (pos_ >= s_.size()) {
            fail("unexpected end");
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const auto r = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
            if (r.ec != std::errc()) {
                fail("bad number");
            }
            pos_ = static_cast<std::size_t>(r.ptr - s_.data());
            return v;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view name = s_.substr(start, pos_ - start);
            if (accept('(')) {
                std::vector<double> args;
                if (!accept(')')) {
                    do {
                        args.push_back(expr());
                    } while (accept(','));
                    if (!accept(')')) {
                        fail("missing ')' after arguments");
                    }
                }
                return call(name, args);
            }
            return symbol(name);
        }
        fail(std::string("unexpected '") + c + "'");
    }

    double symbol(std::string_view name) const {
        if (const auto it = ctx_.symbols.find(name); it != ctx_.symbols.end()) {
            return it->second;
        }
        if (name == "pi") {
            return std::numbers::pi;
        }
        fail("unknown symbol '" + std::string(name) + "'");
    }

    int level_index(double x) const {
        const double r = std::round(x);
        if (std::abs(r - x) > 1e-12 || r < 0) {
            fail("level index must be a non-negative integer");
        }
        if (ctx_.spectrum == nullptr) {
            fail("level functions need a spectrum");
        }
        if (r >= ctx_.spectrum->size()) {
            fail("level " + std::to_string(static_cast<int>(r)) + " beyond the spectrum size");
        }
        return static_cast<int>(r);
    }

    double call(std::string_view name, const std::vector<double>& args) const {
        const auto need = [&](std::size_t n) {
            if (args.size() != n) {
                fail(std::string(name) + " takes " + std::to_string(n) + " argument(s)");
            }
        };
        if (name == "sqrt" || name == "sin" || name == "cos" || name == "tan" || name == "atan" || name == "exp") {
            need(1);
            const double x = args[0];
            if (name == "sqrt") return std::sqrt(x);
            if (name == "sin") return std::sin(x);
            if (name == "cos") return std::cos(x);
            if (name == "tan") return std::tan(x);
            if (name == "atan") return std::atan(x);
            return std::exp(x);
        }
        if (name == "level") {
            need(1);
            return ctx_.spectrum->transition(level_index(args[0]));
        }
        if (name == "gap") {
            need(2);
            const int i = level_index(args[0]);
            const int j = level_index(args[1]);
            return ctx_.spectrum->transition(j, i);
        }
        if (name == "midpoint") {
            need(2);
            const int i = level_index(args[0]);
            const int j = level_index(args[1]);
            return 0.5 * (ctx_.spectrum->transition(i) + ctx_.spectrum->transition(j));
        }
        fail("unknown function '" + std::string(name) + "'");
    }
};

} // namespace

double evaluate_expression(std::string_view text, const ExpressionContext& ctx) { return Parser(text, ctx).run(); }

} // namespace usq
