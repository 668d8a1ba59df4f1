#include "orbitcert/json_util.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace orbitcert {

std::string double_to_decimal(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    if (res.ec != std::errc()) throw std::runtime_error("double_to_decimal: to_chars failed");
    return std::string(buf, res.ptr);
}

double decimal_to_double(const std::string& s) {
    double value = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("decimal_to_double: cannot parse '" + s + "'");
    return value;
}

Json interval_to_json(const Interval& x) {
    return Json{{"lo", double_to_decimal(x.lo())}, {"hi", double_to_decimal(x.hi())}};
}

Interval interval_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw std::runtime_error("interval JSON must be an object with 'lo' and 'hi'");
    return Interval(decimal_to_double(j.at("lo").get<std::string>()),
                    decimal_to_double(j.at("hi").get<std::string>()));
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        hash ^= static_cast<std::uint64_t>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

}  // namespace orbitcert
