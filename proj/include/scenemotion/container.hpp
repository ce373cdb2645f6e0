#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scenemotion {

// Binary container with named arrays and a JSON metadata block.
//
// Layout: magic "SMAC" | u32 version | u64 json_len | json bytes | raw array
// data in the order listed under json["arrays"]. Scalars and strings live in
// json["meta"]. Writes are byte-deterministic for identical content.
class ArrayContainer {
public:
    struct Array {
        std::string dtype;            // "f4", "f8", "i8", "u1"
        std::vector<std::int64_t> shape;
        std::vector<std::uint8_t> bytes;
        std::int64_t elements() const {
            std::int64_t n = 1;
            for (auto s : shape) n *= s;
            return n;
        }
    };

    nlohmann::json meta = nlohmann::json::object();

    void put_f4(const std::string& name, const std::vector<float>& v,
                std::vector<std::int64_t> shape);
    void put_f8(const std::string& name, const std::vector<double>& v,
                std::vector<std::int64_t> shape);
    void put_i8(const std::string& name, const std::vector<std::int64_t>& v,
                std::vector<std::int64_t> shape);
    void put_u1(const std::string& name, const std::vector<std::uint8_t>& v,
                std::vector<std::int64_t> shape);

    bool has(const std::string& name) const { return arrays_.count(name) != 0; }
    const Array& array(const std::string& name) const;
    std::vector<float> get_f4(const std::string& name) const;
    std::vector<double> get_f8(const std::string& name) const;
    std::vector<std::int64_t> get_i8(const std::string& name) const;
    std::vector<std::uint8_t> get_u1(const std::string& name) const;

    std::vector<std::string> names() const;

    void save(const std::string& path) const;
    static ArrayContainer load(const std::string& path);

private:
    std::map<std::string, Array> arrays_;  // ordered -> deterministic layout
};

}  // namespace scenemotion
