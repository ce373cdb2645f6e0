#include "scenemotion/container.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scenemotion {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'A', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
std::vector<std::uint8_t> to_bytes(const std::vector<T>& v) {
    std::vector<std::uint8_t> out(v.size() * sizeof(T));
    if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
    return out;
}

template <typename T>
std::vector<T> from_bytes(const std::vector<std::uint8_t>& b) {
    std::vector<T> out(b.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), b.data(), b.size());
    return out;
}

}  // namespace

void ArrayContainer::put_f4(const std::string& name, const std::vector<float>& v,
                            std::vector<std::int64_t> shape) {
    arrays_[name] = Array{"f4", std::move(shape), to_bytes(v)};
}
void ArrayContainer::put_f8(const std::string& name, const std::vector<double>& v,
                            std::vector<std::int64_t> shape) {
    arrays_[name] = Array{"f8", std::move(shape), to_bytes(v)};
}
void ArrayContainer::put_i8(const std::string& name, const std::vector<std::int64_t>& v,
                            std::vector<std::int64_t> shape) {
    arrays_[name] = Array{"i8", std::move(shape), to_bytes(v)};
}
void ArrayContainer::put_u1(const std::string& name, const std::vector<std::uint8_t>& v,
                            std::vector<std::int64_t> shape) {
    arrays_[name] = Array{"u1", std::move(shape), v};
}

const ArrayContainer::Array& ArrayContainer::array(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw std::runtime_error("container: missing array '" + name + "'");
    return it->second;
}

std::vector<float> ArrayContainer::get_f4(const std::string& name) const {
    return from_bytes<float>(array(name).bytes);
}
std::vector<double> ArrayContainer::get_f8(const std::string& name) const {
    return from_bytes<double>(array(name).bytes);
}
std::vector<std::int64_t> ArrayContainer::get_i8(const std::string& name) const {
    return from_bytes<std::int64_t>(array(name).bytes);
}
std::vector<std::uint8_t> ArrayContainer::get_u1(const std::string& name) const {
    return array(name).bytes;
}

std::vector<std::string> ArrayContainer::names() const {
    std::vector<std::string> out;
    out.reserve(arrays_.size());
    for (const auto& [k, v] : arrays_) out.push_back(k);
    return out;
}

void ArrayContainer::save(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta;
    auto arr = nlohmann::json::array();
    for (const auto& [name, a] : arrays_) {
        arr.push_back({{"name", name},
                       {"dtype", a.dtype},
                       {"shape", a.shape},
                       {"nbytes", a.bytes.size()}});
    }
    header["arrays"] = arr;
    const std::string js = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("container: cannot open for write: " + path);
    f.write(kMagic, 4);
    std::uint32_t ver = kVersion;
    f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    std::uint64_t len = js.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(js.data(), static_cast<std::streamsize>(js.size()));
    for (const auto& [name, a] : arrays_) {
        f.write(reinterpret_cast<const char*>(a.bytes.data()),
                static_cast<std::streamsize>(a.bytes.size()));
    }
    if (!f) throw std::runtime_error("container: write failed: " + path);
}

ArrayContainer ArrayContainer::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("container: cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("container: bad magic in " + path);
    std::uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kVersion) throw std::runtime_error("container: unsupported version");
    std::uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string js(len, '\0');
    f.read(js.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(js);

    ArrayContainer c;
    c.meta = header.at("meta");
    for (const auto& e : header.at("arrays")) {
        Array a;
        a.dtype = e.at("dtype").get<std::string>();
        a.shape = e.at("shape").get<std::vector<std::int64_t>>();
        a.bytes.resize(e.at("nbytes").get<std::size_t>());
        f.read(reinterpret_cast<char*>(a.bytes.data()),
               static_cast<std::streamsize>(a.bytes.size()));
        c.arrays_[e.at("name").get<std::string>()] = std::move(a);
    }
    if (!f) throw std::runtime_error("container: truncated file: " + path);
    return c;
}

}  // namespace scenemotion
