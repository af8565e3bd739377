// SPDX-License-Identifier: Apache-2.0
#include "roma/param_set.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace roma {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

constexpr const char* kHeaderTag = "roma-tensors";
constexpr int kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("tensor file truncated");
  return v;
}

}  // namespace

Tensor& ParamSet::add(const std::string& name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Entry e;
  e.grad = Tensor::zeros(init.shape);
  e.m = Tensor::zeros(init.shape);
  e.v = Tensor::zeros(init.shape);
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamSet::Entry& ParamSet::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const ParamSet::Entry& ParamSet::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamSet::zero_grad() {
  for (auto& [name, e] : entries_)
    std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

double ParamSet::grad_norm() const {
  double s = 0.0;
  for (const auto& [name, e] : entries_)
    for (const double g : e.grad.data) s += g * g;
  return std::sqrt(s);
}

void write_tensor_map(const std::string& path,
                      const std::map<std::string, const Tensor*>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << kHeaderTag << " v" << kFormatVersion << " n=" << tensors.size() << "\n";
  for (const auto& [name, t] : tensors) {  // std::map iterates sorted by name
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t->rank()));
    for (const int64_t e : t->shape) write_pod<uint64_t>(os, static_cast<uint64_t>(e));
    os.write(reinterpret_cast<const char*>(t->data.data()),
             static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::map<std::string, Tensor> read_tensor_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string header;
  std::getline(is, header);
  size_t count = 0;
  {
    char tag[64] = {0};
    int version = -1;
    unsigned long long n = 0;
    if (std::sscanf(header.c_str(), "%63s v%d n=%llu", tag, &version, &n) != 3 ||
        std::string(tag) != kHeaderTag)
      throw std::runtime_error("not a roma tensor file: " + path);
    if (version != kFormatVersion)
      throw std::runtime_error("unsupported tensor file version in " + path);
    count = static_cast<size_t>(n);
  }
  std::map<std::string, Tensor> out;
  for (size_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_pod<uint32_t>(is);
    std::vector<int64_t> shape(rank);
    for (auto& e : shape) e = static_cast<int64_t>(read_pod<uint64_t>(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("tensor file truncated: " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void ParamSet::save(const std::string& path) const {
  std::map<std::string, const Tensor*> m;
  for (const auto& [name, e] : entries_) m.emplace(name, &e.value);
  write_tensor_map(path, m);
}

ParamSet ParamSet::load(const std::string& path) {
  ParamSet ps;
  for (auto& [name, t] : read_tensor_map(path)) ps.add(name, std::move(t));
  return ps;
}

void ParamSet::save_opt_state(const std::string& path) const {
  std::map<std::string, const Tensor*> m;
  const Tensor t_tensor = Tensor::scalar(static_cast<double>(adam_t));
  for (const auto& [name, e] : entries_) {
    m.emplace("m/" + name, &e.m);
    m.emplace("v/" + name, &e.v);
  }
  m.emplace("adam_t", &t_tensor);
  write_tensor_map(path, m);
}

void ParamSet::load_opt_state(const std::string& path) {
  auto tensors = read_tensor_map(path);
  const auto it = tensors.find("adam_t");
  if (it == tensors.end()) throw std::runtime_error("optimizer state missing adam_t: " + path);
  adam_t = static_cast<int64_t>(it->second.value());
  for (auto& [name, e] : entries_) {
    auto mi = tensors.find("m/" + name);
    auto vi = tensors.find("v/" + name);
    if (mi == tensors.end() || vi == tensors.end())
      throw std::runtime_error("optimizer state missing moments for " + name);
    if (!mi->second.same_shape(e.value) || !vi->second.same_shape(e.value))
      throw std::runtime_error("optimizer moment shape mismatch for " + name);
    e.m = std::move(mi->second);
    e.v = std::move(vi->second);
  }
}

bool ParamSet::values_equal(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.value.shape != b->second.value.shape)
      return false;
    if (std::memcmp(a->second.value.data.data(), b->second.value.data.data(),
                    a->second.value.data.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace roma
