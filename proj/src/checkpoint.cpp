#include "navlab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "navlab/util.hpp"

namespace navlab {

namespace {

constexpr char kMagic[8] = {'N', 'A', 'V', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw ValidationError("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ValidationError("checkpoint: truncated string");
  return s;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  for (double d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
  }
}

std::vector<double> read_doubles(std::istream& in) {
  const uint64_t n = read_u64(in);
  std::vector<double> v(n);
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t bits = read_u64(in);
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, const std::vector<int>& shape,
                     const std::vector<double>& data) {
  arrays.emplace_back(name, std::make_pair(shape, data));
}

const std::pair<std::vector<int>, std::vector<double>>& Checkpoint::get(
    const std::string& name) const {
  for (const auto& [n, a] : arrays) {
    if (n == name) return a;
  }
  throw ValidationError("checkpoint: missing array " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, _] : arrays) {
    if (n == name) return true;
  }
  return false;
}

void Checkpoint::put_params(const std::string& prefix, const ParamSet& params) {
  for (const auto& [name, t] : params.items()) {
    put(prefix + "/" + name, t.shape(), t.values());
  }
}

void Checkpoint::load_params(const std::string& prefix, ParamSet& params) const {
  for (const auto& [name, t] : params.items()) {
    const auto& [shape, data] = get(prefix + "/" + name);
    if (shape != t.shape()) {
      throw ValidationError("checkpoint: shape mismatch for " + name +
                            " (model configuration differs from the checkpoint)");
    }
    Tensor handle = t;  // shared impl
    handle.values() = data;
  }
}

void Checkpoint::put_adam(const std::string& prefix, const Adam& opt) {
  meta[prefix] = {{"step_count", opt.step_count()},
                  {"lr", opt.config().lr},
                  {"beta1", opt.config().beta1},
                  {"beta2", opt.config().beta2},
                  {"eps", opt.config().eps}};
  size_t idx = 0;
  for (const auto& [name, t] : opt.params().items()) {
    put(prefix + "/m/" + name, t.shape(), opt.first_moment(idx));
    put(prefix + "/v/" + name, t.shape(), opt.second_moment(idx));
    ++idx;
  }
}

void Checkpoint::load_adam(const std::string& prefix, Adam& opt) const {
  if (!meta.contains(prefix)) throw ValidationError("checkpoint: missing optimizer " + prefix);
  opt.set_step_count(meta.at(prefix).at("step_count").get<long>());
  size_t idx = 0;
  for (const auto& [name, t] : opt.params().items()) {
    opt.first_moment(idx) = get(prefix + "/m/" + name).second;
    opt.second_moment(idx) = get(prefix + "/v/" + name).second;
    if (opt.first_moment(idx).size() != t.values().size()) {
      throw ValidationError("checkpoint: moment size mismatch for " + name);
    }
    ++idx;
  }
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  write_string(out, meta.dump());
  write_u64(out, arrays.size());
  for (const auto& [name, a] : arrays) {
    write_string(out, name);
    write_u64(out, a.first.size());
    for (int d : a.first) write_u64(out, static_cast<uint64_t>(d));
    write_doubles(out, a.second);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("checkpoint: bad magic in " + path);
  }
  Checkpoint ck;
  ck.meta = nlohmann::json::parse(read_string(in));
  const uint64_t n = read_u64(in);
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(in);
    const uint64_t ndim = read_u64(in);
    std::vector<int> shape(ndim);
    for (uint64_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u64(in));
    std::vector<double> data = read_doubles(in);
    ck.arrays.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(data)));
  }
  return ck;
}

}  // namespace navlab
