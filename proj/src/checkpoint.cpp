#include "galforge/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <set>
#include <stdexcept>

#include "galforge/io_util.hpp"

namespace galforge {

namespace {

constexpr char kMagic[4] = {'G', 'L', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(const std::string& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + i]);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    throw std::runtime_error("read_checkpoint: " + why + " in " + path_);
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated file");
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointArrays& arrays) {
  std::set<std::string> seen;
  for (const auto& [name, tensor] : arrays) {
    if (!seen.insert(name).second) {
      throw std::invalid_argument("write_checkpoint: duplicate array name '" + name + "'");
    }
    (void)tensor;
  }
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, tensor] : arrays) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape) put_u64(out, d);
    for (double v : tensor.data) put_f64(out, v);
  }
  atomic_write_file(path, out);
}

CheckpointArrays read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path.string());
  if (r.str(4) != std::string(kMagic, 4)) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  CheckpointArrays arrays;
  std::set<std::string> seen;
  for (std::uint32_t a = 0; a < count; ++a) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    if (!seen.insert(name).second) r.fail("duplicate array name '" + name + "'");
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.u64()));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = r.f64();
    arrays.emplace_back(name, std::move(t));
  }
  if (!r.exhausted()) r.fail("trailing bytes");
  return arrays;
}

std::uint64_t file_digest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

const Tensor& checkpoint_array(const CheckpointArrays& arrays, const std::string& name) {
  for (const auto& [n, t] : arrays) {
    if (n == name) return t;
  }
  throw std::runtime_error("checkpoint_array: missing array '" + name + "'");
}

}  // namespace galforge
