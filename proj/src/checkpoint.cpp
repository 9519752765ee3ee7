#include "cmbert/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "cmbert/error.hpp"

namespace cmbert {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'B', 'E', 'R', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (in.gcount() != 8) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return true;
}

void put_f32(std::ostream& out, const float* data, std::size_t count) {
  static_assert(sizeof(float) == 4);
  // Little-endian hosts write the raw buffer; this project targets LE.
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

}  // namespace

void Container::add(const std::string& name, std::vector<std::uint64_t> dims, const float* data,
                    std::size_t count) {
  std::uint64_t expected = 1;
  for (auto d : dims) expected *= d;
  if (expected != count) throw std::logic_error("container: dims do not match element count");
  if (tensors.count(name)) throw std::logic_error("container: duplicate tensor " + name);
  order.push_back(name);
  tensors[name] = StoredTensor{std::move(dims), std::vector<float>(data, data + count)};
}

void write_container(const Container& c, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(kMagic, 8);
    put_u64(out, c.order.size());
    for (const auto& name : c.order) {
      const StoredTensor& t = c.tensors.at(name);
      put_u64(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u64(out, t.dims.size());
      for (auto d : t.dims) put_u64(out, d);
      put_f32(out, t.data.data(), t.data.size());
    }
    put_u64(out, c.metadata.size());
    out.write(c.metadata.data(), static_cast<std::streamsize>(c.metadata.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move " + tmp + " into place");
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError(path + ": not a CMBERT01 container");

  Container c;
  std::uint64_t count = 0;
  if (!get_u64(in, count)) throw IoError(path + ": truncated before tensor count");
  for (std::uint64_t t = 0; t < count; ++t) {
    std::uint64_t name_len = 0;
    std::string where = "tensor #" + std::to_string(t);
    if (!get_u64(in, name_len)) throw IoError(path + ": truncated at " + where + " (name length)");
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (in.gcount() != static_cast<std::streamsize>(name_len))
      throw IoError(path + ": truncated at " + where + " (name)");
    where = "tensor '" + name + "'";
    std::uint64_t rank = 0;
    if (!get_u64(in, rank)) throw IoError(path + ": truncated at " + where + " (rank)");
    if (rank > 8) throw IoError(path + ": implausible rank at " + where);
    StoredTensor st;
    std::uint64_t elems = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      std::uint64_t dim = 0;
      if (!get_u64(in, dim)) throw IoError(path + ": truncated at " + where + " (dims)");
      st.dims.push_back(dim);
      elems *= dim;
    }
    st.data.resize(elems);
    in.read(reinterpret_cast<char*>(st.data.data()), static_cast<std::streamsize>(elems * 4));
    if (in.gcount() != static_cast<std::streamsize>(elems * 4))
      throw IoError(path + ": truncated at " + where + " (data)");
    if (c.tensors.count(name)) throw IoError(path + ": duplicate tensor '" + name + "'");
    c.order.push_back(name);
    c.tensors[name] = std::move(st);
  }
  std::uint64_t meta_len = 0;
  if (!get_u64(in, meta_len)) throw IoError(path + ": truncated before metadata");
  c.metadata.resize(meta_len);
  in.read(c.metadata.data(), static_cast<std::streamsize>(meta_len));
  if (in.gcount() != static_cast<std::streamsize>(meta_len))
    throw IoError(path + ": truncated metadata");
  return c;
}

void params_to_container(const ParameterStore<float>& params, Container& c,
                         const std::string& prefix) {
  for (const auto& t : params.named_tensors()) {
    std::vector<std::uint64_t> dims;
    if (t.rows == 1)
      dims = {t.cols};
    else
      dims = {t.rows, t.cols};
    c.add(prefix + t.name, std::move(dims), t.data, t.size());
  }
}

void params_from_container(ParameterStore<float>& params, const Container& c,
                           const std::string& prefix) {
  auto targets = params.named_tensors();
  // Validate the full census before any tensor is written.
  for (const auto& t : targets) {
    auto it = c.tensors.find(prefix + t.name);
    if (it == c.tensors.end())
      throw InputError("checkpoint: missing tensor '" + prefix + t.name + "'");
    const StoredTensor& st = it->second;
    std::uint64_t elems = 1;
    for (auto d : st.dims) elems *= d;
    const bool shape_ok =
        (st.dims.size() == 1 && t.rows == 1 && st.dims[0] == t.cols) ||
        (st.dims.size() == 2 && st.dims[0] == t.rows && st.dims[1] == t.cols);
    if (!shape_ok || elems != t.size())
      throw InputError("checkpoint: shape mismatch for '" + prefix + t.name + "' (stored " +
                       std::to_string(elems) + " elements, model expects " +
                       std::to_string(t.size()) + ")");
  }
  for (auto& t : targets) {
    const StoredTensor& st = c.tensors.at(prefix + t.name);
    std::copy(st.data.begin(), st.data.end(), t.data);
  }
}

}  // namespace cmbert
