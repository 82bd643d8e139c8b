// SPDX-License-Identifier: Apache-2.0
#include "mvgb/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace mvgb::net {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

class Writer {
public:
  template <class T> void pod(T v) {
    const auto *p = reinterpret_cast<const char *>(&v);
    out.append(p, sizeof v);
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out.append(s);
  }
  std::string out;
};

class Reader {
public:
  explicit Reader(std::string_view b) : bytes(b) {}
  template <class T> T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(bytes.substr(pos, n));
    pos += n;
    return s;
  }
  void need(std::size_t n) const {
    if (bytes.size() - pos < n)
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos));
  }
  bool done() const { return pos == bytes.size(); }

private:
  std::string_view bytes;
  std::size_t pos = 0;
};

} // namespace

std::string serialize(const Checkpoint &c) {
  Writer w;
  w.out.append("BCKP", 4);
  w.pod(kCheckpointVersion);
  w.str(c.config);
  w.pod(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto &[name, t] : c.tensors) {
    w.str(name);
    w.pod(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape())
      w.pod(static_cast<std::uint64_t>(d));
    w.out.append(reinterpret_cast<const char *>(t.data()), t.size() * sizeof(double));
  }
  for (double v : c.blend_weights)
    w.pod(v);
  w.pod(c.branch_mask);
  w.pod(c.best_validation_accuracy);
  w.pod(c.step);
  w.pod(c.epoch);
  w.str(c.ledger);
  return std::move(w.out);
}

Checkpoint deserialize(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "BCKP")
    throw CheckpointError("not a checkpoint (bad magic)");
  Reader r(bytes.substr(4));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config = r.str();
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8)
      throw CheckpointError(name + ": bad tensor rank " + std::to_string(rank));
    ad::Shape shape(rank);
    std::size_t size = 1;
    for (auto &d : shape) {
      d = static_cast<std::size_t>(r.pod<std::uint64_t>());
      if (d == 0 || d > (std::size_t{1} << 32))
        throw CheckpointError(name + ": bad tensor extent");
      size *= d;
    }
    r.need(size * sizeof(double));
    std::vector<double> values(size);
    for (double &v : values)
      v = r.pod<double>();
    c.tensors.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  for (double &v : c.blend_weights)
    v = r.pod<double>();
  c.branch_mask = r.pod<std::uint8_t>();
  c.best_validation_accuracy = r.pod<double>();
  c.step = r.pod<std::uint64_t>();
  c.epoch = r.pod<std::uint64_t>();
  c.ledger = r.str();
  if (!r.done())
    throw CheckpointError("trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &c) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize(c);
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw CheckpointError("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw CheckpointError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const CheckpointError &e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, ad::Tensor>> snapshot_parameters(MultiViewNet &net) {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (const ad::Parameter *p : net.parameters())
    out.emplace_back(p->name, p->value);
  return out;
}

void restore_parameters(MultiViewNet &net,
                        const std::vector<std::pair<std::string, ad::Tensor>> &tensors) {
  std::map<std::string_view, const ad::Tensor *> by_name;
  for (const auto &[name, t] : tensors)
    by_name.emplace(name, &t);
  for (ad::Parameter *p : net.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw CheckpointError("checkpoint has no tensor '" + p->name + "'");
    if (it->second->shape() != p->value.shape())
      throw CheckpointError(p->name + ": shape " + ad::to_string(it->second->shape()) +
                            " does not match network " + ad::to_string(p->value.shape()));
    p->value = *it->second;
  }
}

} // namespace mvgb::net
