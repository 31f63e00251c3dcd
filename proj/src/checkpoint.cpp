#include "sumgraph/checkpoint.hpp"

#include "sumgraph/byte_io.hpp"
#include "sumgraph/errors.hpp"

namespace sumgraph {

namespace {

constexpr std::string_view kMagic = "SGRF";
constexpr std::uint16_t kVersion = 1;

void put_array(ByteWriter& w, const Matrix& m) {
  w.u64(m.size());
  for (double x : m.data()) w.f64(x);
}

Matrix get_array(ByteReader& r, std::size_t rows, std::size_t cols, std::string_view name) {
  const std::size_t at = r.offset();
  const std::uint64_t n = r.u64();
  if (n != static_cast<std::uint64_t>(rows) * cols) {
    r.fail("array '" + std::string(name) + "' at byte offset " + std::to_string(at) + " has " +
           std::to_string(n) + " entries, expected " + std::to_string(rows * cols));
  }
  if (n > r.remaining() / 8) {
    r.fail("truncated at byte offset " + std::to_string(r.offset() + r.remaining()) +
           " inside array '" + std::string(name) + "' starting at byte offset " +
           std::to_string(at));
  }
  Matrix m(rows, cols);
  for (double& x : m.data()) x = r.f64();
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  c.params.validate();
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  w.u64(c.config_hash);
  w.u32(c.epoch);
  w.u32(c.k);
  const auto tensors = c.params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string_view name = ModelParams::kNames[i];
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(tensors[i]->rows()));
    w.u32(static_cast<std::uint32_t>(tensors[i]->cols()));
    put_array(w, *tensors[i]);
  }
  const AdamHyper& h = c.adam.hyper();
  w.f64(h.beta1);
  w.f64(h.beta2);
  w.f64(h.eps);
  w.u64(c.adam.steps());
  const auto& m = c.adam.first_moment();
  const auto& v = c.adam.second_moment();
  if (m.size() != tensors.size()) throw ShapeError("checkpoint: Adam state does not match model");
  for (std::size_t i = 0; i < m.size(); ++i) {
    put_array(w, m[i]);
    put_array(w, v[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(kMagic.size()) != kMagic) r.fail("bad magic at byte offset 0");
  const std::uint16_t version = r.u16();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version) + " at byte offset 4");
  Checkpoint c;
  c.config_hash = r.u64();
  c.epoch = r.u32();
  c.k = r.u32();
  if (c.k == 0) r.fail("K is 0 at byte offset 18");
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32();
  if (count != ModelParams::kCount) {
    r.fail("tensor count " + std::to_string(count) + " at byte offset " + std::to_string(count_at) +
           ", expected " + std::to_string(ModelParams::kCount));
  }
  auto tensors = c.params.tensors();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::uint16_t len = r.u16();
    const std::string name = r.bytes(len);
    if (name != ModelParams::kNames[i]) {
      r.fail("tensor at byte offset " + std::to_string(at) + " is '" + name + "', expected '" +
             std::string(ModelParams::kNames[i]) + "'");
    }
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    *tensors[i] = get_array(r, rows, cols, name);
  }
  try {
    c.params.validate();
  } catch (const ShapeError& e) {
    r.fail(std::string("inconsistent tensor shapes: ") + e.what());
  }
  AdamHyper h;
  h.beta1 = r.f64();
  h.beta2 = r.f64();
  h.eps = r.f64();
  const std::uint64_t steps = r.u64();
  std::vector<Matrix> m, v;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name(ModelParams::kNames[i]);
    m.push_back(get_array(r, tensors[i]->rows(), tensors[i]->cols(), name + ".m"));
    v.push_back(get_array(r, tensors[i]->rows(), tensors[i]->cols(), name + ".v"));
  }
  if (r.remaining() != 0) r.fail("trailing data after byte offset " + std::to_string(r.offset()));
  c.adam = AdamState::restore(h, steps, std::move(m), std::move(v));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_bytes(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_hash,
                           std::vector<std::string>* warnings) {
  Checkpoint c;
  try {
    c = decode_checkpoint(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (expected_hash && *expected_hash != c.config_hash && warnings != nullptr) {
    warnings->push_back(path.string() + ": checkpoint was written under a different config");
  }
  return c;
}

}  // namespace sumgraph
