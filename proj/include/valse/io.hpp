#pragma once

// Binary persistence. All three formats are little-endian regardless of
// host, with tensors stored as 32-bit floats in row-major order.
//
//   checkpoint  "TVLM" u8 version | u32 L H D vocab grid_side patch_dim max_seq
//               | u8 activation | u64 seed | weights in Weights::for_each order
//   trace       "VLTR" u8 version | u8 flags (bit 0: gradients present)
//               | u32 L H N N_i D vocab | per layer: attention[H][N][N],
//               [attention_grad[H][N][N]], last-token mlp feature[D]
//   bundle      "VLSB" u8 version | u32 L D | f32 beta | L x D directions

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "valse/error.hpp"
#include "valse/relevance.hpp"
#include "valse/steering.hpp"
#include "valse/toyvlm.hpp"

namespace valse {

inline constexpr std::uint8_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kTraceVersion = 1;
inline constexpr std::uint8_t kBundleVersion = 1;

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f32s(std::span<const double> vs) {
    for (double v : vs) f32(v);
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}

  void expect_magic(std::string_view magic) {
    if (data_.size() < magic.size() || data_.compare(0, magic.size(), magic) != 0) {
      fail(ErrorCode::kFormatError, "bad magic, expected " + std::string(magic));
    }
    pos_ = magic.size();
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void f32s(std::span<double> out) {
    need(4 * out.size());
    for (double& v : out) v = f32();
  }
  void expect_end() const {
    if (pos_ != data_.size()) fail(ErrorCode::kDimError, "trailing bytes after payload");
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(ErrorCode::kDimError, "file truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

/// Saturating arithmetic for payload sizes computed from untrusted headers.
inline std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  return __builtin_mul_overflow(a, b, &out) ? UINT64_MAX : out;
}
inline std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  return __builtin_add_overflow(a, b, &out) ? UINT64_MAX : out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path);
}

// ---------------------------------------------------------------- checkpoint

inline std::string encode_checkpoint(const ToyModel& model) {
  const auto& c = model.config();
  ByteWriter w;
  w.bytes("TVLM");
  w.u8(kCheckpointVersion);
  for (std::size_t v : {c.num_layers, c.num_heads, c.hidden_dim, c.vocab_size, c.grid_side, c.patch_dim, c.max_seq})
    w.u32(static_cast<std::uint32_t>(v));
  w.u8(static_cast<std::uint8_t>(c.activation));
  w.u64(c.seed);
  model.weights().for_each([&](const Matrix& m) { w.f32s(m.data()); });
  return w.str();
}

inline ToyModel decode_checkpoint(std::string bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic("TVLM");
  if (r.u8() != kCheckpointVersion) fail(ErrorCode::kFormatError, "unsupported checkpoint version");
  ModelConfig c;
  c.num_layers = r.u32();
  c.num_heads = r.u32();
  c.hidden_dim = r.u32();
  c.vocab_size = r.u32();
  c.grid_side = r.u32();
  c.patch_dim = r.u32();
  c.max_seq = r.u32();
  const std::uint8_t act = r.u8();
  if (act > 1) fail(ErrorCode::kFormatError, "unknown activation");
  c.activation = static_cast<Activation>(act);
  c.seed = r.u64();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kDimError, e.what());
  }
  // Guard against absurd headers before allocating.
  const std::uint64_t d = c.hidden_dim;
  const std::uint64_t per_layer = sat_mul(12, sat_mul(d, d));
  const std::uint64_t shared = sat_mul(d, sat_add(sat_add(c.patch_dim, c.vocab_size), c.max_seq));
  const std::uint64_t expected = sat_mul(4, sat_add(shared, sat_mul(c.num_layers, per_layer)));
  if (r.remaining() != expected) fail(ErrorCode::kDimError, "weight payload size does not match header");
  Weights w = Weights::zeros_like(c);
  w.for_each([&](Matrix& m) { r.f32s(m.data()); });
  r.expect_end();
  return ToyModel(c, std::move(w));
}

inline void save_checkpoint(const ToyModel& model, const std::string& path) {
  write_file(path, encode_checkpoint(model));
}
inline ToyModel load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

// --------------------------------------------------------------------- trace

struct TraceHeader {
  std::uint32_t num_layers = 0;
  std::uint32_t num_heads = 0;
  std::uint32_t n = 0;
  std::uint32_t n_image = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t vocab_size = 0;
  bool operator==(const TraceHeader&) const = default;
};

/// The subset of a forward pass that is persisted; enough to recompute
/// contribution maps offline.
struct TraceRecord {
  TraceHeader header;
  std::vector<std::vector<Matrix>> attention;                     // [l][h]
  std::optional<std::vector<std::vector<Matrix>>> attention_grads; // [l][h]
  std::vector<std::vector<double>> mlp_features;                  // [l], last position
};

inline TraceRecord make_trace_record(const ForwardTrace& trace, std::size_t vocab_size,
                                     const std::vector<std::vector<Matrix>>* grads = nullptr) {
  TraceRecord rec;
  rec.header.num_layers = static_cast<std::uint32_t>(trace.attention.size());
  rec.header.num_heads = trace.attention.empty() ? 0 : static_cast<std::uint32_t>(trace.attention[0].size());
  rec.header.n = static_cast<std::uint32_t>(trace.n);
  rec.header.n_image = static_cast<std::uint32_t>(trace.n_image);
  rec.header.hidden_dim = static_cast<std::uint32_t>(trace.embeddings.cols());
  rec.header.vocab_size = static_cast<std::uint32_t>(vocab_size);
  rec.attention = trace.attention;
  if (grads != nullptr) rec.attention_grads = *grads;
  for (std::size_t l = 0; l < trace.mlp_out.size(); ++l) rec.mlp_features.push_back(extract_mlp_feature(trace, l));
  return rec;
}

inline std::string encode_trace(const TraceRecord& rec) {
  const auto& h = rec.header;
  const auto check = [&](const Matrix& m) {
    if (m.rows() != h.n || m.cols() != h.n) fail(ErrorCode::kDimError, "tensor does not match header N");
  };
  if (rec.attention.size() != h.num_layers || rec.mlp_features.size() != h.num_layers ||
      (rec.attention_grads && rec.attention_grads->size() != h.num_layers)) {
    fail(ErrorCode::kDimError, "layer count does not match header");
  }
  ByteWriter w;
  w.bytes("VLTR");
  w.u8(kTraceVersion);
  w.u8(rec.attention_grads ? 1 : 0);
  for (std::uint32_t v : {h.num_layers, h.num_heads, h.n, h.n_image, h.hidden_dim, h.vocab_size}) w.u32(v);
  for (std::size_t l = 0; l < h.num_layers; ++l) {
    if (rec.attention[l].size() != h.num_heads) fail(ErrorCode::kDimError, "head count mismatch");
    for (const Matrix& a : rec.attention[l]) {
      check(a);
      w.f32s(a.data());
    }
    if (rec.attention_grads) {
      if ((*rec.attention_grads)[l].size() != h.num_heads) fail(ErrorCode::kDimError, "head count mismatch");
      for (const Matrix& g : (*rec.attention_grads)[l]) {
        check(g);
        w.f32s(g.data());
      }
    }
    if (rec.mlp_features[l].size() != h.hidden_dim) fail(ErrorCode::kDimError, "feature length mismatch");
    w.f32s(rec.mlp_features[l]);
  }
  return w.str();
}

inline TraceRecord decode_trace(std::string bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic("VLTR");
  if (r.u8() != kTraceVersion) fail(ErrorCode::kFormatError, "unsupported trace version");
  const std::uint8_t flags = r.u8();
  if (flags > 1) fail(ErrorCode::kFormatError, "unknown trace flags");
  TraceRecord rec;
  auto& h = rec.header;
  h.num_layers = r.u32();
  h.num_heads = r.u32();
  h.n = r.u32();
  h.n_image = r.u32();
  h.hidden_dim = r.u32();
  h.vocab_size = r.u32();
  if (h.n_image > h.n) fail(ErrorCode::kDimError, "N_i exceeds N");
  const std::uint64_t per_layer =
      sat_add(sat_mul(sat_mul(h.num_heads, sat_mul(h.n, h.n)), flags ? 2 : 1), h.hidden_dim);
  if (sat_mul(sat_mul(per_layer, h.num_layers), 4) != r.remaining()) {
    fail(ErrorCode::kDimError, "payload size does not match header");
  }
  if (flags) rec.attention_grads.emplace();
  for (std::size_t l = 0; l < h.num_layers; ++l) {
    rec.attention.emplace_back();
    for (std::size_t hd = 0; hd < h.num_heads; ++hd) {
      Matrix a(h.n, h.n);
      r.f32s(a.data());
      rec.attention.back().push_back(std::move(a));
    }
    if (flags) {
      rec.attention_grads->emplace_back();
      for (std::size_t hd = 0; hd < h.num_heads; ++hd) {
        Matrix g(h.n, h.n);
        r.f32s(g.data());
        rec.attention_grads->back().push_back(std::move(g));
      }
    }
    std::vector<double> f(h.hidden_dim);
    r.f32s(f);
    rec.mlp_features.push_back(std::move(f));
  }
  r.expect_end();
  return rec;
}

inline void export_trace(const TraceRecord& rec, const std::string& path) { write_file(path, encode_trace(rec)); }
inline TraceRecord import_trace(const std::string& path) { return decode_trace(read_file(path)); }

/// Contribution map from a stored trace; the gradients must be those of the
/// explained logit at the last position.
inline ContributionMap contribution_map_from_record(const TraceRecord& rec, std::size_t grid_rows,
                                                    std::size_t grid_cols) {
  if (!rec.attention_grads) fail(ErrorCode::kInvalidArgument, "trace carries no attention gradients");
  std::vector<Matrix> aggregated;
  for (std::size_t l = 0; l < rec.attention.size(); ++l) {
    aggregated.push_back(aggregate_heads(rec.attention[l], (*rec.attention_grads)[l]));
  }
  return extract_visual_map(rollout(aggregated), rec.header.n_image, grid_rows, grid_cols,
                            rec.header.n);
}

// -------------------------------------------------------------------- bundle

inline std::string encode_bundle(const SteeringBundle& b) {
  ByteWriter w;
  w.bytes("VLSB");
  w.u8(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(b.num_layers()));
  w.u32(static_cast<std::uint32_t>(b.dim()));
  w.f32(b.beta_default);
  for (const auto& d : b.directions) {
    if (d.size() != b.dim()) fail(ErrorCode::kDimError, "ragged bundle directions");
    w.f32s(d);
  }
  return w.str();
}

inline SteeringBundle decode_bundle(std::string bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic("VLSB");
  if (r.u8() != kBundleVersion) fail(ErrorCode::kFormatError, "unsupported bundle version");
  const std::uint32_t layers = r.u32();
  const std::uint32_t dim = r.u32();
  SteeringBundle b;
  b.beta_default = r.f32();
  if (sat_mul(sat_mul(layers, dim), 4) != r.remaining()) {
    fail(ErrorCode::kDimError, "payload size does not match header");
  }
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::vector<double> v(dim);
    r.f32s(v);
    b.directions.push_back(std::move(v));
  }
  r.expect_end();
  return b;
}

inline void save_bundle(const SteeringBundle& b, const std::string& path) { write_file(path, encode_bundle(b)); }
inline SteeringBundle load_bundle(const std::string& path) { return decode_bundle(read_file(path)); }

}  // namespace valse
