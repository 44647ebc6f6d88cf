#include <unistd.h>

#include <filesystem>

#include "test_support.hpp"
#include "valse/io.hpp"

using namespace valse;
using namespace valse::testing;

namespace {

double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

TraceRecord sample_record(bool with_grads) {
  const ModelConfig c = small_config(2, 2, 8, 2);
  const ToyModel m = build_model(c);
  const TokenSequence seq = random_sequence(c, 1, 2, 3);
  const ForwardTrace t = forward(m, seq, random_image(c, 3));
  if (!with_grads) return make_trace_record(t, c.vocab_size);
  const auto g = backward_token_logit(m, seq, random_image(c, 3), t, t.n - 1, 4);
  return make_trace_record(t, c.vocab_size, &g);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("valse_test_" + std::to_string(::getpid()) + "_" + name);
}

// Decoding any corruption must end in a library error, never a crash.
template <typename Decode>
void expect_typed_failures(const std::string& good, Decode decode, std::size_t header_len) {
  for (std::size_t len = 0; len < good.size(); len += (len < header_len + 8 ? 1 : 97)) {
    try {
      decode(good.substr(0, len));
      ADD_FAILURE() << "truncated to " << len << " decoded";
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == ErrorCode::kFormatError || e.code() == ErrorCode::kDimError) << e.what();
    }
  }
  std::mt19937_64 rng(1);
  for (std::size_t pos = 0; pos < header_len; ++pos) {
    for (int trial = 0; trial < 8; ++trial) {
      std::string bad = good;
      bad[pos] = static_cast<char>(bad[pos] ^ static_cast<char>(1 + rng() % 255));
      try {
        decode(bad);
      } catch (const Error&) {
      }
    }
  }
  try {
    decode(good + "x");
    ADD_FAILURE() << "trailing byte accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimError);
  }
}

}  // namespace

TEST(TraceIo, RoundtripIsBitExact) {
  for (bool grads : {false, true}) {
    const TraceRecord rec = sample_record(grads);
    const std::string bytes = encode_trace(rec);
    const TraceRecord back = decode_trace(bytes);
    EXPECT_EQ(encode_trace(back), bytes);
    EXPECT_EQ(back.header, rec.header);
    EXPECT_EQ(back.attention_grads.has_value(), grads);
    for (std::size_t l = 0; l < rec.attention.size(); ++l) {
      for (std::size_t h = 0; h < rec.attention[l].size(); ++h)
        for (std::size_t i = 0; i < rec.attention[l][h].size(); ++i) {
          EXPECT_EQ(back.attention[l][h].data()[i], as_f32(rec.attention[l][h].data()[i]));
          if (grads) {
            EXPECT_EQ((*back.attention_grads)[l][h].data()[i], as_f32((*rec.attention_grads)[l][h].data()[i]));
          }
        }
      for (std::size_t j = 0; j < rec.mlp_features[l].size(); ++j)
        EXPECT_EQ(back.mlp_features[l][j], as_f32(rec.mlp_features[l][j]));
    }
  }
}

TEST(TraceIo, FileRoundtrip) {
  const auto path = temp_file("trace.vltr");
  const TraceRecord rec = sample_record(true);
  export_trace(rec, path.string());
  EXPECT_EQ(encode_trace(import_trace(path.string())), encode_trace(rec));
  std::filesystem::remove(path);
}

TEST(TraceIo, LittleEndianLayout) {
  const std::string bytes = encode_trace(sample_record(false));
  EXPECT_EQ(bytes.substr(0, 4), "VLTR");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kTraceVersion);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2);  // L, low byte first
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0);
}

TEST(TraceIo, CorruptionYieldsTypedErrors) {
  const std::string good = encode_trace(sample_record(true));
  EXPECT_VALSE_ERROR(decode_trace("XLTR" + good.substr(4)), ErrorCode::kFormatError);
  std::string v = good;
  v[4] = 9;
  EXPECT_VALSE_ERROR(decode_trace(v), ErrorCode::kFormatError);
  std::string f = good;
  f[5] = 4;
  EXPECT_VALSE_ERROR(decode_trace(f), ErrorCode::kFormatError);
  EXPECT_VALSE_ERROR(decode_trace(good.substr(0, good.size() - 3)), ErrorCode::kDimError);
  std::string huge = good;
  for (int i = 0; i < 4; ++i) huge[14 + i] = static_cast<char>(0xff);  // N
  EXPECT_VALSE_ERROR(decode_trace(huge), ErrorCode::kDimError);
  expect_typed_failures(good, [](std::string b) { return decode_trace(std::move(b)); }, 30);
}

TEST(TraceIo, MapFromStoredTraceMatchesLive) {
  const ModelConfig c = small_config(2, 2, 8, 2);
  const ToyModel m = build_model(c);
  const PatchGrid img = random_image(c, 3);
  const TokenSequence seq = random_sequence(c, 1, 2, 3);
  const std::size_t pos = seq.size() - 1;
  const TokenSequence prefix = seq.prefix(pos);
  const ForwardTrace t = forward(m, prefix, img);
  const auto g = backward_token_logit(m, prefix, img, t, pos - 1, seq.ids[pos]);
  const TraceRecord rec = decode_trace(encode_trace(make_trace_record(t, c.vocab_size, &g)));
  const ContributionMap offline = contribution_map_from_record(rec, 2, 2);
  const ContributionMap live = contribution_map_for_token(m, img, seq, pos);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(offline.values[i], live.values[i], 1e-5 * (1 + live.values[i]));
  EXPECT_VALSE_ERROR(contribution_map_from_record(sample_record(false), 2, 2), ErrorCode::kInvalidArgument);
}

TEST(TraceIo, EncodeRejectsInconsistentRecords) {
  TraceRecord rec = sample_record(false);
  rec.header.n += 1;
  EXPECT_VALSE_ERROR(encode_trace(rec), ErrorCode::kDimError);
}

TEST(BundleIo, RoundtripIsBitExact) {
  SteeringBundle b = fit_steering_from_differences({random_matrix(4, 6, 1), random_matrix(4, 6, 2)});
  b.beta_default = 0.3;
  const std::string bytes = encode_bundle(b);
  ASSERT_EQ(bytes.size(), 4u + 1 + 4 + 4 + 4 + 2 * 6 * 4);
  const SteeringBundle back = decode_bundle(bytes);
  EXPECT_EQ(encode_bundle(back), bytes);
  EXPECT_EQ(back.beta_default, as_f32(0.3));
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(back.directions[l][j], as_f32(b.directions[l][j]));
  const auto path = temp_file("bundle.vlsb");
  save_bundle(b, path.string());
  EXPECT_EQ(encode_bundle(load_bundle(path.string())), bytes);
  std::filesystem::remove(path);
}

TEST(BundleIo, CorruptionYieldsTypedErrors) {
  const std::string good = encode_bundle(fit_steering_from_differences({random_matrix(3, 5, 1)}));
  EXPECT_VALSE_ERROR(decode_bundle("VLSX" + good.substr(4)), ErrorCode::kFormatError);
  std::string v = good;
  v[4] = 2;
  EXPECT_VALSE_ERROR(decode_bundle(v), ErrorCode::kFormatError);
  expect_typed_failures(good, [](std::string b) { return decode_bundle(std::move(b)); }, 17);
}

TEST(CheckpointIo, RoundtripAndErrors) {
  const ModelConfig c = small_config(2, 2, 8, 2, 5);
  const ToyModel m = build_model(c);
  const std::string bytes = encode_checkpoint(m);
  const ToyModel back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config(), c);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_VALSE_ERROR(decode_checkpoint("TVLX" + bytes.substr(4)), ErrorCode::kFormatError);
  std::string act = bytes;
  act[33] = 7;
  EXPECT_VALSE_ERROR(decode_checkpoint(act), ErrorCode::kFormatError);
  std::string div = bytes;
  div[13] = 3;  // D = 3 with H = 2
  EXPECT_VALSE_ERROR(decode_checkpoint(div), ErrorCode::kDimError);
  expect_typed_failures(bytes, [](std::string b) { return decode_checkpoint(std::move(b)); }, 42);
  EXPECT_VALSE_ERROR(load_checkpoint("/nonexistent/dir/model.tvlm"), ErrorCode::kIoError);
  EXPECT_VALSE_ERROR(save_checkpoint(m, "/nonexistent/dir/model.tvlm"), ErrorCode::kIoError);
}
