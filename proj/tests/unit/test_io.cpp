#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "layerscope/csv.hpp"
#include "layerscope/io.hpp"
#include "test_util.hpp"

namespace layerscope {
namespace {

using testing::error_of;
using testing::slurp;
using testing::TempDir;

TEST(Lam, IdentityF32HasFixedLayoutAndRoundTrips) {
  TempDir dir;
  const auto path = dir / "eye.lam";
  write_lam(path, Matrix::Identity(2, 2), DType::f32);
  const std::string bytes = slurp(path);
  ASSERT_EQ(bytes.size(), 24u + 16u);
  EXPECT_EQ(bytes.substr(0, 4), "LAM1");
  EXPECT_EQ(bytes[4], '\x01');
  EXPECT_EQ(bytes[5], '\x00');
  EXPECT_EQ(bytes[6], '\x00');
  EXPECT_EQ(bytes[7], '\x00');
  std::uint64_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  EXPECT_EQ(rows, 2u);
  EXPECT_EQ(cols, 2u);
  float v[4];
  std::memcpy(v, bytes.data() + 24, 16);
  EXPECT_EQ(v[0], 1.0f);
  EXPECT_EQ(v[1], 0.0f);
  EXPECT_EQ(v[3], 1.0f);
  EXPECT_EQ(read_lam(path).values, Matrix::Identity(2, 2));
}

TEST(Lam, RowMajorPayload) {
  TempDir dir;
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  write_lam(dir / "m.lam", m, DType::f64);
  const std::string bytes = slurp(dir / "m.lam");
  double second = 0.0;
  std::memcpy(&second, bytes.data() + 24 + 8, 8);
  EXPECT_EQ(second, 2.0);
}

TEST(Lam, NonFiniteIsRefusedWithoutCreatingFile) {
  TempDir dir;
  Matrix m = Matrix::Ones(3, 3);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(error_of([&] { write_lam(dir / "bad.lam", m, DType::f64); }), "core-io:non-finite");
  EXPECT_FALSE(std::filesystem::exists(dir / "bad.lam"));
  Matrix big = Matrix::Ones(2, 2) * 1e300;
  EXPECT_EQ(error_of([&] { write_lam(dir / "big.lam", big, DType::f32); }), "core-io:non-finite");
}

TEST(Lam, RoundTripPropertyOverShapesAndDtypes) {
  TempDir dir;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 40);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(dim(rng) + 1, dim(rng));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    const DType dtype = trial % 2 ? DType::f32 : DType::f64;
    const auto path = dir / ("m" + std::to_string(trial) + ".lam");
    write_lam(path, m, dtype);
    const LamFile back = read_lam(path);
    const Matrix expect = dtype == DType::f32 ? Matrix(m.cast<float>().cast<double>()) : m;
    EXPECT_EQ(back.values, expect);
    EXPECT_EQ(back.dtype, dtype);
    write_lam(dir / "again.lam", back.values, dtype);
    EXPECT_EQ(slurp(path), slurp(dir / "again.lam"));
  }
}

TEST(Lam, CorruptFilesGiveDistinctErrors) {
  TempDir dir;
  write_lam(dir / "ok.lam", Matrix::Ones(4, 4), DType::f64);
  std::string bytes = slurp(dir / "ok.lam");
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  std::string magic = bytes;
  magic[2] = 'X';
  EXPECT_EQ(error_of([&] { read_lam(write("magic.lam", magic)); }), "core-io:bad-magic");
  std::string version = bytes;
  version[4] = '\x02';
  EXPECT_EQ(error_of([&] { read_lam(write("version.lam", version)); }), "core-io:unsupported-version");
  std::string dtype = bytes;
  dtype[5] = '\x07';
  EXPECT_EQ(error_of([&] { read_lam(write("dtype.lam", dtype)); }), "core-io:unsupported-dtype");
  EXPECT_EQ(error_of([&] { read_lam(write("short.lam", bytes.substr(0, bytes.size() - 8))); }), "core-io:truncated");
  std::string nan = bytes;
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + 24, &q, 8);
  EXPECT_EQ(error_of([&] { read_lam(write("nan.lam", nan)); }), "core-io:non-finite");
  EXPECT_EQ(error_of([&] { read_lam(dir / "missing.lam"); }), "core-io:not-found");
}

TEST(Lam, LargeF32FileSize) {
  TempDir dir;
  Matrix m = Matrix::Random(10000, 4096);
  write_lam(dir / "big.lam", m, DType::f32);
  EXPECT_EQ(std::filesystem::file_size(dir / "big.lam"), 24u + 10000u * 4096u * 4u);
  EXPECT_EQ(read_lam(dir / "big.lam").values, Matrix(m.cast<float>().cast<double>()));
}

TEST(Manifest, ActivationAndResponseRoundTrip) {
  TempDir dir;
  Manifest meta;
  meta.subject = "S1";
  meta.modality = Modality::fmri;
  meta.model = "opt-125m";
  meta.layer = 7;
  meta.extra["note"] = "x";
  write_matrix(ActivationMatrix(Matrix::Random(5, 3), meta), dir / "a.lam");
  const ActivationMatrix a = read_activation(dir / "a.lam");
  EXPECT_EQ(a.meta().model, "opt-125m");
  EXPECT_EQ(a.meta().layer, 7);
  EXPECT_EQ(a.meta().extra.at("note"), "x");

  ResponseSeries r(Matrix::Random(10, 2), Sampling::from_period(2.0), {"v1", "v2"}, meta);
  write_matrix(r, dir / "r.lam");
  const ResponseSeries back = read_response(dir / "r.lam");
  EXPECT_TRUE(back.sampling().has_period());
  EXPECT_DOUBLE_EQ(back.sampling().period(), 2.0);
  EXPECT_EQ(back.channel_ids(), (std::vector<std::string>{"v1", "v2"}));
  EXPECT_EQ(back.values(), r.values());
}

TEST(Manifest, InvalidModalityIsRejected) {
  EXPECT_EQ(error_of([] { Manifest::from_json(Json{{"modality", "meg"}}); }), "core-io:invalid-manifest");
  EXPECT_EQ(error_of([] { Manifest::from_json(Json{{"layer", -1}}); }), "core-io:invalid-manifest");
}

TEST(Types, Invariants) {
  EXPECT_EQ(error_of([] { ActivationMatrix(Matrix::Ones(1, 3)); }), "core-io:invalid-shape");
  EXPECT_EQ(error_of([] { Sampling::from_rate(0.0); }), "core-io:invalid-sampling");
  EXPECT_EQ(error_of([] { Timeline({{"a", 1.0, 1.2}, {"b", 0.5, 0.7}}); }), "core-io:unordered-onsets");
  EXPECT_EQ(error_of([] { Timeline({{"a", 1.0, 0.9}}); }), "core-io:invalid-event");
}

TEST(Timeline, ParsesTwoRows) {
  TempDir dir;
  std::ofstream(dir / "t.tsv") << "label\tonset\toffset\nthe\t0.0\t0.3\ncat\t0.3\t0.6\n";
  const Timeline t = read_timeline(dir / "t.tsv");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.events()[1].label, "cat");
  EXPECT_DOUBLE_EQ(t.events()[1].offset, 0.6);
}

TEST(Timeline, DecreasingOnsetsAndMalformedRows) {
  TempDir dir;
  std::ofstream(dir / "dec.tsv") << "label\tonset\toffset\na\t1.0\t1.1\nb\t0.5\t0.6\n";
  EXPECT_EQ(error_of([&] { read_timeline(dir / "dec.tsv"); }), "core-io:unordered-onsets");
  std::ofstream(dir / "bad.tsv") << "label\tonset\toffset\na\tzero\t1.1\n";
  EXPECT_EQ(error_of([&] { read_timeline(dir / "bad.tsv"); }), "core-io:malformed-row");
  std::ofstream(dir / "hdr.tsv") << "word\tstart\tend\n";
  EXPECT_EQ(error_of([&] { read_timeline(dir / "hdr.tsv"); }), "core-io:malformed-row");
}

TEST(Timeline, LineCountOracle) {
  TempDir dir;
  {
    std::ofstream out(dir / "long.tsv");
    out << "label\tonset\toffset\n";
    for (int i = 0; i < 5000; ++i) out << "w" << i << '\t' << i * 0.25 << '\t' << i * 0.25 + 0.2 << '\n';
  }
  std::ifstream in(dir / "long.tsv");
  const auto lines = std::count(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), '\n');
  EXPECT_EQ(read_timeline(dir / "long.tsv").size(), static_cast<std::size_t>(lines - 1));
  write_timeline(read_timeline(dir / "long.tsv"), dir / "copy.tsv");
  EXPECT_EQ(read_timeline(dir / "copy.tsv").onsets(), read_timeline(dir / "long.tsv").onsets());
}

TEST(Csv, NumbersRoundTripShortest) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  const double x = 0.1234567890123456789;
  EXPECT_EQ(parse_double(format_number(x)), x);
  TempDir dir;
  write_csv(dir / "t.csv", CsvTable{{"a", "b"}, {{"1", "x"}, {"2.5", "y"}}});
  const CsvTable t = read_csv(dir / "t.csv");
  EXPECT_EQ(t.numeric_column("a"), (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(error_of([&] { t.column("c"); }), "core-io:missing-column");
}

}  // namespace
}  // namespace layerscope
