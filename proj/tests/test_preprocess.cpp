#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "scgnet/preprocess.hpp"
#include "scgnet/synthetic.hpp"
#include "support.hpp"

using namespace scgnet;
using namespace scgnet::prep;

namespace {

const std::string kFixture = std::string(SCGNET_TEST_DATA) + "/kdd_fixture_train.txt";
const std::string kFixtureTest = std::string(SCGNET_TEST_DATA) + "/kdd_fixture_test.txt";

data::RawRecord record(const std::string& protocol, double duration) {
  std::string line = synth::kKddTrainLine1;
  line.replace(line.find("tcp"), 3, protocol);
  line.replace(0, 1, std::to_string(duration));
  std::istringstream in(line);
  return data::parse_records(in).at(0);
}

const data::AttackTaxonomy& taxonomy() {
  static const auto t = data::AttackTaxonomy::load(SCGNET_TAXONOMY);
  return t;
}

const std::vector<data::LabeledExample>& fixture() {
  static const auto ex = data::load_labeled(kFixture, &taxonomy()).examples;
  return ex;
}

}  // namespace

TEST(OneHot, SingleRecord) {
  const std::vector<data::RawRecord> r{record("tcp", 0)};
  const auto spec = fit_one_hot(r, {1});
  EXPECT_EQ(spec.categories[0], std::vector<std::string>{"tcp"});
  EXPECT_EQ(spec.width(), 1u);
}

TEST(OneHot, SortedCategories) {
  const std::vector<data::RawRecord> r{record("udp", 0), record("tcp", 0), record("icmp", 0), record("tcp", 1)};
  const auto spec = fit_one_hot(r, {1});
  EXPECT_EQ(spec.categories[0], (std::vector<std::string>{"icmp", "tcp", "udp"}));
  EXPECT_EQ(spec.width(), 3u);
  std::vector<float> block(3);
  EXPECT_EQ(encode_one_hot(spec, record("icmp", 0), block), 0u);
  EXPECT_EQ(block, (std::vector<float>{1, 0, 0}));
  std::vector<float> again(3);
  encode_one_hot(spec, record("icmp", 7), again);
  EXPECT_EQ(block, again);
  std::vector<std::size_t> per_col(1);
  EXPECT_EQ(encode_one_hot(spec, record("sctp", 0), block, &per_col), 1u);
  EXPECT_EQ(block, (std::vector<float>{0, 0, 0}));
  EXPECT_EQ(per_col[0], 1u);
}

TEST(OneHot, FixtureWidth84And122) {
  const auto p = fit_pipeline(fixture());
  EXPECT_EQ(p.encoder.categories[0].size(), 3u);
  EXPECT_EQ(p.encoder.categories[1].size(), 70u);
  EXPECT_EQ(p.encoder.categories[2].size(), 11u);
  EXPECT_EQ(p.encoder.width(), 84u);
  EXPECT_EQ(p.width(), 122u);
  EXPECT_EQ(feature_names(p).size(), 122u);
}

TEST(OneHot, EmptyTrainingSet) {
  const std::vector<data::RawRecord> none;
  EXPECT_THROW(fit_one_hot(none, {1}), Error);
  EXPECT_THROW(fit_standardizer(none, {0}), Error);
}

TEST(Standardizer, TwoPointAndConstant) {
  const std::vector<data::RawRecord> r{record("tcp", 2), record("tcp", 4)};
  const auto s = fit_standardizer(r, {0});
  EXPECT_EQ(s.mean[0], 3.0);
  EXPECT_EQ(s.stddev[0], 1.0);
  const std::vector<data::RawRecord> c{record("tcp", 5), record("tcp", 5), record("tcp", 5)};
  const auto k = fit_standardizer(c, {0});
  EXPECT_EQ(k.mean[0], 5.0);
  EXPECT_EQ(k.stddev[0], 0.0);
  EXPECT_EQ(standardize(k, 123.0, 0), 0.0);
}

TEST(Standardizer, Substitution) {
  Standardizer s{{0}, {5.0}, {2.0}};
  EXPECT_EQ(standardize(s, 9.0, 0), 2.0);
  EXPECT_EQ(standardize(s, 5.0, 0), 0.0);
  EXPECT_EQ(unstandardize(s, 2.0, 0), 9.0);
}

TEST(Standardizer, DurationMatchesStreamingOracle) {
  const auto& ex = fixture();
  const auto s = fit_standardizer(ex, {0});
  // Welford's streaming update, independent of the two-pass fit.
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (const auto& e : ex) {
    const double x = e.raw.values[0];
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(n));
  ASSERT_GT(sd, 0.0);
  EXPECT_LE(std::abs(s.mean[0] - mean), 1e-4 * std::abs(mean));
  EXPECT_LE(std::abs(s.stddev[0] - sd), 1e-4 * sd);
}

TEST(Transform, StandardizedMomentsOnFixture) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto x = transform(p, ex);
  const std::size_t n_num = p.standardizer.columns.size();
  ASSERT_EQ(n_num, 38u);
  std::size_t checked = 0;
  for (std::size_t j = 0; j < n_num; ++j) {
    if (p.standardizer.stddev[j] == 0.0) {
      for (std::size_t i = 0; i < x.rows; ++i) EXPECT_EQ(x.row(i)[j], 0.0f);
      continue;
    }
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) sum += x.row(i)[j];
    const double mean = sum / static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) sq += (x.row(i)[j] - mean) * (x.row(i)[j] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(x.rows));
    EXPECT_LT(std::abs(mean), 1e-4) << p.schema.column_name(p.standardizer.columns[j]);
    EXPECT_LT(std::abs(sd - 1.0), 1e-4) << p.schema.column_name(p.standardizer.columns[j]);
    ++checked;
  }
  EXPECT_GT(checked, 30u);
}

TEST(Transform, LayoutAndOneHotBlocks) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto x = transform(p, ex);
  for (std::size_t i = 0; i < x.rows; ++i) {
    std::size_t offset = 38;
    for (const auto& cats : p.encoder.categories) {
      float sum = 0.0f;
      for (std::size_t c = 0; c < cats.size(); ++c) {
        const float v = x.row(i)[offset + c];
        EXPECT_TRUE(v == 0.0f || v == 1.0f);
        sum += v;
      }
      EXPECT_EQ(sum, 1.0f);
      offset += cats.size();
    }
  }
  // Line 1: duration is the first numeric column, tcp/ftp_data/SF hot.
  const auto names = feature_names(p);
  EXPECT_EQ(names[0], "duration");
  const auto row0 = x.row(0);
  for (std::size_t j = 38; j < 122; ++j) {
    const bool hot = names[j] == "protocol_type=tcp" || names[j] == "service=ftp_data" || names[j] == "flag=SF";
    EXPECT_EQ(row0[j], hot ? 1.0f : 0.0f) << names[j];
  }
}

TEST(Transform, EmptyAndPure) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const std::vector<data::LabeledExample> none;
  EXPECT_EQ(transform(p, none).rows, 0u);
  EXPECT_EQ(transform(p, ex), transform(p, ex));
}

TEST(Transform, RoundTripRecoversNumericValues) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto& s = p.standardizer;
  for (const auto& e : ex) {
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
      if (s.stddev[j] == 0.0) continue;
      const double y = e.raw.values[s.columns[j]];
      const double back = unstandardize(s, standardize(s, y, j), j);
      EXPECT_LE(std::abs(back - y), 1e-5 * std::abs(y) + 1e-9) << p.schema.column_name(s.columns[j]) << " y=" << y;
    }
  }
}

TEST(Transform, Float32FeaturesWithinStorageBound) {
  // Feature vectors hold Y' as float32: the recovered value may be off by
  // up to tau * half an ulp of Y', which dominates 1e-5 |Y| when |Y| << tau.
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto x = transform(p, ex);
  const auto& s = p.standardizer;
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
      if (s.stddev[j] == 0.0) continue;
      const double y = ex[i].raw.values[s.columns[j]];
      const double z = x.row(i)[j];
      const double bound = 1e-5 * std::abs(y) + s.stddev[j] * std::abs(z) * 0x1p-24 * 1.01 + 1e-9;
      EXPECT_LE(std::abs(unstandardize(s, z, j) - y), bound) << i << "," << j;
    }
  }
}

TEST(Transform, TestSetUsesTrainingStateAndCountsUnknowns) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto before = state_hash(p);
  auto test = data::load_labeled(kFixtureTest, &taxonomy()).examples;
  test[0].raw.fields[2] = "never_seen_service";
  TransformReport rep;
  const auto x = transform(p, test, &rep);
  EXPECT_EQ(state_hash(p), before);
  EXPECT_EQ(x.cols, 122u);
  EXPECT_EQ(rep.width, 122u);
  EXPECT_EQ(rep.rows, test.size());
  EXPECT_EQ(rep.unknown_per_column, (std::vector<std::size_t>{0, 1, 0}));
}

TEST(Transform, UnitRangeViewIsNonNegative) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto test = data::load_labeled(kFixtureTest, &taxonomy()).examples;
  const auto x = transform(p, test, nullptr, NumericView::UnitRange);
  for (float v : x.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(PipelineFile, RoundTripAndCorruption) {
  const auto p = fit_pipeline(fixture());
  const auto path = testsupport::temp_path("prep/pipeline.scgp");
  save_pipeline(path, p);
  const auto q = load_pipeline(path);
  EXPECT_EQ(q, p);
  EXPECT_EQ(encode_pipeline(q), encode_pipeline(p));
  auto bytes = encode_pipeline(p);
  bytes[bytes.size() - 9] ^= 1;
  try {
    decode_pipeline(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChecksumMismatch);
  }
}

TEST(Encode, TaskLabels) {
  const auto& ex = fixture();
  const auto p = fit_pipeline(ex);
  const auto bin = encode(p, ex, false);
  const auto multi = encode(p, ex, true);
  EXPECT_EQ(bin.n_classes, 2);
  EXPECT_EQ(multi.n_classes, 5);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_EQ(bin.y[i], multi.y[i] == 0 ? 0 : 1);
  }
}
