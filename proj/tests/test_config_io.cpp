#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "nstrip/io.hpp"

using namespace nstrip;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("nstrip_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kMinimal = R"({"schema": 1, "domain": {"family": "flat"}, "simulation": {"start": [0.0, 0.5]}})";

}  // namespace

TEST(Philox, KnownAnswers) {
  using P = Philox4x32;
  EXPECT_EQ(P::bijection({0, 0, 0, 0}, {0, 0}), (P::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(P::bijection({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (P::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(P::bijection({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (P::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsIndependentAndRepeatable) {
  RandomStream a(7, 0), b(7, 0), c(7, 1), d(8, 0);
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
    EXPECT_NE(x, d.next_u64());
  }
  RandomStream u(1, 2);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double z = u.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Config, MinimalDefaults) {
  const RunConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.schema, 1);
  EXPECT_EQ(c.domain.family, "flat");
  EXPECT_EQ(c.drift.kind, "zero");
  EXPECT_FALSE(c.function.has_value());
  EXPECT_EQ(c.start.size(), 2u);
}

TEST(Config, RoundTripShippedConfigs) {
  for (const char* name : {"flat_benchmark.json", "exp_strip.json", "radial_drift.json"}) {
    const RunConfig c = load_config(std::string(NSTRIP_CONFIG_DIR) + "/" + name);
    const Json j = config_to_json(c);
    const RunConfig back = config_from_json(j);
    EXPECT_EQ(config_to_json(back).dump(), j.dump()) << name;
    EXPECT_NO_THROW(make_domain(c.domain)) << name;
  }
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": 2, "domain": {"family": "flat"}, "simulation": {"start": [0, 0.5]}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": 1, "domain": {"family": "flat", "colour": 1}, "simulation": {"start": [0, 0.5]}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": 1, "domain": {"family": "flat"}, "simulation": {"start": [0, 0.5]},
                                "harness": {"t_grid": []}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": 1, "domain": {"family": "flat"}, "simulation": {"start": [0, 0.5], "dt": "x"}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"schema": 1, "domain": {"family": "flat"}, "simulation": {"start": [0, 0.5]},
                                "estimator": {"kind": "magic"}})"),
               ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, BuildersProduceWorkingObjects) {
  const RunConfig c = load_config(std::string(NSTRIP_CONFIG_DIR) + "/exp_strip.json");
  const StripDomain dom = make_domain(c.domain);
  const DriftPtr z = make_drift(c.drift, dom.dim());
  EXPECT_TRUE(dom.contains(to_vec(c.start)));
  EXPECT_TRUE(z->is_zero());
  for (const auto& f : c.harness.functions) {
    const TestFunction tf = make_function(f, dom);
    EXPECT_TRUE(std::isfinite(tf.value(to_vec(c.start))));
  }
}

TEST(Csv, FormatAndQuoting) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-1.5e-300), "-1.5e-300");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  CsvWriter w({"a", "b", "c"});
  w.add({"x,y", 2.5, 3});
  w.add({"say \"hi\"", 0.0, std::size_t{7}});
  EXPECT_EQ(w.str(), "a,b,c\n\"x,y\",2.5,3\n\"say \"\"hi\"\"\",0,7\n");
}

TEST(Csv, PathLedgerColumns) {
  SimConfig sim;
  sim.t = 0.01;
  const auto rec = simulate(fixtures::flat_strip(), *zero_drift(2), sim, fixtures::v2(0, 0.5));
  const std::string csv = path_csv(rec);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,time,x,y,dl1,dl2,face");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rec.states.size() + 1);
}

TEST(Files, AtomicWriteReplaces) {
  const fs::path d = scratch_dir("atomic");
  const fs::path p = d / "sub" / "out.csv";
  write_atomic(p, "first\n");
  EXPECT_EQ(read_file(p), "first\n");
  write_atomic(p, "second\n");
  EXPECT_EQ(read_file(p), "second\n");
  EXPECT_FALSE(fs::exists(d / "sub" / "out.csv.tmp"));
  fs::remove_all(d);
}

TEST(Files, MetaBlockHoldsTimestamp) {
  const Json j = with_meta(Json{{"value", 1}}, "gradient");
  EXPECT_EQ(j.begin().key(), "meta");
  EXPECT_EQ(j["meta"]["command"], "gradient");
  EXPECT_EQ(j["meta"]["timestamp"].get<std::string>().size(), 20u);
  EXPECT_EQ(j["value"], 1);
  EXPECT_EQ(num_json(std::numeric_limits<double>::infinity()), "inf");
}
