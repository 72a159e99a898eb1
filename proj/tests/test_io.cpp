#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <sstream>

#include "compreg/io.hpp"
#include "support.hpp"

using namespace compreg;

namespace {

Dataset parse(const std::string& text, const std::string& roles) {
  std::istringstream in(text);
  return parse_csv(in, RoleSpec::parse(roles));
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Roles, ParseRangesAndKinds) {
  const RoleSpec r = RoleSpec::parse("a..c=composition, d=covariate:log ,e=factor");
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_EQ(r.entries[0].first, "a");
  EXPECT_EQ(r.entries[0].last, "c");
  EXPECT_EQ(r.entries[1].role, Role::log_covariate);
  EXPECT_EQ(r.entries[2].role, Role::factor);
  EXPECT_EQ(code_of([] { RoleSpec::parse("a"); }), Errc::InvalidArgument);
  EXPECT_THROW(RoleSpec::parse("a=colour"), Error);
}

TEST(Csv, Glass) {
  const Dataset ds = testing_support::load_glass();
  EXPECT_EQ(ds.n, 214);
  EXPECT_EQ(ds.require_composition().D(), 8);
  EXPECT_EQ(ds.require_composition().labels().front(), "Na");
  EXPECT_EQ(ds.response_name, "RI");
  ASSERT_TRUE(ds.factor);
  EXPECT_EQ(std::count(ds.factor->begin(), ds.factor->end(), "Head"), 29);
  EXPECT_NEAR(ds.require_composition().matrix().row(0).sum(), 1.0, 1e-12);
}

TEST(Csv, PercentagesAndProportionsAgree) {
  const Dataset a = parse("p,q,r,y\n70,20,10,1\n30,30,40,2\n", "p..r=composition,y=response");
  const Dataset b = parse("p,q,r,y\n0.7,0.2,0.1,1\n0.3,0.3,0.4,2\n", "p..r=composition,y=response");
  EXPECT_LT((a.require_composition().matrix() - b.require_composition().matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Csv, QuotedFieldsAndLogCovariates) {
  const Dataset ds = parse("\"a\",b,depth,site\n1,3,\"10\",\"x, y\"\n2,2,100,z\n", "a..b=composition,depth=covariate:log,site=factor");
  EXPECT_NEAR(ds.covariates(0, 0), std::log(10.0), 1e-15);
  EXPECT_EQ(ds.covariate_names[0], "log(depth)");
  EXPECT_EQ((*ds.factor)[0], "x, y");
  EXPECT_EQ(ds.design().p(), 1);
}

TEST(Csv, Errors) {
  EXPECT_EQ(code_of([] { parse("a,b,y\n", "a..b=composition"); }), Errc::EmptyData);
  EXPECT_EQ(code_of([] { parse("", "a..b=composition"); }), Errc::EmptyData);
  EXPECT_EQ(code_of([] { parse("a,b\n1,n/a\n", "a..b=composition"); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { parse("a,b\n1,2,3\n", "a..b=composition"); }), Errc::ParseError);
  EXPECT_EQ(code_of([] { parse("a,b\n1,2\n", "a..c=composition"); }), Errc::MissingColumn);
  EXPECT_EQ(code_of([] { parse("a,b\n1,-2\n", "a..b=composition"); }), Errc::NegativePart);
  EXPECT_EQ(code_of([] { parse("a,b\n0,0\n", "a..b=composition"); }), Errc::AllZeroVector);
  EXPECT_EQ(code_of([] { parse("a,b,d\n1,2,0\n", "a..b=composition,d=covariate:log"); }), Errc::ParseError);
  try {
    parse("a,b\n1,2\n3,oops\n", "a..b=composition");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
}

TEST(Format, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "NaN");
  EXPECT_EQ(CsvWriter::quote("a,b"), "\"a,b\"");
}

TEST(Json, PcrModelRoundTripPredictsIdentically) {
  const Dataset ds = testing_support::load_glass();
  const CompositionBatch& x = ds.require_composition();
  const PcrModel m = pcr_fit(ds.require_response(), x, AlphaParam(0.5), 4, ds.factor_ptr());
  const PcrModel back = pcr_model_from_json(json::parse(to_json(m).dump()));
  const Vector a = pcr_predict(m, x, ds.factor_ptr());
  const Vector b = pcr_predict(back, x, ds.factor_ptr());
  EXPECT_EQ(a, b);
  EXPECT_EQ(model_kind(to_json(m)), "pcr");
}

TEST(Json, AlphaModelRoundTripPredictsIdentically) {
  const Dataset ds = parse("a,b,c,t\n1,2,3,0.1\n2,2,1,0.5\n4,1,1,0.9\n1,1,5,0.2\n3,2,2,0.4\n2,5,1,0.7\n",
                           "a..c=composition,t=covariate");
  const AlphaRegModel m = fit_alpha_regression(ds.require_composition(), ds.design(), AlphaParam(0.5));
  const AlphaRegModel back = alpha_model_from_json(json::parse(to_json(m).dump()));
  EXPECT_EQ(predict(m, ds.design()).matrix(), predict(back, ds.design()).matrix());
  EXPECT_EQ(back.component_labels, m.component_labels);
  EXPECT_EQ(code_of([] { alpha_model_from_json(json{{"kind", "pcr"}}); }), Errc::ParseError);
}

TEST(Files, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "compreg_io_test";
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "x.csv", "a\n1\n");
  write_file_atomic(dir / "x.csv", "a\n2\n");
  std::ifstream in(dir / "x.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "a\n2\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "x.csv.tmp"));
  std::filesystem::remove_all(dir);
}
