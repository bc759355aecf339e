#include "cli.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cpcheck;
using namespace cpcheck::cli;

namespace {

const std::string kData = CPCHECK_DATA_DIR;
struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_with(RunConfig cfg) {
  std::ostringstream out, err;
  const int code = run(cfg, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(ParseMatrix, PlainTextFile) {
  const SymMatrix a = parse_matrix(kData + "/dnn_5x5.txt");
  ASSERT_EQ(a.n(), 5);
  EXPECT_EQ(a(4, 4), 6.0);
  EXPECT_EQ(a.matrix(), instances::not_cp_5x5().matrix());
}

TEST(ParseMatrix, JsonFile) {
  EXPECT_EQ(parse_matrix(kData + "/interior_6x6.json").matrix(), instances::interior_6x6().matrix());
}

TEST(ParseMatrix, OneByOne) {
  const SymMatrix a = parse_matrix_string("1 4");
  ASSERT_EQ(a.n(), 1);
  EXPECT_EQ(a(0, 0), 4.0);
}

TEST(ParseMatrix, Errors) {
  EXPECT_THROW(parse_matrix(kData + "/asymmetric_2x2.txt"), InputError);
  EXPECT_THROW(parse_matrix_string("2 1 0 0"), InputError);
  EXPECT_THROW(parse_matrix_string("2 1 0 0 1 5"), InputError);
  EXPECT_THROW(parse_matrix_string("x"), InputError);
  EXPECT_THROW(parse_matrix_string("{\"n\": 2, \"rows\": [[1, 0]]}"), InputError);
  EXPECT_THROW(parse_matrix_string("{\"rows\": [[1, 0], [0]]}"), InputError);
  EXPECT_THROW(parse_matrix_string("{\"rows\": "), InputError);
  EXPECT_THROW(parse_matrix(kData + "/missing.txt"), InputError);
}

TEST(ParseVector, Formats) {
  EXPECT_EQ(parse_vector(kData + "/ones_6.txt"), Eigen::VectorXd::Ones(6));
  EXPECT_EQ(parse_vector_string("[1, 2]"), Eigen::Vector2d(1, 2));
  EXPECT_EQ(parse_vector_string("{\"n\": 2, \"values\": [3, 4]}"), Eigen::Vector2d(3, 4));
  EXPECT_THROW(parse_vector_string("3 1 2"), InputError);
}

TEST(Format, SixSignificantDigits) {
  EXPECT_EQ(fmt(0.072619812), "0.0726198");
  EXPECT_EQ(fmt(-0.0), "0");
  EXPECT_EQ(fmt(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Run, NotCpExitCode) {
  RunConfig cfg;
  cfg.input = kData + "/dnn_5x5.txt";
  const Outcome o = run_with(cfg);
  EXPECT_EQ(o.code, kNotCp) << o.err;
  EXPECT_NE(o.out.find("verdict: NOT_CP"), std::string::npos);
}

TEST(Run, DickinsonJsonReport) {
  RunConfig cfg;
  cfg.input = kData + "/interior_6x6.json";
  cfg.mode = "dickinson";
  cfg.format = "json";
  cfg.verify = true;
  cfg.b1 = kData + "/ones_6.txt";
  const Outcome o = run_with(cfg);
  ASSERT_EQ(o.code, kInterior) << o.err;
  const auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["verdict"], "INTERIOR");
  EXPECT_NEAR(j["lambda"].get<double>(), 1.0, 1e-3);
  EXPECT_NEAR(j["decomposition"]["base"]["weight"].get<double>(), 1.0, 1e-3);
  std::vector<double> w;
  for (const auto& atom : j["decomposition"]["atoms"]) w.push_back(atom["weight"].get<double>());
  std::sort(w.begin(), w.end());
  const std::vector<double> expected{2, 5, 5, 5, 10};
  ASSERT_EQ(w.size(), expected.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], expected[i], 1e-2);
  EXPECT_TRUE(j["verify"]["ok"].get<bool>());
  EXPECT_FALSE(j["trace"][0].contains("seconds"));
}

TEST(Run, CustomReferenceMatrix) {
  RunConfig cfg;
  cfg.input = kData + "/identity_plus_ones_3x3.txt";
  cfg.matrix_c = kData + "/reference_doubled_3x3.txt";
  cfg.format = "json";
  const Outcome o = run_with(cfg);
  ASSERT_EQ(o.code, kInterior) << o.err;
  EXPECT_NEAR(nlohmann::json::parse(o.out)["lambda"].get<double>(), 0.5, 1e-6);
}

TEST(Run, BoundaryExitCode) {
  RunConfig cfg;
  cfg.input = kData + "/cycle_7x7.txt";
  EXPECT_EQ(run_with(cfg).code, kBoundary);
}

TEST(Run, InconclusiveExitCode) {
  // The six-by-six interior point needs order three to become flat.
  RunConfig cfg;
  cfg.input = kData + "/interior_6x6.json";
  cfg.max_order = 2;
  const Outcome o = run_with(cfg);
  EXPECT_EQ(o.code, kInconclusive) << o.out << o.err;
}

TEST(Run, OutputIsDeterministic) {
  RunConfig cfg;
  cfg.input = kData + "/interior_5x5.txt";
  cfg.mode = "dickinson";
  cfg.format = "json";
  const Outcome a = run_with(cfg), b = run_with(cfg);
  EXPECT_EQ(a.out, b.out);
  cfg.format = "text";
  EXPECT_EQ(run_with(cfg).out, run_with(cfg).out);
}

TEST(Run, InputErrors) {
  RunConfig cfg;
  cfg.input = kData + "/asymmetric_2x2.txt";
  EXPECT_EQ(run_with(cfg).code, kInputError);
  cfg.input = kData + "/dnn_5x5.txt";
  cfg.mode = "other";
  EXPECT_EQ(run_with(cfg).code, kInputError);
  cfg.mode = "interior";
  cfg.b1 = kData + "/ones_6.txt";
  EXPECT_EQ(run_with(cfg).code, kInputError);
  cfg.b1.clear();
  cfg.max_order = 0;
  EXPECT_EQ(run_with(cfg).code, kInputError);
  cfg.max_order = 4;
  cfg.matrix_c = kData + "/identity_plus_ones_3x3.txt";  // wrong size
  EXPECT_EQ(run_with(cfg).code, kInputError);
}

TEST(Run, ExitCodesArePairwiseDistinct) {
  const std::vector<int> codes{exit_code(VerdictKind::Interior), exit_code(VerdictKind::Boundary),
                               exit_code(VerdictKind::NotCp), exit_code(VerdictKind::Inconclusive)};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    EXPECT_LT(codes[i], 10);
    for (std::size_t j = i + 1; j < codes.size(); ++j) EXPECT_NE(codes[i], codes[j]);
  }
}

TEST(VerifyDecomposition, FlagsATamperedAtom) {
  const SymMatrix a = instances::boundary_7x7();
  CpVerdict v = check_interior(a);
  ASSERT_TRUE(v.decomposition);
  EXPECT_TRUE(verify_decomposition(a, *v.decomposition, 1e-4).ok);
  v.decomposition->weights[0] += 0.1;
  EXPECT_FALSE(verify_decomposition(a, *v.decomposition, 1e-4).ok);
}
