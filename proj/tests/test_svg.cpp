#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "shiftgauge/svg.hpp"

using namespace shiftgauge;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Strict-enough XML well-formedness check: every open tag matches a close
// tag in LIFO order, attribute values are quoted, '&' only begins a known
// entity, and exactly one root element exists.
void assert_well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  int roots = 0;
  auto fail = [&](const std::string& why) {
    FAIL() << "XML not well formed at byte " << i << ": " << why;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '<') {
      if (text.compare(i, 2, "<?") == 0) {
        auto end = text.find("?>", i);
        ASSERT_NE(end, std::string::npos);
        i = end + 2;
        continue;
      }
      bool closing = text[i + 1] == '/';
      std::size_t j = i + (closing ? 2 : 1);
      std::string name;
      while (j < text.size() && (std::isalnum(text[j]) || text[j] == ':'))
        name += text[j++];
      if (name.empty()) return fail("empty tag name");
      // scan to tag end, tracking quotes
      bool in_quote = false;
      bool self_closing = false;
      while (j < text.size()) {
        if (text[j] == '"') in_quote = !in_quote;
        else if (!in_quote && text[j] == '>') break;
        else if (!in_quote && text[j] == '/' && j + 1 < text.size() &&
                 text[j + 1] == '>') {
          self_closing = true;
        }
        ++j;
      }
      if (j >= text.size()) return fail("unterminated tag");
      if (in_quote) return fail("unterminated attribute quote");
      if (closing) {
        if (stack.empty() || stack.back() != name)
          return fail("mismatched </" + name + ">");
        stack.pop_back();
        if (stack.empty()) ++roots;
      } else if (!self_closing) {
        stack.push_back(name);
      } else if (stack.empty()) {
        ++roots;
      }
      i = j + 1;
    } else if (c == '&') {
      bool known = text.compare(i, 5, "&amp;") == 0 ||
                   text.compare(i, 4, "&lt;") == 0 ||
                   text.compare(i, 4, "&gt;") == 0 ||
                   text.compare(i, 6, "&quot;") == 0;
      if (!known) return fail("bare ampersand");
      i += 2;
    } else {
      ++i;
    }
  }
  EXPECT_TRUE(stack.empty()) << "unclosed tags remain";
  EXPECT_EQ(roots, 1) << "expected exactly one root element";
}

}  // namespace

TEST(LeastSquares, AffineOffsetHasUnitSlope) {
  std::vector<std::pair<double, double>> pts;
  for (double t : {0.1, 0.25, 0.4, 0.6, 0.85})
    pts.push_back({t, t + 0.1});
  svg::LinearFit fit = svg::least_squares(pts);
  EXPECT_NEAR(fit.slope, 1.0, 1e-9);
  EXPECT_NEAR(fit.intercept, 0.1, 1e-9);
}

TEST(LeastSquares, RejectsDegenerateInput) {
  EXPECT_THROW(svg::least_squares({{0.5, 0.1}}), InputError);
  EXPECT_THROW(svg::least_squares({{0.5, 0.1}, {0.5, 0.7}}), InputError);
}

TEST(RiskCurve, TwoPointSeriesIsWellFormedXml) {
  std::string path = temp_path("sg_curve.svg");
  svg::Series s;
  s.label = "src & val <risk>";  // exercises escaping
  s.x = {1, 2};
  s.y = {0.5, 0.25};
  svg::risk_curve({s}, path);
  std::string text = slurp(path);
  assert_well_formed_xml(text);
  EXPECT_NE(text.find("polyline"), std::string::npos);
  EXPECT_NE(text.find("&amp;"), std::string::npos);
  std::remove(path.c_str());
}

TEST(RiskCurve, EmptySeriesIsInputError) {
  EXPECT_THROW(svg::risk_curve({}, temp_path("sg_none.svg")), InputError);
  svg::Series bad;
  bad.x = {1};
  bad.y = {};
  EXPECT_THROW(svg::risk_curve({bad}, temp_path("sg_none.svg")), InputError);
}

TEST(Scatter, PerfectPredictionsSitOnTheDashedLine) {
  std::string path = temp_path("sg_scatter.svg");
  std::vector<std::pair<double, double>> pairs = {
      {0.1, 0.1}, {0.4, 0.4}, {0.75, 0.75}};
  svg::scatter_pred_vs_true(pairs, path);
  std::string text = slurp(path);
  assert_well_formed_xml(text);
  EXPECT_NE(text.find("stroke-dasharray"), std::string::npos);
  // Perfect predictions: each circle's cx/cy pixel coordinates coincide
  // because the frame is square in both axes.
  // The dashed reference line's endpoints let us verify collinearity: for
  // perfect predictions every circle center must lie on the segment between
  // them (within sub-pixel rounding).
  auto line_at = text.find("stroke-dasharray");
  auto points_at = text.find("points=\"", line_at) + 8;
  auto points_end = text.find('"', points_at);
  std::string pts = text.substr(points_at, points_end - points_at);
  double lx1, ly1, lx2, ly2;
  ASSERT_EQ(std::sscanf(pts.c_str(), "%lf,%lf %lf,%lf", &lx1, &ly1, &lx2,
                        &ly2),
            4);
  std::size_t pos = 0;
  int circles = 0;
  while ((pos = text.find("<circle", pos)) != std::string::npos) {
    auto cx_at = text.find("cx=\"", pos) + 4;
    auto cx_end = text.find('"', cx_at);
    auto cy_at = text.find("cy=\"", pos) + 4;
    auto cy_end = text.find('"', cy_at);
    double cx = std::stod(text.substr(cx_at, cx_end - cx_at));
    double cy = std::stod(text.substr(cy_at, cy_end - cy_at));
    double t = (cx - lx1) / (lx2 - lx1);
    double expected_cy = ly1 + t * (ly2 - ly1);
    EXPECT_NEAR(cy, expected_cy, 0.5) << "circle " << circles;
    ++circles;
    pos = cy_end;
  }
  EXPECT_EQ(circles, 3);
  std::remove(path.c_str());
}

TEST(Scatter, RegressionSlopeForAffinePredictions) {
  // predictions = true + 0.1 everywhere: slope 1 within 1e-9.
  std::vector<std::pair<double, double>> pairs;
  for (double t : {0.05, 0.2, 0.45, 0.6, 0.9})
    pairs.push_back({t, t + 0.1});
  svg::LinearFit fit = svg::least_squares(pairs);
  EXPECT_NEAR(fit.slope, 1.0, 1e-9);
  std::string path = temp_path("sg_scatter2.svg");
  svg::scatter_pred_vs_true(pairs, path);
  assert_well_formed_xml(slurp(path));
  std::remove(path.c_str());
}

TEST(DivisionUcurve, ErrorBarsAndWellFormedness) {
  std::string path = temp_path("sg_ucurve.svg");
  svg::Series s;
  s.label = "target risk";
  s.x = {1, 2, 3, 4};
  s.y = {0.3, 0.1, 0.15, 0.4};
  s.yerr = {0.05, 0.02, 0.03, 0.08};
  svg::division_ucurve(s, path);
  std::string text = slurp(path);
  assert_well_formed_xml(text);
  // 4 points, each with a vertical bar and two caps.
  int lines = 0;
  std::size_t pos = 0;
  while ((pos = text.find("<line", pos)) != std::string::npos) {
    ++lines;
    ++pos;
  }
  EXPECT_GE(lines, 12);
  std::remove(path.c_str());
}

TEST(DivisionUcurve, RequiresMatchingErrLength) {
  svg::Series s;
  s.x = {1, 2};
  s.y = {0.3, 0.1};
  s.yerr = {0.05};
  EXPECT_THROW(svg::division_ucurve(s, temp_path("sg_bad.svg")), InputError);
}
