#include <string>

#include "doctest.h"
#include "probekit/error.hpp"
#include "probekit/svg.hpp"

using namespace probekit;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

svg::LineChart curves() {
  svg::LineChart c;
  c.title = "Layer curves <base & chat>";
  c.x_label = "layer";
  c.y_label = "normalized performance";
  c.series.push_back({"syntax", {0, 1, 2, 3}, {0.1, 0.5, 0.9, 0.95}, {0.02, 0.03, 0.01, 0.01}});
  c.series.push_back({"conceptual", {0, 1, 2, 3}, {0.0, 0.2, 0.4, 0.5}, {}});
  c.reference_y = 0.0;
  return c;
}

}  // namespace

TEST_SUITE("svg") {

TEST_CASE("escaping") {
  CHECK(svg::escape_xml("a<b>&\"c\"") == "a&lt;b&gt;&amp;&quot;c&quot;");
  CHECK(svg::escape_xml("plain") == "plain");
}

TEST_CASE("line chart structure and determinism") {
  const auto a = svg::render(curves());
  CHECK(a == svg::render(curves()));
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("Layer curves &lt;base &amp; chat&gt;") != std::string::npos);
  CHECK(count(a, "<polyline") == 2);
  CHECK(count(a, "<polygon") == 1);
  CHECK(a.find("stroke-dasharray") != std::string::npos);
  CHECK(a.find("nan") == std::string::npos);
  CHECK(a.find(">syntax<") != std::string::npos);

  auto bad = curves();
  bad.series[0].band.pop_back();
  CHECK_THROWS_AS(svg::render(bad), DataError);
}

TEST_CASE("bar chart") {
  svg::BarChart b;
  b.title = "Accuracy";
  b.y_label = "accuracy";
  b.categories = {"form", "meaning"};
  b.series_names = {"direct", "meta", "neuro"};
  b.values = {{0.8, 0.7}, {0.6, 0.55}, {0.9, 0.4}};
  b.errors = {{0.01, 0.02}, {0.0, 0.0}, {0.05, 0.05}};
  const auto s = svg::render(b);
  CHECK(count(s, "<rect") >= 6);
  CHECK(s == svg::render(b));
  b.values.pop_back();
  CHECK_THROWS_AS(svg::render(b), DataError);
}

TEST_CASE("scatter with fit line") {
  svg::ScatterChart c;
  c.title = "direct vs neuro";
  c.x_label = "neuro";
  c.y_label = "direct";
  c.points = {{"t1", 0.1, 0.5}, {"t2", 0.5, 0.7}, {"t3", 0.9, 0.8}};
  c.fit = svg::FitLine{0.375, 0.4625, 0.96};
  const auto s = svg::render(c);
  CHECK(count(s, "<circle") == 3);
  CHECK(s.find("R²") != std::string::npos);
  c.points.clear();
  c.fit.reset();
  CHECK_NOTHROW(svg::render(c));
}

}  // TEST_SUITE
