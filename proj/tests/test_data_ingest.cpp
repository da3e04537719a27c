// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>

#include "layerprobe/data_ingest.hpp"
#include "test_util.hpp"

using namespace layerprobe;
using testutil::catch_error;

namespace {

// Sum of (pixel - background) inside a region.
double region_mass(const Tensor& img, const Region& r, float background) {
  double s = 0.0;
  for (auto y = r.y0; y < r.y1; ++y)
    for (auto x = r.x0; x < r.x1; ++x) s += img.at(0, y, x) - background;
  return s;
}

double ba_of(const std::vector<std::int8_t>& pred, const std::vector<std::int8_t>& truth) {
  double tp = 0, p = 0, tn = 0, n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++p;
      tp += pred[i] == 1;
    } else {
      ++n;
      tn += pred[i] == -1;
    }
  }
  return 0.5 * (tp / p + tn / n);
}

}  // namespace

TEST_CASE("attribute table") {
  const std::string doc = "2\nSmiling Male\na.jpg 1 -1\nb.jpg -1 -1\n";
  const auto t = parse_attributes(doc);
  CHECK(t.attribute_names == std::vector<std::string>{"Smiling", "Male"});
  CHECK(t.ids == std::vector<std::string>{"a.jpg", "b.jpg"});
  CHECK(t.rows == std::vector<std::vector<std::int8_t>>{{1, -1}, {-1, -1}});
  CHECK(t.column(0).at("a.jpg") == 1);
  CHECK(serialize_attributes(t) == doc);
  CHECK(parse_attributes(serialize_attributes(t)) == t);

  // CelebA writes padded columns and CRLF line ends.
  CHECK(parse_attributes("1\r\nA B\r\nx.jpg  1 -1 \r\n") == parse_attributes("1\nA B\nx.jpg 1 -1\n"));

  std::string names, row = "img.jpg";
  for (int i = 0; i < 40; ++i) names += (i ? " a" : "a") + std::to_string(i);
  for (int i = 0; i < 39; ++i) row += " 1";
  const auto w = catch_error([&] { parse_attributes("1\n" + names + "\n" + row + "\n"); });
  CHECK(w.code == Errc::RowWidthMismatch);
  CHECK(w.message.find("line 3") != std::string::npos);

  CHECK(catch_error([] { parse_attributes("1\nA\nx.jpg 0\n"); }).code == Errc::BadLabelValue);
  CHECK(catch_error([] { parse_attributes("2\nA\nx.jpg 1\n"); }).code == Errc::BadHeader);
  CHECK(catch_error([] { parse_attributes("2\nA A\nx.jpg 1 1\ny.jpg 1 1\n"); }).code == Errc::BadHeader);
  CHECK(catch_error([] { parse_attributes("2\nA\nx.jpg 1\nx.jpg 1\n"); }).code == Errc::DuplicateId);
}

TEST_CASE("partition") {
  const auto p = parse_partition("a.ppm 0\nb.ppm 2");
  CHECK(p == SplitAssignment{{"a.ppm", Split::Train}, {"b.ppm", Split::Test}});
  const std::string canon = "a.ppm 0\nb.ppm 2\nc.ppm 1\n";
  CHECK(serialize_partition(parse_partition(canon)) == canon);

  const auto d = catch_error([] { parse_partition("a.ppm 0\nb.ppm 3\n"); });
  CHECK(d.code == Errc::BadSplitDigit);
  CHECK(d.message.find("line 2") != std::string::npos);
  CHECK(catch_error([] { parse_partition("a.ppm 0\na.ppm 1\n"); }).code == Errc::DuplicateId);
  CHECK(catch_error([] { parse_partition("a.ppm\n"); }).code == Errc::FieldCount);
}

TEST_CASE("landmarks") {
  const std::string canon = "x.jpg 40 48 80 48 60 72 46 92 74 92\ny.jpg 1.5 2 3 4 5 6 7 8 9 10.25\n";
  const auto lm = parse_landmarks(canon);
  REQUIRE(lm.size() == 2);
  CHECK(lm.at("x.jpg") == kTemplate120);
  CHECK(lm.at("y.jpg")[4] == Point2{9.0, 10.25});
  CHECK(serialize_landmarks(lm) == canon);

  // CelebA header lines are skipped.
  const std::string celeba =
      "2\nlefteye_x lefteye_y righteye_x righteye_y nose_x nose_y leftmouth_x leftmouth_y rightmouth_x "
      "rightmouth_y\n" +
      canon;
  CHECK(parse_landmarks(celeba) == lm);

  const auto f = catch_error([] { parse_landmarks("a.jpg 1 2 3 4 5 6 7 8\n"); });
  CHECK(f.code == Errc::FieldCount);
  CHECK(f.message.find("line 1") != std::string::npos);
  CHECK(catch_error([] { parse_landmarks("a.jpg 1 2 3 x 5 6 7 8 9 10\n"); }).code == Errc::NonNumeric);
  CHECK(catch_error([] { parse_landmarks("a.jpg 1 1 1 1 1 1 1 1 1 1\n"); }).code == Errc::DegenerateLandmarks);
  CHECK(catch_error([] { parse_landmarks("a 1 2 3 4 5 6 7 8 9 10\na 1 2 3 4 5 6 7 8 9 10\n"); }).code ==
        Errc::DuplicateId);
}

TEST_CASE("synthetic generator is deterministic") {
  SynthConfig cfg;
  cfg.n_images = 12;
  cfg.seed = 42;
  cfg.rules = default_rules(cfg.canvas);
  const auto a = testutil::scratch_dir("synth_a");
  const auto b = testutil::scratch_dir("synth_b");
  const auto out_a = generate_synthetic(cfg, a);
  generate_synthetic(cfg, b);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a);
    CHECK(read_file(entry.path()) == read_file(b / rel));
  }
  CHECK(out_a.attributes.ids.size() == 12);
  CHECK(std::count_if(out_a.split.begin(), out_a.split.end(),
                      [](const auto& kv) { return kv.second == Split::Train; }) == 7);

  // Written files agree with the in-memory render.
  const auto img = read_pnm(a / "images" / out_a.attributes.ids[3]);
  CHECK(img == render_synthetic(cfg, 3).image);
  CHECK(parse_attributes(read_text_file(a / "attributes.txt")) == out_a.attributes);

  SynthConfig other = cfg;
  other.seed = 43;
  CHECK_FALSE(render_synthetic(other, 3).image == render_synthetic(cfg, 3).image);

  SynthConfig bad = cfg;
  bad.rules[0].positive = {110, 110, 125, 125};
  CHECK(catch_error([&] { generate_synthetic(bad, a); }).code == Errc::RegionOutOfBounds);
}

TEST_CASE("planted attributes are recoverable by region oracles") {
  SynthConfig cfg;
  cfg.noise = 0.0f;
  cfg.rules = default_rules(cfg.canvas);
  const auto& presence = cfg.rules[0];
  const auto& location = cfg.rules[1];
  std::vector<std::int8_t> y_presence, y_location, p_presence, p_location, p_globalmax;
  for (std::uint32_t i = 0; i < 300; ++i) {
    const auto s = render_synthetic(cfg, i);
    y_presence.push_back(s.labels[0]);
    y_location.push_back(s.labels[1]);
    // Presence: a thresholded region sum.
    p_presence.push_back(region_mass(s.image, presence.positive, cfg.background) > 0.0 ? 1 : -1);
    // Location: difference of the two region indicators.
    const double up = region_mass(s.image, location.positive, cfg.background);
    const double down = region_mass(s.image, *location.negative, cfg.background);
    p_location.push_back(up - down > 0.0 ? 1 : -1);
    // Global max is blind to where the blob sits.
    const auto px = s.image.data();
    p_globalmax.push_back(*std::max_element(px.begin(), px.end()) > cfg.background ? 1 : -1);
  }
  CHECK(ba_of(p_presence, y_presence) == 1.0);
  CHECK(ba_of(p_location, y_location) == 1.0);
  CHECK(std::abs(ba_of(p_globalmax, y_location) - 0.5) <= 0.05);
}
