#include "doctest.h"

#include <fstream>

#include "knobtune/errors.hpp"
#include "knobtune/knobspace.hpp"
#include "knobtune/rng.hpp"
#include "support.hpp"

using namespace knobtune;
using testing::bool_knob;
using testing::enum_knob;
using testing::int_knob;
using testing::real_knob;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("load_catalog counts entries") {
  auto dir = testing::scratch_dir("catalog3");
  std::ofstream(dir / "c.json") << R"([
    {"name": "a", "kind": "integer", "min": 1, "max": 10, "default": 5},
    {"name": "b", "kind": "enum", "enum_values": ["x", "y"], "default": "y"},
    {"name": "c", "kind": "boolean", "default": false}
  ])";
  CHECK(load_catalog(dir / "c.json").dimension() == 3);
}

TEST_CASE("catalog validation names the offending knob") {
  const auto msg = error_of([] { KnobCatalog({int_knob("ok", 0, 5, 1), int_knob("flat", 3, 3, 3)}); });
  CHECK(msg.find("flat") != std::string::npos);
  CHECK(msg.find("min_value") != std::string::npos);

  CHECK_THROWS_AS(KnobCatalog({real_knob("lg", 0.0, 5.0, 1.0, KnobScale::Log)}), ValidationError);
  CHECK_THROWS_AS(KnobCatalog({int_knob("out", 0, 5, 9)}), ValidationError);
  CHECK_THROWS_AS(KnobCatalog({enum_knob("e", {"a", "b"}, "z")}), ValidationError);
  CHECK_THROWS_AS(KnobCatalog({bool_knob("dup", true), bool_knob("dup", false)}), ValidationError);
}

TEST_CASE("malformed catalog file is a parse error") {
  auto dir = testing::scratch_dir("catalogbad");
  std::ofstream(dir / "c.json") << R"([{"name": "a", "kind": "integer"}])";
  CHECK_THROWS_AS(load_catalog(dir / "c.json"), ParseError);
  std::ofstream(dir / "d.json") << "{not json";
  CHECK_THROWS_AS(load_catalog(dir / "d.json"), ParseError);
}

TEST_CASE("shipped catalogs") {
  const auto mysql = load_catalog(testing::source_path("catalogs/mysql266.json"));
  CHECK(mysql.dimension() == 266);
  CHECK(testing::synthetic_catalog().dimension() == 50);
  // byte-sized knobs use log scale
  for (const auto& k : mysql.knobs()) {
    if (k.unit == "bytes" && k.min_value > 0) CHECK_MESSAGE(k.scale == KnobScale::Log, k.name);
  }
}

TEST_CASE("denormalize endpoints and buckets") {
  const KnobCatalog c({int_knob("i", 100, 10000, 100), real_knob("lg", 1.0, 10000.0, 1.0, KnobScale::Log),
                       enum_knob("e", {"l0", "l1", "l2", "l3", "l4"}, "l0"), bool_knob("b", false)});
  const std::vector<double> v{0.0, 0.5, 0.9, 0.49};
  const auto cfg = denormalize(c, v);
  CHECK(std::get<std::int64_t>(cfg.physical.at("i")) == 100);
  CHECK(std::get<double>(cfg.physical.at("lg")) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(std::get<std::string>(cfg.physical.at("e")) == "l4");
  CHECK(std::get<bool>(cfg.physical.at("b")) == false);
  CHECK(std::get<bool>(denormalize(c, std::vector<double>{0, 0, 0, 0.5}).physical.at("b")) == true);

  CHECK(std::get<std::string>(denormalize(c, std::vector<double>{0, 0, 1.0, 0}).physical.at("e")) == "l4");
  CHECK(std::get<std::int64_t>(denormalize(c, std::vector<double>{1.0, 0, 0, 0}).physical.at("i")) == 10000);
  CHECK_THROWS_AS(denormalize(c, std::vector<double>{0.0, 0.0}), DimensionError);
}

TEST_CASE("integer rounding is half-up on the physical value") {
  const KnobCatalog c({int_knob("i", 0, 10, 0)});
  CHECK(std::get<std::int64_t>(denormalize(c, std::vector<double>{0.25}).physical.at("i")) == 3);  // 2.5
  CHECK(std::get<std::int64_t>(denormalize(c, std::vector<double>{0.34}).physical.at("i")) == 3);  // 3.4
  CHECK(std::get<std::int64_t>(denormalize(c, std::vector<double>{0.35}).physical.at("i")) == 4);  // 3.5
}

TEST_CASE("normalize") {
  const KnobCatalog c({int_knob("i", 100, 10000, 100), enum_knob("e", {"l0", "l1", "l2", "l3", "l4"}, "l4")});
  const auto def = default_configuration(c);
  CHECK(denormalize(c, def.normalized).physical == def.physical);
  CHECK(def.normalized[0] == 0.0);
  CHECK(def.normalized[1] >= 0.8);
  CHECK(def.normalized[1] < 1.0);

  PhysicalConfig missing{{"i", std::int64_t{500}}};
  CHECK_THROWS_AS(normalize(c, missing), ValidationError);
  PhysicalConfig out{{"i", std::int64_t{20000}}, {"e", std::string("l1")}};
  CHECK_THROWS_AS(normalize(c, out), ValidationError);
  PhysicalConfig bad_lit{{"i", std::int64_t{500}}, {"e", std::string("zz")}};
  CHECK_THROWS_AS(normalize(c, bad_lit), ValidationError);
}

TEST_CASE("round trip on the representable grid") {
  const auto c = testing::mixed_catalog();
  const auto synth = testing::synthetic_catalog();
  Rng rng(7);
  for (const KnobCatalog* cat : {&c, &synth}) {
    for (int t = 0; t < 500; ++t) {
      std::vector<double> v(cat->dimension());
      for (auto& x : v) x = rng.uniform();
      const auto q = quantize(*cat, v);
      const auto q2 = normalize(*cat, denormalize(*cat, q).physical);
      for (std::size_t i = 0; i < q.size(); ++i) {
        if ((*cat)[i].kind == KnobKind::Real) {
          CHECK(std::abs(q2[i] - q[i]) <= 1e-12);
        } else {
          CHECK(q2[i] == q[i]);
        }
      }
      CHECK(denormalize(*cat, q).physical == denormalize(*cat, v).physical);
    }
  }
}

TEST_CASE("denormalize is monotone for numeric knobs") {
  const auto cat = testing::synthetic_catalog();
  Rng rng(11);
  for (std::size_t i = 0; i < cat.dimension(); ++i) {
    if (!cat[i].is_numeric()) continue;
    double prev = -std::numeric_limits<double>::infinity();
    for (int s = 0; s <= 200; ++s) {
      const double x = cat[i].numeric(cat[i].from_unit(s / 200.0));
      CHECK(x >= prev);
      prev = x;
    }
  }
}

TEST_CASE("trust region clipping") {
  const TrustRegion r{{0.5, 0.5, 0.02}, 0.05};
  const std::vector<double> inside{0.52, 0.47, 0.03};
  CHECK(clip_to_trust_region(r, inside) == inside);
  const auto out = clip_to_trust_region(r, std::vector<double>{0.9, 0.5, 0.0});
  CHECK(out[0] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(out[2] == 0.0);
  CHECK_THROWS_AS(clip_to_trust_region(r, std::vector<double>{0.1}), DimensionError);

  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const double ratio = 0.01 + 0.99 * rng.uniform();
    TrustRegion tr{{rng.uniform(), rng.uniform(), rng.uniform()}, ratio};
    std::vector<double> v{rng.uniform(-0.5, 1.5), rng.uniform(), rng.uniform(-1, 2)};
    const auto y = clip_to_trust_region(tr, v);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] >= 0.0);
      CHECK(y[i] <= 1.0);
      CHECK(std::abs(y[i] - tr.center[i]) <= ratio + 1e-15);
    }
  }
}

TEST_CASE("trust ratio 1 is the identity on the unit cube") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    TrustRegion tr{{rng.uniform(), rng.uniform()}, 1.0};
    std::vector<double> v{rng.uniform(), rng.uniform()};
    CHECK(clip_to_trust_region(tr, v) == v);
  }
}

TEST_CASE("catalog fingerprint survives a JSON round trip") {
  const auto c = testing::mixed_catalog();
  const auto again = KnobCatalog::from_json(c.to_json());
  CHECK(c.fingerprint() == again.fingerprint());
  const KnobCatalog other({int_knob("pool_bytes", 1024, 1 << 29, 1 << 20, KnobScale::Log), real_knob("ratio", 0.0, 10.0, 2.5),
                           enum_knob("mode", {"a", "b", "c", "d", "e"}, "c"), bool_knob("flag", true)});
  CHECK(c.fingerprint() != other.fingerprint());
}

TEST_CASE("hardware profiles must be positive") {
  CHECK_NOTHROW(load_hardware(testing::source_path("configs/hardware_12c64g.json")));
  CHECK_THROWS_AS(HardwareProfile::from_json(json{{"cpu_cores", 0}, {"ram_bytes", 1}, {"disk_bytes", 1}}), ValidationError);
}
