#pragma once

// Shared benchmark fixture: 12 small screens with known cell assignments and
// a scripted policy that is correct on exactly 8 of them.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "guigaze/eval.hpp"
#include "guigaze/png_io.hpp"
#include "guigaze/scripted.hpp"
#include "guigaze/synthetic.hpp"

namespace fixtures {

struct FixtureRow {
  guigaze::DatasetRecord record;
  bool correct;  // whether the scripted policy should hit this record
};

struct Fixture {
  std::filesystem::path dir;
  std::string dataset_path;
  std::vector<FixtureRow> rows;

  /// Fixed-point policies: the target center for "correct" rows, a point
  /// outside the target otherwise.
  guigaze::PolicyFactory factory() const {
    auto rows_copy = rows;
    return [rows_copy](const guigaze::DatasetRecord& rec) -> guigaze::PolicyFn {
      for (const auto& row : rows_copy) {
        if (row.record.image == rec.image &&
            row.record.instruction == rec.instruction) {
          const guigaze::Point p =
              row.correct ? rec.gt.center() : guigaze::Point{2.0, 2.0};
          return guigaze::scripted_fixed_point_policy(p);
        }
      }
      return guigaze::scripted_fixed_point_policy({2.0, 2.0});
    };
  }
};

/// Build the 12-record fixture under dir (created if needed): 64x48 screens,
/// one colored target box each.
///
/// Cell layout (correct/total): mobile text 2/2, mobile icon 1/2,
/// desktop text 1/2, desktop icon 1/2, web text 2/2, web icon 1/2;
/// Office text 3/4, Office icon 1/2, CAD text 2/2, CAD icon 2/4.
/// Micro average: 8/12.
inline Fixture build_fixture_12(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using namespace guigaze;
  fs::create_directories(dir);

  struct Spec {
    const char* platform;
    const char* ui;
    const char* group;
    bool correct;
  };
  const Spec specs[12] = {
      {"mobile", "text", "Office", true},  {"mobile", "text", "Office", true},
      {"mobile", "icon", "Office", true},  {"mobile", "icon", "Office", false},
      {"desktop", "text", "Office", true}, {"desktop", "text", "Office", false},
      {"desktop", "icon", "CAD", true},    {"desktop", "icon", "CAD", false},
      {"web", "text", "CAD", true},        {"web", "text", "CAD", true},
      {"web", "icon", "CAD", false},       {"web", "icon", "CAD", true},
  };

  Fixture fx;
  fx.dir = dir;
  fx.dataset_path = (dir / "fixture.jsonl").string();
  std::ofstream out(fx.dataset_path);

  for (int i = 0; i < 12; ++i) {
    const int color = i % 4;
    // Targets at varying positions, always inside the 64x48 screen.
    const double x1 = 6 + (i * 4) % 30;
    const double y1 = 5 + (i * 3) % 24;
    const BBox gt{x1, y1, x1 + 14, y1 + 10};

    Image img = Image::filled(64, 48, kScreenBackground);
    for (int y = static_cast<int>(gt.y1); y < static_cast<int>(gt.y2); ++y)
      for (int x = static_cast<int>(gt.x1); x < static_cast<int>(gt.x2); ++x)
        img.set(x, y, palette()[color].rgb);
    const std::string image_name = "screen_" + std::to_string(i) + ".png";
    write_png((dir / image_name).string(), img);

    FixtureRow row;
    row.record.image = image_name;
    row.record.instruction = std::string("click the ") + palette()[color].name +
                             " box #" + std::to_string(i);
    row.record.gt = gt;
    row.record.platform = specs[i].platform;
    row.record.ui_type = specs[i].ui;
    row.record.group = specs[i].group;
    row.correct = specs[i].correct;

    nlohmann::json line;
    line["image"] = row.record.image;
    line["instruction"] = row.record.instruction;
    line["bbox"] = {gt.x1, gt.y1, gt.x2, gt.y2};
    line["platform"] = row.record.platform;
    line["ui_type"] = row.record.ui_type;
    line["group"] = row.record.group;
    out << line.dump() << "\n";
    fx.rows.push_back(std::move(row));
  }
  return fx;
}

}  // namespace fixtures
