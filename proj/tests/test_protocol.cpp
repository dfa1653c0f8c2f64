#include "guigaze/protocol.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <fstream>
#include <sstream>

#include "guigaze/scripted.hpp"
#include "guigaze/synthetic.hpp"
#include "support/oracles.hpp"

using namespace guigaze;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image test_screen() {
  // 100x100 dark screen with a red target box at (40,40)-(60,56).
  Image img = Image::filled(100, 100, kScreenBackground);
  for (int y = 40; y < 56; ++y)
    for (int x = 40; x < 60; ++x) img.set(x, y, palette()[0].rgb);
  return img;
}

const BBox kGt{40, 40, 60, 56};

}  // namespace

TEST_CASE("render_prompt: stage 1 carries the instruction and the grammar") {
  const std::string p = render_prompt(1, "click Save");
  CHECK(p.find("click Save") != std::string::npos);
  CHECK(p.find("<answer>") != std::string::npos);
  CHECK(p.find("<tool_call>") != std::string::npos);
  CHECK(p.find("{instruction}") == std::string::npos);
}

TEST_CASE("render_prompt: stage 2 states offset and scale") {
  const std::string p =
      render_prompt(2, "click Save", ToolMeta{BBox{30, 40, 70, 60}, 2.0});
  CHECK(p.find("offset=(30,40)") != std::string::npos);
  CHECK(p.find("scale=2") != std::string::npos);
  CHECK(p.find("click Save") != std::string::npos);

  const auto meta = parse_tool_meta(p);
  REQUIRE(meta);
  CHECK(meta->region.x1 == 30.0);
  CHECK(meta->region.y1 == 40.0);
  CHECK(meta->scale == 2.0);
  const auto instruction = parse_instruction(p);
  REQUIRE(instruction);
  CHECK(*instruction == "click Save");
}

TEST_CASE("render_prompt: deterministic, and stage 2 requires metadata") {
  CHECK(render_prompt(1, "x") == render_prompt(1, "x"));
  const ToolMeta meta{BBox{1, 2, 3, 4}, 1.5};
  CHECK(render_prompt(2, "x", meta) == render_prompt(2, "x", meta));
  CHECK_THROWS_AS(render_prompt(2, "x"), contract_error);
  CHECK_THROWS_AS(render_prompt(3, "x"), contract_error);
}

TEST_CASE("prompt templates match the shipped text assets") {
  const std::string root = GUIGAZE_SOURCE_DIR;
  CHECK(read_file(root + "/assets/prompts/stage1_v1.txt") ==
        std::string(kStage1PromptV1));
  CHECK(read_file(root + "/assets/prompts/stage2_v1.txt") ==
        std::string(kStage2PromptV1));
}

TEST_CASE("parse_action: accepts the documented shapes") {
  const auto r1 = parse_action(
      "<think>target is top right</think>"
      "<tool_call>{\"name\":\"crop\",\"center\":[120,80],\"size\":[200,150]}"
      "</tool_call>",
      1);
  REQUIRE(r1.ok());
  CHECK(r1.action->kind == ActionKind::tool_call);
  CHECK(r1.action->think == "target is top right");
  CHECK(r1.action->tool.kind == ToolKind::crop);
  CHECK(r1.action->tool.center == Point{120, 80});
  CHECK(r1.action->tool.width == 200.0);
  CHECK(r1.action->tool.height == 150.0);

  const auto r2 = parse_action("<answer>{\"point\":[40,45]}</answer>", 2);
  REQUIRE(r2.ok());
  CHECK(r2.action->kind == ActionKind::answer);
  CHECK(r2.action->point == Point{40, 45});

  const auto r3 = parse_action(
      "<tool_call>{\"name\":\"zoom\",\"center\":[10,20],\"size\":[30,40],"
      "\"scale\":2.5}</tool_call>",
      1);
  REQUIRE(r3.ok());
  CHECK(r3.action->tool.kind == ToolKind::zoom);
  CHECK(r3.action->tool.scale == 2.5);

  // Whitespace around blocks is tolerated.
  const auto r4 = parse_action(
      "  \n<think>x</think>\n  <answer>{\"point\":[1,2]}</answer>\n", 1);
  CHECK(r4.ok());
}

TEST_CASE("parse_action: error taxonomy") {
  const auto reason = [](const ParseResult& r) {
    REQUIRE(r.error);
    return r.error->reason;
  };
  CHECK(reason(parse_action("<tool_call>{\"name\":\"crop\"}", 2)) ==
        FormatErrorReason::wrong_stage_action);
  CHECK(reason(parse_action("<think>unterminated", 1)) ==
        FormatErrorReason::unclosed_tag);
  CHECK(reason(parse_action("<answer>{\"point\":[1,2]}", 1)) ==
        FormatErrorReason::unclosed_tag);
  CHECK(reason(parse_action("<tool_call>{\"name\":\"crop\"", 1)) ==
        FormatErrorReason::unclosed_tag);
  CHECK(reason(parse_action("", 1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("hello", 1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<answer>not json</answer>", 1)) ==
        FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<answer>{\"point\":[1,2]}</answer> extra", 1)) ==
        FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<answer>{\"point\":[1,2]}</answer>"
                            "<answer>{\"point\":[1,2]}</answer>",
                            1)) == FormatErrorReason::bad_payload);
  // Missing scale for zoom, stray scale on crop, negative size, bad scale.
  CHECK(reason(parse_action("<tool_call>{\"name\":\"zoom\",\"center\":[1,2],"
                            "\"size\":[3,4]}</tool_call>",
                            1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<tool_call>{\"name\":\"crop\",\"center\":[1,2],"
                            "\"size\":[3,4],\"scale\":2}</tool_call>",
                            1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<tool_call>{\"name\":\"crop\",\"center\":[1,2],"
                            "\"size\":[-3,4]}</tool_call>",
                            1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<tool_call>{\"name\":\"zoom\",\"center\":[1,2],"
                            "\"size\":[3,4],\"scale\":0}</tool_call>",
                            1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<answer>{\"point\":[1,2],\"extra\":3}</answer>",
                            1)) == FormatErrorReason::bad_payload);
  CHECK(reason(parse_action("<answer>{\"point\":[1e999,2]}</answer>", 1)) ==
        FormatErrorReason::non_finite_number);
  CHECK(reason(parse_action("<tool_call>{\"name\":\"crop\",\"center\":[1,2],"
                            "\"size\":[1e999,4]}</tool_call>",
                            1)) == FormatErrorReason::non_finite_number);
}

TEST_CASE("parse_action: agrees with the reference grammar parser") {
  // The reference parser reads canonical key order, which is exactly what
  // the constructive emitters produce.
  Rng rng(31337);
  for (int i = 0; i < 4000; ++i) {
    const double x = std::floor(rng.uniform(-500, 2000) * 16) / 16;
    const double y = std::floor(rng.uniform(-500, 2000) * 16) / 16;
    const double w = std::floor(rng.uniform(0, 900) * 16) / 16;
    const double h = std::floor(rng.uniform(0, 900) * 16) / 16;
    const double z = std::floor(rng.uniform(0.1, 9) * 16) / 16;
    std::string text;
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    if (kind == 0)
      text = make_answer_text({x, y});
    else if (kind == 1)
      text = make_crop_text({x, y}, w, h);
    else
      text = make_zoom_text({x, y}, w, h, z);
    if (rng.uniform01() < 0.5) text = "<think>look closer</think>" + text;
    if (rng.uniform01() < 0.3) text = "  " + text + "\n";

    const auto mine = parse_action(text, 1);
    const auto reference = oracles::reference_parse(text, 1);
    REQUIRE(mine.ok());
    REQUIRE(reference.has_value());
    if (kind == 0) {
      REQUIRE(reference->answer);
      CHECK(mine.action->point.x == reference->answer->x);
      CHECK(mine.action->point.y == reference->answer->y);
    } else {
      REQUIRE(reference->tool);
      CHECK(mine.action->tool.center.x == reference->tool->cx);
      CHECK(mine.action->tool.width == reference->tool->w);
      CHECK((mine.action->tool.kind == ToolKind::zoom) ==
            reference->tool->zoom);
      if (reference->tool->zoom)
        CHECK(mine.action->tool.scale == reference->tool->scale);
    }

    // Truncations must be rejected by both parsers.
    const std::string broken = text.substr(0, text.size() - 3);
    CHECK_FALSE(parse_action(broken, 1).ok());
    CHECK_FALSE(oracles::reference_parse(broken, 1).has_value());
  }
}

TEST_CASE("parse_action: total on arbitrary byte strings") {
  Rng rng(4242);
  const std::string fragments[] = {
      "<think>", "</think>", "<tool_call>", "</tool_call>", "<answer>",
      "</answer>", "{\"name\":\"crop\"", "\"center\":[", "1,2]", "\xff\xfe",
      "\"size\"", "scale", "{\"point\":[3,4]}", "}", "[", "]", "nan", "1e999"};
  for (int i = 0; i < 20000; ++i) {
    std::string s;
    if (i % 3 == 0) {
      const int len = static_cast<int>(rng.uniform_int(0, 60));
      for (int k = 0; k < len; ++k)
        s.push_back(static_cast<char>(rng.uniform_int(0, 255)));
    } else {
      const int parts = static_cast<int>(rng.uniform_int(1, 6));
      for (int k = 0; k < parts; ++k)
        s += fragments[rng.uniform_int(0, std::size(fragments) - 1)];
    }
    const int stage = 1 + static_cast<int>(rng.uniform_int(0, 1));
    const ParseResult r = parse_action(s, stage);  // must not throw
    REQUIRE((r.ok() || r.error.has_value()));
  }
}

TEST_CASE("run_episode: direct answer inside the target") {
  const Image img = test_screen();
  const EpisodeRecord rec =
      run_episode(scripted_fixed_point_policy(kGt.center()),
                  "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 1);
  CHECK(rec.outcome.format_ok);
  CHECK_FALSE(rec.outcome.tool.is_tool());
  CHECK(rec.reward.r_acc == 1.0);
  CHECK(rec.reward.r_tool == Catch::Approx(0.7));
  CHECK(rec.reward.total == Catch::Approx(0.91));
}

TEST_CASE("run_episode: crop covering the target then a centered click") {
  const Image img = test_screen();
  const ToolSpec crop = ToolSpec::crop(kGt.center(), 60, 60);
  const EpisodeRecord rec =
      run_episode(scripted_tool_then_point_policy(crop, kGt.center()),
                  "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 2);
  REQUIRE(rec.tool_region);
  CHECK(rec.outcome.format_ok);
  REQUIRE(rec.outcome.final_point_original);
  CHECK(rec.outcome.final_point_original->x ==
        Catch::Approx(kGt.center().x).margin(1e-9));
  CHECK(rec.outcome.final_point_original->y ==
        Catch::Approx(kGt.center().y).margin(1e-9));
  CHECK(rec.reward.r_acc == 1.0);
  CHECK(rec.reward.center_term == 1.0);
  CHECK(rec.reward.overlap_term == 1.0);
  CHECK(rec.reward.total == Catch::Approx(1.0));
}

TEST_CASE("run_episode: zoom maps the click through the inverse scale") {
  const Image img = test_screen();
  const ToolSpec zoom = ToolSpec::zoom(kGt.center(), 60, 60, 2.0);
  const EpisodeRecord rec =
      run_episode(scripted_tool_then_point_policy(zoom, kGt.center()),
                  "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 2);
  REQUIRE(rec.zoom_scale);
  CHECK(*rec.zoom_scale == 2.0);
  REQUIRE(rec.outcome.format_ok);
  // Coordinate soundness: re-derive the final point from the raw stage-2
  // answer through the mapping ops.
  REQUIRE(rec.stage2_action);
  const Point again = map_from_zoom(rec.stage2_action->point, *rec.tool_region, 2.0);
  CHECK(rec.outcome.final_point_original->x == Catch::Approx(again.x).margin(1e-9));
  CHECK(rec.outcome.final_point_original->y == Catch::Approx(again.y).margin(1e-9));
  CHECK(rec.reward.r_acc == 1.0);
}

TEST_CASE("run_episode: stage-1 garbage scores zero") {
  const Image img = test_screen();
  const EpisodeRecord rec = run_episode(scripted_raw_policy("garbage ####"),
                                        "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 1);
  CHECK_FALSE(rec.outcome.format_ok);
  REQUIRE(rec.stage1_error);
  CHECK(rec.reward.total == 0.0);
  CHECK_FALSE(rec.episode_error);
}

TEST_CASE("run_episode: stage-2 garbage keeps the tool region, scores zero") {
  const Image img = test_screen();
  PolicyFn policy = [](int stage, const std::string&, const Image&,
                       Rng&) -> std::string {
    if (stage == 1) return make_crop_text({50, 48}, 60, 60);
    return "<answer>oops";
  };
  const EpisodeRecord rec =
      run_episode(policy, "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 2);
  REQUIRE(rec.tool_region);
  REQUIRE(rec.stage2_error);
  CHECK(rec.stage2_error->reason == FormatErrorReason::unclosed_tag);
  CHECK_FALSE(rec.outcome.format_ok);
  CHECK(rec.reward.total == 0.0);
}

TEST_CASE("run_episode: transport failure is an episode error, not format") {
  const Image img = test_screen();
  const EpisodeRecord rec = run_episode(scripted_failing_policy("server gone"),
                                        "click the red box", img, kGt, 7);
  REQUIRE(rec.episode_error);
  CHECK(rec.episode_error->find("server gone") != std::string::npos);
  CHECK_FALSE(rec.stage1_error);
  CHECK(rec.reward.total == 0.0);
}

TEST_CASE("run_episode: zero-size and absurd tools are invalid actions") {
  const Image img = test_screen();
  const EpisodeRecord rec = run_episode(
      scripted_tool_then_point_policy(ToolSpec::crop({50, 50}, 0, 0), {50, 50}),
      "click the red box", img, kGt, 7);
  CHECK(rec.step_count == 2);
  REQUIRE(rec.invalid_action);
  CHECK_FALSE(rec.outcome.format_ok);
  CHECK_FALSE(rec.stage2_raw);
  CHECK(rec.reward.total == 0.0);

  const EpisodeRecord huge = run_episode(
      scripted_tool_then_point_policy(ToolSpec::zoom({50, 50}, 80, 80, 1e6),
                                      {50, 50}),
      "click the red box", img, kGt, 7);
  REQUIRE(huge.invalid_action);
  CHECK(huge.reward.total == 0.0);
}

TEST_CASE("run_episode: deterministic per (policy, seed)") {
  const Image img = test_screen();
  // A stochastic policy: random crop then a random in-view click.
  PolicyFn policy = [](int stage, const std::string&, const Image& view,
                       Rng& rng) -> std::string {
    if (stage == 1)
      return make_crop_text({rng.uniform(0, 100), rng.uniform(0, 100)},
                            rng.uniform(10, 80), rng.uniform(10, 80));
    return make_answer_text(
        {rng.uniform(0, view.width), rng.uniform(0, view.height)});
  };
  const auto a =
      episode_to_json(run_episode(policy, "click the red box", img, kGt, 99))
          .dump();
  const auto b =
      episode_to_json(run_episode(policy, "click the red box", img, kGt, 99))
          .dump();
  const auto c =
      episode_to_json(run_episode(policy, "click the red box", img, kGt, 100))
          .dump();
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("run_episode: coordinate soundness over random tool episodes") {
  const Image img = test_screen();
  Rng outer(555);
  for (int i = 0; i < 300; ++i) {
    const bool zoom = i % 2 == 0;
    const Point c{outer.uniform(0, 100), outer.uniform(0, 100)};
    const double w = outer.uniform(5, 90);
    const double h = outer.uniform(5, 90);
    const double z = outer.uniform(0.5, 3.0);
    PolicyFn policy = [&](int stage, const std::string&, const Image& view,
                          Rng& rng) -> std::string {
      if (stage == 1)
        return zoom ? make_zoom_text(c, w, h, z) : make_crop_text(c, w, h);
      return make_answer_text(
          {rng.uniform(0, view.width), rng.uniform(0, view.height)});
    };
    const EpisodeRecord rec =
        run_episode(policy, "click the red box", img, kGt, 1000 + i);
    if (!rec.outcome.format_ok) continue;  // degenerate clamped region
    if (rec.step_count != 2) continue;
    REQUIRE(rec.tool_region);
    REQUIRE(rec.tool_region->x1 >= 0.0);
    REQUIRE(rec.tool_region->x2 <= img.width);
    const Point raw = rec.stage2_action->point;
    const Point expect = zoom ? map_from_zoom(raw, *rec.tool_region, z)
                              : map_from_crop(raw, *rec.tool_region);
    REQUIRE(rec.outcome.final_point_original->x ==
            Catch::Approx(expect.x).margin(1e-9));
    REQUIRE(rec.outcome.final_point_original->y ==
            Catch::Approx(expect.y).margin(1e-9));
  }
}

TEST_CASE("episode JSONL carries the full reward breakdown") {
  const Image img = test_screen();
  const EpisodeRecord rec =
      run_episode(scripted_fixed_point_policy(kGt.center()),
                  "click the red box", img, kGt, 3);
  const nlohmann::json j = episode_to_json(rec);
  CHECK(j["format_ok"] == true);
  CHECK(j["reward"]["total"].get<double>() == Catch::Approx(0.91));
  CHECK(j["stage1_raw"].is_string());
  CHECK(j["final_point"].is_array());
  // One JSON object per line.
  CHECK(j.dump().find('\n') == std::string::npos);
}
