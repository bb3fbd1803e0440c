#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "rfpx/error.hpp"
#include "rfpx/sim/dataset.hpp"
#include "rfpx/sim/render.hpp"
#include "rfpx/sim/rollout.hpp"
#include "rfpx/sim/tasks.hpp"
#include "rfpx/sim/world.hpp"

using namespace rfpx;
using namespace rfpx::sim;

namespace {

Object fixture(ObjectKind kind, double x, double y, double half, double height) {
  Object o;
  o.kind = kind;
  o.x = x;
  o.y = y;
  o.half = half;
  o.height = height;
  return o;
}

// One block at (0.31, 0.31), fixtures parked out of the way, bin in a corner.
WorldState hand_scene(double block_height = 0.04) {
  WorldState s;
  Object block = fixture(ObjectKind::block, 0.31, 0.31, kBlockHalf, block_height);
  block.color = ColorName::red;
  s.objects.push_back(block);
  s.objects.push_back(fixture(ObjectKind::button, 0.55, 0.55, kBlockHalf, kButtonHeight));
  Object slider = fixture(ObjectKind::slider, 0.09, 0.59, kBlockHalf, kKnobHeight);
  slider.track_x0 = 0.09;
  s.objects.push_back(slider);
  s.objects.push_back(fixture(ObjectKind::bin, 0.09, 0.09, kBinHalf, kBinHeight));
  s.gripper = {0.11, 0.31, 0.30, false};
  return s;
}

Action act(double dx, double dy, double dz, bool closed) {
  Action a;
  a.pose = {dx, dy, dz, 0, 0, 0};
  a.gripper_closed = closed;
  return a;
}

bool in_bounds(const WorldState& s) {
  auto ok = [](double v) { return v >= 0.0 && v <= kTableSize; };
  if (!ok(s.gripper.x) || !ok(s.gripper.y) || s.gripper.z < 0.0) return false;
  int held = 0;
  for (const Object& o : s.objects) {
    if (!ok(o.x) || !ok(o.y) || o.z < 0.0) return false;
    held += o.held;
  }
  return held <= 1;
}

std::vector<TaskSpec> tasks_of(const WorldState& s, TaskFamily f) { return valid_tasks(s, {f}); }

}  // namespace

TEST(MakeEnv, SameSeedSameState) { EXPECT_EQ(make_env(42, Palette::B), make_env(42, Palette::B)); }

TEST(MakeEnv, PaletteChangesColorsNotGeometry) {
  const WorldState a = make_env(9, Palette::A);
  const WorldState d = make_env(9, Palette::D);
  EXPECT_EQ(a.objects, d.objects);
  EXPECT_EQ(a.gripper, d.gripper);
  EXPECT_NE(render_observation(a).rgb_static, render_observation(d).rgb_static);
  EXPECT_EQ(render_observation(a).depth_static.values()[0], render_observation(d).depth_static.values()[0]);
}

TEST(MakeEnv, ThousandSeedsSatisfyInvariants) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (SceneKind scene : {SceneKind::standard, SceneKind::tall_short}) {
      const WorldState s = make_env(seed, Palette::C, scene);
      ASSERT_TRUE(in_bounds(s)) << seed;
      ASSERT_FALSE(s.held_index()) << seed;
    }
  }
}

TEST(StepEnv, ZeroActionLeavesStateUnchanged) {
  const WorldState s = make_env(3, Palette::A);
  EXPECT_EQ(step_env(s, Action{}), s);
}

TEST(StepEnv, CloseAtGraspRadiusPicksUpTheBlock) {
  WorldState s = hand_scene();
  s.gripper = {0.31 + kGraspRadius, 0.31, 0.04, false};
  const WorldState after = step_env(s, act(0, 0, 0, true));
  EXPECT_TRUE(after.objects[0].held);
  EXPECT_TRUE(after.gripper.closed);

  s.gripper.x = 0.31 + kGraspRadius + 1e-4;
  EXPECT_FALSE(step_env(s, act(0, 0, 0, true)).objects[0].held);
}

TEST(StepEnv, OutOfBoundsMovesClamp) {
  WorldState s = hand_scene();
  s.gripper = {0.02, 0.63, 0.39, false};
  const WorldState after = step_env(s, act(-0.1, 0.1, 0.1, false));
  EXPECT_EQ(after.gripper.x, 0.0);
  EXPECT_EQ(after.gripper.y, kTableSize);
  EXPECT_EQ(after.gripper.z, kGripperMaxZ);
}

TEST(StepEnv, TwentyStepPickAndPlaceMatchesHandTrace) {
  // gripper (x, y, z, closed) and block (x, y, z, held, in_bin) after each step
  struct Row {
    Action a;
    double gx, gy, gz;
    bool closed;
    double bx, by, bz;
    bool held, in_bin;
  };
  const std::vector<Row> trace = {
      {act(0.1, 0, 0, false), 0.21, 0.31, 0.30, false, 0.31, 0.31, 0.00, false, false},
      {act(0.1, 0, 0, false), 0.31, 0.31, 0.30, false, 0.31, 0.31, 0.00, false, false},
      {act(0, 0, -0.1, false), 0.31, 0.31, 0.20, false, 0.31, 0.31, 0.00, false, false},
      {act(0, 0, -0.1, false), 0.31, 0.31, 0.10, false, 0.31, 0.31, 0.00, false, false},
      {act(0, 0, -0.1, false), 0.31, 0.31, 0.04, false, 0.31, 0.31, 0.00, false, false},
      {act(0, 0, 0, true), 0.31, 0.31, 0.04, true, 0.31, 0.31, 0.00, true, false},
      {act(0, 0, 0.1, true), 0.31, 0.31, 0.14, true, 0.31, 0.31, 0.10, true, false},
      {act(0, 0, 0.1, true), 0.31, 0.31, 0.24, true, 0.31, 0.31, 0.20, true, false},
      {act(-0.1, 0, 0, true), 0.21, 0.31, 0.24, true, 0.21, 0.31, 0.20, true, false},
      {act(-0.1, -0.1, 0, true), 0.11, 0.21, 0.24, true, 0.11, 0.21, 0.20, true, false},
      {act(0, -0.1, 0, true), 0.11, 0.11, 0.24, true, 0.11, 0.11, 0.20, true, false},
      {act(0, 0, -0.1, true), 0.11, 0.11, 0.14, true, 0.11, 0.11, 0.10, true, false},
      {act(0, 0, -0.1, true), 0.11, 0.11, 0.06, true, 0.11, 0.11, 0.02, true, false},
      {act(0, 0, 0, false), 0.11, 0.11, 0.06, false, 0.11, 0.11, 0.00, false, true},
      {act(0, 0, 0.1, false), 0.11, 0.11, 0.16, false, 0.11, 0.11, 0.00, false, true},
      {act(0.1, 0.1, 0, false), 0.21, 0.21, 0.16, false, 0.11, 0.11, 0.00, false, true},
      {act(0.1, 0, 0.1, false), 0.31, 0.21, 0.26, false, 0.11, 0.11, 0.00, false, true},
      {act(0, 0, 0.1, false), 0.31, 0.21, 0.36, false, 0.11, 0.11, 0.00, false, true},
      {act(0, 0, 0.1, false), 0.31, 0.21, 0.40, false, 0.11, 0.11, 0.00, false, true},
      {act(0.5, 0, 0, false), 0.41, 0.21, 0.40, false, 0.11, 0.11, 0.00, false, true},
  };
  WorldState s = hand_scene();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const Row& r = trace[i];
    s = step_env(s, r.a);
    const Object& b = s.objects[0];
    SCOPED_TRACE("step " + std::to_string(i + 1));
    EXPECT_NEAR(s.gripper.x, r.gx, 1e-12);
    EXPECT_NEAR(s.gripper.y, r.gy, 1e-12);
    EXPECT_NEAR(s.gripper.z, r.gz, 1e-12);
    EXPECT_EQ(s.gripper.closed, r.closed);
    EXPECT_NEAR(b.x, r.bx, 1e-12);
    EXPECT_NEAR(b.y, r.by, 1e-12);
    EXPECT_NEAR(b.z, r.bz, 1e-12);
    EXPECT_EQ(b.held, r.held);
    EXPECT_EQ(b.in_bin, r.in_bin);
  }
}

TEST(StepEnv, ButtonDepressesOnContactAndSliderMovesWhenPushed) {
  WorldState s = hand_scene();
  s.gripper = {0.55, 0.55, 0.05, false};
  s = step_env(s, act(0, 0, -0.1, false));
  const Object& button = s.objects[1];
  EXPECT_TRUE(button.pressed);
  EXPECT_EQ(button.height, kPressedButtonHeight);

  s.gripper = {0.04, 0.59, 0.01, false};
  s = step_env(s, act(0.06, 0, 0, false));
  EXPECT_NEAR(s.objects[2].x, 0.15, 1e-12);
}

TEST(Render, EmptyTableIsUniform) {
  WorldState s;
  s.palette = Palette::B;
  s.gripper = {-1.0, -1.0, 0.3, false};  // keep the marker off the static view
  const Observation o = render_observation(s);
  const Rgb table = palette_colors(Palette::B).table;
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) ASSERT_EQ(o.rgb_static.at(ch, r, c), table[ch]);
      ASSERT_EQ(o.depth_static.at(r, c), kStaticCameraHeight);
    }
}

TEST(Render, BlockHeightReducesDepth) {
  WorldState s = hand_scene(0.1);
  s.gripper = {0.6, 0.3, 0.3, false};
  const Observation o = render_observation(s);
  // block at (0.31, 0.31) covers pixel centers 0.29, 0.31, 0.33 → columns/rows 14..16
  for (std::size_t r = 14; r <= 16; ++r)
    for (std::size_t c = 14; c <= 16; ++c) EXPECT_NEAR(o.depth_static.at(r, c), kStaticCameraHeight - 0.1, 1e-12);
  EXPECT_EQ(o.depth_static.at(13, 15), kStaticCameraHeight);
  EXPECT_EQ(o.depth_static.at(17, 15), kStaticCameraHeight);
}

TEST(Render, SameColorBlocksOfDifferentHeightLookIdenticalInRgb) {
  WorldState s = hand_scene(0.05);
  Object tall = s.objects[0];
  tall.x = 0.45;
  tall.height = 0.15;
  s.objects.push_back(tall);
  s.gripper = {0.6, 0.05, 0.3, false};
  const Observation o = render_observation(s);
  for (int dr = -2; dr <= 2; ++dr)
    for (int dc = -2; dc <= 2; ++dc) {
      const std::size_t r = 15 + dr, c_short = 15 + dc, c_tall = 22 + dc;
      for (std::size_t ch = 0; ch < 3; ++ch) ASSERT_EQ(o.rgb_static.at(ch, r, c_short), o.rgb_static.at(ch, r, c_tall));
    }
  EXPECT_NE(o.depth_static.at(15, 15), o.depth_static.at(15, 22));
}

TEST(Render, DepthPositiveAndRgbInUnitRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState s = make_env(seed, Palette::A, SceneKind::tall_short);
    s.gripper.z = 0.0;  // gripper camera right at table level
    const Observation o = render_observation(s);
    for (const DepthMap* d : {&o.depth_static, &o.depth_gripper})
      for (double v : d->values()) ASSERT_GT(v, 0.0);
    for (const ThreeChannelImage* img : {&o.rgb_static, &o.rgb_gripper})
      for (double v : img->data) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Render, TallShortPairIsPixelIdenticalInRgbForEverySeed) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    WorldState s = make_env(seed, Palette::D, SceneKind::tall_short);
    s.gripper.x = -1.0;  // marker out of view
    const Observation o = render_observation(s);
    const Object& a = s.objects[0];
    const Object& b = s.objects[1];
    ASSERT_EQ(a.color, b.color);
    ASSERT_NE(a.height, b.height);
    const int ra = static_cast<int>(a.y / kPixel), ca = static_cast<int>(a.x / kPixel);
    const int rb = static_cast<int>(b.y / kPixel), cb = static_cast<int>(b.x / kPixel);
    for (int d1 = -1; d1 <= 1; ++d1)
      for (int d2 = -1; d2 <= 1; ++d2)
        for (std::size_t ch = 0; ch < 3; ++ch)
          ASSERT_EQ(o.rgb_static.at(ch, ra + d1, ca + d2), o.rgb_static.at(ch, rb + d1, cb + d2)) << seed;
    ASSERT_NE(o.depth_static.at(ra, ca), o.depth_static.at(rb, cb));
  }
}

TEST(Expert, AtGraspPointLiftClosesGripper) {
  WorldState s = hand_scene();
  s.gripper = {0.31, 0.31, 0.04, false};
  TaskSpec t = tasks_of(s, TaskFamily::lift).at(0);
  const Action a = expert_action(s, t);
  EXPECT_TRUE(a.gripper_closed);
  EXPECT_EQ(a.pose, (std::array<double, 6>{}));
}

TEST(Expert, UnresolvableDescriptorIsATaskError) {
  TaskSpec t;
  t.family = TaskFamily::lift;
  t.color = ColorName::yellow;
  EXPECT_THROW(expert_action(hand_scene(), t), TaskError);
}

TEST(Expert, CompletesEveryFamilyOnFiveHundredSeedsWithinBounds) {
  for (TaskFamily family : kAllFamilies) {
    int attempted = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      WorldState s = make_env(seed, Palette::A, seed % 2 ? SceneKind::tall_short : SceneKind::standard);
      if (family == TaskFamily::place) {
        const auto lifts = tasks_of(s, TaskFamily::lift);
        ASSERT_FALSE(lifts.empty());
        ASSERT_TRUE(run_expert(s, lifts[seed % lifts.size()]));
      }
      const auto tasks = tasks_of(s, family);
      if (tasks.empty()) continue;
      ++attempted;
      const TaskSpec& t = tasks[seed % tasks.size()];
      const WorldState start = s;
      bool done = false;
      for (int step = 0; step < 40 && !done; ++step) {
        const Action a = expert_action(s, t);
        for (double v : a.pose) ASSERT_LE(std::abs(v), kDefaultClipBound);
        s = step_env(s, a);
        done = task_success(s, start, t);
      }
      ASSERT_TRUE(done) << to_string(family) << " seed " << seed;
    }
    EXPECT_GT(attempted, 300) << to_string(family);
  }
}

TEST(Chains, ExpertCompletesEveryChain) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ChainSpec chain = sample_chain(seed, Palette::B);
    ASSERT_EQ(chain.tasks.size(), static_cast<std::size_t>(kChainLength));
    const ChainResult r = rollout_chain_expert(chain);
    for (bool ok : r.successes) ASSERT_TRUE(ok) << seed;
  }
}

TEST(Chains, SamplingIsDeterministicAndHonorsFirstFamily) {
  ChainOptions options;
  options.first_families = {TaskFamily::lift};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ChainSpec a = sample_chain(seed, Palette::D, options);
    EXPECT_EQ(a, sample_chain(seed, Palette::D, options));
    EXPECT_EQ(a.tasks[0].family, TaskFamily::lift);
    // a lift leaves the block in hand, so only place can follow
    EXPECT_EQ(a.tasks[1].family, TaskFamily::place);
  }
}

TEST(Chains, DepthCriticalChainsTargetTheSameColorPair) {
  ChainOptions options;
  options.scene = SceneKind::tall_short;
  options.first_families = {TaskFamily::lift};
  options.depth_critical = true;
  std::set<Qualifier> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const ChainSpec c = sample_chain(seed, Palette::A, options);
    ASSERT_NE(c.tasks[0].qualifier, Qualifier::none);
    seen.insert(c.tasks[0].qualifier);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(Rollout, RandomPolicyRarelyCompletesTaskOne) {
  int first = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RandomPolicy policy(seed);
    const ChainResult r = rollout_chain(policy, sample_chain(seed, Palette::A), kDefaultHorizon, seed);
    first += r.successes[0];
    for (int i = 1; i < kChainLength; ++i)
      if (!r.successes[i - 1]) ASSERT_FALSE(r.successes[i]);
  }
  EXPECT_LT(first, 10);  // measured 2 / 200; regression bound < 5%
}

TEST(Rollout, ChainResultJsonLine) {
  ChainResult r;
  r.chain_id = 3;
  r.seed = 17;
  r.palette = Palette::D;
  r.successes = {true, true, false, false, false};
  EXPECT_EQ(r.to_json_line(),
            R"({"chain_id":3,"seed":17,"palette":"D","successes":[true,true,false,false,false]})");
}

TEST(Language, ParaphraseIsSeededAndInVocabulary) {
  const auto words = instruction_words();
  const std::set<std::string> vocab(words.begin(), words.end());
  const WorldState s = make_env(1, Palette::A, SceneKind::tall_short);
  for (TaskFamily f : kAllFamilies) {
    ASSERT_GE(default_bank().at(f).size(), 10u);
    std::vector<TaskSpec> tasks = valid_tasks(s, {f});
    if (tasks.empty()) {
      TaskSpec t;
      t.family = f;
      t.color = ColorName::red;
      tasks.push_back(t);
    }
    for (const TaskSpec& t : tasks) {
      Rng a(5), b(5);
      for (int i = 0; i < 20; ++i) {
        const std::string text = paraphrase_instruction(t, a);
        EXPECT_EQ(text, paraphrase_instruction(t, b));
        std::istringstream in(text);
        for (std::string w; in >> w;) ASSERT_TRUE(vocab.count(w)) << w;
      }
    }
  }
}

TEST(Language, CanonicalInstructionIsInTheBank) {
  TaskSpec t;
  t.family = TaskFamily::place;
  t.color = ColorName::blue;
  EXPECT_EQ(canonical_instruction(t), "place the blue block in the bin");
  EXPECT_EQ(default_bank().at(TaskFamily::place).front(), "place the {obj} in the bin");
}

TEST(Language, MissingFamilyIsABankError) {
  ParaphraseBank bank = default_bank();
  bank.erase(TaskFamily::slide);
  TaskSpec t;
  t.family = TaskFamily::slide;
  Rng rng(1);
  EXPECT_THROW(paraphrase_instruction(t, rng, bank), BankError);
}

TEST(Dataset, ReproducibleAndPaletteFiltered) {
  const auto a = generate_dataset(6, 11, {Palette::A, Palette::B, Palette::C}, true);
  const auto b = generate_dataset(6, 11, {Palette::A, Palette::B, Palette::C}, true);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NE(a[i].palette, Palette::D);
    EXPECT_EQ(a[i].instruction, b[i].instruction);
    ASSERT_EQ(a[i].steps.size(), b[i].steps.size());
    for (std::size_t t = 0; t < a[i].steps.size(); ++t) {
      EXPECT_EQ(a[i].steps[t].action, b[i].steps[t].action);
      EXPECT_EQ(a[i].steps[t].obs.rgb_gripper, b[i].steps[t].obs.rgb_gripper);
    }
  }
}

TEST(Dataset, EveryTrajectoryReplaysToSuccess) {
  DatasetOptions options;
  options.families = {TaskFamily::lift, TaskFamily::place, TaskFamily::press};
  const auto data = generate_dataset(30, 5, {Palette::A}, false, options);
  for (const Trajectory& traj : data) {
    ChainOptions chain_options;
    chain_options.first_families = {TaskFamily::lift, TaskFamily::press};
    const ChainSpec chain = sample_chain(traj.seed, traj.palette, chain_options);
    WorldState s = make_env(traj.seed, traj.palette);
    std::size_t k = 0;
    while (!options.families.count(chain.tasks[k].family)) ASSERT_TRUE(run_expert(s, chain.tasks[k++]));
    const WorldState start = s;
    for (const Step& step : traj.steps) s = step_env(s, step.action);
    EXPECT_TRUE(task_success(s, start, chain.tasks[k]));
    EXPECT_EQ(traj.family, chain.tasks[k].family);
  }
}
