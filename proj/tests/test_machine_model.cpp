// Copyright 2026 The portscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

namespace portscope {
namespace {

using testing::R;
using testing::shipped;
using testing::vec;

constexpr const char* kSklHeader =
    "arch: skl\n"
    "slots: P0,0DV,P1,P2,P3,P4,P5,P6,P7\n"
    "divider: 0DV->P0\n"
    "agu_sharing: false\n"
    "units: P0|P1|P5|P6; P0|P1|P5; P0|P1; P2|P3; P2|P3|P7; P0; 0DV; P1; P4; P5; P6; P7\n";

constexpr const char* kZenHeader =
    "arch: zen\n"
    "slots: P0,P1,P2,P3,3DV,P4,P5,P6,P7,P8,P9\n"
    "divider: 3DV->P3\n"
    "agu_sharing: true\n"
    "agu_slots: P8,P9\n"
    "units: P0|P1|P2|P3; P0|P1; P2|P3; P4|P5|P6|P7; P8|P9\n";

MicroOpGroup group(const PortModel& m, std::initializer_list<const char*> names, Rational cy) {
  MicroOpGroup g;
  for (auto n : names) g.slots.push_back(*m.slot_index(n));
  std::sort(g.slots.begin(), g.slots.end());
  g.cycles = cy;
  return g;
}

const InstructionForm kFmaXmmMem{"vfmadd132pd",
                                 {OperandClass::kMem, OperandClass::kXmm, OperandClass::kXmm}};

TEST(FormKey, ListsDestinationFirst) {
  EXPECT_EQ(form_key(kFmaXmmMem), "vfmadd132pd-xmm_xmm_mem");
  auto back = parse_form_key("vfmadd132pd-xmm_xmm_mem");
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, kFmaXmmMem);
  EXPECT_EQ(form_key({"ja", {OperandClass::kLabel}}), "ja-label");
  EXPECT_EQ(form_key({"vzeroupper", {}}), "vzeroupper");
  EXPECT_FALSE(parse_form_key("vaddpd-xmm_foo"));
  EXPECT_FALSE(parse_form_key(""));
}

TEST(LoadModel, SklFmaLineYieldsTwoGroups) {
  auto db = parse_model(std::string(kSklHeader) +
                        "vfmadd132pd-xmm_xmm_mem, 0.5, 4.0, \\\n"
                        "\t\t  \"(0.5,0,0.5,0.5,0.5,0,0,0,0)\"\n");
  const auto& m = db.port_model();
  const ModelEntry* e = db.lookup(kFmaXmmMem);
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->reciprocal_throughput, R(1, 2));
  EXPECT_EQ(e->latency, R(4));
  std::vector<MicroOpGroup> want{group(m, {"P0", "P1"}, 1), group(m, {"P2", "P3"}, 1)};
  EXPECT_EQ(e->groups, want);
}

TEST(LoadModel, ZenFmaLineYieldsTwoGroups) {
  auto db = parse_model(std::string(kZenHeader) +
                        "vfmadd132pd-xmm_xmm_mem, 0.5, 5.0, \\\n"
                        "\t\t  \"(0.5,0.5,0,0,0,0,0,0,0,0.5,0.5)\"\n");
  const auto& m = db.port_model();
  const ModelEntry* e = db.lookup(kFmaXmmMem);
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->latency, R(5));
  std::vector<MicroOpGroup> want{group(m, {"P0", "P1"}, 1), group(m, {"P8", "P9"}, 1)};
  EXPECT_EQ(e->groups, want);
}

TEST(LoadModel, EmptyEntrySectionIsValid) {
  auto db = parse_model(kZenHeader);
  EXPECT_EQ(db.size(), 0u);
  EXPECT_EQ(db.port_model().size(), 11u);
  EXPECT_TRUE(db.port_model().agu_load_store_sharing);
  EXPECT_EQ(db.port_model().divider_parent(4), std::optional<std::size_t>(3));
}

TEST(LoadModel, ExplicitGroupsOverrideInference) {
  auto db = parse_model(std::string(kSklHeader) +
                        "foo-xmm, 1.0, 1.0, \"(0.5,0,0.5,0,0,0,0,0,0)\", \"[P0:0.5;P1:0.5]\"\n");
  const auto& m = db.port_model();
  const ModelEntry* e = db.lookup({"foo", {OperandClass::kXmm}});
  ASSERT_NE(e, nullptr);
  std::vector<MicroOpGroup> want{group(m, {"P0"}, R(1, 2)), group(m, {"P1"}, R(1, 2))};
  EXPECT_EQ(e->groups, want);
  // The groups field survives a save because inference alone would merge them.
  EXPECT_NE(format_entry_line(*e, m).find("[P0:0.5;P1:0.5]"), std::string::npos);
}

TEST(LoadModel, WithoutUnitsEqualValuesFormOneGroup) {
  auto db = parse_model(
      "arch: t\nslots: A,B,C\nagu_sharing: false\nx-xmm, 0.5, 1, \"(0.5,0.5,0)\"\n");
  const ModelEntry* e = db.lookup({"x", {OperandClass::kXmm}});
  ASSERT_NE(e, nullptr);
  ASSERT_EQ(e->groups.size(), 1u);
  EXPECT_EQ(e->groups[0].slots, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(e->groups[0].cycles, R(1));
}

TEST(LoadModel, AmbiguousCoverWarns) {
  std::vector<std::string> warnings;
  parse_model("arch: t\nslots: A,B,C,D\nagu_sharing: false\nunits: A|B; C|D; A|C; B|D\n"
              "x-xmm, 0.5, 1, \"(0.5,0.5,0.5,0.5)\"\n",
              &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("line 5"), std::string::npos);
}

TEST(LoadModel, ErrorsCarryLineNumbers) {
  struct Case {
    std::string body;
    int line;
    std::string needle;
  };
  const std::string h = kSklHeader;  // 5 lines
  const std::vector<Case> cases = {
      {"x-xmm, 1, 1\n", 6, "fields"},
      {"x-xmm, 1, 1, \"(1,0,0)\"\n", 6, "vector length"},
      {"\nx-xmm, 1, 1, \"(1,0,0,0,0,0,0,0,0)\", \"[P9:1]\"\n", 7, "unknown slot"},
      {"x-xmm, 1, 1, \"(1,0,0,0,0,0,0,0,0)\", \"[P1:1]\"\n", 6, "does not match"},
      {"x-xmm, 1, 1, \"(1,0,0,0,0,0,0,0,0)\"\nx-xmm, 1, 1, \"(1,0,0,0,0,0,0,0,0)\"\n", 7,
       "duplicate"},
      {"x-bogus, 1, 1, \"(1,0,0,0,0,0,0,0,0)\"\n", 6, "malformed instruction form"},
      {"x-xmm, one, 1, \"(1,0,0,0,0,0,0,0,0)\"\n", 6, "malformed"},
  };
  for (const auto& c : cases) {
    try {
      parse_model(h + c.body);
      ADD_FAILURE() << "accepted: " << c.body;
    } catch (const ModelError& e) {
      EXPECT_EQ(e.line(), c.line) << c.body;
      EXPECT_NE(std::string(e.what()).find(c.needle), std::string::npos) << e.what();
    }
  }
}

TEST(LoadModel, HeaderErrors) {
  EXPECT_THROW(parse_model("arch: t\nslots: A,A\n"), ModelError);
  EXPECT_THROW(parse_model("arch: t\nslots: A,B\nagu_sharing: maybe\n"), ModelError);
  EXPECT_THROW(parse_model("arch: t\nslots: A,B\nagu_sharing: true\n"), ModelError);
  EXPECT_THROW(parse_model("arch: t\nslots: A,B\ndivider: A->Z\n"), ModelError);
  EXPECT_THROW(parse_model("slots: A,B\n"), ModelError);
  EXPECT_THROW(parse_model("arch: t\nslots: A\ncolour: blue\n"), ModelError);
}

TEST(Lookup, ShippedSklFmaYmmMem) {
  const auto& db = shipped("skl");
  const auto& m = db.port_model();
  const ModelEntry* e =
      db.lookup({"vfmadd132pd", {OperandClass::kMem, OperandClass::kYmm, OperandClass::kYmm}});
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->occupation, vec("0.5,0,0.5,0.5,0.5,0,0,0,0"));
  std::vector<MicroOpGroup> want{group(m, {"P0", "P1"}, 1), group(m, {"P2", "P3"}, 1)};
  EXPECT_EQ(e->groups, want);
}

TEST(Lookup, ShippedZenVaddpdUsesP2P3) {
  const auto& db = shipped("zen");
  const ModelEntry* e =
      db.lookup({"vaddpd", {OperandClass::kXmm, OperandClass::kXmm, OperandClass::kXmm}});
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->reciprocal_throughput, R(1, 2));
  ASSERT_EQ(e->groups.size(), 1u);
  EXPECT_EQ(e->groups[0], group(db.port_model(), {"P2", "P3"}, 1));
}

TEST(Lookup, AbsentFormIsNull) {
  EXPECT_EQ(shipped("skl").lookup({"bogus", {OperandClass::kGpr64}}), nullptr);
}

TEST(AddEntry, ZenFmaSavesAsListedLine) {
  auto db = parse_model(kZenHeader);
  const auto& m = db.port_model();
  auto entry = make_entry(kFmaXmmMem, R(1, 2), R(5),
                          {group(m, {"P8", "P9"}, 1), group(m, {"P0", "P1"}, 1)}, m);
  auto updated = add_entry(db, entry);
  EXPECT_EQ(db.size(), 0u);
  EXPECT_NE(save_model(updated).find(
                "vfmadd132pd-xmm_xmm_mem, 0.5, 5.0, \"(0.5,0.5,0,0,0,0,0,0,0,0.5,0.5)\"\n"),
            std::string::npos);
  ASSERT_NE(updated.lookup(kFmaXmmMem), nullptr);
  EXPECT_EQ(*updated.lookup(kFmaXmmMem), entry);
  EXPECT_THROW(add_entry(updated, entry), ModelError);
}

TEST(AddEntry, RejectsWrongVectorLength) {
  auto db = parse_model(kZenHeader);
  ModelEntry e{kFmaXmmMem, R(1, 2), R(5), {}, std::vector<Rational>(10, R(0))};
  EXPECT_THROW(db.insert(e), ModelError);
}

TEST(MakeEntry, RejectsBadGroups) {
  const auto& m = shipped("skl").port_model();
  EXPECT_THROW(make_entry(kFmaXmmMem, R(1), R(1), {MicroOpGroup{{}, R(1)}}, m), ModelError);
  EXPECT_THROW(make_entry(kFmaXmmMem, R(1), R(1), {MicroOpGroup{{0}, R(0)}}, m), ModelError);
  EXPECT_THROW(make_entry(kFmaXmmMem, R(1), R(1), {MicroOpGroup{{0, 0}, R(1)}}, m), ModelError);
  EXPECT_THROW(make_entry(kFmaXmmMem, R(1), R(1), {MicroOpGroup{{42}, R(1)}}, m), ModelError);
  EXPECT_THROW(make_entry(kFmaXmmMem, R(-1), R(1), {}, m), ModelError);
}

TEST(ThroughputWarning, FlagsSlotBusierThanThroughput) {
  const auto& m = shipped("skl").port_model();
  auto ok = make_entry(kFmaXmmMem, R(1, 2), R(4), {group(m, {"P0", "P1"}, 1)}, m);
  EXPECT_FALSE(throughput_warning(ok, m));
  auto bad = make_entry(kFmaXmmMem, R(1, 4), R(4), {group(m, {"P0", "P1"}, 1)}, m);
  EXPECT_TRUE(throughput_warning(bad, m));
  // Divider pipes may exceed it: vdivpd holds 0DV for 8 cy at rTP 8.
  auto div = make_entry(kFmaXmmMem, R(8), R(14), {group(m, {"P0"}, 1), group(m, {"0DV"}, 8)}, m);
  EXPECT_FALSE(throughput_warning(div, m));
}

TEST(ShippedModels, LoadWithoutWarnings) {
  for (const char* arch : {"skl", "zen"}) {
    std::vector<std::string> warnings;
    load_model(std::string(PORTSCOPE_MODEL_DIR) + "/" + arch + ".model", &warnings);
    EXPECT_TRUE(warnings.empty()) << arch << ": " << (warnings.empty() ? "" : warnings[0]);
  }
}

TEST(ShippedModels, DividerEntriesChargeParentOneCycle) {
  const auto& db = shipped("skl");
  const auto& m = db.port_model();
  const ModelEntry* e =
      db.lookup({"vdivpd", {OperandClass::kYmm, OperandClass::kYmm, OperandClass::kYmm}});
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->occupation[*m.slot_index("P0")], R(1));
  EXPECT_EQ(e->occupation[*m.slot_index("0DV")], R(8));
}

}  // namespace
}  // namespace portscope
