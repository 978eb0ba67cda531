/*
 * Copyright 2026 The FedSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedsim/dataset.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "fedsim/model.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace fedsim {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

double ChiSquarePValue(const std::vector<int>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / counts.size();
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Dataset BalancedDataset(size_t per_class, int classes) {
  Dataset data;
  data.num_features = 2;
  data.num_classes = classes;
  for (int c = 0; c < classes; ++c) {
    for (size_t i = 0; i < per_class; ++i) {
      data.features.push_back(c);
      data.features.push_back(static_cast<double>(i));
      data.labels.push_back(c);
    }
  }
  return data;
}

TEST(IdxTest, ParsesLabelVector) {
  std::vector<uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 2, 7, 3};
  auto t = ParseIdx(bytes);
  ASSERT_TRUE(t.ok()) << t.status();
  EXPECT_EQ(t->magic, kIdxLabelMagic);
  EXPECT_THAT(t->dims, ElementsAre(2u));
  EXPECT_THAT(t->values, ElementsAre(7, 3));
}

TEST(IdxTest, ParsesImageTensor) {
  std::vector<uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0,    0, 0,
                                2, 0, 0, 0, 2, 0xFF, 0, 0, 0xFF};
  auto t = ParseIdx(bytes);
  ASSERT_TRUE(t.ok()) << t.status();
  EXPECT_THAT(t->dims, ElementsAre(1u, 2u, 2u));
  EXPECT_THAT(t->Normalized(), ElementsAre(1.0, 0.0, 0.0, 1.0));
}

TEST(IdxTest, RejectsWrongMagic) {
  std::vector<uint8_t> bytes = {0, 0, 8, 2, 0, 0, 0, 1, 5};
  auto t = ParseIdx(bytes);
  EXPECT_EQ(t.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_THAT(t.status().message(), HasSubstr("0x00000802"));
}

TEST(IdxTest, RejectsTruncatedPayload) {
  std::vector<uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 3, 7, 3};
  EXPECT_EQ(ParseIdx(bytes).status().code(), absl::StatusCode::kOutOfRange);
  std::vector<uint8_t> header_only = {0, 0, 8, 3, 0, 0, 0, 1};
  EXPECT_EQ(ParseIdx(header_only).status().code(),
            absl::StatusCode::kOutOfRange);
}

TEST(IdxTest, RoundTripRandomTensor) {
  RngStream rng(12);
  IdxTensor t;
  t.magic = kIdxImageMagic;
  t.dims = {3, 4, 4};
  for (int i = 0; i < 48; ++i) t.values.push_back(rng.Index(256));
  auto back = ParseIdx(SerializeIdx(t));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->magic, t.magic);
  EXPECT_EQ(back->dims, t.dims);
  EXPECT_EQ(back->values, t.values);
}

TEST(IdxTest, LoadsImageAndLabelFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_idx_test";
  std::filesystem::create_directories(dir);
  IdxTensor images{kIdxImageMagic, {2, 2, 2}, {0, 255, 51, 0, 0, 0, 255, 255}};
  IdxTensor labels{kIdxLabelMagic, {2}, {4, 9}};
  for (auto [name, tensor] : {std::pair{"img", &images}, {"lbl", &labels}}) {
    auto bytes = SerializeIdx(*tensor);
    std::ofstream(dir / name, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  auto data = LoadIdxDataset((dir / "img").string(), (dir / "lbl").string());
  ASSERT_TRUE(data.ok()) << data.status();
  EXPECT_EQ(data->num_features, 4u);
  EXPECT_EQ(data->num_classes, 10);
  EXPECT_THAT(data->labels, ElementsAre(4, 9));
  EXPECT_DOUBLE_EQ(data->features[2], 0.2);
  EXPECT_EQ(LoadIdxDataset((dir / "missing").string(), (dir / "lbl").string())
                .status()
                .code(),
            absl::StatusCode::kNotFound);
}

TEST(SynthTest, DeterministicPerSeed) {
  auto a = SynthClassification(90, 4, 3, 2.0, 5);
  auto b = SynthClassification(90, 4, 3, 2.0, 5);
  auto c = SynthClassification(90, 4, 3, 2.0, 6);
  ASSERT_TRUE(a.ok());
  EXPECT_EQ(a->features, b->features);
  EXPECT_EQ(a->labels, b->labels);
  EXPECT_NE(a->features, c->features);
  EXPECT_TRUE(a->Validate().ok());
  EXPECT_FALSE(SynthClassification(2, 4, 3, 1.0, 1).ok());
}

TEST(SynthTest, WellSeparatedClustersAreLearnable) {
  auto data = SynthClassification(300, 5, 3, 10.0, 3);
  ModelShape shape = ModelShape::For(*data);
  auto opt = SolveReferenceOptimum(shape, *data, 0.1, {1e-8});
  ASSERT_TRUE(opt.ok());
  EXPECT_GE(Accuracy(shape, opt->params, *data), 0.95);
}

TEST(SynthTest, ZeroSeparationIsChance) {
  double mean_acc = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto data = SynthClassification(3000, 5, 3, 0.0, seed);
    ModelShape shape = ModelShape::For(*data);
    auto opt = SolveReferenceOptimum(shape, *data, 0.1, {1e-8});
    ASSERT_TRUE(opt.ok());
    mean_acc += Accuracy(shape, opt->params, *data) / 5.0;
  }
  EXPECT_NEAR(mean_acc, 1.0 / 3.0, 0.05);
}

void ExpectDisjoint(const std::vector<DevicePartition>& parts, size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& p : parts) {
    for (size_t i : p.sample_indices) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (int s : seen) EXPECT_LE(s, 1);
}

TEST(PartitionTest, AllLabelsCoversDataset) {
  Dataset data = BalancedDataset(53, 10);
  auto parts = PartitionLabelSkew(data, 7, 10, 3);
  ASSERT_TRUE(parts.ok());
  size_t total = 0, lo = SIZE_MAX, hi = 0;
  for (const auto& p : *parts) {
    total += p.size();
    lo = std::min(lo, p.size());
    hi = std::max(hi, p.size());
  }
  EXPECT_EQ(total, data.size());
  EXPECT_LE(hi - lo, 1u);
  ExpectDisjoint(*parts, data.size());
}

TEST(PartitionTest, OneLabelPerDevice) {
  Dataset data = BalancedDataset(20, 10);
  auto parts = PartitionLabelSkew(data, 10, 1, 8);
  ASSERT_TRUE(parts.ok());
  std::set<int> labels_seen;
  for (const auto& p : *parts) {
    std::set<int> labels;
    for (size_t i : p.sample_indices) labels.insert(data.labels[i]);
    ASSERT_EQ(labels.size(), 1u);
    labels_seen.insert(*labels.begin());
    EXPECT_EQ(p.size(), 20u);
  }
  EXPECT_EQ(labels_seen.size(), 10u);
}

TEST(PartitionTest, TwoLabelsOverHundredDevices) {
  Dataset data = BalancedDataset(1000, 10);
  auto parts = PartitionLabelSkew(data, 100, 2, 1);
  ASSERT_TRUE(parts.ok());
  for (const auto& p : *parts) {
    EXPECT_EQ(p.size(), 100u);
    std::set<int> labels;
    for (size_t i : p.sample_indices) labels.insert(data.labels[i]);
    EXPECT_EQ(labels.size(), 2u);
  }
  ExpectDisjoint(*parts, data.size());
}

TEST(PartitionTest, LabelBoundHoldsForUnbalancedData) {
  auto data = SynthClassification(997, 3, 10, 1.0, 4);
  data->labels[0] = 0;  // nudge counts off balance
  for (int n_digits = 1; n_digits <= 10; ++n_digits) {
    auto parts = PartitionLabelSkew(*data, 13, n_digits, n_digits);
    ASSERT_TRUE(parts.ok()) << parts.status();
    size_t lo = SIZE_MAX, hi = 0;
    for (const auto& p : *parts) {
      std::set<int> labels;
      for (size_t i : p.sample_indices) labels.insert(data->labels[i]);
      EXPECT_LE(labels.size(), static_cast<size_t>(n_digits));
      lo = std::min(lo, p.size());
      hi = std::max(hi, p.size());
    }
    EXPECT_LE(hi - lo, 1u);
    ExpectDisjoint(*parts, data->size());
  }
}

TEST(PartitionTest, Errors) {
  Dataset data = BalancedDataset(3, 10);
  EXPECT_FALSE(PartitionLabelSkew(data, 10, 0, 1).ok());
  EXPECT_FALSE(PartitionLabelSkew(data, 10, 11, 1).ok());
  EXPECT_FALSE(PartitionLabelSkew(data, 0, 2, 1).ok());
  auto too_small = PartitionLabelSkew(data, 100, 2, 1);
  EXPECT_EQ(too_small.status().code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_THAT(too_small.status().message(), HasSubstr("Class"));
}

TEST(PartitionTest, DeterministicPerSeed) {
  Dataset data = BalancedDataset(100, 10);
  auto a = PartitionLabelSkew(data, 20, 3, 9);
  auto b = PartitionLabelSkew(data, 20, 3, 9);
  for (size_t i = 0; i < a->size(); ++i) {
    EXPECT_EQ((*a)[i].sample_indices, (*b)[i].sample_indices);
  }
}

TEST(SubsampleTest, FullSampleIsPermutation) {
  DevicePartition part{3, {10, 11, 12, 13, 14, 15}};
  RngStream rng(1);
  auto s = Subsample(part, 6, rng);
  ASSERT_TRUE(s.ok());
  auto sorted = *s;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, part.sample_indices);
}

TEST(SubsampleTest, SingleDrawIsUniform) {
  DevicePartition part;
  for (size_t i = 0; i < 10; ++i) part.sample_indices.push_back(100 + i);
  RngStream rng(77);
  std::vector<int> counts(10, 0);
  for (int draw = 0; draw < 10000; ++draw) {
    auto s = Subsample(part, 1, rng);
    ASSERT_EQ(s->size(), 1u);
    ++counts[(*s)[0] - 100];
  }
  EXPECT_GT(ChiSquarePValue(counts), 0.01);
}

TEST(SubsampleTest, UniqueWithinPartitionAndRejectsOversize) {
  DevicePartition part;
  for (size_t i = 0; i < 50; ++i) part.sample_indices.push_back(3 * i);
  RngStream rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = Subsample(part, 1 + trial % 50, rng);
    std::set<size_t> unique(s->begin(), s->end());
    EXPECT_EQ(unique.size(), s->size());
    for (size_t i : *s) EXPECT_EQ(i % 3, 0u);
  }
  EXPECT_EQ(Subsample(part, 51, rng).status().code(),
            absl::StatusCode::kInvalidArgument);
}

}  // namespace
}  // namespace fedsim
