#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "bfp/analysis.hpp"
#include "bfp/data.hpp"

using namespace bfp;

namespace {

const std::string kTrainImages = std::string(BFP_SOURCE_DIR) + "/data/mnist/train-images.idx3-ubyte";
const std::string kTrainLabels = std::string(BFP_SOURCE_DIR) + "/data/mnist/train-labels.idx1-ubyte";

std::string write_temp(const std::string& name, const std::vector<unsigned char>& bytes) {
  std::ofstream out(name, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  return name;
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

std::vector<unsigned char> cat(std::initializer_list<std::vector<unsigned char>> parts) {
  std::vector<unsigned char> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("load_idx parses a tiny hand-built pair", "[data]") {
  // Two 2x2 images; pixel 255 must map to exactly 1.0.
  auto images = cat({be32(0x803), be32(2), be32(2), be32(2),
                     {0, 128, 255, 3, 10, 20, 30, 40}});
  auto labels = cat({be32(0x801), be32(2), {7, 1}});
  const std::string ip = write_temp("tiny-images.idx", images);
  const std::string lp = write_temp("tiny-labels.idx", labels);

  const LabeledDataset ds = load_idx(ip, lp);
  CHECK(ds.size() == 2);
  CHECK(ds.width() == 4);
  CHECK(ds.labels == std::vector<int>{7, 1});
  CHECK(ds.inputs(2, 0) == 1.0);
  CHECK(ds.inputs(0, 0) == 0.0);
  CHECK(ds.inputs(1, 0) == Catch::Approx(128.0 / 255.0));

  // Round trip reproduces the original bytes exactly.
  save_idx(ds, "tiny-images-out.idx", "tiny-labels-out.idx");
  CHECK(slurp("tiny-images-out.idx") == images);
  CHECK(slurp("tiny-labels-out.idx") == labels);

  for (const char* f :
       {"tiny-images.idx", "tiny-labels.idx", "tiny-images-out.idx", "tiny-labels-out.idx"})
    std::remove(f);
}

TEST_CASE("load_idx rejects malformed files", "[data]") {
  auto bad_magic = cat({be32(0x804), be32(1), be32(1), be32(1), {0}});
  auto labels = cat({be32(0x801), be32(1), {0}});
  write_temp("bad-images.idx", bad_magic);
  write_temp("ok-labels.idx", labels);
  CHECK_THROWS_AS(load_idx("bad-images.idx", "ok-labels.idx"), FormatError);

  auto truncated = cat({be32(0x803), be32(2), be32(2), be32(2), {1, 2, 3}});
  write_temp("trunc-images.idx", truncated);
  auto labels2 = cat({be32(0x801), be32(2), {0, 1}});
  write_temp("two-labels.idx", labels2);
  CHECK_THROWS_AS(load_idx("trunc-images.idx", "two-labels.idx"), FormatError);

  // Count mismatch between the pair.
  auto one_image = cat({be32(0x803), be32(1), be32(1), be32(1), {9}});
  write_temp("one-image.idx", one_image);
  CHECK_THROWS_AS(load_idx("one-image.idx", "two-labels.idx"), FormatError);

  for (const char* f : {"bad-images.idx", "ok-labels.idx", "trunc-images.idx",
                        "two-labels.idx", "one-image.idx"})
    std::remove(f);
}

TEST_CASE("bundled digit subset loads and splits into disjoint tasks", "[data]") {
  const LabeledDataset train = load_idx(kTrainImages, kTrainLabels);
  CHECK(train.size() == 7000);
  CHECK(train.width() == 784);
  CHECK(train.class_count == 10);

  const TaskStream stream = split_by_classes(train, train, 2);
  REQUIRE(stream.task_count() == 5);
  CHECK(stream.tasks[0].classes == std::vector<int>{0, 1});

  // Every task-1 training label is in {0, 1}, and class counts match an
  // independent scan of the raw labels.
  std::size_t scan01 = 0;
  for (int y : train.labels)
    if (y == 0 || y == 1) ++scan01;
  CHECK(stream.tasks[0].train.size() == scan01);
  for (int y : stream.tasks[0].train.labels) CHECK((y == 0 || y == 1));

  const TaskStream joint = split_by_classes(train, train, 10);
  CHECK(joint.task_count() == 1);
  CHECK(joint.tasks[0].train.size() == train.size());

  CHECK_THROWS_AS(split_by_classes(train, train, 3), InvalidInput);
}

TEST_CASE("gaussian task streams are deterministic and separable", "[data]") {
  const TaskStream a = make_gaussian_tasks(3, 2, 10, 20.0, 50, 9);
  const TaskStream b = make_gaussian_tasks(3, 2, 10, 20.0, 50, 9);
  REQUIRE(a.task_count() == 3);
  CHECK(a.tasks[1].train.inputs.data == b.tasks[1].train.inputs.data);
  CHECK(a.tasks[2].classes == std::vector<int>{4, 5});

  // separation 20: a linear probe on raw inputs is near perfect.
  const TaskData& t0 = a.tasks[0];
  const double acc = linear_probe(t0.train.inputs, t0.train.labels, t0.test.inputs,
                                  t0.test.labels);
  CHECK(acc >= 0.99);

  // separation 0: all class means coincide, probe is at chance on 1000
  // test points.
  const TaskStream zero = make_gaussian_tasks(1, 2, 10, 0.0, 2500, 10);
  const TaskData& z0 = zero.tasks[0];
  REQUIRE(z0.test.size() == 1000);
  const double chance = linear_probe(z0.train.inputs, z0.train.labels, z0.test.inputs,
                                     z0.test.labels);
  CHECK(chance >= 0.45);
  CHECK(chance <= 0.55);

  CHECK_THROWS_AS(make_gaussian_tasks(0, 2, 10, 1.0, 10, 1), InvalidInput);
  CHECK_THROWS_AS(make_gaussian_tasks(3, 2, 2, 1.0, 10, 1), InvalidInput);
}

TEST_CASE("batch iteration covers each index once with a stable order", "[data]") {
  const auto batches = batch_iter(10, 3, 77);
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].size() == 3);
  CHECK(batches[3].size() == 1);

  std::vector<int> seen(10, 0);
  for (const auto& b : batches)
    for (std::size_t i : b) ++seen[i];
  for (int c : seen) CHECK(c == 1);

  const auto again = batch_iter(10, 3, 77);
  CHECK(again == batches);
  const auto other = batch_iter(10, 3, 78);
  CHECK(other != batches);
}
