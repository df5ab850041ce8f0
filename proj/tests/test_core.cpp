#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "llmopt/core.hpp"
#include "llmopt/error.hpp"

using namespace llmopt;

namespace {

ProblemInstance instance_of(std::vector<double> y, Solution init) {
  return ProblemInstance{"t", std::move(y), std::move(init), 0};
}

}  // namespace

TEST_CASE("mse_loss on hand-computed points") {
  const std::vector<double> y{2, 6, 0};
  CHECK(mse_loss(y, std::vector<double>{2, 6, 0}) == 0.0);
  CHECK(mse_loss(y, std::vector<double>{10, 10, 10}) == 60.0);
  CHECK(mse_loss(y, std::vector<double>{2, 3, 3}) == 6.0);
  CHECK(mse_loss(y, std::vector<double>{2, 3, 2}) == doctest::Approx(13.0 / 3).epsilon(1e-15));
}

TEST_CASE("mse_loss rejects arity mismatch") {
  const std::vector<double> y{1, 2, 3};
  try {
    (void)mse_loss(y, std::vector<double>{1, 2});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArityMismatch);
  }
}

TEST_CASE("mse_loss is invariant under joint permutation of coordinates") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> y(7), yhat(7);
    for (auto& v : y) v = 10 * uniform_unit(rng);
    for (auto& v : yhat) v = 20 * uniform_unit(rng) - 5;
    const double before = mse_loss(y, yhat);
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5, 6};
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> py, pyhat;
    for (auto i : order) {
      py.push_back(y[i]);
      pyhat.push_back(yhat[i]);
    }
    CHECK(mse_loss(py, pyhat) == doctest::Approx(before).epsilon(1e-12));
    CHECK(before >= 0.0);
  }
}

TEST_CASE("Solution rejects non-finite entries") {
  CHECK_THROWS_AS(Solution({1.0, NAN}), Error);
  CHECK_THROWS_AS(Solution({INFINITY}), Error);
}

TEST_CASE("validate checks arity, range and finiteness") {
  CHECK_NOTHROW(validate(instance_of({1, 2, 3}, Solution{0, 0, 0})));
  CHECK_THROWS_AS(validate(instance_of({1, 2, 3}, Solution{0, 0})), Error);
  CHECK_THROWS_AS(validate(instance_of({1, 2, 11}, Solution{0, 0, 0})), Error);
  CHECK_THROWS_AS(validate(instance_of({}, Solution{})), Error);
}

TEST_CASE("gen_dataset respects ranges and counts") {
  const std::vector<std::size_t> dims{3, 6, 12, 24, 48};
  const Dataset ds = gen_dataset(dims, 4, 2024);
  REQUIRE(ds.instances.size() == 20);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    CHECK(inst.dim() == dims[i / 4]);
    CHECK(inst.init.dim() == inst.dim());
    for (double v : inst.y) {
      CHECK(v >= 0.0);
      CHECK(v <= 10.0);
    }
    for (double v : inst.init.values()) CHECK(v == std::floor(v));
    ids.push_back(inst.id);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("gen_dataset is deterministic and seed sensitive") {
  const std::vector<std::size_t> dims{3, 6};
  const std::string a = dataset_to_jsonl(gen_dataset(dims, 3, 5));
  const std::string b = dataset_to_jsonl(gen_dataset(dims, 3, 5));
  const std::string c = dataset_to_jsonl(gen_dataset(dims, 3, 6));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("dataset JSON lines round-trip byte for byte") {
  const std::vector<std::size_t> dims{3, 48};
  const Dataset ds = gen_dataset(dims, 2, 99);
  const std::string text = dataset_to_jsonl(ds);
  std::istringstream in(text);
  const Dataset back = read_dataset(in);
  REQUIRE(back.instances.size() == ds.instances.size());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    CHECK(back.instances[i].y == ds.instances[i].y);
    CHECK(back.instances[i].init == ds.instances[i].init);
    CHECK(back.instances[i].id == ds.instances[i].id);
  }
  CHECK(dataset_to_jsonl(back) == text);
}

TEST_CASE("read_dataset rejects malformed lines") {
  std::istringstream bad(R"({"id":"x","d":3,"y":[1,2],"init":[0,0,0],"seed":1})");
  CHECK_THROWS_AS((void)read_dataset(bad), Error);
  std::istringstream junk("not json\n");
  CHECK_THROWS_AS((void)read_dataset(junk), Error);
}

TEST_CASE("uniform draws stay in range and are reproducible") {
  Rng a(3), b(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_unit(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == uniform_unit(b));
    const int k = uniform_int(a, -2, 4);
    CHECK(k >= -2);
    CHECK(k <= 4);
    CHECK(k == uniform_int(b, -2, 4));
  }
}

TEST_CASE("derive_seed separates keys and indices") {
  CHECK(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
}

TEST_CASE("number formatting") {
  CHECK(format_real(2.0) == "2");
  CHECK(format_real(1.925) == "1.925");
  CHECK(format_real(-0.0) == "0");
  CHECK(format_real(-1e-9) == "0");
  CHECK(format_real(3.7333333333) == "3.733333");
  CHECK(format_tuple(Solution{2, 6, 0}) == "(2, 6, 0)");
  CHECK(std::stod(format_exact(0.1 + 0.2)) == 0.1 + 0.2);
}
