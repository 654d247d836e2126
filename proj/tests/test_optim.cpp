#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "artgan/error.hpp"
#include "artgan/optim.hpp"
#include "artgan/param_store.hpp"

using namespace artgan;
using artgan::nn::EntryKind;
using artgan::nn::ParamStore;
using artgan::optim::RmsProp;

namespace {

ParamStore scalar_store(double value = 0.0) {
  ParamStore s;
  s.add("w", "G", EntryKind::parameter, Tensor({1}, value));
  s.add("running_mean", "G", EntryKind::buffer, Tensor({1}, 3.0));
  return s;
}

}  // namespace

TEST_CASE("single RMSProp step from zero state") {
  ParamStore s = scalar_store();
  RmsProp opt(s);
  s.grad(0)[0] = 1.0;
  opt.step(s, 1e-3);
  const double expected = -1e-3 / (std::sqrt(0.1) + 1e-8);
  CHECK(std::abs(s.value(0)[0] - expected) < 1e-9);
  CHECK(std::abs(s.value(0)[0] - (-0.0031623)) < 1e-7);
  CHECK(opt.accumulators()[0][0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(opt.steps() == 1);
}

TEST_CASE("accumulator after two steps") {
  ParamStore s = scalar_store();
  RmsProp opt(s);
  s.grad(0)[0] = 1.0;
  opt.step(s, 1e-3);
  opt.step(s, 1e-3);
  CHECK(opt.accumulators()[0][0] == doctest::Approx(0.19).epsilon(1e-15));
  const double second = -1e-3 / (std::sqrt(0.19) + 1e-8);
  CHECK(std::abs(s.value(0)[0] - (-1e-3 / (std::sqrt(0.1) + 1e-8) + second)) < 1e-15);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParamStore s = scalar_store(0.75);
  RmsProp opt(s);
  opt.step(s, 1e-3);
  CHECK(s.value(0)[0] == 0.75);
}

TEST_CASE("buffers are never updated") {
  ParamStore s = scalar_store();
  RmsProp opt(s);
  s.grad(0)[0] = 2.0;
  s.grad(1)[0] = 5.0;
  opt.step(s, 1e-3);
  CHECK(s.value(1)[0] == 3.0);
}

TEST_CASE("non-finite gradients are rejected before any change") {
  ParamStore s;
  s.add("a", "G", EntryKind::parameter, Tensor({2}, 1.0));
  s.add("b.weight", "D", EntryKind::parameter, Tensor({2}, 1.0));
  RmsProp opt(s);
  s.grad(0)[0] = 1.0;
  s.grad(1)[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    opt.step(s, 1e-3);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("b.weight") != std::string::npos);
  }
  CHECK(s.value(0)[0] == 1.0);
  CHECK(opt.steps() == 0);
  CHECK(opt.accumulators()[0][0] == 0.0);
}

TEST_CASE("step size approaches the learning rate under a constant gradient") {
  for (double g : {1e-4, 0.3, 50.0}) {
    ParamStore s = scalar_store();
    RmsProp opt(s);
    double before = 0.0;
    for (int i = 0; i < 200; ++i) {
      before = s.value(0)[0];
      s.grad(0)[0] = g;
      opt.step(s, 1e-3);
    }
    const double delta = std::abs(s.value(0)[0] - before);
    CHECK(delta == doctest::Approx(1e-3).epsilon(0.05));
  }
}

TEST_CASE("restore validates accumulator shapes") {
  ParamStore s = scalar_store();
  RmsProp opt(s);
  CHECK_THROWS(opt.restore({}, 3, {Tensor({2}), Tensor()}));
  CHECK_THROWS(opt.restore({}, 3, {Tensor({1})}));
  opt.restore({0.5, 1e-8}, 3, {Tensor({1}, 0.25), Tensor()});
  CHECK(opt.steps() == 3);
  CHECK(opt.config().decay == 0.5);
}

TEST_CASE("learning-rate schedule") {
  CHECK(optim::lr_at_epoch(0, 1e-3) == 1e-3);
  CHECK(optim::lr_at_epoch(79, 1e-3) == 1e-3);
  CHECK(std::abs(optim::lr_at_epoch(80, 1e-3) - 1e-4) < 1e-18);
  CHECK(std::abs(optim::lr_at_epoch(99, 1e-3) - 1e-4) < 1e-18);
  const optim::LrSchedule custom{0.01, 5, 2.0};
  CHECK(custom.at(4) == 0.01);
  CHECK(custom.at(5) == 0.005);
}

TEST_CASE("parameter store bookkeeping") {
  ParamStore s;
  const std::size_t a = s.add("a", "Enc", EntryKind::parameter, Tensor({2, 3}, 1.0));
  s.add("a.mean", "Enc", EntryKind::buffer, Tensor({3}));
  CHECK(s.index_of("a") == a);
  CHECK(s.contains("a.mean"));
  CHECK_FALSE(s.contains("b"));
  CHECK_THROWS(s.index_of("b"));
  CHECK_THROWS(s.add("a", "Dec", EntryKind::parameter, Tensor({1})));
  CHECK(s.parameter_count() == 6);
  CHECK(s.grad(a).shape() == s.value(a).shape());
  s.grad(a)[4] = 2.0;
  s.zero_grads();
  CHECK(s.grad(a)[4] == 0.0);

  ParamStore t = s;
  CHECK(nn::values_bitwise_equal(s, t));
  t.value(1)[0] = -0.0;
  CHECK_FALSE(nn::values_bitwise_equal(s, t));
}

TEST_CASE("updates are deterministic") {
  ParamStore a;
  a.add("w", "G", EntryKind::parameter, Tensor({3}, std::vector<double>{0.1, -0.2, 0.3}));
  ParamStore b = a;
  RmsProp oa(a), ob(b);
  for (int i = 0; i < 5; ++i) {
    for (ParamStore* s : {&a, &b}) {
      s->grad(0)[0] = 0.3 * i;
      s->grad(0)[1] = -1.7;
      s->grad(0)[2] = 1e-9 * i;
    }
    oa.step(a, 1e-3);
    ob.step(b, 1e-3);
  }
  CHECK(nn::values_bitwise_equal(a, b));
  CHECK(bitwise_equal(oa.accumulators()[0], ob.accumulators()[0]));
}
