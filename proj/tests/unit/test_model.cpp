#include <doctest.h>

#include <cmath>

#include "idn/autoencoder.hpp"
#include "idn/model.hpp"
#include "idn/rng.hpp"
#include "idn/transforms.hpp"

using namespace idn;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.n_verbs = 3;
  c.appearance = {6, 3, 3};
  c.union_location_width = 4;
  c.ae_hidden = 16;
  c.code_width = 4;
  return c;
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (Real& x : t.data()) x = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("widths") {
  const ModelConfig full = ModelConfig::full_scale(117);
  CHECK_NOTHROW(full.validate());
  CHECK(full.union_input_width() == 4608);
  CHECK(full.human_input_width() + full.object_input_width() == 4608);
  CHECK(full.encoder_spec().output_width() == 1024);

  const ModelConfig desk = ModelConfig::desk_scale(8);
  CHECK_NOTHROW(desk.validate());
  CHECK(desk.union_input_width() == 32);
  CHECK(desk.transform_hidden_width() == desk.code_width);

  ModelConfig odd = desk;
  odd.union_location_width = 15;
  CHECK_THROWS_AS(odd.validate(), ConfigError);
  ModelConfig lopsided = desk;
  lopsided.appearance.human_width = 9;
  CHECK_THROWS_AS(lopsided.validate(), ConfigError);
}

TEST_CASE("init_model creates every expected parameter") {
  const IdnModel m = init_model(tiny(), 4);
  CHECK_NOTHROW(check_model_params(m));
  for (int v = 0; v < 3; ++v) {
    CHECK(m.params.contains(weight_name(names::integration(v), 0)));
    CHECK(m.params.contains(weight_name(names::decomposition(v), 1)));
  }
  CHECK(init_model(tiny(), 4).params.values() == m.params.values());
  CHECK(init_model(tiny(), 5).params.values() != m.params.values());
  const ParamSet comp = compressor_params(m);
  CHECK(comp.contains(weight_name(names::kEncoder, 0)));
  CHECK_FALSE(comp.contains(weight_name(names::integration(0), 0)));
}

TEST_CASE("autoencoder with a zero decoder outputs its last bias") {
  IdnModel m = init_model(tiny(), 1);
  for (const auto& name : m.params.names_with_prefix(names::kDecoder)) m.params.mutable_at(name).fill(0);
  Tensor& b = m.params.mutable_at(bias_name(names::kDecoder, 1));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.1 * static_cast<Real>(i);
  Rng rng(2);
  const Tensor out = decode(m, encode(m, random_matrix(5, 10, rng)));
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 10; ++c) CHECK(out.at(r, c) == b[c]);
  }
}

TEST_CASE("autoencoder overfits a small batch") {
  ModelConfig cfg = tiny();
  cfg.code_width = 10;
  IdnModel m = init_model(cfg, 3);
  Rng rng(3);
  const Tensor x = random_matrix(4, 10, rng);
  const Tensor labels = Tensor::matrix(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0});
  Real recon = 1;
  for (int step = 0; step < 4000 && recon >= 1e-4; ++step) {
    Graph g(&m.params);
    const auto l = ae_losses(g, cfg, g.constant(x), labels);
    recon = g.scalar(l.recon);
    sgd_step(m.params, g.backward(l.recon), 0.05, 0.9);
  }
  CHECK(recon < 1e-4);
  CHECK(ae_losses(m, x, labels).recon < 1e-4);
}

TEST_CASE("transforms with zero weights output their bias") {
  IdnModel m = init_model(tiny(), 6);
  for (int v = 0; v < 3; ++v) {
    for (const auto& prefix : {names::integration(v), names::decomposition(v)}) {
      for (const auto& name : m.params.names_with_prefix(prefix)) m.params.mutable_at(name).fill(0);
      m.params.mutable_at(bias_name(prefix, 1)).fill(v + 1);
    }
  }
  Rng rng(6);
  const Tensor code = random_matrix(2, 4, rng);
  const auto unions = integrate(m, code);
  REQUIRE(unions.size() == 3);
  for (int v = 0; v < 3; ++v) {
    for (Real x : unions[static_cast<std::size_t>(v)].data()) CHECK(x == v + 1);
  }
  const auto parts = decompose(m, unions);
  for (int v = 0; v < 3; ++v) {
    for (Real x : parts[static_cast<std::size_t>(v)].data()) CHECK(x == v + 1);
  }
  // Distance from a zero reference to a constant row of width 4 is 2c.
  const Tensor d = union_distances(Tensor({2, 4}), unions);
  CHECK(d.shape() == Shape{2, 3});
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t v = 0; v < 3; ++v) CHECK(d.at(r, v) == doctest::Approx(2.0 * static_cast<Real>(v + 1)));
  }
}

TEST_CASE("verbs with identical weights integrate identically") {
  IdnModel m = init_model(tiny(), 7);
  for (const auto& name : m.params.names_with_prefix(names::integration(0))) {
    std::string other = name;
    other.replace(other.find("verb.0"), 6, "verb.2");
    m.params.assign(other, m.params.at(name));
  }
  Rng rng(7);
  const auto unions = integrate(m, random_matrix(3, 4, rng));
  CHECK(unions[0] == unions[2]);
  CHECK(unions[0] != unions[1]);
}

TEST_CASE("distances are non-negative and zero on identical inputs (property)") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor ref = random_matrix(3, 4, rng);
    std::vector<Tensor> cands = {random_matrix(3, 4, rng), ref};
    const Tensor d = ho_distances(ref, cands);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(d.at(r, 0) >= 0);
      CHECK(d.at(r, 1) == 0);
    }
  }
}

TEST_CASE("interactiveness lies in (0, 1)") {
  const IdnModel m = init_model(tiny(), 9);
  Rng rng(9);
  const Tensor p = interactiveness(m, random_matrix(20, 4, rng));
  for (Real x : p.data()) {
    CHECK(x > 0);
    CHECK(x < 1);
  }
}
