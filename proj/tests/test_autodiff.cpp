// tests/test_autodiff.cpp
// Every differentiable op is checked against central finite differences.
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "codemark/audio.hpp"
#include "codemark/autodiff.hpp"
#include "codemark/nn.hpp"
#include "gradcheck.hpp"

using namespace codemark;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("conv stack with relu: parameter and input gradients match finite differences") {
  Rng rng(101);
  nn::ParamStore store;
  nn::Conv1d conv1(store, "c1", 4, 6, 3, 1, rng);
  nn::Conv1d conv2(store, "c2", 6, 3, 3, 2, rng);
  Tensor x = random_tensor(12, 4, rng);
  Tensor target = random_tensor(12, 3, rng);

  Tensor input_grad;
  auto loss_of = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    const int xin = with_grads ? tape.leaf(x) : tape.constant(x);
    int h = conv1.forward(tape, bind, xin);
    h = tape.relu(h);
    h = conv2.forward(tape, bind, h);
    const int loss = tape.mse(h, tape.constant(target));
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
      input_grad = tape.grad(xin);
    }
    return tape.val(loss).at(0, 0);
  };

  auto params = nn::params_with_prefix(store, "c");
  Rng check_rng(1);
  const auto res = gradcheck::check_params(
      params, [&] { return loss_of(false); }, [&] { return loss_of(true); }, 12, check_rng);
  CHECK(res.ok(1e-3));

  loss_of(true);
  const auto rin = gradcheck::check_input(
      x, input_grad, [&] { return loss_of(false); }, 20, check_rng);
  CHECK(rin.ok(1e-3));
}

TEST_CASE("transformer block + masked cross-entropy gradients match finite differences") {
  Rng rng(202);
  nn::ParamStore store;
  const int dim = 8, t_len = 7, vocab = 6;
  nn::Parameter* emb = store.create("emb", vocab + 1, dim);
  nn::init_normal(emb->value, 0.5, rng);
  nn::TransformerBlock block(store, "blk", dim, 2, 16, 3, rng);
  nn::LayerNorm ln(store, "ln", dim);
  nn::Linear out(store, "out", dim, vocab, rng);

  std::vector<int> ids = {0, 3, 5, 1, 2, 4, 0};
  std::vector<int> in_ids = {0, 6, 5, 1, 6, 4, 0};  // two masked slots
  std::vector<double> weights = {0, 1, 0, 0, 1, 0, 0};

  auto loss_of = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    int h = tape.embedding(bind.node(emb), in_ids);
    h = block.forward(tape, bind, h);
    h = ln.forward(tape, bind, h);
    const int logits = out.forward(tape, bind, h);
    const int loss = tape.cross_entropy_rows(logits, ids, weights);
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
    }
    return tape.val(loss).at(0, 0);
  };

  auto params = nn::params_with_prefix(store, "");
  Rng check_rng(2);
  const auto res = gradcheck::check_params(
      params, [&] { return loss_of(false); }, [&] { return loss_of(true); }, 8, check_rng);
  CHECK(res.ok(1e-3));
}

TEST_CASE("binary cross-entropy with row weights matches finite differences") {
  Rng rng(303);
  nn::ParamStore store;
  nn::Conv1d conv(store, "c", 3, 1, 3, 1, rng);
  Tensor x = random_tensor(9, 3, rng);
  std::vector<double> targets = {1, 0, 1, 1, 0, 0, 1, 0, 1};
  std::vector<double> weights = {1, 1, 0.5, 1, 0, 1, 2, 1, 1};

  auto loss_of = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    const int logits = conv.forward(tape, bind, tape.constant(x));
    const int loss = tape.bce_logits_rows(logits, targets, weights);
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
    }
    return tape.val(loss).at(0, 0);
  };
  auto params = nn::params_with_prefix(store, "c");
  Rng check_rng(3);
  const auto res = gradcheck::check_params(
      params, [&] { return loss_of(false); }, [&] { return loss_of(true); }, 10, check_rng);
  CHECK(res.ok(1e-3));
}

TEST_CASE("istft -> distortion -> stft magnitude chain matches finite differences") {
  Rng rng(404);
  audio::StftConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 16;
  cfg.win_length = 64;
  const int t_frames = 10, bins = cfg.bins();
  const int out_len = t_frames * cfg.hop;

  Tensor mag = random_tensor(t_frames, bins, rng, 0.3);
  for (double& v : mag.data) v = std::abs(v) + 0.05;  // keep |X| away from 0
  Tensor phase = random_tensor(t_frames, bins, rng, 1.5);
  Tensor ref = random_tensor(t_frames, bins, rng, 0.1);
  for (double& v : ref.data) v = std::abs(v) + 0.05;

  for (attacks::Kind kind :
       {attacks::Kind::none, attacks::Kind::amplitude_scale, attacks::Kind::gaussian_noise,
        attacks::Kind::lowpass, attacks::Kind::median_filter, attacks::Kind::echo,
        attacks::Kind::sample_suppress, attacks::Kind::pink_noise}) {
    attacks::DistortionSpec spec = attacks::random_attack_spec({kind}, 52);
    spec.lowpass_hz = 5000.0;
    Tensor grad;
    auto loss_of = [&](bool with_grads) {
      ad::Tape tape;
      const int m = with_grads ? tape.leaf(mag) : tape.constant(mag);
      const int wave = tape.istft_fixed_phase(m, phase, cfg, out_len);
      const int distorted = tape.distort(wave, spec, 24000);
      const int tmag = tape.stft_magnitude(distorted, cfg);
      const int sc = tape.s_div(tape.fro_norm(tape.sub(tmag, tape.constant(ref))),
                                tape.fro_norm(tape.constant(ref)));
      const int lm = tape.l1(tape.log_eps(tmag, 1e-7), tape.log_eps(tape.constant(ref), 1e-7));
      const int loss = tape.s_add(sc, lm);
      if (with_grads) {
        tape.backward(loss);
        grad = tape.grad(m);
      }
      return tape.val(loss).at(0, 0);
    };
    loss_of(true);
    Rng check_rng(5);
    const auto res = gradcheck::check_input(
        mag, grad, [&] { return loss_of(false); }, 24, check_rng);
    INFO("kind = " << std::string(attacks::kind_name(kind)) << " max_rel = " << res.max_rel);
    CHECK(res.ok(2e-3));
  }
}

TEST_CASE("stop-gradient kinds contribute zero gradient") {
  Rng rng(505);
  audio::StftConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 16;
  cfg.win_length = 64;
  Tensor mag = random_tensor(6, cfg.bins(), rng, 0.3);
  for (double& v : mag.data) v = std::abs(v) + 0.05;
  Tensor phase = random_tensor(6, cfg.bins(), rng, 1.5);

  attacks::DistortionSpec spec;
  spec.kind = attacks::Kind::resample;
  spec.resample_factor = 0.5;
  ad::Tape tape;
  const int m = tape.leaf(mag);
  const int wave = tape.istft_fixed_phase(m, phase, cfg, 6 * cfg.hop);
  const int distorted = tape.distort(wave, spec, 24000);
  const int loss = tape.mean_all(distorted);
  tape.backward(loss);
  for (double g : tape.grad(m).data) CHECK(g == 0.0);
}

TEST_CASE("softplus, row_scale, mix_rows and the straight-through offset compose correctly") {
  Rng rng(606);
  nn::ParamStore store;
  nn::Conv1d conv(store, "c", 5, 4, 3, 1, rng);
  Tensor x = random_tensor(8, 5, rng);
  Tensor pass = random_tensor(8, 4, rng);
  Tensor offset = random_tensor(8, 4, rng, 0.1);
  std::vector<double> row_w = {1, 0, 1, 1, 0, 1, 0, 1};
  std::vector<uint8_t> take = {1, 0, 1, 1, 0, 1, 0, 1};
  Tensor target = random_tensor(8, 4, rng);

  auto loss_of = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    int h = conv.forward(tape, bind, tape.constant(x));
    h = tape.add_const_offset(h, offset);
    h = tape.softplus(h);
    h = tape.row_scale(h, row_w);
    h = tape.mix_rows(h, pass, take);
    const int loss = tape.mse(h, tape.constant(target));
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
    }
    return tape.val(loss).at(0, 0);
  };
  auto params = nn::params_with_prefix(store, "c");
  Rng check_rng(6);
  const auto res = gradcheck::check_params(
      params, [&] { return loss_of(false); }, [&] { return loss_of(true); }, 16, check_rng);
  CHECK(res.ok(1e-3));
}

TEST_CASE("embedding gradients scatter-add into the table") {
  Rng rng(707);
  nn::ParamStore store;
  nn::Parameter* table = store.create("tab", 5, 3);
  nn::init_normal(table->value, 1.0, rng);
  std::vector<int> ids = {0, 2, 2, 4, 1, 2};
  Tensor target = random_tensor(6, 3, rng);

  auto loss_of = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    const int e = tape.embedding(bind.node(table), ids);
    const int loss = tape.mse(e, tape.constant(target));
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
    }
    return tape.val(loss).at(0, 0);
  };
  Rng check_rng(7);
  const auto res = gradcheck::check_params(
      {table}, [&] { return loss_of(false); }, [&] { return loss_of(true); }, 15, check_rng);
  CHECK(res.ok(1e-3));
}
