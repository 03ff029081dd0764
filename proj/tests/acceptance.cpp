// tests/acceptance.cpp
// End-to-end acceptance suite. Prints one pass/fail line per criterion and
// exits nonzero if any criterion fails. The desk-scale training section runs
// the bundled synthetic corpus through both training stages twice (the second
// pass feeds the determinism criterion).
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "codemark/attacks.hpp"
#include "codemark/audio.hpp"
#include "codemark/codec.hpp"
#include "codemark/errors.hpp"
#include "codemark/metrics.hpp"
#include "codemark/stats.hpp"
#include "codemark/train.hpp"
#include "gradcheck.hpp"

using namespace codemark;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- criterion: z-test exactness -------------------------------------------

void criterion_ztest_exactness() {
  const auto t0 = clock_type::now();
  const int reps = 1000;
  double z = 0.0, count = 0.0;
  for (int i = 0; i < reps; ++i) {
    count = stats::expected_count(0.95, 0.10, 0.10, 200);
    z = stats::z_statistic(37, 200, 0.10);
  }
  const double per_call = seconds_since(t0) / reps;
  const bool pass = std::abs(z - 4.01) <= 0.01 && count == 37.0 && per_call < 1e-3;
  report("z-test-exactness",
         pass,
         "z(37,200,0.10)=" + fmt(z) + " expected_count=" + fmt(count) + " runtime=" +
             fmt(per_call * 1e6) + "us/call");
}

void criterion_p_values() {
  const double p401 = stats::p_value(4.01);
  const double p407 = stats::p_value(4.07);
  const bool pass =
      std::abs(p401 - 3e-5) / 3e-5 <= 0.20 && std::abs(p407 - 2.3e-5) / 2.3e-5 <= 0.20;
  report("p-values", pass, "p(4.01)=" + fmt(p401) + " p(4.07)=" + fmt(p407));
}

// --- criterion: oracle roundtrip --------------------------------------------

void criterion_oracle_roundtrip() {
  const auto t0 = clock_type::now();
  Rng rng(501);
  const int k = 128;
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t_frames = 60 + static_cast<int>(rng.uniform_int(240));
    const int payload = 1 + static_cast<int>(rng.uniform_int(t_frames / 2));
    std::vector<int> ids(t_frames);
    for (int& id : ids) id = static_cast<int>(rng.uniform_int(k));
    std::vector<int> all(t_frames);
    for (int i = 0; i < t_frames; ++i) all[i] = i;
    rng.shuffle(all);
    std::vector<int> positions(all.begin(), all.begin() + payload);
    std::sort(positions.begin(), positions.end());
    std::vector<int> bits(payload);
    for (int& b : bits) b = rng.bernoulli(0.5);
    const auto wm = codec::substitute_tokens(ids, positions, bits, nullptr,
                                             codec::SubstitutionMode::random_parity, 1.0, k, rng);
    if (metrics::ber(bits, codec::read_parities(wm, positions)) != 0.0) ++bad;
  }
  const double secs = seconds_since(t0);
  report("oracle-roundtrip", bad == 0 && secs < 10.0,
         "1000 cases, " + std::to_string(bad) + " nonzero BER, " + fmt(secs) + "s");
}

// --- criterion: distortion exactness ----------------------------------------

void criterion_distortion_exactness() {
  Rng rng(601);
  audio::Waveform w;
  w.sample_rate = 24000;
  w.samples.resize(24000);
  for (int i = 0; i < 24000; ++i)
    w.samples[i] = 0.4 * std::sin(2.0 * 3.14159265 * 441.0 * i / 24000.0) + 0.03 * rng.normal();

  bool pass = true;
  std::string detail;
  double worst_case_secs = 0.0;

  {  // AS bit-exact
    const auto t0 = clock_type::now();
    attacks::DistortionSpec spec;
    spec.kind = attacks::Kind::amplitude_scale;
    const audio::Waveform out = attacks::apply(w, spec);
    bool exact = out.length() == w.length();
    for (int i = 0; i < w.length() && exact; ++i) exact = out.samples[i] == 0.9 * w.samples[i];
    worst_case_secs = std::max(worst_case_secs, seconds_since(t0));
    pass = pass && exact;
    detail += std::string("AS ") + (exact ? "exact" : "NOT exact");
  }
  {  // QTZ distinct values
    const auto t0 = clock_type::now();
    attacks::DistortionSpec spec;
    spec.kind = attacks::Kind::quantize;
    const audio::Waveform out = attacks::apply(w, spec);
    std::set<double> distinct(out.samples.begin(), out.samples.end());
    worst_case_secs = std::max(worst_case_secs, seconds_since(t0));
    pass = pass && distinct.size() <= 256;
    detail += ", QTZ distinct=" + std::to_string(distinct.size());
  }
  {  // SS exact zero count
    const auto t0 = clock_type::now();
    attacks::DistortionSpec spec;
    spec.kind = attacks::Kind::sample_suppress;
    spec.seed = 17;
    const audio::Waveform out = attacks::apply(w, spec);
    int zeroed = 0;
    for (int i = 0; i < w.length(); ++i)
      if (out.samples[i] == 0.0 && w.samples[i] != 0.0) ++zeroed;
    const int expect = static_cast<int>(std::llround(0.001 * w.length()));
    worst_case_secs = std::max(worst_case_secs, seconds_since(t0));
    pass = pass && zeroed == expect;
    detail += ", SS zeroed=" + std::to_string(zeroed) + "/" + std::to_string(expect);
  }
  {  // GN measured SNR within 0.5 dB
    const auto t0 = clock_type::now();
    const auto spec = attacks::random_attack_spec({attacks::Kind::gaussian_noise}, 23);
    const audio::Waveform out = attacks::apply(w, spec);
    double sig = 0.0, err = 0.0;
    for (int i = 0; i < w.length(); ++i) {
      sig += w.samples[i] * w.samples[i];
      const double d = w.samples[i] - out.samples[i];
      err += d * d;
    }
    const double measured = 10.0 * std::log10(sig / err);
    worst_case_secs = std::max(worst_case_secs, seconds_since(t0));
    pass = pass && std::abs(measured - spec.snr_db) < 0.5;
    detail += ", GN target=" + fmt(spec.snr_db) + " measured=" + fmt(measured);
  }
  pass = pass && worst_case_secs < 1.0;
  detail += ", worst case " + fmt(worst_case_secs) + "s";
  report("distortion-exactness", pass, detail);
}

// --- criterion: stft fidelity -------------------------------------------------

void criterion_stft_fidelity() {
  const auto t0 = clock_type::now();
  Rng rng(701);
  double worst = 1e9;
  for (int i = 0; i < 100; ++i) {
    const int n = 9600 + static_cast<int>(rng.uniform_int(14400));
    audio::Waveform w;
    w.sample_rate = 24000;
    w.samples.resize(n);
    const double f = rng.uniform(60.0, 9000.0);
    for (int t = 0; t < n; ++t)
      w.samples[t] =
          0.3 * std::sin(2.0 * 3.14159265 * f * t / 24000.0) + 0.2 * (2.0 * rng.uniform() - 1.0);
    const audio::Waveform back = audio::istft(audio::stft(w));
    worst = std::min(worst, metrics::snr_db(w, back));
  }
  const double secs = seconds_since(t0);
  report("stft-fidelity", worst > 40.0 && secs < 30.0,
         "worst roundtrip SNR over 100 clips = " + fmt(worst) + " dB, " + fmt(secs) + "s");
}

// --- criterion: gradient checks ------------------------------------------------

void criterion_gradient_checks() {
  const auto t0 = clock_type::now();
  bool pass = true;
  std::string detail;

  audio::StftConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 16;
  cfg.win_length = 64;
  Rng rng(801);
  nn::ParamStore store;
  vq::VqModelConfig vcfg;
  vcfg.codebook_size = 8;
  vcfg.code_dim = 6;
  vcfg.hidden = 8;
  vcfg.spect_bins = cfg.bins();
  vq::VqModel model(store, vcfg, rng);
  nn::ConvStack localizer(store, "loc", cfg.bins(), 8, 1, 3, {1, 2, 1}, rng, true);
  nn::ConvStack restorer(store, "res", cfg.bins(), 8, 1, 3, {1, 2, 1}, rng, true);

  // a clip long enough for the production stft-loss resolutions (up to 2048)
  audio::Waveform wave;
  wave.sample_rate = 24000;
  wave.samples.resize(2600);
  Rng wave_rng(802);
  for (double& s : wave.samples)
    s = 0.3 * (2.0 * wave_rng.uniform() - 1.0);
  const audio::Spectrogram spec = audio::stft(wave, cfg);
  const int t_frames = spec.frames();
  const audio::FrameMask mask = audio::sample_mask(t_frames, 0.3, 803);

  struct Pieces {
    int rec = -1, code = -1, loc = -1, res = -1;
  };
  auto forward = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    const Tensor comp = vq::compress_magnitude(spec.magnitude);
    const int comp_const = tape.constant(comp);
    const int z = model.encode_node(tape, bind, comp_const);
    const Tensor z_val = tape.val(z);
    const auto q = vq::quantize(z_val, model.codebook());
    const int e_sel = tape.embedding(bind.node(model.codebook_param()), q.codes.ids);
    const int l_cb = tape.mse(e_sel, tape.constant(z_val));
    const int l_commit = tape.mse(z, tape.constant(q.codes.vectors));
    Tensor offset = q.codes.vectors;
    for (size_t i = 0; i < offset.data.size(); ++i) offset.data[i] -= z_val.data[i];
    const int zq = tape.add_const_offset(z, std::move(offset));
    std::vector<double> on(t_frames), off(t_frames);
    for (int t = 0; t < t_frames; ++t) {
      on[t] = mask.flags[t];
      off[t] = 1.0 - on[t];
    }
    const int s_gen = model.decode_node(tape, bind, tape.row_scale(zq, on),
                                        tape.row_scale(comp_const, off));
    const int s_bar = tape.mix_rows(s_gen, spec.magnitude, mask.flags);
    const int y_hat = tape.istft_fixed_phase(s_bar, spec.phase, cfg, wave.length());
    attacks::DistortionSpec gn;
    gn.kind = attacks::Kind::gaussian_noise;
    gn.seed = 804;
    gn.snr_db = 30.0;
    const int y_tilde = tape.distort(y_hat, gn, wave.sample_rate);
    const int s_tilde = tape.stft_magnitude(y_tilde, cfg);
    const int comp_tilde = tape.log_eps(s_tilde, 1.0);
    const int loc_logits = localizer.forward(tape, bind, comp_tilde);
    const int res_logits = restorer.forward(tape, bind, comp_tilde);
    std::vector<double> loc_t(t_frames), ones(t_frames, 1.0), parity(t_frames), wm(t_frames);
    for (int t = 0; t < t_frames; ++t) {
      loc_t[t] = mask.flags[t];
      wm[t] = mask.flags[t];
      parity[t] = q.codes.ids[t] & 1;
    }
    Pieces p;
    p.loc = tape.bce_logits_rows(loc_logits, loc_t, ones);
    p.res = tape.bce_logits_rows(res_logits, parity, wm);
    p.rec = vq::multi_res_stft_loss_node(tape, y_hat, wave);  // production resolutions
    p.code = tape.s_add(l_cb, tape.s_scale(l_commit, vq::kCommitmentCoefficient));
    int total = tape.s_add(p.loc, p.res);
    total = tape.s_add(total, tape.s_add(p.rec, p.code));
    if (with_grads) {
      store.zero_grads();
      tape.backward(total);
      bind.flush_grads();
    }
    return tape.val(total).at(0, 0);
  };

  // decoder, codebook, localizer, restorer carry true gradients through the
  // composite; the encoder's straight-through bridge is checked on its
  // commitment term (its true-gradient path) below
  Rng check_rng(805);
  const auto res_main = gradcheck::check_params(
      nn::params_with_prefix(store, "vq.encoder", /*invert=*/true),
      [&] { return forward(false); }, [&] { return forward(true); }, 3, check_rng);
  pass = pass && res_main.ok(1e-3);
  detail += "eq2/eq3/bce max_rel=" + fmt(res_main.max_rel);

  auto commit_only = [&](bool with_grads) {
    ad::Tape tape;
    nn::TapeBinding bind(tape);
    const Tensor comp = vq::compress_magnitude(spec.magnitude);
    const int z = model.encode_node(tape, bind, tape.constant(comp));
    const Tensor z_val = tape.val(z);
    const auto q = vq::quantize(z_val, model.codebook());
    const int loss = tape.mse(z, tape.constant(q.codes.vectors));
    if (with_grads) {
      store.zero_grads();
      tape.backward(loss);
      bind.flush_grads();
    }
    return tape.val(loss).at(0, 0);
  };
  const auto res_commit = gradcheck::check_params(
      nn::params_with_prefix(store, "vq.encoder"), [&] { return commit_only(false); },
      [&] { return commit_only(true); }, 3, check_rng);
  pass = pass && res_commit.ok(1e-3);
  detail += " commitment max_rel=" + fmt(res_commit.max_rel);

  {  // Eq. 4: masked token cross-entropy through the Transformer
    Rng m_rng(806);
    nn::ParamStore m_store;
    manipulator::ManipulatorConfig mc;
    mc.codebook_size = 6;
    mc.dim = 8;
    mc.layers = 1;
    mc.heads = 2;
    mc.filter = 16;
    mc.kernel = 3;
    mc.max_positions = 32;
    manipulator::ManipulatorModel manip(m_store, mc, m_rng);
    std::vector<int> ids = {0, 3, 5, 1, 2, 4, 0, 2, 5, 1};
    audio::FrameMask m_mask;
    m_mask.flags = {0, 1, 0, 1, 0, 0, 1, 0, 0, 1};
    std::vector<double> weights(10);
    for (int t = 0; t < 10; ++t) weights[t] = m_mask.flags[t];
    auto m_loss = [&](bool with_grads) {
      ad::Tape tape;
      nn::TapeBinding bind(tape);
      const int logits = manip.forward_node(tape, bind, ids, m_mask);
      const int loss = tape.cross_entropy_rows(logits, ids, weights);
      if (with_grads) {
        m_store.zero_grads();
        tape.backward(loss);
        bind.flush_grads();
      }
      return tape.val(loss).at(0, 0);
    };
    const auto res_manip = gradcheck::check_params(
        nn::params_with_prefix(m_store, ""), [&] { return m_loss(false); },
        [&] { return m_loss(true); }, 3, check_rng);
    pass = pass && res_manip.ok(1e-3);
    detail += " eq4 max_rel=" + fmt(res_manip.max_rel);
  }

  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  detail += ", " + fmt(secs) + "s";
  report("gradient-checks", pass, detail);
}

// --- desk-scale training + capacity + null calibration + determinism ----------

struct SmokeRun {
  std::string record;
  double stage1_final = 0.0;
  double restorer_parity_accuracy = 0.0;
  double stage2_accuracy = 0.0;
  double stage2_baseline = 0.0;
  uint64_t checkpoint_hash = 0;
  stats::DetectorCalibration calibration;
};

// Smoke-scale recipe: codebook sized to the toy corpus and the restoration
// weight held at 1.0 so the parity channel survives the whole run (the
// library defaults keep the full-scale settings).
codec::ModelsConfig smoke_model_config() {
  codec::ModelsConfig cfg;
  cfg.vq.codebook_size = 32;
  cfg.manip.codebook_size = 32;
  return cfg;
}

train::TrainConfig smoke_train_config() {
  train::TrainConfig cfg;
  cfg.stage1_steps = 800;
  cfg.stage2_steps = 250;
  cfg.batch_size = 3;
  cfg.clip_seconds = 0.35;
  cfg.peak_lr = 2e-3;
  cfg.warmup_steps = 100;
  cfg.gamma_min = 0.1;
  cfg.gamma_max = 0.5;
  cfg.lambda_res_first = 1.0;
  cfg.lambda_res_second = 1.0;
  cfg.catalog = {attacks::Kind::none};
  cfg.seed = 1234;
  cfg.log_every = 50;
  return cfg;
}

SmokeRun run_smoke(codec::Models& models, const std::vector<audio::Waveform>& corpus,
                   const std::vector<audio::Waveform>& heldout) {
  const train::TrainConfig cfg = smoke_train_config();
  SmokeRun out;
  const train::Stage1Result r1 = train::train_stage1(models, corpus, cfg);
  train::calibrate(models, heldout, 0.1, 0.5, 4242, codec::SubstitutionMode::random_parity,
                   "synthetic-heldout");
  const train::Stage2Result r2 = train::train_stage2(models, corpus, cfg);
  out.stage1_final = r1.final_total;
  out.restorer_parity_accuracy = r1.restorer_parity_accuracy;
  out.stage2_accuracy = r2.masked_accuracy;
  out.stage2_baseline = r2.marginal_baseline;
  out.checkpoint_hash = models.store().value_hash();
  out.calibration = models.calibration;
  std::ostringstream rec;
  rec.precision(17);
  rec << "{\"stage1_final\":" << out.stage1_final << ",\"parity_acc\":"
      << out.restorer_parity_accuracy << ",\"alpha\":" << out.calibration.alpha
      << ",\"beta\":" << out.calibration.beta << ",\"stage2_acc\":" << out.stage2_accuracy
      << ",\"hash\":" << out.checkpoint_hash << "}";
  out.record = rec.str();
  return out;
}

void training_criteria() {
  const auto t0 = clock_type::now();
  const auto corpus = train::synth_corpus(12, 1.2, 24000, 7);
  const auto heldout = train::synth_corpus(8, 1.0, 24000, 1700);
  const auto eval_clips = train::synth_corpus(12, 1.0, 24000, 9001);

  codec::Models models(smoke_model_config(), 1234);
  const SmokeRun run1 = run_smoke(models, corpus, heldout);

  // --- capacity ---
  {
    bool pass = codec::capacity_bits(24000, models.config().stft) == 150;
    std::string detail = "capacity(1s)=" +
                         std::to_string(codec::capacity_bits(24000, models.config().stft));
    audio::Waveform one_second = eval_clips[0];
    one_second.samples.resize(24000);
    Rng rng(11);
    std::vector<int> bits150(150), bit1 = {1};
    for (int& b : bits150) b = rng.bernoulli(0.5);
    try {
      codec::EmbedOptions opts;
      opts.seed = 5;
      const auto er150 = codec::embed(models, one_second, bits150, opts);
      pass = pass && er150.plan.payload_bits() == 150;
      const auto er1 = codec::embed(models, one_second, bit1, opts);
      pass = pass && er1.plan.payload_bits() == 1;
      detail += ", 150-bit and 1-bit embeds ok";
    } catch (const std::exception& e) {
      pass = false;
      detail += std::string(", embed failed: ") + e.what();
    }
    bool overflow_rejected = false;
    try {
      std::vector<int> bits151(151, 1);
      codec::embed(models, one_second, bits151, codec::EmbedOptions{});
    } catch (const CapacityError&) {
      overflow_rejected = true;
    } catch (const std::exception&) {
    }
    pass = pass && overflow_rejected;
    detail += overflow_rejected ? ", 151 bits rejected" : ", 151 bits NOT rejected";
    report("capacity", pass, detail);
  }

  // --- null calibration (measured beta) ---
  {
    const auto tn = clock_type::now();
    const double beta = models.calibration.beta;
    Rng rng(4100);
    const int trials = 100000, t_frames = 300;
    int false_alarms = 0;
    for (int i = 0; i < trials; ++i) {
      int count = 0;
      for (int t = 0; t < t_frames; ++t) count += rng.uniform() < beta;
      if (stats::z_statistic(count, t_frames, beta) > 4.0) ++false_alarms;
    }
    const double fpr = static_cast<double>(false_alarms) / trials;
    const double secs = seconds_since(tn);
    report("null-calibration", fpr <= 1e-3 && secs < 60.0,
           "beta=" + fmt(beta) + " empirical FPR=" + fmt(fpr) + " over 1e5 trials, " +
               fmt(secs) + "s");
  }

  // --- desk-scale training: (a) BER, (b) manipulator ordering, (c) best-of-n ---
  {
    Rng rng(9100);
    double ber_sum = 0.0;
    double dist_argmax_sum = 0.0, dist_random_sum = 0.0;
    int clips_used = 0;
    for (const auto& clip : eval_clips) {
      const int t_frames = audio::frame_count(clip.length(), models.config().stft);
      const int payload = static_cast<int>(std::llround(0.1 * t_frames));
      std::vector<int> bits(payload);
      for (int& b : bits) b = rng.bernoulli(0.5);
      codec::EmbedOptions opts;
      opts.seed = rng.next();
      opts.mode = codec::SubstitutionMode::manipulator_argmax;
      const codec::EmbedResult er = codec::embed(models, clip, bits, opts);
      codec::DetectOptions dopts;
      dopts.expected_length = payload;
      const codec::DetectionReport det = codec::detect(models, er.watermarked, dopts);
      std::vector<int> recovered;
      for (char c : det.bits) recovered.push_back(c == '1');
      ber_sum += metrics::ber_aligned(bits, recovered);

      // same payload and positions, manipulator pick vs uniform random pick
      codec::EmbedOptions ropts = opts;
      ropts.positions = er.plan.positions;
      ropts.mode = codec::SubstitutionMode::random_parity;
      const codec::EmbedResult rr = codec::embed(models, clip, bits, ropts);
      dist_argmax_sum += codec::mean_spectral_distance(
          er.original_spec.magnitude, er.watermarked_magnitude, er.plan.positions);
      dist_random_sum += codec::mean_spectral_distance(
          rr.original_spec.magnitude, rr.watermarked_magnitude, rr.plan.positions);
      ++clips_used;
    }
    const double mean_ber = ber_sum / clips_used;
    const double mean_dist_argmax = dist_argmax_sum / clips_used;
    const double mean_dist_random = dist_random_sum / clips_used;

    // (c) nested candidate sets on a few clips
    bool best_of_n_monotone = true;
    std::string bofn_detail;
    for (int c = 0; c < 3; ++c) {
      std::vector<int> bits(20);
      for (int& b : bits) b = rng.bernoulli(0.5);
      const uint64_t seed = rng.next();
      double prev = -1e9;
      for (int n : {1, 5, 10}) {
        const auto r = metrics::select_positions_best_of_n(models, eval_clips[c], bits, n, seed);
        if (r.best_snr_db < prev - 1e-12) best_of_n_monotone = false;
        if (c == 0) bofn_detail += " n" + std::to_string(n) + "=" + fmt(r.best_snr_db) + "dB";
        prev = std::max(prev, r.best_snr_db);
      }
    }

    const double train_secs = seconds_since(t0);
    const bool pass = mean_ber < 0.05 && mean_dist_argmax < mean_dist_random &&
                      best_of_n_monotone && run1.restorer_parity_accuracy > 0.95 &&
                      train_secs < 1800.0;
    report("desk-training", pass,
           "ND BER@m=0.1 = " + fmt(mean_ber) + ", spectral distance argmax=" +
               fmt(mean_dist_argmax) + " < random=" + fmt(mean_dist_random) +
               ", best-of-n" + bofn_detail + ", parity_acc=" +
               fmt(run1.restorer_parity_accuracy) + ", stage2_acc=" + fmt(run1.stage2_accuracy) +
               " (baseline " + fmt(run1.stage2_baseline) + "), " + fmt(train_secs) + "s");
  }

  // --- determinism: full second smoke run, identical record ---
  {
    codec::Models models2(smoke_model_config(), 1234);
    const SmokeRun run2 = run_smoke(models2, corpus, heldout);
    const bool pass = run1.record == run2.record;
    report("determinism", pass,
           pass ? "two smoke runs produced identical final metric records"
                : "records differ: " + run1.record + " vs " + run2.record);
  }
}

}  // namespace

int main() {
  const auto t0 = clock_type::now();
  std::printf("acceptance suite\n");
  criterion_ztest_exactness();
  criterion_p_values();
  criterion_oracle_roundtrip();
  criterion_distortion_exactness();
  criterion_stft_fidelity();
  criterion_gradient_checks();
  training_criteria();
  std::printf("total: %.1fs, %d criterion(s) failed\n", seconds_since(t0), g_failures);
  return g_failures == 0 ? 0 : 1;
}
