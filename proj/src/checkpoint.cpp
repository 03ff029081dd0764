// src/checkpoint.cpp
//
// Copyright 2026 The codemark Authors
// Licensed under the Apache License, Version 2.0

#include "codemark/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "codemark/errors.hpp"

namespace codemark::checkpoint {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'K', 'C', 'K', 'P', 'T', '1'};

using nlohmann::json;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

json config_to_json(const codec::Models& models) {
  const auto& cfg = models.config();
  json j;
  j["version"] = kFormatVersion;
  j["sample_rate"] = cfg.sample_rate;
  j["stft"] = {{"n_fft", cfg.stft.n_fft},
               {"hop", cfg.stft.hop},
               {"win_length", cfg.stft.win_length},
               {"window", "hann"}};
  j["vq"] = {{"codebook_size", cfg.vq.codebook_size},
             {"code_dim", cfg.vq.code_dim},
             {"hidden", cfg.vq.hidden},
             {"kernel", cfg.vq.kernel},
             {"encoder_dilations", cfg.vq.encoder_dilations},
             {"decoder_dilations", cfg.vq.decoder_dilations}};
  j["manipulator"] = {{"layers", cfg.manip.layers},
                      {"dim", cfg.manip.dim},
                      {"heads", cfg.manip.heads},
                      {"filter", cfg.manip.filter},
                      {"kernel", cfg.manip.kernel},
                      {"max_positions", cfg.manip.max_positions}};
  j["stage1_trained"] = models.stage1_trained;
  j["stage2_trained"] = models.stage2_trained;
  j["calibration"] = {{"alpha", models.calibration.alpha},
                      {"beta", models.calibration.beta},
                      {"threshold", models.calibration.threshold},
                      {"source", models.calibration.source}};
  return j;
}

}  // namespace

void save(const codec::Models& models, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::string cfg = config_to_json(models).dump();
  write_u64(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  const auto& params = models.store().all();
  const auto& usage = models.vq().codebook().usage_ema;
  write_u64(out, params.size() + 1);
  for (const auto& p : params) {
    write_u32(out, static_cast<uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(out, static_cast<uint32_t>(p->value.rows));
    write_u32(out, static_cast<uint32_t>(p->value.cols));
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
  }
  // usage counts travel with the codebook so training can resume
  const std::string usage_name = "vq.codebook_usage";
  write_u32(out, static_cast<uint32_t>(usage_name.size()));
  out.write(usage_name.data(), static_cast<std::streamsize>(usage_name.size()));
  write_u32(out, 1);
  write_u32(out, static_cast<uint32_t>(usage.size()));
  out.write(reinterpret_cast<const char*>(usage.data()),
            static_cast<std::streamsize>(usage.size() * sizeof(double)));
}

std::unique_ptr<codec::Models> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPrerequisiteError("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw MissingPrerequisiteError("not a checkpoint file: " + path);

  const uint64_t json_len = read_u64(in);
  std::string cfg_text(json_len, '\0');
  in.read(cfg_text.data(), static_cast<std::streamsize>(json_len));
  json j = json::parse(cfg_text);
  if (j.value("version", 0) != kFormatVersion)
    throw MissingPrerequisiteError("unsupported checkpoint version in " + path);

  codec::ModelsConfig cfg;
  cfg.sample_rate = j["sample_rate"].get<int>();
  cfg.stft.n_fft = j["stft"]["n_fft"].get<int>();
  cfg.stft.hop = j["stft"]["hop"].get<int>();
  cfg.stft.win_length = j["stft"]["win_length"].get<int>();
  cfg.vq.codebook_size = j["vq"]["codebook_size"].get<int>();
  cfg.vq.code_dim = j["vq"]["code_dim"].get<int>();
  cfg.vq.hidden = j["vq"]["hidden"].get<int>();
  cfg.vq.kernel = j["vq"]["kernel"].get<int>();
  cfg.vq.encoder_dilations = j["vq"]["encoder_dilations"].get<std::vector<int>>();
  cfg.vq.decoder_dilations = j["vq"]["decoder_dilations"].get<std::vector<int>>();
  cfg.manip.layers = j["manipulator"]["layers"].get<int>();
  cfg.manip.dim = j["manipulator"]["dim"].get<int>();
  cfg.manip.heads = j["manipulator"]["heads"].get<int>();
  cfg.manip.filter = j["manipulator"]["filter"].get<int>();
  cfg.manip.kernel = j["manipulator"]["kernel"].get<int>();
  cfg.manip.max_positions = j["manipulator"]["max_positions"].get<int>();
  cfg.vq.spect_bins = cfg.stft.bins();
  cfg.manip.codebook_size = cfg.vq.codebook_size;

  auto models = std::make_unique<codec::Models>(cfg, /*seed=*/0);
  models->stage1_trained = j.value("stage1_trained", false);
  models->stage2_trained = j.value("stage2_trained", false);
  models->calibration.alpha = j["calibration"].value("alpha", 0.0);
  models->calibration.beta = j["calibration"].value("beta", 0.0);
  models->calibration.threshold = j["calibration"].value("threshold", 0.5);
  models->calibration.source = j["calibration"].value("source", "");

  const uint64_t count = read_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw MissingPrerequisiteError("truncated checkpoint: " + path);
    if (name == "vq.codebook_usage") {
      models->vq().codebook().usage_ema = data;
      continue;
    }
    nn::Parameter* p = models->store().find(name);
    if (!p) throw MissingPrerequisiteError("checkpoint tensor has no parameter: " + name);
    if (p->value.rows != static_cast<int>(rows) || p->value.cols != static_cast<int>(cols))
      throw MissingPrerequisiteError("checkpoint tensor shape mismatch: " + name);
    p->value.data = std::move(data);
  }
  models->vq().sync_codebook_struct();
  return models;
}

}  // namespace codemark::checkpoint
