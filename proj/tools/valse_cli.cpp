// Command-line front end for the toy vision-language steering pipeline.
//
// Flags may also come from a config file (--config, INI/TOML style with the
// same keys); flags given on the command line override the file.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "valse/benchmark.hpp"
#include "valse/faithfulness.hpp"
#include "valse/io.hpp"
#include "valse/reports.hpp"
#include "valse/service.hpp"
#include "valse/taylor.hpp"

namespace {

using namespace valse;

struct Globals {
  std::uint64_t seed = 1;
  double alpha = kDefaultAlpha;
  double mask_p = kDefaultMaskP;
  std::string fill = "mean";
  double beta = kDefaultBeta;
  double k_artifact = kDefaultArtifactK;
};

struct ImageArgs {
  std::string image_path;  // nested JSON array; overrides the synthetic image
  std::uint64_t image_seed = 0;
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file(out_path, text);
  }
}

PatchGrid load_image(const ImageArgs& a, const ShapeWorldOptions& world) {
  if (!a.image_path.empty()) return patch_grid_from_json(Json::parse(read_file(a.image_path)));
  return synth_dataset(1, 0.5, a.image_seed, world).front().image;
}

void add_image_args(CLI::App* cmd, ImageArgs& a) {
  cmd->add_option("--image", a.image_path, "image as nested JSON arrays [rows][cols][patch_dim]");
  cmd->add_option("--image-seed", a.image_seed, "seed of a synthetic shape-world image");
}

PairingOptions pairing_from(const Globals& g) {
  PairingOptions p;
  p.alpha = g.alpha;
  p.rule = MaskRule::percent(g.mask_p);
  p.fill = parse_fill(g.fill);
  p.k_artifact = g.k_artifact;
  p.noise_seed = g.seed;
  p.random_seed = g.seed;
  p.max_new = shape_max_new();
  return p;
}

std::vector<std::string> vocabulary_names() {
  const Vocabulary v;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v.name(static_cast<int>(i)));
  return out;
}

Json sequence_json(const TokenSequence& seq) {
  const Vocabulary v;
  Json tokens = Json::array();
  for (int t : seq.response_ids()) tokens.push_back(v.name(t));
  return {{"ids", seq.response_ids()}, {"positions", seq.response_positions()}, {"tokens", tokens}};
}

/// Samples of one shape-world split whose first response token gets a map.
std::vector<std::pair<ShapeWorldSample, Generation>> generated_split(const ToyModel& model, std::size_t n,
                                                                     std::uint64_t seed) {
  std::vector<std::pair<ShapeWorldSample, Generation>> out;
  for (auto& s : synth_dataset(n, 0.5, seed)) {
    Generation g = generate(model, s.image, shape_prompt_sequence(s.image.num_patches()), shape_max_new());
    out.emplace_back(std::move(s), std::move(g));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy vision-language model: relevance maps, token selection and latent steering"};
  app.set_config("--config", "", "config file with the same keys as the flags");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--alpha", g.alpha, "log-likelihood-ratio threshold for token selection")->capture_default_str();
  app.add_option("--mask-p", g.mask_p, "fraction of patches masked per selected token")->capture_default_str();
  app.add_option("--fill", g.fill, "mask fill: mean | zero | gauss_noise | gauss_blur")->capture_default_str();
  app.add_option("--beta", g.beta, "steering strength")->capture_default_str();
  app.add_option("--k-artifact", g.k_artifact, "z-score multiplier for artifact detection")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a captioner on synthetic shape-world data");
  std::string model_out = "model.tvlm";
  BenchmarkConfig bench;
  std::string loss_csv;
  train_cmd->add_option("--out", model_out, "checkpoint path")->capture_default_str();
  train_cmd->add_option("--samples", bench.train_samples)->capture_default_str();
  train_cmd->add_option("--epochs", bench.epochs)->capture_default_str();
  train_cmd->add_option("--lr", bench.lr)->capture_default_str();
  train_cmd->add_option("--batch", bench.batch_size)->capture_default_str();
  train_cmd->add_option("--bias-rate", bench.bias_rate)->capture_default_str();
  train_cmd->add_option("--layers", bench.layers)->capture_default_str();
  train_cmd->add_option("--heads", bench.heads)->capture_default_str();
  train_cmd->add_option("--hidden", bench.hidden)->capture_default_str();
  train_cmd->add_option("--loss-csv", loss_csv, "per-epoch loss as CSV");

  // shared by the inference subcommands
  std::string model_path = "model.tvlm";
  std::string out_path;
  ImageArgs image_args;

  auto* gen_cmd = app.add_subcommand("generate", "greedy caption for one image");
  gen_cmd->add_option("--model", model_path)->capture_default_str();
  std::string bundle_path;
  gen_cmd->add_option("--bundle", bundle_path, "steering bundle; applied with --beta");
  add_image_args(gen_cmd, image_args);

  auto* sel_cmd = app.add_subcommand("select-tokens", "log-likelihood ratios against a noise image");
  sel_cmd->add_option("--model", model_path)->capture_default_str();
  bool csv = false;
  sel_cmd->add_flag("--csv", csv, "CSV instead of JSON");
  sel_cmd->add_option("--out", out_path);
  add_image_args(sel_cmd, image_args);

  auto* map_cmd = app.add_subcommand("map", "contribution map of one response token");
  map_cmd->add_option("--model", model_path)->capture_default_str();
  std::size_t map_pos = 0;
  bool suppress = false;
  std::string trace_out;
  std::string trace_in;
  map_cmd->add_option("--pos", map_pos, "sequence position of the token (defaults to the first selected)");
  map_cmd->add_flag("--suppress", suppress, "suppress artifact positions");
  map_cmd->add_option("--trace-out", trace_out, "also write the trace record used for the map");
  map_cmd->add_option("--trace-in", trace_in, "compute the map from a stored trace record instead");
  map_cmd->add_option("--out", out_path);
  add_image_args(map_cmd, image_args);

  auto* fit_cmd = app.add_subcommand("fit-steering", "fit per-layer steering directions");
  fit_cmd->add_option("--model", model_path)->capture_default_str();
  std::size_t fit_samples = 200;
  std::string source = "relevance";
  std::string bundle_out = "bundle.vlsb";
  std::string bundle_json;
  fit_cmd->add_option("--samples", fit_samples)->capture_default_str();
  fit_cmd->add_option("--source", source, "relevance | random")->capture_default_str();
  fit_cmd->add_option("--out", bundle_out)->capture_default_str();
  fit_cmd->add_option("--json", bundle_json, "also write the bundle as JSON");

  auto* eval_cmd = app.add_subcommand("eval", "evaluations");
  eval_cmd->require_subcommand(1);
  auto* chair_cmd = eval_cmd->add_subcommand("chair", "hallucination scores on shape-world captions");
  std::size_t eval_samples = 600;
  std::string csv_out;
  chair_cmd->add_option("--model", model_path)->capture_default_str();
  chair_cmd->add_option("--bundle", bundle_path, "steering bundle; applied with --beta");
  chair_cmd->add_option("--samples", eval_samples)->capture_default_str();
  chair_cmd->add_option("--csv", csv_out, "per-caption CSV");
  chair_cmd->add_option("--out", out_path);

  auto* faith_cmd = eval_cmd->add_subcommand("faithfulness", "insertion/deletion curves against random orders");
  std::size_t faith_samples = 20;
  std::size_t random_orders = 10;
  std::string svg_out;
  faith_cmd->add_option("--model", model_path)->capture_default_str();
  faith_cmd->add_option("--samples", faith_samples)->capture_default_str();
  faith_cmd->add_option("--random-orders", random_orders)->capture_default_str();
  faith_cmd->add_option("--svg", svg_out, "plot of the first token's curves");
  faith_cmd->add_option("--out", out_path);

  auto* taylor_cmd = eval_cmd->add_subcommand("taylor", "first-order attention perturbation check");
  double eps = 1e-3;
  std::size_t trials = 20;
  taylor_cmd->add_option("--model", model_path, "checkpoint; a random gelu model is used when absent");
  taylor_cmd->add_option("--eps", eps)->capture_default_str();
  taylor_cmd->add_option("--trials", trials)->capture_default_str();
  taylor_cmd->add_option("--out", out_path);

  auto* serve_cmd = app.add_subcommand("serve", "JSON-over-HTTP inspector backend");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> bundle_specs;
  serve_cmd->add_option("--model", model_path)->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str();
  serve_cmd->add_option("--bundle", bundle_specs, "id=path, repeatable");

  CLI11_PARSE(app, argc, argv);

  // Applies the path only when the option was actually given for the
  // taylor subcommand.
  const bool taylor_has_model = taylor_cmd->count("--model") > 0;

  try {
    if (g.mask_p < 0.0 || g.mask_p > 1.0) fail(ErrorCode::kInvalidConfig, "--mask-p must lie in [0,1]");
    parse_fill(g.fill);
    if (!(g.k_artifact > 0.0)) fail(ErrorCode::kInvalidConfig, "--k-artifact must be positive");

    if (*train_cmd) {
      bench.seed = g.seed;
      std::string csv_rows = "epoch,loss\n";
      const TrainResult r = train_benchmark_model(bench, [&](std::size_t epoch, double loss) {
        std::fprintf(stderr, "epoch %zu loss %.6f\n", epoch, loss);
        csv_rows += std::to_string(epoch) + "," + format_double(loss) + "\n";
      });
      save_checkpoint(r.model, model_out);
      if (!loss_csv.empty()) write_file(loss_csv, csv_rows);
      return 0;
    }

    if (*serve_cmd) {
      std::optional<ToyModel> model;
      try {
        model.emplace(load_checkpoint(model_path));
      } catch (const Error& e) {
        fail(ErrorCode::kCheckpointError, std::string("cannot load checkpoint: ") + e.what());
      }
      ServiceOptions so;
      so.default_prompt = shape_prompt();
      so.max_new = shape_max_new();
      so.alpha = g.alpha;
      so.k_artifact = g.k_artifact;
      so.noise_seed = g.seed;
      so.token_names = vocabulary_names();
      so.lexicon = shape_lexicon();
      InspectorService svc(*model, so);
      for (const auto& spec : bundle_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) fail(ErrorCode::kInvalidConfig, "--bundle expects id=path");
        svc.register_bundle(spec.substr(0, eq), load_bundle(spec.substr(eq + 1)));
      }
      const int bound = svc.bind(host, port);
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), bound);
      svc.serve();
      return 0;
    }

    if (*taylor_cmd) {
      const ToyModel model = taylor_has_model ? load_checkpoint(model_path) : [&] {
        ModelConfig c;
        c.seed = g.seed;
        return build_model(c);
      }();
      const auto& c = model.config();
      GaussianSource noise(g.seed);
      Json reports = Json::array();
      std::vector<double> ratios;
      for (std::size_t t = 0; t < trials; ++t) {
        PatchGrid img(c.grid_side, c.grid_side, c.patch_dim);
        for (double& v : img.values) v = noise.next();
        std::vector<int> prompt;
        for (int k = 0; k < 4; ++k) prompt.push_back(2 + static_cast<int>((t * 7 + static_cast<std::size_t>(k) * 3) % (c.vocab_size - 2)));
        const TokenSequence seq = TokenSequence::make(img.num_patches(), std::vector<int>{kBosToken}, prompt,
                                                      std::vector<int>{2 + static_cast<int>(t % (c.vocab_size - 2))});
        const TaylorReport r = taylor_check(model, img, seq, seq.size() - 1, eps);
        ratios.push_back(r.ratio_at_half_eps);
        reports.push_back(to_json(r));
      }
      std::sort(ratios.begin(), ratios.end());
      const double median = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
      emit(Json{{"trials", reports}, {"median_ratio", median}}.dump(2), out_path);
      return 0;
    }

    const ToyModel model = load_checkpoint(model_path);
    const ShapeWorldOptions world;

    if (*gen_cmd) {
      const PatchGrid img = load_image(image_args, world);
      SteeringContext ctx(model);
      if (!bundle_path.empty()) ctx = ctx.stacked(load_bundle(bundle_path), g.beta);
      const Generation gen = ctx.generate(img, shape_prompt_sequence(img.num_patches()), shape_max_new());
      emit(sequence_json(gen.sequence).dump(2), out_path);
      return 0;
    }

    if (*sel_cmd) {
      const PatchGrid img = load_image(image_args, world);
      const Generation gen = generate(model, img, shape_prompt_sequence(img.num_patches()), shape_max_new());
      const LlrReport r = compute_llr(model, img, gen.sequence, g.seed);
      if (csv) {
        emit(llr_csv(r), out_path);
      } else {
        Json j = to_json(r);
        j["selection"] = to_json(select_visual_tokens(r, g.alpha));
        emit(j.dump(2), out_path);
      }
      return 0;
    }

    if (*map_cmd) {
      const auto& c = model.config();
      if (!trace_in.empty()) {
        emit(to_json(contribution_map_from_record(import_trace(trace_in), c.grid_side, c.grid_side)).dump(2),
             out_path);
        return 0;
      }
      const PatchGrid img = load_image(image_args, world);
      const Generation gen = generate(model, img, shape_prompt_sequence(img.num_patches()), shape_max_new());
      std::size_t pos = map_pos;
      if (pos == 0) {
        const auto sel = select_visual_tokens(compute_llr(model, img, gen.sequence, g.seed), g.alpha);
        const auto resp = gen.sequence.response_positions();
        pos = !sel.positions.empty() ? sel.positions.front() : resp.at(resp.size() > 1 ? 1 : 0);
      }
      ContributionMap map = contribution_map_for_token(model, img, gen.sequence, pos);
      Json j;
      if (suppress) {
        const ArtifactProfile prof =
            detect_artifact_positions(reference_contribution_map(model, img, gen.sequence), g.k_artifact);
        map = suppress_artifacts(map, prof);
        j["profile"] = to_json(prof);
      }
      j.update(to_json(map));
      if (!trace_out.empty()) {
        const TokenSequence prefix = gen.sequence.prefix(pos);
        const ForwardTrace t = forward(model, prefix, img);
        const auto grads = backward_token_logit(model, prefix, img, t, pos - 1, gen.sequence.ids[pos]);
        export_trace(make_trace_record(t, c.vocab_size, &grads), trace_out);
      }
      emit(j.dump(2), out_path);
      return 0;
    }

    if (*fit_cmd) {
      PairingOptions pairing = pairing_from(g);
      if (source == "random") {
        pairing.source = MaskSource::kRandom;
      } else if (source != "relevance") {
        fail(ErrorCode::kInvalidConfig, "--source must be relevance or random");
      }
      bench.seed = g.seed;
      const auto fit_set = benchmark_split(bench, fit_samples, 1);
      const auto pairs = build_paired_samples(model, to_corpus(fit_set), pairing);
      FitOptions fo;
      fo.beta_default = g.beta;
      const SteeringBundle b = fit_steering(model, pairs, fo);
      save_bundle(b, bundle_out);
      if (!bundle_json.empty()) write_file(bundle_json, to_json(b).dump(2));
      std::fprintf(stderr, "fitted on %zu pairs\n", pairs.size());
      return 0;
    }

    if (*chair_cmd) {
      bench.seed = g.seed;
      const auto eval_set = benchmark_split(bench, eval_samples, 2);
      SteeringContext ctx(model);
      if (!bundle_path.empty()) ctx = ctx.stacked(load_bundle(bundle_path), g.beta);
      const CaptionRun run = caption_and_score(ctx, eval_set, shape_max_new());
      if (!csv_out.empty()) write_file(csv_out, chair_csv(run.report));
      Json j = to_json(run.report);
      j.erase("hallucinated");
      emit(j.dump(2), out_path);
      return 0;
    }

    if (*faith_cmd) {
      Json tokens = Json::array();
      std::size_t wins = 0;
      std::vector<CurveSeries> plot;
      for (auto& [sample, gen] : generated_split(model, faith_samples, g.seed * 7919ULL + 3)) {
        const auto sel = select_visual_tokens(compute_llr(model, sample.image, gen.sequence, g.seed), g.alpha);
        for (std::size_t pos : sel.positions) {
          const ContributionMap map = contribution_map_for_token(model, sample.image, gen.sequence, pos);
          const auto ins = faithfulness_curve(model, sample.image, gen.sequence, pos, map, CurveMode::kInsertion);
          const auto del = faithfulness_curve(model, sample.image, gen.sequence, pos, map, CurveMode::kDeletion);
          double ri = 0.0;
          double rd = 0.0;
          for (std::size_t k = 0; k < random_orders; ++k) {
            const PatchOrder order = PatchOrder::random(g.seed * 1000 + k);
            ri += faithfulness_curve(model, sample.image, gen.sequence, pos, map, CurveMode::kInsertion, order).auc;
            rd += faithfulness_curve(model, sample.image, gen.sequence, pos, map, CurveMode::kDeletion, order).auc;
          }
          ri /= static_cast<double>(random_orders);
          rd /= static_cast<double>(random_orders);
          const bool win = ins.auc > ri && del.auc < rd;
          wins += win;
          tokens.push_back({{"position", pos},
                            {"insertion_auc", ins.auc},
                            {"deletion_auc", del.auc},
                            {"random_insertion_auc", ri},
                            {"random_deletion_auc", rd},
                            {"win", win}});
          if (plot.empty()) {
            plot.push_back({"insertion", ins, "#1f77b4"});
            plot.push_back({"deletion", del, "#d62728"});
          }
        }
      }
      if (!svg_out.empty() && !plot.empty()) write_file(svg_out, curves_svg(plot, "insertion / deletion"));
      const double rate = tokens.empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(tokens.size());
      emit(Json{{"tokens", tokens}, {"win_rate", rate}}.dump(2), out_path);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
