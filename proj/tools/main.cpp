#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "sdh/error.hpp"

namespace {

using namespace sdh;
using namespace sdh::cli;

struct SharedTrainFlags {
  std::string loss = "structured";
  std::string grad_mode = "exact";
  std::string descriptor = "current-embedding";
  std::string mining_rule = "semi-hard";
  std::size_t bits = 0;
};

void add_train_flags(CLI::App* app, TrainConfig& t, SharedTrainFlags& f, bool with_loss) {
  if (with_loss) {
    app->add_option("--loss", f.loss, "contrastive | triplet | structured")
        ->check(CLI::IsMember({"contrastive", "triplet", "structured"}));
  }
  app->add_option("--grad-mode", f.grad_mode, "exact | paper-eq7")->check(CLI::IsMember({"exact", "paper-eq7"}));
  app->add_option("--bits", f.bits, "hash code length (overrides the config)");
  app->add_option("--epochs", t.epochs, "training epochs");
  app->add_option("--lr", t.learning_rate, "SGD learning rate");
  app->add_option("--momentum", t.momentum, "SGD momentum (0 disables)");
  app->add_option("--margin", t.margin, "hinge margin");
  app->add_option("--seed", t.seed, "initialization and batching seed");
  app->add_option("--batch-size", t.mining.batch_size, "structured batch slots (pairs + negatives)");
  app->add_option("--pair-batch-size", t.contrastive_batch_size, "contrastive batch size in pairs");
  app->add_option("--triplet-batch-size", t.triplet_batch_size, "triplet batch size");
  app->add_option("--negatives", t.mining.negatives_per_side, "hard negatives per side (K)");
  app->add_option("--refresh", t.mining.refresh_interval, "descriptor refresh interval in epochs");
  app->add_option("--descriptor", f.descriptor, "raw-pixels | current-embedding")
      ->check(CLI::IsMember({"raw-pixels", "current-embedding"}));
  app->add_option("--mining", f.mining_rule, "semi-hard | nearest")->check(CLI::IsMember({"semi-hard", "nearest"}));
  app->add_flag("--augment", t.augment, "train on random translated crops");
}

void apply_train_flags(TrainConfig& t, const SharedTrainFlags& f, std::optional<std::size_t>& bits) {
  t.loss = parse_loss_kind(f.loss);
  t.grad_mode = parse_gradient_mode(f.grad_mode);
  t.mining.source = parse_descriptor_source(f.descriptor);
  t.mining.rule = parse_mining_rule(f.mining_rule);
  if (f.bits > 0) bits = f.bits;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured deep hashing for cross-camera person re-identification"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::vector<std::size_t> split_counts;
  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic multi-camera dataset");
  generate_cmd->add_option("--out", gen.out, "output directory")->required();
  generate_cmd->add_option("--identities", gen.synth.identities);
  generate_cmd->add_option("--per-view", gen.synth.images_per_view, "images per identity and camera");
  generate_cmd->add_option("--views", gen.synth.views);
  generate_cmd->add_option("--height", gen.synth.height);
  generate_cmd->add_option("--width", gen.synth.width);
  generate_cmd->add_option("--channels", gen.synth.channels);
  generate_cmd->add_option("--separation", gen.synth.identity_separation);
  generate_cmd->add_option("--view-shift", gen.synth.view_shift);
  generate_cmd->add_option("--noise", gen.synth.noise);
  generate_cmd->add_option("--seed", gen.synth.seed);
  generate_cmd->add_option("--split", split_counts, "train val test identity counts")->expected(3);
  generate_cmd->add_option("--split-seed", gen.split_seed);
  generate_cmd->add_option("--query-seed", gen.query_seed);

  TrainOptions train_opts;
  SharedTrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint.bin + loss curves");
  train_cmd->add_option("--config", train_opts.config, "model config file (default: built-in desk net)");
  train_cmd->add_option("--manifest", train_opts.manifest, "training manifest CSV")->required();
  train_cmd->add_option("--out", train_opts.out, "output directory")->required();
  add_train_flags(train_cmd, train_opts.train, train_flags, true);

  std::filesystem::path enc_ckpt, enc_manifest, enc_out;
  auto* encode_cmd = app.add_subcommand("encode", "encode a manifest into a binary gallery file");
  encode_cmd->add_option("--checkpoint", enc_ckpt)->required();
  encode_cmd->add_option("--manifest", enc_manifest)->required();
  encode_cmd->add_option("--out", enc_out)->required();

  QueryOptions query_opts;
  std::uint32_t radius = 0;
  std::size_t top_n = 0;
  auto* query_cmd = app.add_subcommand("query", "rank a gallery for every image of a query manifest");
  query_cmd->add_option("--gallery", query_opts.gallery)->required();
  query_cmd->add_option("--checkpoint", query_opts.checkpoint)->required();
  query_cmd->add_option("--queries", query_opts.queries, "query manifest CSV")->required();
  auto* radius_opt = query_cmd->add_option("--radius", radius, "keep results within this Hamming radius");
  auto* topn_opt = query_cmd->add_option("--topn", top_n, "keep the first N results per query");
  query_cmd->add_option("--out", query_opts.out, "results CSV")->required();

  EvaluateOptions eval_opts;
  std::string denominator = "topn";
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score query results: MAP, precision, PR, CMC");
  evaluate_cmd->add_option("--results", eval_opts.results)->required();
  evaluate_cmd->add_option("--manifest", eval_opts.manifest, "gallery manifest with ground truth")->required();
  evaluate_cmd->add_option("--bits", eval_opts.report.bits, "code length to label the radius precision");
  evaluate_cmd->add_option("--radius", eval_opts.report.radius);
  evaluate_cmd->add_option("--topn", eval_opts.report.radius_top_n, "N for precision within the radius");
  evaluate_cmd->add_option("--radius-denominator", denominator, "topn | within-radius")
      ->check(CLI::IsMember({"topn", "within-radius"}));
  evaluate_cmd->add_option("--max-rank", eval_opts.report.max_rank, "longest CMC rank");
  evaluate_cmd->add_option("--single-shot", eval_opts.single_shot_seed,
                           "keep one seeded relevant item per query (single-shot protocol)");
  evaluate_cmd->add_option("--out", eval_opts.out, "report directory")->required();

  CompareOptions cmp_opts;
  SharedTrainFlags cmp_flags;
  auto* compare_cmd = app.add_subcommand("compare-losses", "train all three losses and compare convergence");
  compare_cmd->add_option("--config", cmp_opts.config);
  compare_cmd->add_option("--manifest", cmp_opts.manifest)->required();
  compare_cmd->add_option("--out", cmp_opts.out)->required();
  add_train_flags(compare_cmd, cmp_opts.train, cmp_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate_cmd) {
      if (!split_counts.empty()) gen.split = SplitCounts{split_counts[0], split_counts[1], split_counts[2]};
      const Manifest m = cmd_generate(gen);
      std::cout << "wrote " << m.rows.size() << " images to " << gen.out << "\n";
    } else if (*train_cmd) {
      apply_train_flags(train_opts.train, train_flags, train_opts.bits);
      const TrainReport r = cmd_train(train_opts);
      std::cout << "epoch 0 loss " << r.epochs.front().mean_loss << ", final loss " << r.epochs.back().mean_loss
                << "\n";
    } else if (*encode_cmd) {
      cmd_encode(enc_ckpt, enc_manifest, enc_out);
    } else if (*query_cmd) {
      if (*radius_opt) query_opts.radius = radius;
      if (*topn_opt) query_opts.top_n = top_n;
      cmd_query(query_opts);
    } else if (*evaluate_cmd) {
      eval_opts.report.radius_denominator =
          denominator == "topn" ? RadiusDenominator::TopN : RadiusDenominator::WithinRadius;
      const MetricsReport r = cmd_evaluate(eval_opts);
      std::cout << "MAP " << r.map << " over " << r.included_queries << " queries (" << r.excluded_queries
                << " excluded)\n";
    } else if (*compare_cmd) {
      apply_train_flags(cmp_opts.train, cmp_flags, cmp_opts.bits);
      const Comparison c = cmd_compare_losses(cmp_opts);
      for (const auto& curve : c.curves) {
        std::cout << loss_kind_name(curve.loss) << ": epochs to half loss "
                  << (curve.epochs_to_half ? std::to_string(*curve.epochs_to_half) : std::string("none"))
                  << (curve.diverged ? " (diverged)" : "") << "\n";
      }
    }
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
