#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "sdh/codebank.hpp"
#include "sdh/dataset.hpp"
#include "sdh/error.hpp"
#include "sdh/evaluation.hpp"
#include "sdh/model.hpp"

namespace sdh::cli {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string field; std::getline(in, field, ',');) out.push_back(field);
  return out;
}

}  // namespace

Manifest cmd_generate(const GenerateOptions& options) {
  Manifest all = generate(options.synth, options.out);
  if (options.split) {
    DatasetSplit parts = split(all, *options.split, options.split_seed);
    write_manifest(options.out / "train.csv", parts.train);
    write_manifest(options.out / "val.csv", parts.val);
    write_manifest(options.out / "test.csv", parts.test);
    std::vector<std::int64_t> ids;
    std::vector<std::int64_t> cams;
    for (const auto& r : parts.test.rows) {
      ids.push_back(r.identity);
      cams.push_back(r.camera);
    }
    Manifest queries;
    queries.base_dir = options.out;
    for (std::size_t q : select_queries(ids, cams, options.query_seed)) queries.rows.push_back(parts.test.rows[q]);
    write_manifest(options.out / "test_query.csv", queries);
  }
  return all;
}

ModelConfig resolve_model_config(const fs::path& config, std::optional<std::size_t> bits) {
  ModelConfig mc;
  if (config.empty()) {
    mc.net = NetConfig::desk();
  } else {
    mc = load_model_config(config);
  }
  if (bits) {
    if (*bits == 0) throw UsageError("--bits must be positive");
    mc.hash.bits = *bits;
  }
  return mc;
}

TrainingSet load_training_set(const Manifest& manifest, const NetConfig& net) {
  TrainingSet data;
  data.images = load_images(manifest);
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (data.images[i].shape() != net.input_shape()) {
      throw ConfigError("image " + manifest.rows[i].image_path + " has shape " +
                        shape_string(data.images[i].shape()) + " but the network expects " +
                        shape_string(net.input_shape()));
    }
    data.identities.push_back(manifest.rows[i].identity);
    data.cameras.push_back(manifest.rows[i].camera);
  }
  return data;
}

TrainReport cmd_train(const TrainOptions& options) {
  const ModelConfig mc = resolve_model_config(options.config, options.bits);
  const TrainingSet data = load_training_set(read_manifest(options.manifest), mc.net);
  fs::create_directories(options.out);
  Model model = Model::initialize(mc, options.train.seed);

  auto batch_log = open_out(options.out / "loss.csv");
  batch_log << "epoch,batch,loss,value\n";
  const std::string loss_name(loss_kind_name(options.train.loss));
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchLog& b) {
    batch_log << b.epoch << ',' << b.batch << ',' << loss_name << ',' << b.loss << '\n';
  };
  hooks.on_epoch = [&](std::size_t, const Model& m) { save_checkpoint(options.out / "checkpoint.bin", m); };
  TrainReport report = train(model, data, options.train, hooks);

  auto epochs = open_out(options.out / "epoch_loss.csv");
  epochs << "epoch,loss,mean,batches,mining_fallbacks,refreshed\n";
  for (const auto& e : report.epochs) {
    epochs << e.epoch << ',' << loss_name << ',' << e.mean_loss << ',' << e.batches << ',' << e.mining_fallbacks
           << ',' << (e.refreshed ? 1 : 0) << '\n';
  }
  return report;
}

void cmd_encode(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out) {
  const Model model = load_checkpoint(checkpoint);
  const Manifest manifest = read_manifest(manifest_path);
  const TrainingSet data = load_training_set(manifest, model.config.net);
  const CodeBank bank = encode_gallery(model, data.images, data.identities, data.cameras);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_gallery(out, bank);
}

void cmd_query(const QueryOptions& options) {
  const CodeBank bank = load_gallery(options.gallery);
  const Model model = load_checkpoint(options.checkpoint);
  if (bank.bits() != model.config.hash.bits) {
    throw UsageError("gallery holds " + std::to_string(bank.bits()) + "-bit codes but the checkpoint produces " +
                     std::to_string(model.config.hash.bits) + "-bit codes");
  }
  const Manifest queries = read_manifest(options.queries);
  const TrainingSet data = load_training_set(queries, model.config.net);
  auto out = open_out(options.out);
  out << "query,query_identity,query_camera,rank,image_id,distance,identity,camera\n";
  for (std::size_t q = 0; q < data.images.size(); ++q) {
    const BinaryCode code = model.encode(data.images[q]);
    const RankedList ranked = bank.rank(code, {data.identities[q], data.cameras[q], std::nullopt});
    std::size_t rank = 0;
    for (const RankedEntry& e : ranked) {
      if (options.radius && e.distance > *options.radius) break;
      if (options.top_n && rank >= *options.top_n) break;
      const GalleryRecord r = bank.record(static_cast<std::size_t>(e.image_id));
      out << q << ',' << data.identities[q] << ',' << data.cameras[q] << ',' << ++rank << ',' << e.image_id << ','
          << e.distance << ',' << r.identity << ',' << r.camera << '\n';
    }
  }
}

MetricsReport cmd_evaluate(const EvaluateOptions& options) {
  const Manifest manifest = read_manifest(options.manifest);
  std::ifstream in(options.results);
  if (!in) throw IoError("cannot open results " + options.results.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("query,query_identity,query_camera,rank,image_id,distance", 0) != 0) {
    throw UsageError(options.results.string() + " is not a query results file");
  }
  struct Query {
    std::int64_t identity;
    std::int64_t camera;
    RankedList ranked;
  };
  std::map<std::int64_t, Query> queries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 6) throw UsageError("results line " + std::to_string(line_no) + " has too few columns");
    const std::int64_t q = std::stoll(f[0]);
    const std::int64_t qid = std::stoll(f[1]);
    const std::int64_t qcam = std::stoll(f[2]);
    const std::int64_t image = std::stoll(f[4]);
    const auto distance = static_cast<std::uint32_t>(std::stoul(f[5]));
    if (image < 0 || static_cast<std::size_t>(image) >= manifest.rows.size()) {
      throw UsageError("results line " + std::to_string(line_no) + " names image " + std::to_string(image) +
                       ", which is not in the manifest");
    }
    const ManifestRow& row = manifest.rows[static_cast<std::size_t>(image)];
    if (f.size() >= 8 && (std::stoll(f[6]) != row.identity || std::stoll(f[7]) != row.camera)) {
      throw UsageError("results line " + std::to_string(line_no) + " disagrees with the manifest about image " +
                       std::to_string(image));
    }
    auto [it, inserted] = queries.try_emplace(q, Query{qid, qcam, {}});
    if (!inserted && (it->second.identity != qid || it->second.camera != qcam)) {
      throw UsageError("query " + std::to_string(q) + " changes identity or camera within the results");
    }
    it->second.ranked.push_back({image, distance});
  }
  if (queries.empty()) throw UsageError("results cover no queries");

  std::vector<QueryJudgment> judgments;
  for (auto& [q, query] : queries) {
    QueryJudgment j;
    j.ranked = std::move(query.ranked);
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
      const ManifestRow& r = manifest.rows[i];
      if (r.identity == query.identity && r.camera != query.camera) j.relevant.push_back(static_cast<std::int64_t>(i));
    }
    judgments.push_back(std::move(j));
  }
  if (options.single_shot_seed) judgments = single_shot(judgments, *options.single_shot_seed);
  MetricsReport report = build_report(judgments, options.report);
  write_report(options.out, report);
  return report;
}

Comparison compare_losses(const ModelConfig& model_config, const TrainingSet& data, const TrainConfig& base) {
  Comparison out;
  for (LossKind kind : {LossKind::Contrastive, LossKind::Triplet, LossKind::Structured}) {
    TrainConfig config = base;
    config.loss = kind;
    LossCurve curve;
    curve.loss = kind;
    curve.batch_size = kind == LossKind::Contrastive ? config.contrastive_batch_size
                       : kind == LossKind::Triplet   ? config.triplet_batch_size
                                                     : config.mining.batch_size;
    Model model = Model::initialize(model_config, base.seed);
    try {
      const TrainReport report = train(model, data, config);
      for (const auto& e : report.epochs) curve.epoch_means.push_back(e.mean_loss);
      curve.epochs_to_half = report.epochs_to_fraction(0.5);
    } catch (const TrainingDiverged& e) {
      curve.diverged = true;
      curve.diagnostic = e.what();
    }
    out.curves.push_back(std::move(curve));
  }
  return out;
}

Comparison cmd_compare_losses(const CompareOptions& options) {
  const ModelConfig mc = resolve_model_config(options.config, options.bits);
  const TrainingSet data = load_training_set(read_manifest(options.manifest), mc.net);
  const Comparison cmp = compare_losses(mc, data, options.train);
  fs::create_directories(options.out);

  auto curves = open_out(options.out / "curves.csv");
  curves << "epoch";
  std::size_t longest = 0;
  for (const auto& c : cmp.curves) {
    curves << ',' << loss_kind_name(c.loss);
    longest = std::max(longest, c.epoch_means.size());
  }
  curves << '\n';
  for (std::size_t e = 0; e < longest; ++e) {
    curves << e;
    for (const auto& c : cmp.curves) {
      curves << ',';
      if (e < c.epoch_means.size()) curves << c.epoch_means[e];
    }
    curves << '\n';
  }

  auto summary = open_out(options.out / "summary.csv");
  summary << "loss,batch_size,initial_loss,final_loss,epochs_to_half,diverged\n";
  for (const auto& c : cmp.curves) {
    summary << loss_kind_name(c.loss) << ',' << c.batch_size << ',';
    if (!c.epoch_means.empty()) summary << c.epoch_means.front() << ',' << c.epoch_means.back();
    else summary << ',';
    summary << ',' << (c.epochs_to_half ? std::to_string(*c.epochs_to_half) : std::string("none")) << ','
            << (c.diverged ? 1 : 0) << '\n';
  }
  return cmp;
}

}  // namespace sdh::cli
