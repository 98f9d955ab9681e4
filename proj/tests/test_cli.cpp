#include <doctest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "sdh/codebank.hpp"
#include "sdh/error.hpp"
#include "sdh/model.hpp"
#include "support.hpp"

using namespace sdh;
using namespace sdh::cli;

namespace {

Manifest small_dataset(const fs::path& dir, std::size_t identities = 6, double noise = 0.03) {
  GenerateOptions g;
  g.synth.identities = identities;
  g.synth.images_per_view = 2;
  g.synth.noise = noise;
  g.out = dir;
  return cmd_generate(g);
}

TrainOptions quick_train(const fs::path& manifest, const fs::path& out, std::size_t epochs) {
  TrainOptions t;
  t.manifest = manifest;
  t.out = out;
  t.train.epochs = epochs;
  t.train.learning_rate = 0.01;
  t.train.momentum = 0.9;
  t.train.mining.batch_size = 40;
  return t;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(test::read_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string field(const std::string& line, std::size_t k) {
  std::istringstream in(line);
  std::string f;
  for (std::size_t i = 0; i <= k; ++i) std::getline(in, f, ',');
  return f;
}

// Gallery manifest of 8 rows: rows listed in `hits` are identity 0 camera 1,
// the rest are other identities. The canned query is identity 0 camera 0 and
// ranks rows 0..7 in order.
void canned_list(const fs::path& dir, const std::vector<int>& hits) {
  std::ostringstream m, r;
  m << "image_path,identity_id,camera_id\n";
  r << "query,query_identity,query_camera,rank,image_id,distance,identity,camera\n";
  for (int i = 0; i < 8; ++i) {
    const bool hit = std::find(hits.begin(), hits.end(), i) != hits.end();
    m << "x" << i << ".ppm," << (hit ? 0 : 10 + i) << ",1\n";
    r << "0,0,0," << i + 1 << ',' << i << ',' << i << ',' << (hit ? 0 : 10 + i) << ",1\n";
  }
  fs::create_directories(dir);
  write_text(dir / "gallery.csv", m.str());
  write_text(dir / "results.csv", r.str());
}

MetricsReport evaluate_canned(const fs::path& dir) {
  EvaluateOptions e;
  e.results = dir / "results.csv";
  e.manifest = dir / "gallery.csv";
  e.out = dir / "report";
  return cmd_evaluate(e);
}

}  // namespace

TEST_CASE("generate writes manifest and identity-disjoint split files") {
  test::TempDir dir("gen");
  GenerateOptions g;
  g.synth.identities = 12;
  g.synth.images_per_view = 2;
  g.out = dir.path();
  g.split = SplitCounts{8, 2, 2};
  const Manifest m = cmd_generate(g);
  CHECK(m.rows.size() == 48);
  for (const char* f : {"manifest.csv", "train.csv", "val.csv", "test.csv", "test_query.csv"})
    CHECK(fs::exists(dir / f));
  const Manifest q = read_manifest(dir / "test_query.csv");
  CHECK(q.rows.size() == 4);  // one per identity and camera
}

TEST_CASE("train with zero epochs leaves the initialization in the checkpoint") {
  test::TempDir dir("train0");
  small_dataset(dir / "data");
  TrainOptions t = quick_train(dir / "data" / "manifest.csv", dir / "run", 0);
  t.train.seed = 5;
  cmd_train(t);
  save_checkpoint(dir / "init.bin", Model::initialize(resolve_model_config({}, std::nullopt), 5));
  CHECK(test::read_file(dir / "run" / "checkpoint.bin") == test::read_file(dir / "init.bin"));
}

TEST_CASE("training is deterministic and the loss trends down") {
  test::TempDir dir("train");
  small_dataset(dir / "data", 8);
  const TrainOptions a = quick_train(dir / "data" / "manifest.csv", dir / "a", 20);
  TrainOptions b = a;
  b.out = dir / "b";
  const TrainReport ra = cmd_train(a);
  cmd_train(b);
  CHECK(test::read_file(dir / "a" / "checkpoint.bin") == test::read_file(dir / "b" / "checkpoint.bin"));
  CHECK(test::read_file(dir / "a" / "loss.csv") == test::read_file(dir / "b" / "loss.csv"));
  CHECK(ra.epochs.size() == 21);
  CHECK(ra.epochs.back().mean_loss < 0.5 * ra.epochs.front().mean_loss);
  const auto loss_lines = lines_of(dir / "a" / "loss.csv");
  CHECK(loss_lines.front() == "epoch,batch,loss,value");
  CHECK(loss_lines[1].find(",structured,") != std::string::npos);
}

TEST_CASE("a diverging run aborts with a diagnostic") {
  test::TempDir dir("diverge");
  small_dataset(dir / "data");
  TrainOptions t = quick_train(dir / "data" / "manifest.csv", dir / "run", 5);
  t.train.learning_rate = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(cmd_train(t), TrainingDiverged);
}

TEST_CASE("encode: empty manifest, record count, byte-identical re-encode, shape mismatch") {
  test::TempDir dir("encode");
  const Manifest m = small_dataset(dir / "data");
  cmd_train(quick_train(dir / "data" / "manifest.csv", dir / "run", 0));
  const auto ckpt = dir / "run" / "checkpoint.bin";

  cmd_encode(ckpt, dir / "data" / "manifest.csv", dir / "g1.bin");
  cmd_encode(ckpt, dir / "data" / "manifest.csv", dir / "g2.bin");
  CHECK(load_gallery(dir / "g1.bin").size() == m.rows.size());
  CHECK(test::read_file(dir / "g1.bin") == test::read_file(dir / "g2.bin"));

  write_text(dir / "empty.csv", "image_path,identity_id,camera_id\n");
  cmd_encode(ckpt, dir / "empty.csv", dir / "e.bin");
  const CodeBank empty = load_gallery(dir / "e.bin");
  CHECK(empty.empty());
  CHECK(empty.bits() == 48);

  GenerateOptions other;
  other.synth.identities = 2;
  other.synth.images_per_view = 1;
  other.synth.height = 16;
  other.out = dir / "small";
  cmd_generate(other);
  CHECK_THROWS_AS(cmd_encode(ckpt, dir / "small" / "manifest.csv", dir / "bad.bin"), ConfigError);
}

TEST_CASE("query: exact cross-camera match first, junk excluded, truncation, bit mismatch") {
  test::TempDir dir("query");
  small_dataset(dir / "data", 4, 0.0);
  cmd_train(quick_train(dir / "data" / "manifest.csv", dir / "run", 0));
  const auto ckpt = dir / "run" / "checkpoint.bin";
  const Manifest all = read_manifest(dir / "data" / "manifest.csv");

  // Query: an identity-0 camera-1 image. Gallery row 0 is the same file filed
  // under camera 7, so it sits at distance 0 and wins every tie by id.
  Manifest q{all.base_dir, {all.rows[2]}};
  REQUIRE(q.rows[0].identity == 0);
  REQUIRE(q.rows[0].camera == 1);
  write_manifest(dir / "data" / "q.csv", q);
  Manifest gal = all;
  gal.rows.insert(gal.rows.begin(), {all.rows[2].image_path, 0, 7});
  write_manifest(dir / "data" / "gal.csv", gal);
  cmd_encode(ckpt, dir / "data" / "gal.csv", dir / "g.bin");

  QueryOptions o;
  o.gallery = dir / "g.bin";
  o.checkpoint = ckpt;
  o.queries = dir / "data" / "q.csv";
  o.out = dir / "res.csv";
  cmd_query(o);
  const auto rows = lines_of(dir / "res.csv");
  CHECK(rows.size() == 1 + gal.rows.size() - 2);  // the two camera-1 images of identity 0 are junk
  CHECK(rows[1] == "0,0,1,1,0,0,0,7");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK_FALSE((field(rows[i], 6) == "0" && field(rows[i], 7) == "1"));

  o.top_n = 3;
  cmd_query(o);
  CHECK(lines_of(dir / "res.csv").size() == 4);
  o.top_n.reset();
  o.radius = 0;
  cmd_query(o);
  const auto within = lines_of(dir / "res.csv");
  CHECK(within.size() >= 2);
  for (std::size_t i = 1; i < within.size(); ++i) CHECK(field(within[i], 5) == "0");

  TrainOptions t24 = quick_train(dir / "data" / "manifest.csv", dir / "run24", 0);
  t24.bits = 24;
  cmd_train(t24);
  o.checkpoint = dir / "run24" / "checkpoint.bin";
  CHECK_THROWS_AS(cmd_query(o), UsageError);
}

TEST_CASE("evaluate canned lists") {
  test::TempDir dir("eval");
  canned_list(dir / "a", {0, 1});
  canned_list(dir / "b", {0});
  canned_list(dir / "c", {0, 4});
  CHECK(evaluate_canned(dir / "a").map == 1.0);
  CHECK(evaluate_canned(dir / "b").map == 1.0);
  const MetricsReport c = evaluate_canned(dir / "c");
  CHECK(c.map == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(c.cmc.front().rate == 1.0);
  CHECK(fs::exists(dir / "c" / "report" / "report.json"));

  SUBCASE("query without relevant items is excluded and counted") {
    std::string r = test::read_file(dir / "c" / "results.csv");
    r += "1,99,0,1,0,0,0,1\n";
    write_text(dir / "c" / "results.csv", r);
    const MetricsReport rep = evaluate_canned(dir / "c");
    CHECK(rep.included_queries == 1);
    CHECK(rep.excluded_queries == 1);
    CHECK(rep.map == doctest::Approx(0.7));
  }
  SUBCASE("ids outside the manifest are rejected") {
    std::string r = test::read_file(dir / "a" / "results.csv");
    r += "0,0,0,9,42,9,0,1\n";
    write_text(dir / "a" / "results.csv", r);
    CHECK_THROWS_AS(evaluate_canned(dir / "a"), UsageError);
  }
}

TEST_CASE("compare-losses emits equal-length reproducible curves") {
  test::TempDir dir("compare");
  small_dataset(dir / "data", 6);
  CompareOptions o;
  o.manifest = dir / "data" / "manifest.csv";
  o.train.epochs = 4;
  o.train.learning_rate = 0.01;
  o.train.momentum = 0.9;
  o.train.mining.batch_size = 40;
  o.out = dir / "a";
  const Comparison a = cmd_compare_losses(o);
  o.out = dir / "b";
  const Comparison b = cmd_compare_losses(o);
  REQUIRE(a.curves.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.curves[i].epoch_means.size() == 5);
    CHECK(a.curves[i].epoch_means == b.curves[i].epoch_means);
  }
  CHECK(a.curves[0].batch_size == 128);
  CHECK(a.curves[1].batch_size == 120);
  CHECK(test::read_file(dir / "a" / "curves.csv") == test::read_file(dir / "b" / "curves.csv"));
  CHECK(lines_of(dir / "a" / "curves.csv").size() == 6);
}
