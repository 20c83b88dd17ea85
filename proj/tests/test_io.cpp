#include <cstdio>
#include <fstream>

#include <doctest.h>
#include <json.hpp>

#include "wapiti/io.hpp"
#include "wapiti/lm.hpp"
#include "wapiti/wapiti.hpp"

using nlohmann::json;
using namespace wapiti;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() {
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
  }
};

}  // namespace

TEST_CASE("checkpoint file round-trip is bitwise") {
  Checkpoint c = synth_source(8, 2, 111);
  c.metadata["model_id"] = "roundtrip-test";
  c.metadata["train_seed"] = "42";
  c.vocab_tokens = default_vocab(8).tokens;
  TempFile f("io_ckpt_roundtrip.bin");
  save_checkpoint(f.path, c);
  Checkpoint back = load_checkpoint(f.path);
  CHECK(back.vocab_size == 8);
  CHECK(back.order == 2);
  CHECK(back.logits == c.logits);
  CHECK(back.metadata.at("model_id") == "roundtrip-test");
  CHECK(back.vocab_tokens == c.vocab_tokens);

  std::ifstream side(f.path + ".json");
  REQUIRE(side.good());
  json j;
  side >> j;
  CHECK(j.contains("vocab"));
  CHECK(j.contains("provenance"));
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  Checkpoint c = synth_source(4, 1, 112);
  TempFile f("io_ckpt_corrupt.bin");
  save_checkpoint(f.path, c);

  SUBCASE("bad magic") {
    std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(0);
    io.write("XXXX", 4);
    io.close();
    CHECK_THROWS_AS(load_checkpoint(f.path), ValidationError);
  }
  SUBCASE("truncated payload") {
    std::ifstream in(f.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(f.path), ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("io_no_such_file.bin"), ValidationError);
  }
}

TEST_CASE("delta file round-trip is bitwise") {
  Checkpoint a = synth_source(8, 1, 113);
  Checkpoint b = synth_source(8, 1, 114);
  a.metadata["model_id"] = "base-x";
  b.metadata["model_id"] = "wm-x";
  ParamDelta d = extract_delta(a, b);
  TempFile f("io_delta_roundtrip.bin");
  save_delta(f.path, d);
  ParamDelta back = load_delta(f.path);
  CHECK(back.values == d.values);
  CHECK(back.vocab_size == 8);
  CHECK(back.order == 1);
  CHECK(back.base_id == "base-x");
  CHECK(back.watermarked_id == "wm-x");
}

TEST_CASE("generation records survive a jsonl round-trip") {
  WatermarkConfig wm;
  wm.scheme = Scheme::KGW;
  wm.k = 1;
  wm.gamma = 0.25;
  wm.delta = 4.0;
  wm.key = 0xFFFFFFFFFFFFFFFFULL;  // forces the string encoding to matter

  GenerationRecord r1;
  r1.prompt = {1, 2};
  r1.completion = {3, 4, 5};
  r1.model_id = "m1";
  r1.watermark = wm;
  r1.seed = 0xFFFFFFFFFFFFFFFFULL;

  GenerationRecord r2;
  r2.completion = {9};
  r2.model_id = "m2";
  r2.seed = 7;

  TempFile f("io_records_roundtrip.jsonl");
  save_records(f.path, {r1, r2}, "deadbeefdeadbeef");
  CHECK(records_config_hash(f.path) == "deadbeefdeadbeef");
  std::vector<GenerationRecord> back = load_records(f.path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].prompt == r1.prompt);
  CHECK(back[0].completion == r1.completion);
  CHECK(back[0].seed == r1.seed);
  REQUIRE(back[0].watermark.has_value());
  CHECK(back[0].watermark->key == wm.key);
  CHECK(back[0].watermark->gamma == wm.gamma);
  CHECK(!back[1].watermark.has_value());
}

TEST_CASE("record loader rejects malformed lines") {
  TempFile f("io_records_bad.jsonl");
  std::ofstream out(f.path);
  out << "{\"config_hash\":\"aa\"}\n";
  out << "not json at all\n";
  out.close();
  CHECK_THROWS_AS(load_records(f.path), ValidationError);
}

TEST_CASE("watermark json keeps the key as a decimal string") {
  WatermarkConfig wm;
  wm.scheme = Scheme::AAR;
  wm.k = 2;
  wm.key = 0xFFFFFFFFFFFFFFFFULL;
  json j = watermark_to_json(wm);
  CHECK(j.at("key").is_string());
  CHECK(j.at("key").get<std::string>() == "18446744073709551615");
  CHECK(j.at("scheme") == "aar");
  CHECK(!j.contains("gamma"));
  WatermarkConfig back = watermark_from_json(j);
  CHECK(back.key == wm.key);
  CHECK(back.scheme == Scheme::AAR);
}

TEST_CASE("config hash is canonical over key order") {
  json a{{"alpha", 1}, {"beta", "x"}};
  json b{{"beta", "x"}, {"alpha", 1}};
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(json{{"alpha", 2}, {"beta", "x"}}));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("config hash pinned fnv vector") {
  CHECK(config_hash(json{{"a", 1}}) == "9c3e82dd6fcae8b1");
}

TEST_CASE("format_double emits shortest round-trip forms") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(0.0001) == "1e-04");
  double v = 4.816785043215464e-07;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv round-trip with config hash header") {
  TempFile f("io_table.csv");
  save_csv(f.path, "cafe0123cafe0123", {"a", "b"}, {{"1", "x"}, {"2", "y"}});
  CsvFile back = load_csv(f.path);
  CHECK(back.config_hash == "cafe0123cafe0123");
  REQUIRE(back.header == std::vector<std::string>{"a", "b"});
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1][1] == "y");

  CHECK_THROWS_AS(
      save_csv(f.path, "h", {"a", "b"}, {{"only-one-cell"}}),
      ValidationError);
}

TEST_CASE("csv loader validates structure") {
  TempFile f("io_table_bad.csv");
  std::ofstream out(f.path);
  out << "a,b\n1,2\n";  // missing config_hash line
  out.close();
  CHECK_THROWS_AS(load_csv(f.path), ValidationError);
}

TEST_CASE("u64 parser accepts decimal and hex") {
  CHECK(parse_u64("42") == 42);
  CHECK(parse_u64("0x2A") == 42);
  CHECK(parse_u64("0xffffffffffffffff") == 0xFFFFFFFFFFFFFFFFULL);
  CHECK(parse_u64("18446744073709551615") == 0xFFFFFFFFFFFFFFFFULL);
  CHECK_THROWS_AS(parse_u64("18446744073709551616"), ValidationError);
  CHECK_THROWS_AS(parse_u64("12abc"), ValidationError);
  CHECK_THROWS_AS(parse_u64(""), ValidationError);
  CHECK_THROWS_AS(parse_u64("-5"), ValidationError);
}
