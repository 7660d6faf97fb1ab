#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "vdcnn/dataset.hpp"
#include "vdcnn/synthetic.hpp"
#include "vdcnn/text.hpp"

using namespace vdcnn;
namespace fs = std::filesystem;

namespace {

std::vector<TokenId> ids_of(std::initializer_list<TokenId> l) { return l; }

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p, std::ios::binary | std::ios::trunc) << content;
  return p;
}

std::string data_error(const std::string& csv, std::size_t n_classes = 4) {
  const fs::path p = write_temp("vdcnn_text_test.csv", csv);
  try {
    load_csv(p, n_classes);
  } catch (const DataError& e) {
    fs::remove(p);
    return e.what();
  }
  fs::remove(p);
  return "";
}

}  // namespace

TEST_SUITE("text_pipeline") {

TEST_CASE("vocabulary layout") {
  const Vocabulary& v = default_vocabulary();
  CHECK(v.size() == 69);
  CHECK(Vocabulary::kAlphabet.size() == 66);
  std::set<char> distinct(Vocabulary::kAlphabet.begin(), Vocabulary::kAlphabet.end());
  CHECK(distinct.size() == 66);
  for (std::size_t i = 0; i < Vocabulary::kAlphabet.size(); ++i) {
    CHECK(v.id_of(Vocabulary::kAlphabet[i]) == static_cast<TokenId>(i + 1));
    CHECK(v.token(static_cast<TokenId>(i + 1)) == std::string(1, Vocabulary::kAlphabet[i]));
  }
  CHECK(v.id_of(' ') == Vocabulary::space_id);
  CHECK(v.id_of('A') == v.id_of('a'));
  CHECK(v.id_of('Z') == 26);
  CHECK(v.id_of('\\') == Vocabulary::unk_id);
  CHECK(v.id_of('@') == Vocabulary::unk_id);
  CHECK(v.id_of('\t') == Vocabulary::unk_id);
  CHECK(v.id_of('\n') == Vocabulary::unk_id);
  CHECK(v.id_of('\0') == Vocabulary::unk_id);
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(68) == "<unk>");
  // Every byte maps somewhere other than padding.
  for (int b = 0; b < 256; ++b) {
    const TokenId id = v.id_of(static_cast<char>(b));
    CHECK(id >= 1);
    CHECK(id <= 68);
  }
}

TEST_CASE("encode examples") {
  const Vocabulary& v = default_vocabulary();
  CHECK(v.encode("Hi!", 5) == ids_of({8, 9, 41, 0, 0}));
  CHECK(v.encode("abc", 2) == ids_of({1, 2}));
  CHECK(v.encode("", 3) == ids_of({0, 0, 0}));
  CHECK(v.encode("a b", 3) == ids_of({1, 67, 2}));
  CHECK_THROWS_AS(v.encode("a", 0), RangeError);
}

TEST_CASE("encode handles UTF-8 one character at a time") {
  const Vocabulary& v = default_vocabulary();
  CHECK(v.encode("\xF0\x9F\x98\x80", 3) == ids_of({68, 0, 0}));      // emoji
  CHECK(v.encode("caf\xC3\xA9!", 6) == ids_of({3, 1, 6, 68, 41, 0}));  // é
  CHECK(v.encode("\xE2\x82\xAC", 2) == ids_of({68, 0}));             // euro sign
  CHECK(v.encode("\xFF\xFE", 3) == ids_of({68, 68, 0}));              // stray bytes
  CHECK(v.encode("\xC3", 2) == ids_of({68, 0}));                      // cut short
  CHECK(v.encode("\xC3z", 2) == ids_of({68, 26}));
  CHECK(v.encode("\xC0\xAF", 3) == ids_of({68, 68, 0}));              // overlong
}

TEST_CASE("encode is a fixed-length pure function") {
  const Vocabulary& v = default_vocabulary();
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text(rng() % 50, ' ');
    for (char& c : text) c = static_cast<char>(rng() % 256);
    const std::size_t s = 1 + rng() % 60;
    const auto ids = v.encode(text, s);
    CHECK(ids.size() == s);
    CHECK(ids == v.encode(text, s));
    for (TokenId id : ids) CHECK((id >= 0 && id <= 68));
    std::vector<TokenId> into(s, 5);
    v.encode_into(text, into);
    CHECK(into == ids);
  }
}

TEST_CASE("decode inverts encode on in-vocabulary text") {
  const Vocabulary& v = default_vocabulary();
  std::mt19937_64 rng(2);
  const std::string chars = std::string(Vocabulary::kAlphabet) + " ";
  for (int trial = 0; trial < 100; ++trial) {
    std::string text(rng() % 40, 'a');
    for (char& c : text) c = chars[rng() % chars.size()];
    const auto ids = v.encode(text, 48);
    CHECK(v.decode(ids) == text);
  }
  CHECK(v.decode(v.encode("Hello", 8)) == "hello");
  CHECK(v.decode(v.encode("a\xF0\x9F\x98\x80", 4)) == "a\xEF\xBF\xBD");
}

TEST_CASE("csv parsing") {
  const auto rows = parse_csv("\"1\",\"a, b\",\"say \"\"hi\"\"\"\r\n2,plain,x\n\n\"3\",\"two\nlines\"\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"1", "a, b", "say \"hi\""});
  CHECK(rows[1] == std::vector<std::string>{"2", "plain", "x"});
  CHECK(rows[2] == std::vector<std::string>{"3", "two\nlines"});
  CHECK(parse_csv("1,\"\"").at(0) == std::vector<std::string>{"1", ""});
  CHECK_THROWS_AS(parse_csv("1,\"open"), DataError);
  CHECK_THROWS_AS(parse_csv("1,\"a\"b"), DataError);
}

TEST_CASE("csv loading joins fields and shifts labels") {
  const fs::path p = write_temp("vdcnn_load.csv", "\"2\",\"Title\",\"Body text\"\n\"1\",\"only\"\n");
  const Dataset d = load_csv(p, 2);
  fs::remove(p);
  REQUIRE(d.size() == 2);
  CHECK(d.samples[0].label == 1);
  CHECK(d.samples[0].text == "Title Body text");
  CHECK(d.samples[1].label == 0);
  CHECK(d.n_classes == 2);
}

TEST_CASE("quoted newlines do not add rows") {
  std::string csv;
  for (int i = 0; i < 25; ++i) csv += "\"1\",\"line one\nline two\r\nline three\"\n";
  const fs::path p = write_temp("vdcnn_rows.csv", csv);
  CHECK(load_csv(p, 4).size() == 25);
  fs::remove(p);
}

TEST_CASE("csv errors name the offending row") {
  CHECK(data_error("1,a\n2,b\n7,c\n").find("row 3") != std::string::npos);
  CHECK(data_error("1,a\n0,b\n").find("row 2") != std::string::npos);
  CHECK(data_error("1,a\nx,b\n").find("row 2") != std::string::npos);
  CHECK(data_error("1,a\n1\n").find("row 2") != std::string::npos);
  CHECK(data_error("1,\"a\nb\"\n5,c\n").find("row 2") != std::string::npos);
  CHECK(data_error("1,a\n1,\"b\nc\"d\n").find("line 2") != std::string::npos);
  CHECK_FALSE(data_error("").empty());
  CHECK_THROWS_AS(load_csv("/nonexistent/vdcnn.csv", 2), DataError);
}

TEST_CASE("write_csv round-trips through load_csv") {
  Dataset d;
  d.n_classes = 3;
  d.samples = {{0, "plain"}, {2, "with \"quotes\", commas\nand newlines"}, {1, ""}};
  const fs::path p = fs::temp_directory_path() / "vdcnn_roundtrip.csv";
  write_csv(d, p);
  const Dataset back = load_csv(p, 3);
  fs::remove(p);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.samples[i].label == d.samples[i].label);
    CHECK(back.samples[i].text == d.samples[i].text);
  }
}

TEST_CASE("split and encode_dataset") {
  Dataset d;
  d.n_classes = 2;
  for (int i = 0; i < 10; ++i) d.samples.push_back({i % 2, std::string(i + 1, 'b')});
  const auto [head, tail] = split(d, 7);
  CHECK(head.size() == 7);
  CHECK(tail.size() == 3);
  CHECK(tail.samples[0].text == "bbbbbbbb");
  const EncodedDataset e = encode_dataset(d, 4);
  CHECK(e.size() == 10);
  CHECK(e.ids.size() == 40);
  CHECK(e.ids[0] == 2);
  CHECK(e.ids[1] == 0);
  CHECK(e.labels[3] == 1);
}

TEST_CASE("batches cover every sample once per epoch") {
  Dataset d;
  d.n_classes = 2;
  for (int i = 0; i < 10; ++i) d.samples.push_back({i % 2, std::string(1, static_cast<char>('a' + i))});
  const EncodedDataset e = encode_dataset(d, 3);

  const auto plain = batches(e, 4, 1, false);
  REQUIRE(plain.size() == 3);
  CHECK(plain[0].size() == 4);
  CHECK(plain[1].size() == 4);
  CHECK(plain[2].size() == 2);
  for (std::size_t i = 0; i < 10; ++i) CHECK(plain[i / 4].ids[(i % 4) * 3] == TokenId(1 + i));

  const auto a = batch_indices(10, 4, 5, 0, true);
  CHECK(a == batch_indices(10, 4, 5, 0, true));
  CHECK(a != batch_indices(10, 4, 5, 1, true));
  std::vector<std::size_t> seen;
  for (const auto& b : a) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(seen[i] == i);
  CHECK_THROWS_AS(batch_indices(0, 4, 1, 0, true), DataError);
}

TEST_CASE("motif task is balanced and labelled correctly") {
  MotifTaskConfig cfg;
  cfg.n_samples = 400;
  cfg.length = 64;
  const Dataset d = make_motif_dataset(cfg);
  REQUIRE(d.size() == 400);
  CHECK(d.n_classes == 2);
  std::size_t positives = 0;
  for (const Sample& s : d.samples) {
    CHECK(s.text.size() == 64);
    const bool has = s.text.find(cfg.motif) != std::string::npos;
    CHECK(has == (s.label == 1));
    positives += s.label == 1;
    for (char c : s.text) CHECK(default_vocabulary().id_of(c) != Vocabulary::unk_id);
  }
  CHECK(positives == 200);
  const Dataset again = make_motif_dataset(cfg);
  CHECK(again.samples[17].text == d.samples[17].text);
  cfg.seed = 2;
  CHECK(make_motif_dataset(cfg).samples[17].text != d.samples[17].text);
}

}  // TEST_SUITE
