#include <doctest.h>

#include <sstream>

#include "kurel/ingest.hpp"
#include "support.hpp"

using namespace kurel;
using namespace kurel::ingest;

namespace {

AttributeMap row(std::initializer_list<std::pair<const std::string, std::string>> kv) { return AttributeMap(kv); }

RawPost question(KuId id, std::vector<std::string> tags, std::optional<KuId> accepted = std::nullopt) {
  RawPost p;
  p.id = id;
  p.type = PostType::question;
  p.title = "q" + std::to_string(id);
  p.body = "<p>b</p>";
  p.tags = std::move(tags);
  p.accepted_answer_id = accepted;
  return p;
}

RawPost answer(KuId id, KuId parent) {
  RawPost p;
  p.id = id;
  p.type = PostType::answer;
  p.parent_id = parent;
  p.body = "<p>a</p>";
  return p;
}

}  // namespace

TEST_CASE("xml rows decode attributes and entities") {
  auto r = parse_xml_row(R"(  <row Id="7" PostTypeId="1" Title="a &amp; b" Body="&lt;p&gt;x&#xA;y&lt;/p&gt;" />)");
  REQUIRE(r);
  CHECK(r->at("Id") == "7");
  CHECK(r->at("Title") == "a & b");
  CHECK(r->at("Body") == "<p>x\ny</p>");
  CHECK_FALSE(parse_xml_row("<?xml version=\"1.0\" encoding=\"utf-8\"?>"));
  CHECK_FALSE(parse_xml_row("<posts>"));
  CHECK_FALSE(parse_xml_row("</posts>"));
  CHECK_THROWS_AS(parse_xml_row(R"(<row Id="7 />)"), Error);
}

TEST_CASE("json rows stringify scalar values") {
  auto r = parse_json_row(R"({"Id": 3, "PostTypeId": "2", "ParentId": 1, "Body": "<p>a</p>"})");
  REQUIRE(r);
  CHECK(r->at("Id") == "3");
  CHECK(r->at("ParentId") == "1");
  CHECK(r->at("Body") == "<p>a</p>");
}

TEST_CASE("entity decoding") {
  CHECK(decode_xml_entities("&lt;&gt;&amp;&quot;&apos;") == "<>&\"'");
  CHECK(decode_xml_entities("&#65;&#x42;") == "AB");
  CHECK(decode_xml_entities("&#xE9;") == "\xC3\xA9");
  CHECK(decode_xml_entities("plain") == "plain");
}

TEST_CASE("tag strings") {
  CHECK(parse_tags("<java><generics>") == std::vector<std::string>{"java", "generics"});
  CHECK(parse_tags("|java|generics|") == std::vector<std::string>{"java", "generics"});
  CHECK(parse_tags("").empty());
}

TEST_CASE("parse_posts field mapping") {
  SkipLog log;
  auto posts = parse_posts({row({{"Id", "1"}, {"PostTypeId", "1"}, {"Title", "t"}, {"Body", "<p>b</p>"}, {"Tags", "<java>"}}),
                            row({{"Id", "2"}, {"PostTypeId", "2"}, {"ParentId", "1"}, {"Body", "<p>a</p>"}}),
                            row({{"Id", "3"}, {"PostTypeId", "5"}, {"Body", "wiki"}})},
                           log);
  REQUIRE(posts.size() == 2);
  CHECK(posts[0].type == PostType::question);
  CHECK(posts[0].title == "t");
  CHECK(posts[0].body == "<p>b</p>");
  CHECK(posts[0].tags == std::vector<std::string>{"java"});
  CHECK(posts[1].type == PostType::answer);
  CHECK(posts[1].parent_id == 1);
  CHECK(log.empty());
}

TEST_CASE("parse_posts skip log and corrupt dump") {
  SkipLog log;
  auto posts = parse_posts({row({{"Id", "x1"}, {"PostTypeId", "1"}}), row({{"Id", "4"}, {"PostTypeId", "1"}})}, log);
  CHECK(posts.size() == 1);
  CHECK(log.size() == 1);
  CHECK_THROWS_AS(parse_posts({row({{"Id", "4"}, {"PostTypeId", "1"}}), row({{"Id", "4"}, {"PostTypeId", "2"}})}, log),
                  Error);
}

TEST_CASE("assemble_knowledge_units") {
  SkipLog log;
  SUBCASE("question with two answers") {
    auto units = assemble_knowledge_units({question(1, {"java"}), answer(3, 1), answer(2, 1)}, "java", log);
    REQUIRE(units.size() == 1);
    REQUIRE(units[0].answers.size() == 2);
    CHECK(units[0].answers[0].id == 2);
    CHECK(units[0].answers[1].id == 3);
  }
  SUBCASE("tag filter excludes") {
    CHECK(assemble_knowledge_units({question(1, {"python"})}, "java", log).empty());
    CHECK(log.empty());
  }
  SUBCASE("tag filter is case-insensitive and exact") {
    CHECK(assemble_knowledge_units({question(1, {"Java"})}, "java", log).size() == 1);
    CHECK(assemble_knowledge_units({question(1, {"javascript"})}, "java", log).empty());
  }
  SUBCASE("no answers is valid") {
    auto units = assemble_knowledge_units({question(1, {"java"})}, "java", log);
    REQUIRE(units.size() == 1);
    CHECK(units[0].answers.empty());
  }
  SUBCASE("orphan answer logged") {
    auto units = assemble_knowledge_units({question(1, {"java"}), answer(2, 99)}, "java", log);
    CHECK(units[0].answers.empty());
    CHECK(log.size() == 1);
  }
  SUBCASE("answer of an unselected question is not an orphan") {
    assemble_knowledge_units({question(1, {"java"}), question(5, {"c"}), answer(6, 5)}, "java", log);
    CHECK(log.empty());
  }
  SUBCASE("accepted answer outside the unit is cleared") {
    auto units = assemble_knowledge_units({question(1, {"java"}, 42), answer(2, 1)}, "java", log);
    CHECK_FALSE(units[0].accepted_answer_id);
    CHECK(log.size() == 1);
  }
  SUBCASE("output sorted by id") {
    auto units = assemble_knowledge_units({question(9, {"java"}), question(4, {"java"})}, "java", log);
    REQUIRE(units.size() == 2);
    CHECK(units[0].id == 4);
  }
}

TEST_CASE("ingest_posts_file matches in-memory assembly") {
  kurel::testing::TempDir dir;
  std::string xml =
      "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n"
      "  <row Id=\"1\" PostTypeId=\"1\" AcceptedAnswerId=\"3\" Title=\"T1\" Body=\"&lt;p&gt;b&lt;/p&gt;\" Tags=\"&lt;java&gt;\" />\n"
      "  <row Id=\"2\" PostTypeId=\"1\" Title=\"T2\" Body=\"x\" Tags=\"&lt;python&gt;\" />\n"
      "  <row Id=\"3\" PostTypeId=\"2\" ParentId=\"1\" Body=\"a\" />\n"
      "  <row Id=\"4\" PostTypeId=\"2\" ParentId=\"2\" Body=\"a\" />\n"
      "  <row Id=\"5\" PostTypeId=\"2\" ParentId=\"77\" Body=\"a\" />\n"
      "</posts>\n";
  write_file(dir / "Posts.xml", xml);
  SkipLog file_log, mem_log;
  std::size_t questions = 0;
  auto from_file = ingest_posts_file(dir / "Posts.xml", "java", file_log, &questions);
  std::istringstream in(xml);
  auto from_memory = assemble_knowledge_units(parse_posts(in, mem_log), "java", mem_log);
  CHECK(from_file == from_memory);
  CHECK(questions == 1);
  REQUIRE(from_file.size() == 1);
  CHECK(from_file[0].title == "T1");
  CHECK(from_file[0].accepted_answer_id == 3);
  CHECK(file_log.size() == 1);
  CHECK(mem_log.size() == 1);
}

TEST_CASE("parse_links") {
  SkipLog log;
  std::set<KuId> known = {1, 2, 3};
  SUBCASE("duplicate kind") {
    auto links = parse_links({row({{"PostId", "1"}, {"RelatedPostId", "2"}, {"LinkTypeId", "3"}})}, known, log);
    REQUIRE(links.size() == 1);
    CHECK(links[0] == LinkRecord{1, 2, LinkKind::duplicate});
  }
  SUBCASE("unknown endpoint dropped") {
    CHECK(parse_links({row({{"PostId", "1"}, {"RelatedPostId", "9"}, {"LinkTypeId", "1"}})}, known, log).empty());
    CHECK(log.empty());
  }
  SUBCASE("identical rows deduplicated") {
    auto r = row({{"PostId", "1"}, {"RelatedPostId", "3"}, {"LinkTypeId", "1"}});
    auto links = parse_links({r, r}, known, log);
    REQUIRE(links.size() == 1);
    CHECK(links[0].kind == LinkKind::direct);
  }
  SUBCASE("unknown kind code logged") {
    CHECK(parse_links({row({{"PostId", "1"}, {"RelatedPostId", "2"}, {"LinkTypeId", "7"}})}, known, log).empty());
    CHECK(log.size() == 1);
  }
  SUBCASE("configurable codes") {
    LinkKindCodes codes{10, 11};
    auto links = parse_links({row({{"PostId", "1"}, {"RelatedPostId", "2"}, {"LinkTypeId", "10"}})}, known, log, codes);
    REQUIRE(links.size() == 1);
    CHECK(links[0].kind == LinkKind::duplicate);
  }
  SUBCASE("json rows from a stream") {
    std::istringstream in(R"({"PostId": 2, "RelatedPostId": 3, "LinkTypeId": 3})"
                          "\n");
    auto links = parse_links(in, known, log);
    REQUIRE(links.size() == 1);
    CHECK(links[0] == LinkRecord{2, 3, LinkKind::duplicate});
  }
}

TEST_CASE("link kind names round-trip") {
  for (auto k : {LinkKind::duplicate, LinkKind::direct}) CHECK(parse_link_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_link_kind("related"), Error);
}
