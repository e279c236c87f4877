#include "kurel/textprep.hpp"

#include <algorithm>
#include <cctype>

namespace kurel::textprep {

namespace {

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
// Bytes >= 0x80 belong to UTF-8 sequences and are kept as word characters.
bool is_word_byte(char c) {
  return is_upper(c) || is_lower(c) || is_digit(c) || static_cast<unsigned char>(c) >= 0x80;
}

bool iequals_at(std::string_view s, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > s.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i) {
    char a = s[pos + i];
    if (is_upper(a)) a = static_cast<char>(a - 'A' + 'a');
    if (a != needle[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view s, std::string_view needle, std::size_t from) {
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (iequals_at(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

// Matches `<name` + optional attributes + `>` at pos; returns one past '>'.
std::size_t match_open_tag(std::string_view s, std::size_t pos, std::string_view name) {
  if (pos >= s.size() || s[pos] != '<' || !iequals_at(s, pos + 1, name)) return std::string_view::npos;
  std::size_t i = pos + 1 + name.size();
  if (i >= s.size() || (s[i] != '>' && !is_ascii_space(s[i]))) return std::string_view::npos;
  auto close = s.find('>', i);
  return close == std::string_view::npos ? close : close + 1;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string decode_html_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    bool ok = true;
    if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "amp") out.push_back('&');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos" || ent == "#39") out.push_back('\'');
    else if (ent == "nbsp") out.push_back(' ');
    else if (ent.size() > 1 && ent[0] == '#') {
      std::uint32_t cp = 0;
      bool hex = ent[1] == 'x' || ent[1] == 'X';
      std::size_t start = hex ? 2 : 1;
      if (start >= ent.size()) ok = false;
      for (std::size_t k = start; ok && k < ent.size(); ++k) {
        char c = ent[k];
        int d = is_digit(c) ? c - '0' : (hex && c >= 'a' && c <= 'f') ? c - 'a' + 10 : (hex && c >= 'A' && c <= 'F') ? c - 'A' + 10 : -1;
        if (d < 0 || cp > 0x10FFFF) ok = false;
        else cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
      }
      if (ok && cp <= 0x10FFFF) append_utf8(out, cp == 0xA0 ? ' ' : cp);
      else ok = false;
    } else {
      ok = false;
    }
    if (ok) i = semi;
    else out.push_back('&');
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  bool any_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      pending_space = true;
      any_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  if (out.empty() && any_space) return " ";
  return out;
}

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  return s;
}

bool is_url(std::string_view s) {
  return iequals_at(s, 0, "http://") || iequals_at(s, 0, "https://") || iequals_at(s, 0, "ftp://") ||
         iequals_at(s, 0, "www.");
}

bool is_number(std::string_view s) {
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
  if (s.empty()) return false;
  auto dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (dot != std::string_view::npos && frac.empty()) return false;
  if (int_part.empty() && frac.empty()) return false;
  auto all_digits = [](std::string_view p) { return std::all_of(p.begin(), p.end(), is_digit); };
  return all_digits(int_part) && all_digits(frac);
}

bool is_edge_punct(char c) {
  return !is_word_byte(c) && !is_ascii_space(c) && c != '+' && c != '-';
}

}  // namespace

CodeExtraction extract_code_snippets(std::string_view html) {
  CodeExtraction result;
  std::string remaining;
  std::size_t cursor = 0;
  std::size_t pos = 0;
  while ((pos = ifind(html, "<pre", pos)) != std::string_view::npos) {
    std::size_t after_pre = match_open_tag(html, pos, "pre");
    std::size_t after_code = after_pre == std::string_view::npos ? after_pre : match_open_tag(html, after_pre, "code");
    if (after_code == std::string_view::npos) {
      pos += 4;
      continue;
    }
    std::size_t close = ifind(html, "</code></pre>", after_code);
    if (close == std::string_view::npos) {
      warn("unbalanced <pre><code> block; text left unextracted");
      result.html_without_code = std::string(html);
      result.snippets.clear();
      result.unbalanced = true;
      return result;
    }
    remaining.append(html.substr(cursor, pos - cursor));
    result.snippets.push_back(decode_html_entities(html.substr(after_code, close - after_code)));
    cursor = close + std::string_view("</code></pre>").size();
    pos = cursor;
  }
  remaining.append(html.substr(cursor));
  result.html_without_code = std::move(remaining);
  return result;
}

std::string strip_html(std::string_view html) {
  std::string text;
  text.reserve(html.size());
  for (std::size_t i = 0; i < html.size(); ++i) {
    char c = html[i];
    if (c != '<' || i + 1 >= html.size()) {
      text.push_back(c);
      continue;
    }
    char n = html[i + 1];
    bool opens_tag = is_upper(n) || is_lower(n) || n == '/' || n == '!' || n == '?';
    if (!opens_tag) {
      text.push_back(c);
      continue;
    }
    std::size_t end;
    if (html.substr(i, 4) == "<!--") {
      end = html.find("-->", i + 4);
      if (end != std::string_view::npos) end += 2;
    } else {
      end = html.find('>', i + 1);
    }
    // An unterminated tag swallows the rest of the input.
    if (end == std::string_view::npos) break;
    text.push_back(' ');
    i = end;
  }
  return collapse_whitespace(decode_html_entities(text));
}

std::string remove_signal_block_html(std::string_view html, bool* removed) {
  if (removed) *removed = false;
  std::string_view rest = ltrim(html);
  std::size_t offset = html.size() - rest.size();
  std::size_t after_open = match_open_tag(html, offset, "blockquote");
  if (after_open == std::string_view::npos) return std::string(html);
  // Find the matching close, allowing nested blockquotes.
  int depth = 1;
  std::size_t i = after_open;
  std::size_t block_end = std::string_view::npos;
  while (i < html.size()) {
    std::size_t next_open = ifind(html, "<blockquote", i);
    std::size_t next_close = ifind(html, "</blockquote>", i);
    if (next_close == std::string_view::npos) break;
    if (next_open != std::string_view::npos && next_open < next_close) {
      ++depth;
      i = next_open + 11;
      continue;
    }
    if (--depth == 0) {
      block_end = next_close + 13;
      break;
    }
    i = next_close + 13;
  }
  if (block_end == std::string_view::npos) return std::string(html);
  if (ifind(html.substr(offset, block_end - offset), "possible duplicate", 0) == std::string_view::npos) {
    return std::string(html);
  }
  if (removed) *removed = true;
  return std::string(html.substr(block_end));
}

std::string remove_signals(std::string_view text, bool* removed) {
  if (removed) *removed = false;
  std::string_view rest = ltrim(text);
  std::string_view marker;
  for (std::string_view m : {std::string_view("Possible Duplicates:"), std::string_view("Possible Duplicate:")}) {
    if (rest.starts_with(m)) {
      marker = m;
      break;
    }
  }
  if (marker.empty()) return std::string(text);
  std::string_view after = ltrim(rest.substr(marker.size()));
  std::size_t title_end = std::string_view::npos;
  if (auto nl = after.find('\n'); nl != std::string_view::npos) {
    title_end = nl;
  } else {
    for (std::size_t i = 0; i < after.size(); ++i) {
      char c = after[i];
      if ((c == '?' || c == '.' || c == '!') && (i + 1 == after.size() || is_ascii_space(after[i + 1]))) {
        title_end = i + 1;
        break;
      }
    }
  }
  if (removed) *removed = true;
  if (title_end == std::string_view::npos) return std::string(after);
  return std::string(ltrim(after.substr(title_end)));
}

std::vector<std::string> split_camel_case(std::string_view w) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    bool boundary = is_upper(w[i]) && (is_lower(w[i - 1]) ||
                                       (is_upper(w[i - 1]) && i + 1 < w.size() && is_lower(w[i + 1])));
    if (boundary) {
      parts.emplace_back(w.substr(start, i - start));
      start = i;
    }
  }
  if (start < w.size()) parts.emplace_back(w.substr(start));
  return parts;
}

std::vector<std::string> tokenize(std::string_view text, const StopWords& stop_words) {
  std::vector<std::string> tokens;
  auto emit = [&](std::string tok) {
    if (tok.empty() || stop_words.contains(tok)) return;
    tokens.push_back(std::move(tok));
  };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t b = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    std::string_view chunk = text.substr(b, i - b);
    if (chunk.empty()) continue;

    std::string_view core = chunk;
    while (!core.empty() && is_edge_punct(core.front())) core.remove_prefix(1);
    while (!core.empty() && is_edge_punct(core.back())) core.remove_suffix(1);
    if (is_url(core)) {
      emit("url");
      continue;
    }
    if (is_number(core)) {
      emit("num");
      continue;
    }
    std::size_t j = 0;
    while (j < chunk.size()) {
      while (j < chunk.size() && !is_word_byte(chunk[j])) ++j;
      std::size_t pb = j;
      while (j < chunk.size() && is_word_byte(chunk[j])) ++j;
      if (pb == j) continue;
      for (auto& part : split_camel_case(chunk.substr(pb, j - pb))) {
        if (std::all_of(part.begin(), part.end(), is_digit)) {
          emit("num");
        } else {
          emit(to_lower_ascii(part));
        }
      }
    }
  }
  return tokens;
}

namespace {

std::string clean_title(std::string_view title) {
  // Titles are plain text (angle brackets are literal, e.g. generics).
  std::string t = collapse_whitespace(decode_html_entities(title));
  if (t == " ") t.clear();
  for (std::string_view suffix : {std::string_view(" [duplicate]"), std::string_view(" [closed]")}) {
    if (t.size() >= suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
      t.resize(t.size() - suffix.size());
    }
  }
  return t;
}

std::string clean_text(std::string_view html) {
  std::string t = strip_html(html);
  return t == " " ? std::string() : t;
}

}  // namespace

CleanKU clean_knowledge_unit(const ingest::KnowledgeUnit& ku, const StopWords& stop_words, CleanStats* stats) {
  CleanKU out;
  out.id = ku.id;
  out.tags = ku.tags;
  out.accepted_answer_id = ku.accepted_answer_id;

  out.title_text = clean_title(ku.title);
  out.title_tokens = tokenize(out.title_text, stop_words);

  auto body = extract_code_snippets(ku.body_html);
  if (body.unbalanced && stats) ++stats->unbalanced_code_blocks;
  bool removed_html = false;
  bool removed_text = false;
  std::string body_html = remove_signal_block_html(body.html_without_code, &removed_html);
  out.body_text = remove_signals(clean_text(body_html), &removed_text);
  if (stats && (removed_html || removed_text)) ++stats->signal_blocks_removed;
  out.body_tokens = tokenize(out.body_text, stop_words);
  out.body_code = std::move(body.snippets);

  for (const auto& answer : ku.answers) {
    auto ex = extract_code_snippets(answer.body_html);
    if (ex.unbalanced && stats) ++stats->unbalanced_code_blocks;
    std::string text = clean_text(ex.html_without_code);
    auto toks = tokenize(text, stop_words);
    out.answer_ids.push_back(answer.id);
    out.answers_tokens.insert(out.answers_tokens.end(), toks.begin(), toks.end());
    out.answers_code.insert(out.answers_code.end(), ex.snippets.begin(), ex.snippets.end());
    if (ku.accepted_answer_id && *ku.accepted_answer_id == answer.id) {
      out.accepted_answer_text = text;
      out.accepted_answer_tokens = std::move(toks);
      out.accepted_answer_code = ex.snippets;
    }
    out.answer_texts.push_back(std::move(text));
  }
  return out;
}

}  // namespace kurel::textprep
