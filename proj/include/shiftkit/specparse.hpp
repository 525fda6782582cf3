//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SHIFTKIT_SPECPARSE_HPP
#define SHIFTKIT_SPECPARSE_HPP

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shiftkit {

enum class Nucleus : std::uint8_t { H1, C13, F19, P31, B11, Si29 };

inline constexpr std::array<std::string_view, 6> kNucleusNames = {"1H", "13C", "19F",
                                                                  "31P", "11B", "29Si"};

inline std::string_view nucleus_name(Nucleus n) {
  return kNucleusNames[static_cast<std::size_t>(n)];
}

inline std::optional<Nucleus> nucleus_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kNucleusNames.size(); ++i)
    if (kNucleusNames[i] == s)
      return static_cast<Nucleus>(i);
  return std::nullopt;
}

enum class SolventClass : std::uint8_t { CDCl3, DMSOd6, Other, Unspecified };

inline std::string_view solvent_class_name(SolventClass c) {
  switch (c) {
  case SolventClass::CDCl3: return "CDCl3";
  case SolventClass::DMSOd6: return "DMSO-d6";
  case SolventClass::Other: return "Other";
  case SolventClass::Unspecified: return "Unspecified";
  }
  return "Other";
}

enum class Multiplicity : std::uint8_t { s, d, t, q, quint, m, dd, dt, td, br, unknown };

inline constexpr std::array<std::string_view, 11> kMultiplicityNames = {
    "s", "d", "t", "q", "quint", "m", "dd", "dt", "td", "br", "unknown"};

inline std::string_view multiplicity_name(Multiplicity m) {
  return kMultiplicityNames[static_cast<std::size_t>(m)];
}

struct Peak {
  double shift_low = 0.0;
  double shift_high = 0.0; // == shift_low for a point peak
  Multiplicity multiplicity = Multiplicity::unknown;
  std::optional<int> integration; // nuclei count from "nH"
  std::vector<double> j_values;   // Hz

  bool is_range() const { return shift_high != shift_low; }
  bool operator==(const Peak &) const = default;
};

/// Representative shift of a peak: the range midpoint.
inline double peak_shift(const Peak &p) { return 0.5 * (p.shift_low + p.shift_high); }

struct Spectrum {
  Nucleus nucleus = Nucleus::H1;
  std::optional<double> frequency_mhz;
  std::string solvent_raw;
  SolventClass solvent_class = SolventClass::Unspecified;
  std::vector<Peak> peaks;
  bool partial = false; // an unparseable trailing fragment was dropped

  bool operator==(const Spectrum &) const = default;
};

enum class SpectrumErrorKind { NoNucleusFound, NoPeaksFound, MalformedPeak };

class SpectrumError : public std::runtime_error {
public:
  SpectrumError(SpectrumErrorKind kind, std::size_t offset, std::string fragment,
                const std::string &what)
      : std::runtime_error(what + ": \"" + fragment + "\""), kind(kind), offset(offset),
        fragment(std::move(fragment)) {}

  SpectrumErrorKind kind;
  std::size_t offset;   // byte offset into the original line
  std::string fragment; // the offending substring
};

// ---------------------------------------------------------------------------
// Solvent classification
// ---------------------------------------------------------------------------

namespace detail {

/// Lowercases and keeps only [a-z0-9], mapping unicode super/subscript digits
/// to plain digits. "CDCl₃" and "(CD3)2SO" normalize to "cdcl3" / "cd32so".
std::string normalize_solvent_key(std::string_view raw);

} // namespace detail

inline SolventClass classify_solvent(std::string_view solvent_raw) {
  const std::string key = detail::normalize_solvent_key(solvent_raw);
  if (key.empty())
    return SolventClass::Unspecified;
  static const std::array<std::string_view, 5> kChloroform = {
      "cdcl3", "chloroformd", "chloroformd1", "deuterochloroform", "deuteriochloroform"};
  static const std::array<std::string_view, 5> kDmso = {"dmsod6", "cd32so", "d6dmso",
                                                        "dmso", "dimethylsulfoxided6"};
  for (auto a : kChloroform)
    if (key == a)
      return SolventClass::CDCl3;
  for (auto a : kDmso)
    if (key == a)
      return SolventClass::DMSOd6;
  return SolventClass::Other;
}

// ---------------------------------------------------------------------------
// Spectrum text parsing
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kDeltaMark = '\x01';

/// Decodes UTF-8 and folds typography into ASCII: all dash variants to '-',
/// super/subscript digits to digits, delta to a sentinel, exotic whitespace
/// to ' ', anything else unrecognized to '\x02'. norm_to_orig maps each
/// normalized character back to its original byte offset.
struct NormalizedLine {
  std::string text;
  std::vector<std::size_t> norm_to_orig;
};

inline NormalizedLine normalize_line(std::string_view raw) {
  NormalizedLine out;
  out.text.reserve(raw.size());
  std::size_t i = 0;
  auto push = [&](char c, std::size_t at) {
    out.text.push_back(c);
    out.norm_to_orig.push_back(at);
  };
  while (i < raw.size()) {
    const unsigned char b0 = static_cast<unsigned char>(raw[i]);
    if (b0 < 0x80) {
      push(static_cast<char>(b0), i);
      ++i;
      continue;
    }
    // Decode one UTF-8 sequence; broken sequences become '\x02'.
    std::uint32_t cp = 0;
    std::size_t len = 0;
    if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      push('\x02', i);
      ++i;
      continue;
    }
    if (i + len > raw.size()) {
      push('\x02', i);
      ++i;
      continue;
    }
    bool valid = true;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(raw[i + k]);
      if ((bk & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (!valid) {
      push('\x02', i);
      ++i;
      continue;
    }
    char mapped = '\x02';
    switch (cp) {
    case 0x2010: case 0x2012: case 0x2013: case 0x2014: case 0x2212:
      mapped = '-';
      break;
    case 0x03B4: // delta
      mapped = kDeltaMark;
      break;
    case 0x00A0: case 0x2009: case 0x202F:
      mapped = ' ';
      break;
    case 0x00B9: mapped = '1'; break;
    case 0x00B2: mapped = '2'; break;
    case 0x00B3: mapped = '3'; break;
    default:
      if (cp >= 0x2070 && cp <= 0x2079 && cp != 0x2071)
        mapped = static_cast<char>('0' + (cp - 0x2070));
      else if (cp >= 0x2080 && cp <= 0x2089)
        mapped = static_cast<char>('0' + (cp - 0x2080));
      break;
    }
    push(mapped, i);
    i += len;
  }
  return out;
}

inline std::string normalize_solvent_key(std::string_view raw) {
  const NormalizedLine norm = normalize_line(raw);
  std::string key;
  for (char c : norm.text) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u))
      key.push_back(static_cast<char>(std::tolower(u)));
  }
  return key;
}

struct SpectrumParser {
  std::string_view original;
  std::string text; // normalized
  std::vector<std::size_t> to_orig;
  std::size_t pos = 0;
  Spectrum spec;

  [[noreturn]] void fail(SpectrumErrorKind kind, std::size_t norm_at, const std::string &msg) {
    const std::size_t orig = norm_at < to_orig.size() ? to_orig[norm_at] : original.size();
    std::string fragment(original.substr(orig, std::min<std::size_t>(24, original.size() - orig)));
    throw SpectrumError(kind, orig, std::move(fragment), msg);
  }

  char peek(std::size_t ahead = 0) const {
    return pos + ahead < text.size() ? text[pos + ahead] : '\0';
  }
  bool done() const { return pos >= text.size(); }
  void skip_spaces() {
    while (!done() && (text[pos] == ' ' || text[pos] == '\t'))
      ++pos;
  }

  bool match_ci(std::string_view word) {
    if (pos + word.size() > text.size())
      return false;
    for (std::size_t k = 0; k < word.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(text[pos + k])) !=
          std::tolower(static_cast<unsigned char>(word[k])))
        return false;
    pos += word.size();
    return true;
  }

  /// Decimal-comma folding: a comma flanked by digits with no space after it
  /// is a decimal separator; list commas in this corpus are followed by
  /// whitespace. Applied once, in place.
  void fold_decimal_commas() {
    for (std::size_t k = 1; k + 1 < text.size(); ++k)
      if (text[k] == ',' && std::isdigit(static_cast<unsigned char>(text[k - 1])) &&
          std::isdigit(static_cast<unsigned char>(text[k + 1])))
        text[k] = '.';
  }

  std::optional<double> parse_number() {
    skip_spaces();
    std::size_t start = pos;
    std::size_t k = pos;
    if (k < text.size() && (text[k] == '-' || text[k] == '+'))
      ++k;
    std::size_t digits = 0;
    while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
      ++k;
      ++digits;
    }
    if (k < text.size() && text[k] == '.') {
      ++k;
      while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
        ++k;
        ++digits;
      }
    }
    if (digits == 0)
      return std::nullopt;
    double value = 0.0;
    auto res = std::from_chars(text.data() + start, text.data() + k, value);
    if (res.ec != std::errc())
      return std::nullopt;
    pos = k;
    return value;
  }

  // <nuc> NMR  — nucleus token anywhere near the start; "proton" accepted.
  void parse_nucleus() {
    skip_spaces();
    const std::size_t save = pos;
    if (match_ci("proton")) {
      spec.nucleus = Nucleus::H1;
      return;
    }
    pos = save;
    std::size_t k = pos;
    std::string digits;
    while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k])))
      digits.push_back(text[k++]);
    while (k < text.size() && text[k] == ' ')
      ++k;
    std::string sym;
    while (k < text.size() && std::isalpha(static_cast<unsigned char>(text[k])) && sym.size() < 2)
      sym.push_back(text[k++]);
    // Single-letter element followed by more letters means we grabbed too much
    // (e.g. "13C NMR": sym must stop at "C").
    if (sym.size() == 2 && sym != "Si" && sym != "si" && sym != "SI") {
      sym.pop_back();
      --k;
    }
    static const std::array<std::pair<std::string_view, Nucleus>, 6> kTable = {{
        {"1H", Nucleus::H1}, {"13C", Nucleus::C13}, {"19F", Nucleus::F19},
        {"31P", Nucleus::P31}, {"11B", Nucleus::B11}, {"29Si", Nucleus::Si29},
    }};
    std::string token = digits;
    if (!sym.empty()) {
      token += static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
      if (sym.size() > 1)
        token += static_cast<char>(std::tolower(static_cast<unsigned char>(sym[1])));
    }
    for (auto [name, nuc] : kTable)
      if (token == name) {
        spec.nucleus = nuc;
        pos = k;
        return;
      }
    fail(SpectrumErrorKind::NoNucleusFound, pos, "no nucleus token");
  }

  // (<freq> MHz, <solvent>) with both parts optional.
  void parse_header_paren() {
    skip_spaces();
    if (peek() != '(')
      return;
    const std::size_t open = pos;
    std::size_t close = std::string::npos;
    int depth = 0;
    for (std::size_t k = open; k < text.size(); ++k) {
      if (text[k] == '(')
        ++depth;
      else if (text[k] == ')' && --depth == 0) {
        close = k;
        break;
      }
    }
    if (close == std::string::npos)
      return; // leave for the peak scanner to reject
    ++pos;
    skip_spaces();
    const std::size_t save = pos;
    if (auto freq = parse_number()) {
      skip_spaces();
      if (match_ci("MHz")) {
        spec.frequency_mhz = freq;
        skip_spaces();
        if (peek() == ',')
          ++pos;
        skip_spaces();
      } else {
        pos = save; // not a frequency; whole parenthetical is the solvent
      }
    }
    if (pos < close) {
      std::size_t a = pos;
      std::size_t b = close;
      while (a < b && text[a] == ' ')
        ++a;
      while (b > a && text[b - 1] == ' ')
        --b;
      // Recover the raw solvent spelling from the original bytes.
      const std::size_t orig_a = to_orig[a];
      const std::size_t orig_b = b < to_orig.size() ? to_orig[b] : original.size();
      spec.solvent_raw = std::string(original.substr(orig_a, orig_b - orig_a));
    }
    pos = close + 1;
  }

  static Multiplicity multiplicity_from_token(std::string tok) {
    for (char &c : tok)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (tok == "quin" || tok == "quint" || tok == "p")
      return Multiplicity::quint;
    if (tok.rfind("br", 0) == 0)
      return Multiplicity::br;
    static const std::array<std::pair<std::string_view, Multiplicity>, 8> kTable = {{
        {"s", Multiplicity::s}, {"d", Multiplicity::d}, {"t", Multiplicity::t},
        {"q", Multiplicity::q}, {"m", Multiplicity::m}, {"dd", Multiplicity::dd},
        {"dt", Multiplicity::dt}, {"td", Multiplicity::td},
    }};
    for (auto [name, m] : kTable)
      if (tok == name)
        return m;
    return Multiplicity::unknown;
  }

  // (mult, J = a, b Hz, nH) — components in any order, all optional.
  void parse_peak_annotations(Peak &peak) {
    const std::size_t open = pos;
    ++pos; // '('
    bool in_j_list = false;
    while (true) {
      skip_spaces();
      if (done())
        fail(SpectrumErrorKind::MalformedPeak, open, "unclosed peak annotation");
      if (peek() == ')') {
        ++pos;
        return;
      }
      if (peek() == ',') {
        ++pos;
        continue;
      }
      const std::size_t seg_start = pos;
      // J = ...
      if ((peek() == 'J' || peek() == 'j') &&
          (peek(1) == ' ' || peek(1) == '=' || peek(1) == '\0')) {
        ++pos;
        skip_spaces();
        if (peek() == '=')
          ++pos;
        in_j_list = true;
        continue;
      }
      if (in_j_list) {
        if (auto v = parse_number()) {
          peak.j_values.push_back(*v);
          skip_spaces();
          if (match_ci("Hz"))
            in_j_list = false;
          continue;
        }
        in_j_list = false; // fall through to token handling
      }
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        // nH integration
        auto v = parse_number();
        skip_spaces();
        if (v && (peek() == 'H' || peek() == 'h')) {
          ++pos;
          if (*v < 1 || *v != static_cast<double>(static_cast<int>(*v)))
            fail(SpectrumErrorKind::MalformedPeak, seg_start, "integration must be a positive integer");
          peak.integration = static_cast<int>(*v);
          continue;
        }
        fail(SpectrumErrorKind::MalformedPeak, seg_start, "number inside annotation is neither J nor nH");
      }
      if (std::isalpha(static_cast<unsigned char>(peek()))) {
        std::string tok;
        while (!done() && (std::isalpha(static_cast<unsigned char>(peek())) || peek() == ' ')) {
          tok.push_back(take());
        }
        while (!tok.empty() && tok.back() == ' ')
          tok.pop_back();
        std::string compact;
        for (char c : tok)
          if (c != ' ')
            compact.push_back(c);
        peak.multiplicity = multiplicity_from_token(compact);
        continue;
      }
      fail(SpectrumErrorKind::MalformedPeak, seg_start, "unexpected character in peak annotation");
    }
  }

  char take() { return text[pos++]; }

  std::optional<Peak> parse_peak() {
    skip_spaces();
    if (done())
      return std::nullopt;
    const std::size_t start = pos;
    auto first = parse_number();
    if (!first)
      return std::nullopt;
    Peak peak;
    peak.shift_low = peak.shift_high = *first;
    skip_spaces();
    // Range: dash followed by another number (spaces allowed around the dash).
    if (peek() == '-') {
      const std::size_t save = pos;
      ++pos;
      auto second = parse_number();
      if (second) {
        peak.shift_low = std::min(*first, *second);
        peak.shift_high = std::max(*first, *second);
      } else {
        pos = save;
      }
    }
    skip_spaces();
    if (peek() == '(')
      parse_peak_annotations(peak);
    (void)start;
    return peak;
  }

  /// True when the rest of the line is an accepted terminator ("ppm", ".",
  /// ";" and whitespace), i.e. the spectrum is complete, not partial.
  bool at_clean_tail() {
    const std::size_t save = pos;
    skip_spaces();
    if (match_ci("ppm"))
      skip_spaces();
    while (!done() && (peek() == '.' || peek() == ';' || peek() == ' '))
      ++pos;
    if (done())
      return true;
    pos = save;
    return false;
  }

  Spectrum run() {
    fold_decimal_commas();
    parse_nucleus();
    skip_spaces();
    match_ci("NMR");
    skip_spaces();
    parse_header_paren();
    skip_spaces();
    if (peek() == ':')
      ++pos;
    skip_spaces();
    if (peek() == kDeltaMark) {
      ++pos;
      if (peek() == '=')
        ++pos;
    } else {
      const std::size_t save = pos;
      if (!match_ci("delta"))
        pos = save;
    }
    while (true) {
      skip_spaces();
      auto peak = parse_peak();
      if (!peak) {
        if (spec.peaks.empty()) {
          if (done())
            fail(SpectrumErrorKind::NoPeaksFound, pos, "no peaks found");
          fail(SpectrumErrorKind::MalformedPeak, pos, "expected a peak");
        }
        if (!at_clean_tail())
          spec.partial = true;
        break;
      }
      spec.peaks.push_back(std::move(*peak));
      skip_spaces();
      if (peek() == ',') {
        ++pos;
        continue;
      }
      if (at_clean_tail())
        break;
      spec.partial = true;
      break;
    }
    spec.solvent_class = classify_solvent(spec.solvent_raw);
    return std::move(spec);
  }
};

} // namespace detail

/// Parses one literature-style spectrum line, e.g.
///   1H NMR (400 MHz, CDCl3) δ 7.26 (d, J = 8.0 Hz, 2H), 3.85 (s, 3H)
/// The δ symbol is optional, dash variants separate ranges, decimal commas
/// are folded, and annotation components may come in any order. Throws
/// SpectrumError carrying the offending substring and its byte offset.
inline Spectrum parse_spectrum(std::string_view line) {
  detail::SpectrumParser parser;
  parser.original = line;
  detail::NormalizedLine norm = detail::normalize_line(line);
  parser.text = std::move(norm.text);
  parser.to_orig = std::move(norm.norm_to_orig);
  return parser.run();
}

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

} // namespace detail

/// Renders the canonical text form; parse_spectrum(to_canonical_text(s)) == s
/// for any spectrum whose solvent_raw survives verbatim (the canonical subset).
inline std::string to_canonical_text(const Spectrum &spec) {
  std::string out(nucleus_name(spec.nucleus));
  out += " NMR";
  if (spec.frequency_mhz || !spec.solvent_raw.empty()) {
    out += " (";
    if (spec.frequency_mhz) {
      out += detail::format_double(*spec.frequency_mhz);
      out += " MHz";
      if (!spec.solvent_raw.empty())
        out += ", ";
    }
    out += spec.solvent_raw;
    out += ")";
  }
  out += " \xce\xb4 "; // δ
  for (std::size_t i = 0; i < spec.peaks.size(); ++i) {
    const Peak &p = spec.peaks[i];
    if (i > 0)
      out += ", ";
    out += detail::format_double(p.shift_low);
    if (p.is_range()) {
      out += "-";
      out += detail::format_double(p.shift_high);
    }
    const bool has_ann = p.multiplicity != Multiplicity::unknown || p.integration ||
                         !p.j_values.empty();
    if (has_ann) {
      out += " (";
      bool first = true;
      if (p.multiplicity != Multiplicity::unknown) {
        out += multiplicity_name(p.multiplicity);
        first = false;
      }
      if (!p.j_values.empty()) {
        if (!first)
          out += ", ";
        out += "J = ";
        for (std::size_t k = 0; k < p.j_values.size(); ++k) {
          if (k > 0)
            out += ", ";
          out += detail::format_double(p.j_values[k]);
        }
        out += " Hz";
        first = false;
      }
      if (p.integration) {
        if (!first)
          out += ", ";
        out += std::to_string(*p.integration);
        out += "H";
      }
      out += ")";
    }
  }
  return out;
}

} // namespace shiftkit

#endif // SHIFTKIT_SPECPARSE_HPP
