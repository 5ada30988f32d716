#include <cctype>
#include <charconv>
#include <limits>
#include <set>

#include "theoryc/error.hpp"
#include "theoryc/theory.hpp"

namespace theoryc {

namespace {

enum class Tok { Ident, Int, Float, String, Punct, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_trivia();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) return t;

    const char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        t.text.push_back(advance());
      }
      t.type = Tok::Ident;
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      return number(t);
    }
    if (c == '"') {
      advance();
      while (true) {
        if (pos_ >= src_.size() || src_[pos_] == '\n') fail("unterminated string", t);
        char ch = advance();
        if (ch == '"') break;
        if (ch == '\\') {
          if (pos_ >= src_.size()) fail("unterminated string", t);
          ch = advance();
          if (ch != '"' && ch != '\\') fail("invalid escape in string", t);
        }
        t.text.push_back(ch);
      }
      t.type = Tok::String;
      return t;
    }
    static constexpr std::string_view kPunct = "{}[]():;,=";
    if (kPunct.find(c) != std::string_view::npos) {
      t.text.push_back(advance());
      t.type = Tok::Punct;
      return t;
    }
    fail(std::string("unexpected character '") + c + "'", t);
  }

 private:
  [[noreturn]] static void fail(const std::string& msg, const Token& at) {
    throw ParseError(ErrorCode::SyntaxError, msg, at.line, at.column);
  }

  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/')) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token number(Token t) {
    bool is_float = false;
    if (src_[pos_] == '-' || src_[pos_] == '+') {
      is_float = true;  // signed literals are only legal where reals are expected
      t.text.push_back(advance());
    }
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        t.text.push_back(advance());
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      t.text.push_back(advance());
      mantissa += digits();
    }
    if (mantissa == 0) fail("malformed number", t);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      is_float = true;
      t.text.push_back(advance());
      if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) t.text.push_back(advance());
      if (digits() == 0) fail("malformed exponent", t);
    }
    t.type = is_float ? Tok::Float : Tok::Int;
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) { cur_ = lex_.next(); }

  TheorySpec parse() {
    TheorySpec spec;
    expect_word("theory");
    spec.name = identifier("theory name");
    expect("{");
    bool have_signature = false;
    std::set<std::string> names;
    while (!peek("}")) {
      if (cur_.type == Tok::End) fail("unexpected end of input; expected '}'");
      const Token head = cur_;
      const std::string word = identifier("'signature', 'primitive' or 'relations'");
      if (word == "signature") {
        if (have_signature) fail_at(head, "duplicate signature block");
        spec.signature = signature();
        have_signature = true;
      } else if (word == "primitive") {
        const Token name_tok = cur_;
        Primitive p = primitive();
        if (!names.insert(p.name).second) {
          throw ParseError(ErrorCode::DuplicateName, "primitive '" + p.name + "' declared twice",
                           name_tok.line, name_tok.column);
        }
        spec.primitives.push_back(std::move(p));
      } else if (word == "relations") {
        relations(spec.relations);
      } else {
        fail_at(head, "unexpected '" + word + "'");
      }
    }
    expect("}");
    if (cur_.type != Tok::End) fail("trailing input after theory block");
    if (!have_signature) fail("missing signature block");
    return spec;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(cur_, msg); }

  [[noreturn]] static void fail_at(const Token& t, const std::string& msg) {
    throw ParseError(ErrorCode::SyntaxError, msg, t.line, t.column);
  }

  bool peek(std::string_view punct) const { return cur_.type == Tok::Punct && cur_.text == punct; }

  void expect(std::string_view punct) {
    if (!peek(punct)) {
      fail("expected '" + std::string(punct) + "' but found '" + describe(cur_) + "'");
    }
    cur_ = lex_.next();
  }

  bool accept(std::string_view punct) {
    if (!peek(punct)) return false;
    cur_ = lex_.next();
    return true;
  }

  static std::string describe(const Token& t) { return t.type == Tok::End ? "end of input" : t.text; }

  std::string identifier(const std::string& what) {
    if (cur_.type != Tok::Ident) fail("expected " + what + " but found '" + describe(cur_) + "'");
    std::string s = cur_.text;
    cur_ = lex_.next();
    return s;
  }

  void expect_word(std::string_view word) {
    if (cur_.type != Tok::Ident || cur_.text != word) {
      fail("expected '" + std::string(word) + "' but found '" + describe(cur_) + "'");
    }
    cur_ = lex_.next();
  }

  int integer() {
    if (cur_.type != Tok::Int) fail("expected a non-negative integer but found '" + describe(cur_) + "'");
    int value = 0;
    const auto* first = cur_.text.data();
    const auto* last = first + cur_.text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) fail("integer out of range: " + cur_.text);
    cur_ = lex_.next();
    return value;
  }

  double real() {
    if (cur_.type != Tok::Int && cur_.type != Tok::Float) {
      fail("expected a number but found '" + describe(cur_) + "'");
    }
    std::string_view text = cur_.text;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("number out of range: " + cur_.text);
    cur_ = lex_.next();
    return value;
  }

  RealVector vector() {
    RealVector v;
    expect("[");
    if (!peek("]")) {
      do {
        v.push_back(real());
      } while (accept(","));
    }
    expect("]");
    return v;
  }

  RealMatrix matrix() {
    RealMatrix m;
    expect("[");
    if (!peek("]")) {
      do {
        m.push_back(vector());
      } while (accept(","));
    }
    expect("]");
    return m;
  }

  // Consumes `<key> :` and returns the key, rejecting repeats within one block.
  std::string field(std::set<std::string>& seen) {
    const Token at = cur_;
    std::string key = identifier("field name");
    if (!seen.insert(key).second) fail_at(at, "duplicate field '" + key + "'");
    expect(":");
    return key;
  }

  void require(const std::set<std::string>& seen, std::initializer_list<const char*> keys, const Token& at,
               std::string_view block) {
    for (const char* k : keys) {
      if (!seen.contains(k)) fail_at(at, std::string(block) + " block is missing field '" + k + "'");
    }
  }

  Signature signature() {
    const Token at = cur_;
    Signature sig;
    std::set<std::string> seen;
    expect("{");
    while (!peek("}")) {
      const Token key_tok = cur_;
      const std::string key = field(seen);
      if (key == "input") {
        sig.input_dim = integer();
      } else if (key == "output") {
        sig.output_dim = integer();
      } else if (key == "names") {
        std::vector<std::string> names;
        expect("[");
        if (!peek("]")) {
          do {
            if (cur_.type != Tok::String) fail("expected a quoted variable name");
            names.push_back(cur_.text);
            cur_ = lex_.next();
          } while (accept(","));
        }
        expect("]");
        sig.variable_names = std::move(names);
      } else {
        fail_at(key_tok, "unknown signature field '" + key + "'");
      }
      expect(";");
    }
    expect("}");
    require(seen, {"input", "output"}, at, "signature");
    return sig;
  }

  Primitive primitive() {
    Primitive p;
    p.name = identifier("primitive name");
    expect(":");
    const Token kind_tok = cur_;
    const std::string kind = identifier("primitive kind");
    if (kind == "Sym") {
      p.kind = PrimitiveKind::Sym;
    } else if (kind == "Cons") {
      p.kind = PrimitiveKind::Cons;
    } else if (kind == "Caus") {
      p.kind = PrimitiveKind::Caus;
    } else if (kind == "Diff") {
      p.kind = PrimitiveKind::Diff;
    } else {
      throw ParseError(ErrorCode::UnknownKind, "unknown primitive kind '" + kind + "'", kind_tok.line,
                       kind_tok.column);
    }
    expect("=");
    const Token payload_tok = cur_;
    const std::string payload = identifier("payload constructor");
    if (payload == "group") {
      p.payload = group();
    } else if (payload == "conserve") {
      p.payload = conserve();
    } else if (payload == "dag") {
      p.payload = dag();
    } else if (payload == "divfree2d") {
      expect("{");
      expect("}");
      p.payload = DiffConstraint{};
    } else {
      fail_at(payload_tok, "unknown payload constructor '" + payload + "'");
    }
    if (payload_kind(p.payload) != p.kind) {
      fail_at(payload_tok, "payload '" + payload + "' does not match declared kind " + kind);
    }
    return p;
  }

  SymmetryGroup group() {
    const Token at = cur_;
    SymmetryGroup g;
    std::set<std::string> seen;
    expect("{");
    while (!peek("}")) {
      const Token key_tok = cur_;
      const std::string key = field(seen);
      if (key == "degree") {
        g.degree = integer();
      } else if (key == "generators") {
        expect("[");
        if (!peek("]")) {
          do {
            expect_word("perm");
            expect("(");
            Permutation perm;
            while (!peek(")")) perm.push_back(integer());
            expect(")");
            g.generators.push_back(std::move(perm));
          } while (accept(","));
        }
        expect("]");
      } else if (key == "output_action") {
        const std::string action = identifier("'same' or 'invariant'");
        if (action == "same") {
          g.output_action = OutputAction::Same;
        } else if (action == "invariant") {
          g.output_action = OutputAction::Invariant;
        } else {
          fail_at(key_tok, "output_action must be 'same' or 'invariant'");
        }
      } else {
        fail_at(key_tok, "unknown group field '" + key + "'");
      }
      expect(";");
    }
    expect("}");
    require(seen, {"degree", "generators", "output_action"}, at, "group");
    return g;
  }

  ConservationLaw conserve() {
    const Token at = cur_;
    ConservationLaw c;
    std::set<std::string> seen;
    expect("{");
    while (!peek("}")) {
      const Token key_tok = cur_;
      const std::string key = field(seen);
      if (key == "matrix") {
        c.matrix = matrix();
      } else if (key == "mode") {
        const std::string mode = identifier("'preserve' or 'fix'");
        if (mode == "preserve") {
          c.mode = ConservationMode::Preserve;
          if (peek("[")) c.input_matrix = matrix();
        } else if (mode == "fix") {
          c.mode = ConservationMode::Fix;
          c.target = vector();
        } else {
          fail_at(key_tok, "mode must be 'preserve' or 'fix'");
        }
      } else {
        fail_at(key_tok, "unknown conserve field '" + key + "'");
      }
      expect(";");
    }
    expect("}");
    require(seen, {"matrix", "mode"}, at, "conserve");
    return c;
  }

  CausalGraph dag() {
    const Token at = cur_;
    CausalGraph d;
    std::set<std::string> seen;
    expect("{");
    while (!peek("}")) {
      const Token key_tok = cur_;
      const std::string key = field(seen);
      if (key == "vars") {
        d.num_vars = integer();
      } else if (key == "edges") {
        expect("[");
        if (!peek("]")) {
          do {
            expect("(");
            const int parent = integer();
            expect(",");
            const int child = integer();
            expect(")");
            d.edges.emplace_back(parent, child);
          } while (accept(","));
        }
        expect("]");
      } else {
        fail_at(key_tok, "unknown dag field '" + key + "'");
      }
      expect(";");
    }
    expect("}");
    require(seen, {"vars", "edges"}, at, "dag");
    return d;
  }

  void relations(std::vector<Relation>& out) {
    expect("{");
    while (!peek("}")) {
      const Token at = cur_;
      const std::string kind = identifier("relation name");
      if (kind != "compatible") fail_at(at, "unknown relation '" + kind + "'");
      Relation r;
      r.kind = RelationKind::Compatible;
      expect("(");
      if (!peek(")")) {
        do {
          r.args.push_back(identifier("primitive name"));
        } while (accept(","));
      }
      expect(")");
      expect(";");
      out.push_back(std::move(r));
    }
    expect("}");
  }

  Lexer lex_;
  Token cur_;
};

}  // namespace

TheorySpec parse_theory(std::string_view text) { return Parser(text).parse(); }

}  // namespace theoryc
