#include "specfission/expr.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/time_util.hpp"

namespace specfission {

namespace {

// ---------------------------------------------------------------------------
// Tokenizer

enum class Tok {
    End,
    Number,
    String,
    Ident,
    Punct, // operators and delimiters, text holds the spelling
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    Value literal; // Number/String payload
    size_t offset = 0;
};

[[noreturn]] void syntax_error(const std::string& msg, size_t offset) {
    throw Error(ErrorCode::SyntaxError, msg + " at offset " + std::to_string(offset), offset);
}

class Lexer {
  public:
    explicit Lexer(const std::string& text) : s_(text) { advance(); }

    const Token& peek() const { return cur_; }

    Token next() {
        Token t = cur_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        cur_ = Token{};
        cur_.offset = pos_;
        if (pos_ >= s_.size()) return;
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            lex_number();
        } else if (c == '"' || c == '\'') {
            lex_string(c);
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                    s_[pos_] == '$'))
                ++pos_;
            cur_.kind = Tok::Ident;
            cur_.text = s_.substr(start, pos_ - start);
        } else {
            lex_punct();
        }
    }

    void lex_number() {
        size_t start = pos_;
        bool is_float = false;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            is_float = true;
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            is_float = true;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
                syntax_error("malformed exponent", pos_);
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        std::string text = s_.substr(start, pos_ - start);
        cur_.kind = Tok::Number;
        cur_.text = text;
        if (!is_float) {
            errno = 0;
            char* end = nullptr;
            long long v = std::strtoll(text.c_str(), &end, 10);
            if (errno == 0 && end == text.c_str() + text.size()) {
                cur_.literal = Value(static_cast<int64_t>(v));
                return;
            }
        }
        cur_.literal = Value(std::strtod(text.c_str(), nullptr));
    }

    void lex_string(char quote) {
        size_t start = pos_;
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != quote) {
            char c = s_[pos_];
            if (c == '\\') {
                ++pos_;
                if (pos_ >= s_.size()) syntax_error("unterminated string", start);
                char e = s_[pos_];
                switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case '\\': out.push_back('\\'); break;
                case '/': out.push_back('/'); break;
                case '\'': out.push_back('\''); break;
                case '"': out.push_back('"'); break;
                case 'u': {
                    if (pos_ + 4 >= s_.size()) syntax_error("truncated \\u escape", pos_);
                    unsigned cp = 0;
                    for (int i = 1; i <= 4; ++i) {
                        char h = s_[pos_ + i];
                        cp <<= 4;
                        if (h >= '0' && h <= '9') cp |= h - '0';
                        else if (h >= 'a' && h <= 'f') cp |= h - 'a' + 10;
                        else if (h >= 'A' && h <= 'F') cp |= h - 'A' + 10;
                        else syntax_error("bad \\u escape", pos_);
                    }
                    pos_ += 4;
                    // UTF-8 encode (BMP only)
                    if (cp < 0x80) {
                        out.push_back(char(cp));
                    } else if (cp < 0x800) {
                        out.push_back(char(0xc0 | (cp >> 6)));
                        out.push_back(char(0x80 | (cp & 0x3f)));
                    } else {
                        out.push_back(char(0xe0 | (cp >> 12)));
                        out.push_back(char(0x80 | ((cp >> 6) & 0x3f)));
                        out.push_back(char(0x80 | (cp & 0x3f)));
                    }
                    break;
                }
                default: syntax_error("unknown escape", pos_);
                }
                ++pos_;
            } else {
                out.push_back(c);
                ++pos_;
            }
        }
        if (pos_ >= s_.size()) syntax_error("unterminated string", start);
        ++pos_; // closing quote
        cur_.kind = Tok::String;
        cur_.literal = Value(std::move(out));
    }

    void lex_punct() {
        static const char* three[] = {"===", "!=="};
        static const char* two[] = {"==", "!=", "<=", ">=", "&&", "||"};
        for (const char* op : three) {
            if (s_.compare(pos_, 3, op) == 0) {
                cur_.kind = Tok::Punct;
                cur_.text = op;
                pos_ += 3;
                return;
            }
        }
        for (const char* op : two) {
            if (s_.compare(pos_, 2, op) == 0) {
                cur_.kind = Tok::Punct;
                cur_.text = op;
                pos_ += 2;
                return;
            }
        }
        char c = s_[pos_];
        if (std::string("+-*/%<>!?:()[],.").find(c) == std::string::npos)
            syntax_error(std::string("unexpected character '") + c + "'", pos_);
        cur_.kind = Tok::Punct;
        cur_.text = std::string(1, c);
        ++pos_;
    }

    const std::string& s_;
    size_t pos_ = 0;
    Token cur_;
};

// ---------------------------------------------------------------------------
// Parser

std::shared_ptr<ExprNode> node(ExprKind kind) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    return n;
}

class Parser {
  public:
    explicit Parser(const std::string& text) : lex_(text) {}

    ExprPtr parse() {
        ExprPtr e = ternary(0);
        if (lex_.peek().kind != Tok::End)
            syntax_error("unexpected trailing input", lex_.peek().offset);
        return e;
    }

  private:
    bool at_punct(const char* p) const {
        return lex_.peek().kind == Tok::Punct && lex_.peek().text == p;
    }

    Token expect_punct(const char* p, size_t anchor) {
        if (!at_punct(p)) {
            const Token& t = lex_.peek();
            if (t.kind == Tok::End)
                syntax_error(std::string("expected '") + p + "' before end of input", anchor);
            syntax_error(std::string("expected '") + p + "'", t.offset);
        }
        return lex_.next();
    }

    // anchor: offset of the construct that demands an operand, used when the
    // input ends where an expression was required.
    ExprPtr ternary(size_t anchor) {
        ExprPtr cond = binary(0, anchor);
        if (!at_punct("?")) return cond;
        Token q = lex_.next();
        ExprPtr then_e = ternary(q.offset);
        Token colon = expect_punct(":", q.offset);
        ExprPtr else_e = ternary(colon.offset);
        auto n = node(ExprKind::Ternary);
        n->object = cond;
        n->index = then_e;
        n->third = else_e;
        return n;
    }

    // Binary operator levels, loosest first.
    static int level_of(const std::string& op) {
        if (op == "||") return 0;
        if (op == "&&") return 1;
        if (op == "==" || op == "!=" || op == "===" || op == "!==") return 2;
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return 3;
        if (op == "+" || op == "-") return 4;
        if (op == "*" || op == "/" || op == "%") return 5;
        return -1;
    }
    static constexpr int kNumLevels = 6;

    ExprPtr binary(int level, size_t anchor) {
        if (level >= kNumLevels) return unary(anchor);
        ExprPtr lhs = binary(level + 1, anchor);
        while (lex_.peek().kind == Tok::Punct && level_of(lex_.peek().text) == level) {
            Token op = lex_.next();
            ExprPtr rhs = binary(level + 1, op.offset);
            auto n = node(ExprKind::Binary);
            n->name = op.text;
            n->object = lhs;
            n->index = rhs;
            lhs = n;
        }
        return lhs;
    }

    ExprPtr unary(size_t anchor) {
        if (at_punct("!") || at_punct("-")) {
            Token op = lex_.next();
            ExprPtr operand = unary(op.offset);
            auto n = node(ExprKind::Unary);
            n->name = op.text;
            n->object = operand;
            return n;
        }
        return postfix(anchor);
    }

    ExprPtr postfix(size_t anchor) {
        ExprPtr e = primary(anchor);
        for (;;) {
            if (at_punct(".")) {
                Token dot = lex_.next();
                const Token& t = lex_.peek();
                if (t.kind != Tok::Ident) {
                    if (t.kind == Tok::End)
                        syntax_error("expected field name before end of input", dot.offset);
                    syntax_error("expected field name after '.'", t.offset);
                }
                Token field = lex_.next();
                auto n = node(ExprKind::Member);
                n->object = e;
                n->name = field.text;
                e = n;
            } else if (at_punct("[")) {
                Token br = lex_.next();
                ExprPtr idx = ternary(br.offset);
                expect_punct("]", br.offset);
                auto n = node(ExprKind::Index);
                n->object = e;
                n->index = idx;
                e = n;
            } else if (at_punct("(")) {
                if (e->kind != ExprKind::Identifier)
                    syntax_error("only named functions can be called", lex_.peek().offset);
                Token paren = lex_.next();
                auto n = node(ExprKind::Call);
                n->name = e->name;
                if (!at_punct(")")) {
                    for (;;) {
                        n->args.push_back(ternary(paren.offset));
                        if (at_punct(",")) {
                            paren = lex_.next();
                            continue;
                        }
                        break;
                    }
                }
                expect_punct(")", paren.offset);
                e = n;
            } else {
                return e;
            }
        }
    }

    ExprPtr primary(size_t anchor) {
        const Token& t = lex_.peek();
        switch (t.kind) {
        case Tok::End: syntax_error("expected expression before end of input", anchor);
        case Tok::Number:
        case Tok::String: {
            Token tok = lex_.next();
            auto n = node(ExprKind::Literal);
            n->literal = tok.literal;
            return n;
        }
        case Tok::Ident: {
            Token tok = lex_.next();
            if (tok.text == "true" || tok.text == "false") {
                auto n = node(ExprKind::Literal);
                n->literal = Value(tok.text == "true");
                return n;
            }
            if (tok.text == "null") {
                auto n = node(ExprKind::Literal);
                return n;
            }
            auto n = node(ExprKind::Identifier);
            n->name = tok.text;
            return n;
        }
        case Tok::Punct: {
            if (t.text == "(") {
                Token paren = lex_.next();
                ExprPtr e = ternary(paren.offset);
                expect_punct(")", paren.offset);
                return e;
            }
            if (t.text == "[") {
                Token br = lex_.next();
                auto n = node(ExprKind::ArrayLit);
                if (!at_punct("]")) {
                    for (;;) {
                        n->args.push_back(ternary(br.offset));
                        if (at_punct(",")) {
                            br = lex_.next();
                            continue;
                        }
                        break;
                    }
                }
                expect_punct("]", br.offset);
                return n;
            }
            syntax_error("unexpected token '" + t.text + "'", t.offset);
        }
        }
        syntax_error("expected expression", t.offset);
    }

    Lexer lex_;
};

// ---------------------------------------------------------------------------
// Printer

int print_level(const ExprNode& n) {
    switch (n.kind) {
    case ExprKind::Ternary: return 2;
    case ExprKind::Binary: {
        if (n.name == "||") return 3;
        if (n.name == "&&") return 4;
        if (n.name == "==" || n.name == "!=" || n.name == "===" || n.name == "!==") return 5;
        if (n.name == "<" || n.name == "<=" || n.name == ">" || n.name == ">=") return 6;
        if (n.name == "+" || n.name == "-") return 7;
        return 8;
    }
    case ExprKind::Unary: return 9;
    default: return 10;
    }
}

void print_node(const ExprPtr& e, int min_level, std::string& out);

void print_child(const ExprPtr& e, int min_level, std::string& out) {
    bool parens = print_level(*e) < min_level;
    if (parens) out.push_back('(');
    print_node(e, 0, out);
    if (parens) out.push_back(')');
}

void print_string_literal(const std::string& s, std::string& out) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
        }
    }
    out.push_back('"');
}

void print_node(const ExprPtr& e, int, std::string& out) {
    const ExprNode& n = *e;
    switch (n.kind) {
    case ExprKind::Literal:
        if (n.literal.is_string()) print_string_literal(n.literal.as_string(), out);
        else out += value_to_string(n.literal);
        break;
    case ExprKind::Identifier: out += n.name; break;
    case ExprKind::Member:
        print_child(n.object, 10, out);
        out.push_back('.');
        out += n.name;
        break;
    case ExprKind::Index:
        print_child(n.object, 10, out);
        out.push_back('[');
        print_node(n.index, 0, out);
        out.push_back(']');
        break;
    case ExprKind::Unary:
        out += n.name;
        print_child(n.object, 9, out);
        break;
    case ExprKind::Binary: {
        int lvl = print_level(n);
        print_child(n.object, lvl, out);
        out.push_back(' ');
        out += n.name;
        out.push_back(' ');
        print_child(n.index, lvl + 1, out);
        break;
    }
    case ExprKind::Ternary:
        print_child(n.object, 3, out);
        out += " ? ";
        print_child(n.index, 2, out);
        out += " : ";
        print_child(n.third, 2, out);
        break;
    case ExprKind::Call: {
        out += n.name;
        out.push_back('(');
        bool first = true;
        for (const auto& a : n.args) {
            if (!first) out += ", ";
            first = false;
            print_node(a, 0, out);
        }
        out.push_back(')');
        break;
    }
    case ExprKind::ArrayLit: {
        out.push_back('[');
        bool first = true;
        for (const auto& a : n.args) {
            if (!first) out += ", ";
            first = false;
            print_node(a, 0, out);
        }
        out.push_back(']');
        break;
    }
    }
}

// ---------------------------------------------------------------------------
// Builtin constants

const std::map<std::string, double>& builtin_constants() {
    static const std::map<std::string, double> k = {
        {"NaN", std::nan("")},
        {"E", 2.718281828459045},
        {"LN2", 0.6931471805599453},
        {"LN10", 2.302585092994046},
        {"LOG2E", 1.4426950408889634},
        {"LOG10E", 0.4342944819032518},
        {"PI", 3.141592653589793},
        {"SQRT1_2", 0.7071067811865476},
        {"SQRT2", 1.4142135623730951},
        {"MAX_VALUE", 1.7976931348623157e308},
        {"MIN_VALUE", 5e-324},
    };
    return k;
}

void analyze_into(const ExprPtr& e, RefSet& out) {
    const ExprNode& n = *e;
    switch (n.kind) {
    case ExprKind::Literal: break;
    case ExprKind::Identifier:
        if (n.name != "datum" && !builtin_constants().count(n.name)) out.signals.insert(n.name);
        break;
    case ExprKind::Member:
        if (n.object->kind == ExprKind::Identifier && n.object->name == "datum")
            out.datum_fields.insert(n.name);
        else analyze_into(n.object, out);
        break;
    case ExprKind::Index:
        if (n.object->kind == ExprKind::Identifier && n.object->name == "datum" &&
            n.index->kind == ExprKind::Literal && n.index->literal.is_string()) {
            out.datum_fields.insert(n.index->literal.as_string());
        } else {
            analyze_into(n.object, out);
            analyze_into(n.index, out);
        }
        break;
    case ExprKind::Unary: analyze_into(n.object, out); break;
    case ExprKind::Binary:
        analyze_into(n.object, out);
        analyze_into(n.index, out);
        break;
    case ExprKind::Ternary:
        analyze_into(n.object, out);
        analyze_into(n.index, out);
        analyze_into(n.third, out);
        break;
    case ExprKind::Call:
        if (n.name == "data" && !n.args.empty() && n.args[0]->kind == ExprKind::Literal &&
            n.args[0]->literal.is_string())
            out.datasets.insert(n.args[0]->literal.as_string());
        for (const auto& a : n.args) analyze_into(a, out);
        break;
    case ExprKind::ArrayLit:
        for (const auto& a : n.args) analyze_into(a, out);
        break;
    }
}

bool all_calls_supported(const ExprPtr& e) {
    const ExprNode& n = *e;
    if (n.kind == ExprKind::Call && !is_supported_function(n.name)) return false;
    if (n.object && !all_calls_supported(n.object)) return false;
    if (n.index && !all_calls_supported(n.index)) return false;
    if (n.third && !all_calls_supported(n.third)) return false;
    for (const auto& a : n.args)
        if (!all_calls_supported(a)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Evaluation

[[noreturn]] void type_error(const std::string& msg) { throw Error(ErrorCode::TypeError, msg); }

bool expect_bool(const Value& v, const char* what) {
    if (!v.is_bool()) type_error(std::string(what) + " requires a boolean, got " + v.type_name());
    return v.as_bool();
}

Value numeric_binary(const std::string& op, const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return Value();
    if (op == "+" && a.is_string() && b.is_string()) return Value(a.as_string() + b.as_string());
    if (!a.is_number() || !b.is_number())
        type_error("operator '" + op + "' requires numbers, got " + a.type_name() + " and " +
                   b.type_name());
    bool both_int = a.is_int() && b.is_int();
    if (op == "/") {
        return Value(a.number_as_double() / b.number_as_double());
    }
    if (both_int) {
        int64_t x = a.as_int(), y = b.as_int();
        if (op == "+") return Value(x + y);
        if (op == "-") return Value(x - y);
        if (op == "*") return Value(x * y);
        if (op == "%") {
            if (y == 0) return Value(std::nan(""));
            return Value(x % y);
        }
    }
    double x = a.number_as_double(), y = b.number_as_double();
    if (op == "+") return Value(x + y);
    if (op == "-") return Value(x - y);
    if (op == "*") return Value(x * y);
    return Value(std::fmod(x, y));
}

bool ordered_numeric(const Value& v) { return v.is_number() || v.is_timestamp(); }

Value compare_binary(const std::string& op, const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return Value(false);
    int c;
    if (ordered_numeric(a) && ordered_numeric(b)) {
        double x = a.number_as_double(), y = b.number_as_double();
        if (std::isnan(x) || std::isnan(y)) return Value(false);
        c = x < y ? -1 : (x > y ? 1 : 0);
    } else if (a.is_string() && b.is_string()) {
        int r = a.as_string().compare(b.as_string());
        c = r < 0 ? -1 : (r > 0 ? 1 : 0);
    } else {
        type_error("operator '" + op + "' cannot order " + a.type_name() + " and " +
                   b.type_name());
    }
    if (op == "<") return Value(c < 0);
    if (op == "<=") return Value(c <= 0);
    if (op == ">") return Value(c > 0);
    return Value(c >= 0);
}

bool strict_equal(const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
    if (ordered_numeric(a) && ordered_numeric(b)) {
        if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
        return a.number_as_double() == b.number_as_double(); // NaN != NaN
    }
    return a == b;
}

class Evaluator {
  public:
    Evaluator(const RowContext* datum, const SignalEnv& signals)
        : datum_(datum), signals_(signals) {}

    Value eval(const ExprPtr& e) {
        const ExprNode& n = *e;
        switch (n.kind) {
        case ExprKind::Literal: return n.literal;
        case ExprKind::Identifier: return identifier(n.name);
        case ExprKind::Member: {
            if (n.object->kind == ExprKind::Identifier && n.object->name == "datum")
                return datum_field(n.name);
            Value obj = eval(n.object);
            if (obj.is_null()) return Value();
            type_error("cannot access field '" + n.name + "' of " + obj.type_name());
        }
        case ExprKind::Index: {
            if (n.object->kind == ExprKind::Identifier && n.object->name == "datum" &&
                n.index->kind == ExprKind::Literal && n.index->literal.is_string())
                return datum_field(n.index->literal.as_string());
            Value obj = eval(n.object);
            Value idx = eval(n.index);
            if (obj.is_null() || idx.is_null()) return Value();
            if (!obj.is_list()) type_error("cannot index into " + obj.type_name());
            int64_t i;
            if (idx.is_int()) {
                i = idx.as_int();
            } else if (idx.is_float() && idx.as_float() == std::floor(idx.as_float())) {
                i = static_cast<int64_t>(idx.as_float());
            } else {
                type_error("index must be an integer, got " + idx.type_name());
            }
            const auto& l = obj.as_list();
            if (i < 0 || static_cast<size_t>(i) >= l.size()) return Value();
            return l[static_cast<size_t>(i)];
        }
        case ExprKind::Unary: {
            Value v = eval(n.object);
            if (n.name == "!") return Value(!expect_bool(v, "'!'"));
            if (v.is_null()) return Value();
            if (v.is_int()) return Value(-v.as_int());
            if (v.is_float()) return Value(-v.as_float());
            type_error("unary '-' requires a number, got " + v.type_name());
        }
        case ExprKind::Binary: return binary(n);
        case ExprKind::Ternary:
            return expect_bool(eval(n.object), "'?:'") ? eval(n.index) : eval(n.third);
        case ExprKind::Call: return call(n);
        case ExprKind::ArrayLit: {
            ValueList l;
            l.reserve(n.args.size());
            for (const auto& a : n.args) l.push_back(eval(a));
            return Value(std::move(l));
        }
        }
        type_error("unreachable");
    }

  private:
    Value identifier(const std::string& name) {
        if (name == "datum") type_error("'datum' cannot be used as a value");
        auto it = builtin_constants().find(name);
        if (it != builtin_constants().end()) return Value(it->second);
        const Value* v = signals_(name);
        if (!v) throw Error(ErrorCode::UnboundSignal, "unbound signal '" + name + "'");
        return *v;
    }

    Value datum_field(const std::string& name) {
        if (!datum_) type_error("'datum' is not available in this context");
        return datum_->field(name);
    }

    Value binary(const ExprNode& n) {
        const std::string& op = n.name;
        if (op == "&&") {
            if (!expect_bool(eval(n.object), "'&&'")) return Value(false);
            return Value(expect_bool(eval(n.index), "'&&'"));
        }
        if (op == "||") {
            if (expect_bool(eval(n.object), "'||'")) return Value(true);
            return Value(expect_bool(eval(n.index), "'||'"));
        }
        Value a = eval(n.object);
        Value b = eval(n.index);
        if (op == "==" || op == "===") return Value(strict_equal(a, b));
        if (op == "!=" || op == "!==") return Value(!strict_equal(a, b));
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return compare_binary(op, a, b);
        return numeric_binary(op, a, b);
    }

    Value call(const ExprNode& n);

    const RowContext* datum_;
    const SignalEnv& signals_;
};

Value to_number(const Value& v) {
    if (v.is_null()) return Value();
    if (v.is_number()) return v;
    if (v.is_bool()) return Value(int64_t(v.as_bool() ? 1 : 0));
    if (v.is_timestamp()) return Value(v.as_timestamp().ms);
    if (v.is_string()) {
        const std::string& s = v.as_string();
        errno = 0;
        char* end = nullptr;
        long long i = std::strtoll(s.c_str(), &end, 10);
        if (errno == 0 && end == s.c_str() + s.size() && !s.empty())
            return Value(static_cast<int64_t>(i));
        end = nullptr;
        double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size() && !s.empty()) return Value(d);
        return Value(std::nan(""));
    }
    type_error("toNumber cannot convert " + v.type_name());
}

Value to_string_fn(const Value& v) {
    if (v.is_null()) return Value();
    if (v.is_string()) return v;
    if (v.is_timestamp()) return Value(format_iso8601(v.as_timestamp().ms));
    if (v.is_list()) type_error("toString cannot convert a list");
    return Value(value_to_string(v));
}

Value Evaluator::call(const ExprNode& n) {
    const std::string& f = n.name;
    auto arity = [&](size_t lo, size_t hi) {
        if (n.args.size() < lo || n.args.size() > hi)
            type_error("wrong number of arguments to " + f + "()");
    };
    // Lazy forms first.
    if (f == "if") {
        arity(3, 3);
        return expect_bool(eval(n.args[0]), "if()") ? eval(n.args[1]) : eval(n.args[2]);
    }
    std::vector<Value> a;
    a.reserve(n.args.size());
    for (const auto& arg : n.args) a.push_back(eval(arg));

    auto num1 = [&](auto fn) -> Value {
        arity(1, 1);
        if (a[0].is_null()) return Value();
        if (!a[0].is_number()) type_error(f + "() requires a number, got " + a[0].type_name());
        return Value(fn(a[0].number_as_double()));
    };
    auto ts1 = [&]() -> std::optional<CivilTime> {
        arity(1, 1);
        if (a[0].is_null()) return std::nullopt;
        if (!a[0].is_timestamp())
            type_error(f + "() requires a timestamp, got " + a[0].type_name());
        return civil_from_ms(a[0].as_timestamp().ms);
    };

    if (f == "abs") {
        arity(1, 1);
        if (a[0].is_null()) return Value();
        if (a[0].is_int()) return Value(a[0].as_int() < 0 ? -a[0].as_int() : a[0].as_int());
        if (a[0].is_float()) return Value(std::fabs(a[0].as_float()));
        type_error("abs() requires a number, got " + a[0].type_name());
    }
    if (f == "ceil") return num1([](double x) { return std::ceil(x); });
    if (f == "floor") return num1([](double x) { return std::floor(x); });
    if (f == "round") return num1([](double x) { return std::round(x); });
    if (f == "sqrt") return num1([](double x) { return std::sqrt(x); });
    if (f == "exp") return num1([](double x) { return std::exp(x); });
    if (f == "log") return num1([](double x) { return std::log(x); });
    if (f == "pow") {
        arity(2, 2);
        if (a[0].is_null() || a[1].is_null()) return Value();
        if (!a[0].is_number() || !a[1].is_number()) type_error("pow() requires numbers");
        return Value(std::pow(a[0].number_as_double(), a[1].number_as_double()));
    }
    if (f == "min" || f == "max") {
        arity(1, SIZE_MAX);
        bool all_int = true;
        for (const auto& v : a) {
            if (v.is_null()) return Value();
            if (!v.is_number()) type_error(f + "() requires numbers, got " + v.type_name());
            all_int = all_int && v.is_int();
        }
        if (all_int) {
            int64_t best = a[0].as_int();
            for (const auto& v : a)
                best = f == "min" ? std::min(best, v.as_int()) : std::max(best, v.as_int());
            return Value(best);
        }
        double best = a[0].number_as_double();
        for (const auto& v : a) {
            double x = v.number_as_double();
            if (std::isnan(x)) return Value(std::nan(""));
            best = f == "min" ? std::min(best, x) : std::max(best, x);
        }
        return Value(best);
    }
    if (f == "length") {
        arity(1, 1);
        if (a[0].is_null()) return Value();
        if (a[0].is_list()) return Value(static_cast<int64_t>(a[0].as_list().size()));
        if (a[0].is_string()) return Value(static_cast<int64_t>(a[0].as_string().size()));
        type_error("length() requires a list or string, got " + a[0].type_name());
    }
    if (f == "isValid") {
        arity(1, 1);
        if (a[0].is_null()) return Value(false);
        if (a[0].is_float() && std::isnan(a[0].as_float())) return Value(false);
        return Value(true);
    }
    if (f == "isFinite") {
        arity(1, 1);
        if (!a[0].is_number()) return Value(false);
        return Value(std::isfinite(a[0].number_as_double()));
    }
    if (f == "inrange") {
        arity(2, 2);
        if (a[0].is_null()) return Value(false);
        if (!ordered_numeric(a[0]))
            type_error("inrange() requires a numeric value, got " + a[0].type_name());
        if (!a[1].is_list() || a[1].as_list().size() < 2)
            type_error("inrange() requires a [lo, hi] range");
        const Value& lo = a[1].as_list()[0];
        const Value& hi = a[1].as_list()[1];
        if (lo.is_null() || hi.is_null()) return Value(false);
        if (!ordered_numeric(lo) || !ordered_numeric(hi))
            type_error("inrange() range bounds must be numeric");
        double x = a[0].number_as_double();
        return Value(lo.number_as_double() <= x && x <= hi.number_as_double());
    }
    if (f == "year" || f == "month" || f == "date" || f == "hours" || f == "minutes") {
        auto c = ts1();
        if (!c) return Value();
        if (f == "year") return Value(int64_t(c->year));
        if (f == "month") return Value(int64_t(c->month - 1)); // 0-based, like the source grammar
        if (f == "date") return Value(int64_t(c->day));
        if (f == "hours") return Value(int64_t(c->hour));
        return Value(int64_t(c->minute));
    }
    if (f == "time") {
        arity(1, 1);
        if (a[0].is_null()) return Value();
        if (a[0].is_timestamp()) return Value(a[0].as_timestamp().ms);
        type_error("time() requires a timestamp, got " + a[0].type_name());
    }
    if (f == "toNumber") {
        arity(1, 1);
        return to_number(a[0]);
    }
    if (f == "toString") {
        arity(1, 1);
        return to_string_fn(a[0]);
    }
    type_error("unknown function " + f + "()");
}

} // namespace

ExprPtr parse_expression(const std::string& text) { return Parser(text).parse(); }

std::string print_expression(const ExprPtr& ast) {
    std::string out;
    print_node(ast, 0, out);
    return out;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind || a->name != b->name) return false;
    if (a->kind == ExprKind::Literal) {
        // Distinguish int and float literals even when numerically equal.
        if (a->literal.storage().index() != b->literal.storage().index()) return false;
        if (!(a->literal == b->literal) &&
            !(a->literal.is_float() && b->literal.is_float() && std::isnan(a->literal.as_float()) &&
              std::isnan(b->literal.as_float())))
            return false;
    }
    if (!expr_equal(a->object, b->object) || !expr_equal(a->index, b->index) ||
        !expr_equal(a->third, b->third))
        return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return true;
}

RefSet analyze(const ExprPtr& ast) {
    RefSet out;
    analyze_into(ast, out);
    return out;
}

bool is_supported_function(const std::string& name) {
    static const std::set<std::string> kSupported = {
        "abs",   "ceil",    "floor",   "round", "sqrt",    "pow",      "exp",
        "log",   "min",     "max",     "length", "isValid", "isFinite", "inrange",
        "year",  "month",   "date",    "hours", "minutes", "time",     "toNumber",
        "toString", "if",
    };
    return kSupported.count(name) > 0;
}

bool is_supported(const ExprPtr& ast) {
    if (!all_calls_supported(ast)) return false;
    return analyze(ast).datasets.empty();
}

Value evaluate(const ExprPtr& ast, const RowContext* datum, const SignalEnv& signals) {
    return Evaluator(datum, signals).eval(ast);
}

Value evaluate(const ExprPtr& ast, const RowContext* datum,
               const std::map<std::string, Value>& signals) {
    SignalEnv env = [&signals](const std::string& name) -> const Value* {
        auto it = signals.find(name);
        return it == signals.end() ? nullptr : &it->second;
    };
    return Evaluator(datum, env).eval(ast);
}

} // namespace specfission
