#include "nesp/sysdsl.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace nesp::sysdsl {

std::string ParseError::to_string() const {
    std::ostringstream os;
    os << "parse error at " << line << ":" << column << ": " << message;
    return os.str();
}

namespace {

[[noreturn]] void fail(int line, int col, const std::string& msg) {
    ParseError e{line, col, msg};
    throw Error(ErrorKind::Parse, e.to_string());
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
    Tok kind = Tok::End;
    double value = 0.0;
    std::string text;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) bump();
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.kind = Tok::End;
            return;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                id += src_[pos_];
                bump();
            }
            tok_.kind = Tok::Ident;
            tok_.text = id;
            return;
        }
        switch (c) {
            case '+': tok_.kind = Tok::Plus; break;
            case '-': tok_.kind = Tok::Minus; break;
            case '*': tok_.kind = Tok::Star; break;
            case '/': tok_.kind = Tok::Slash; break;
            case '^': tok_.kind = Tok::Caret; break;
            case '(': tok_.kind = Tok::LParen; break;
            case ')': tok_.kind = Tok::RParen; break;
            case ',': tok_.kind = Tok::Comma; break;
            default:
                fail(line_, col_, std::string("unexpected character '") + c + "'");
        }
        bump();
    }

    void lex_number() {
        const int l = line_, cl = col_;
        std::string num;
        bool seen_dot = false;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            if (src_[pos_] == '.') {
                if (seen_dot) fail(l, cl, "malformed number: repeated '.'");
                seen_dot = true;
            }
            num += src_[pos_];
            bump();
        }
        if (num == ".") fail(l, cl, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::string exp = "e";
            size_t save = pos_;
            int save_line = line_, save_col = col_;
            bump();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                exp += src_[pos_];
                bump();
            }
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    exp += src_[pos_];
                    bump();
                }
                num += exp;
            } else {
                // not an exponent after all ("2elephant"): rewind
                pos_ = save;
                line_ = save_line;
                col_ = save_col;
            }
        }
        tok_.kind = Tok::Number;
        try {
            tok_.value = std::stod(num);
        } catch (...) {
            fail(l, cl, "malformed number '" + num + "'");
        }
        if (!std::isfinite(tok_.value)) fail(l, cl, "number out of range");
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

// ---------------------------------------------------------------------------
// Pratt parser. Precedence: + - (10) < * / (20) < unary - (30) < ^ (40, right).
// Unary minus binds tighter than the binary ops except power: -x^2 == -(x^2).
// ---------------------------------------------------------------------------

const std::map<std::string, FuncId, std::less<>> kFuncs = {
    {"sin", FuncId::Sin}, {"cos", FuncId::Cos},   {"tan", FuncId::Tan},
    {"exp", FuncId::Exp}, {"log", FuncId::Log},   {"sqrt", FuncId::Sqrt},
    {"atan", FuncId::Atan}, {"abs", FuncId::Abs}, {"pow", FuncId::Pow},
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    ExprPtr parse() {
        ExprPtr e = expression(0);
        const Token& t = lex_.peek();
        if (t.kind != Tok::End) fail(t.line, t.col, "unexpected trailing input");
        return e;
    }

private:
    static int lbp(Tok k) {
        switch (k) {
            case Tok::Plus:
            case Tok::Minus: return 10;
            case Tok::Star:
            case Tok::Slash: return 20;
            case Tok::Caret: return 40;
            default: return 0;
        }
    }

    ExprPtr expression(int rbp) {
        ExprPtr left = prefix();
        while (lbp(lex_.peek().kind) > rbp) {
            const Token op = lex_.next();
            BinaryOp bop;
            int bp = lbp(op.kind);
            switch (op.kind) {
                case Tok::Plus: bop = BinaryOp::Add; break;
                case Tok::Minus: bop = BinaryOp::Sub; break;
                case Tok::Star: bop = BinaryOp::Mul; break;
                case Tok::Slash: bop = BinaryOp::Div; break;
                case Tok::Caret: bop = BinaryOp::Pow; bp -= 1; break;  // right-associative
                default: fail(op.line, op.col, "internal: bad operator");
            }
            ExprPtr right = expression(bp);
            left = std::make_shared<ExprNode>(ExprNode{ExprNode::Binary{bop, left, right}});
        }
        return left;
    }

    ExprPtr prefix() {
        const Token t = lex_.next();
        switch (t.kind) {
            case Tok::Number:
                return std::make_shared<ExprNode>(ExprNode{ExprNode::Constant{t.value}});
            case Tok::Minus: {
                // binds tighter than */- but looser than ^
                ExprPtr operand = expression(30);
                return std::make_shared<ExprNode>(
                    ExprNode{ExprNode::Unary{UnaryOp::Neg, operand}});
            }
            case Tok::LParen: {
                ExprPtr e = expression(0);
                const Token close = lex_.next();
                if (close.kind != Tok::RParen) fail(close.line, close.col, "expected ')'");
                return e;
            }
            case Tok::Ident: {
                auto fn = kFuncs.find(t.text);
                if (fn != kFuncs.end()) {
                    const Token open = lex_.next();
                    if (open.kind != Tok::LParen)
                        fail(open.line, open.col, "expected '(' after function '" + t.text + "'");
                    std::vector<ExprPtr> args;
                    args.push_back(expression(0));
                    while (lex_.peek().kind == Tok::Comma) {
                        lex_.next();
                        args.push_back(expression(0));
                    }
                    const Token close = lex_.next();
                    if (close.kind != Tok::RParen) fail(close.line, close.col, "expected ')'");
                    const size_t arity = fn->second == FuncId::Pow ? 2 : 1;
                    if (args.size() != arity)
                        fail(t.line, t.col,
                             "function '" + t.text + "' expects " + std::to_string(arity) +
                                 " argument(s)");
                    return std::make_shared<ExprNode>(ExprNode{ExprNode::Call{fn->second, args}});
                }
                return std::make_shared<ExprNode>(ExprNode{ExprNode::Variable{t.text}});
            }
            case Tok::End: fail(t.line, t.col, "unexpected end of input");
            default: fail(t.line, t.col, "unexpected token");
        }
    }

    Lexer lex_;
};

const char* func_name(FuncId f) {
    switch (f) {
        case FuncId::Sin: return "sin";
        case FuncId::Cos: return "cos";
        case FuncId::Tan: return "tan";
        case FuncId::Exp: return "exp";
        case FuncId::Log: return "log";
        case FuncId::Sqrt: return "sqrt";
        case FuncId::Atan: return "atan";
        case FuncId::Abs: return "abs";
        case FuncId::Pow: return "pow";
    }
    return "?";
}

double apply_func(FuncId f, const std::vector<double>& a) {
    switch (f) {
        case FuncId::Sin: return std::sin(a[0]);
        case FuncId::Cos: return std::cos(a[0]);
        case FuncId::Tan: return std::tan(a[0]);
        case FuncId::Exp: return std::exp(a[0]);
        case FuncId::Log:
            require(a[0] > 0.0, ErrorKind::Evaluation, "log of non-positive value");
            return std::log(a[0]);
        case FuncId::Sqrt:
            require(a[0] >= 0.0, ErrorKind::Evaluation, "sqrt of negative value");
            return std::sqrt(a[0]);
        case FuncId::Atan: return std::atan(a[0]);
        case FuncId::Abs: return std::abs(a[0]);
        case FuncId::Pow: {
            if (a[0] < 0.0 && a[1] != std::floor(a[1]))
                throw Error(ErrorKind::Evaluation, "fractional power of negative base");
            return std::pow(a[0], a[1]);
        }
    }
    throw Error(ErrorKind::Evaluation, "unknown function");
}

}  // namespace

ExprPtr parse_expr(const std::string& text) {
    Parser p(text);
    return p.parse();
}

double eval_expr(const ExprPtr& ast, const Env& env) {
    require(ast != nullptr, ErrorKind::Model, "eval_expr: null expression");
    struct V {
        const Env& env;
        double operator()(const ExprNode::Constant& c) const { return c.value; }
        double operator()(const ExprNode::Variable& v) const {
            auto it = env.find(v.name);
            require(it != env.end(), ErrorKind::Model, "unbound variable '" + v.name + "'");
            return it->second;
        }
        double operator()(const ExprNode::Unary& u) const {
            return -eval_expr(u.operand, env);
        }
        double operator()(const ExprNode::Binary& b) const {
            const double l = eval_expr(b.lhs, env);
            const double r = eval_expr(b.rhs, env);
            switch (b.op) {
                case BinaryOp::Add: return l + r;
                case BinaryOp::Sub: return l - r;
                case BinaryOp::Mul: return l * r;
                case BinaryOp::Div:
                    require(r != 0.0, ErrorKind::Evaluation, "division by zero");
                    return l / r;
                case BinaryOp::Pow: return apply_func(FuncId::Pow, {l, r});
            }
            throw Error(ErrorKind::Evaluation, "unknown operator");
        }
        double operator()(const ExprNode::Call& c) const {
            std::vector<double> args;
            args.reserve(c.args.size());
            for (const auto& a : c.args) args.push_back(eval_expr(a, env));
            return apply_func(c.fn, args);
        }
    };
    const double r = std::visit(V{env}, ast->node);
    require(std::isfinite(r), ErrorKind::Evaluation, "expression evaluated to non-finite value");
    return r;
}

namespace {

int node_precedence(const ExprNode& n) {
    if (std::holds_alternative<ExprNode::Binary>(n.node)) {
        switch (std::get<ExprNode::Binary>(n.node).op) {
            case BinaryOp::Add:
            case BinaryOp::Sub: return 10;
            case BinaryOp::Mul:
            case BinaryOp::Div: return 20;
            case BinaryOp::Pow: return 40;
        }
    }
    if (std::holds_alternative<ExprNode::Unary>(n.node)) return 30;
    return 100;
}

void print_rec(const ExprPtr& e, std::ostream& os, int parent_bp, bool right_side) {
    const int my_bp = node_precedence(*e);
    const bool need_paren =
        my_bp < parent_bp || (my_bp == parent_bp && right_side && my_bp != 40);
    struct V {
        std::ostream& os;
        int my_bp;
        void operator()(const ExprNode::Constant& c) const {
            std::ostringstream tmp;
            tmp.precision(17);
            tmp << c.value;
            os << tmp.str();
        }
        void operator()(const ExprNode::Variable& v) const { os << v.name; }
        void operator()(const ExprNode::Unary& u) const {
            os << "-";
            print_rec(u.operand, os, 30, true);
        }
        void operator()(const ExprNode::Binary& b) const {
            const char* op = "?";
            switch (b.op) {
                case BinaryOp::Add: op = " + "; break;
                case BinaryOp::Sub: op = " - "; break;
                case BinaryOp::Mul: op = "*"; break;
                case BinaryOp::Div: op = "/"; break;
                case BinaryOp::Pow: op = "^"; break;
            }
            // Power is right-associative: left child needs parens at equal bp.
            print_rec(b.lhs, os, my_bp == 40 ? my_bp + 1 : my_bp, false);
            os << op;
            print_rec(b.rhs, os, my_bp, b.op != BinaryOp::Pow);
        }
        void operator()(const ExprNode::Call& c) const {
            os << func_name(c.fn) << "(";
            for (size_t i = 0; i < c.args.size(); ++i) {
                if (i) os << ", ";
                print_rec(c.args[i], os, 0, false);
            }
            os << ")";
        }
    };
    if (need_paren) os << "(";
    std::visit(V{os, my_bp}, e->node);
    if (need_paren) os << ")";
}

}  // namespace

std::string pretty_print(const ExprPtr& ast) {
    std::ostringstream os;
    print_rec(ast, os, 0, false);
    return os.str();
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->node.index() != b->node.index()) return false;
    struct V {
        const ExprNode& other;
        bool operator()(const ExprNode::Constant& c) const {
            return c.value == std::get<ExprNode::Constant>(other.node).value;
        }
        bool operator()(const ExprNode::Variable& v) const {
            return v.name == std::get<ExprNode::Variable>(other.node).name;
        }
        bool operator()(const ExprNode::Unary& u) const {
            const auto& o = std::get<ExprNode::Unary>(other.node);
            return u.op == o.op && structurally_equal(u.operand, o.operand);
        }
        bool operator()(const ExprNode::Binary& b) const {
            const auto& o = std::get<ExprNode::Binary>(other.node);
            return b.op == o.op && structurally_equal(b.lhs, o.lhs) &&
                   structurally_equal(b.rhs, o.rhs);
        }
        bool operator()(const ExprNode::Call& c) const {
            const auto& o = std::get<ExprNode::Call>(other.node);
            if (c.fn != o.fn || c.args.size() != o.args.size()) return false;
            for (size_t i = 0; i < c.args.size(); ++i)
                if (!structurally_equal(c.args[i], o.args[i])) return false;
            return true;
        }
    };
    return std::visit(V{*b}, a->node);
}

std::vector<std::string> free_variables(const ExprPtr& ast) {
    std::vector<std::string> out;
    struct V {
        std::vector<std::string>& out;
        void operator()(const ExprNode::Constant&) const {}
        void operator()(const ExprNode::Variable& v) const {
            for (const auto& s : out)
                if (s == v.name) return;
            out.push_back(v.name);
        }
        void operator()(const ExprNode::Unary& u) const { collect(u.operand); }
        void operator()(const ExprNode::Binary& b) const {
            collect(b.lhs);
            collect(b.rhs);
        }
        void operator()(const ExprNode::Call& c) const {
            for (const auto& a : c.args) collect(a);
        }
        void collect(const ExprPtr& e) const { std::visit(*this, e->node); }
    };
    if (ast) std::visit(V{out}, ast->node);
    return out;
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

Mat parse_matrix_literal(const std::string& text, int line) {
    std::vector<std::vector<double>> rows;
    std::stringstream rowstream(text);
    std::string row;
    while (std::getline(rowstream, row, ';')) {
        row = trim(row);
        if (row.empty()) continue;
        std::vector<double> entries;
        std::stringstream entrystream(row);
        std::string entry;
        while (std::getline(entrystream, entry, ',')) {
            entry = trim(entry);
            if (entry.empty()) fail(line, 1, "empty matrix entry");
            ExprPtr e = parse_expr(entry);  // allow "-1", "0.5", "1e-2"
            entries.push_back(eval_expr(e, {}));
        }
        rows.push_back(entries);
    }
    if (rows.empty()) fail(line, 1, "empty matrix literal");
    const size_t cols = rows[0].size();
    for (const auto& r : rows)
        if (r.size() != cols) fail(line, 1, "ragged matrix literal");
    Mat M(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols; ++j) M(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return M;
}

}  // namespace

SystemSpecDoc parse_document(const std::string& text) {
    SystemSpecDoc doc;
    std::map<std::string, ExprPtr> f_parts, g_parts;
    ExprPtr H;
    std::string section;
    std::string matrix_accum;
    std::string matrix_name;
    int matrix_line = 0;

    auto flush_matrix = [&]() {
        if (matrix_name.empty()) return;
        Mat M = parse_matrix_literal(matrix_accum, matrix_line);
        if (matrix_name == "A")
            doc.A = M;
        else
            doc.J = M;
        matrix_name.clear();
        matrix_accum.clear();
    };

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, 1, "unterminated section header");
            flush_matrix();
            section = trim(line.substr(1, line.size() - 2));
            if (section == "matrix A") {
                matrix_name = "A";
                matrix_line = lineno;
            } else if (section == "matrix J") {
                matrix_name = "J";
                matrix_line = lineno;
            } else if (section != "dims" && section != "field f" && section != "field g" &&
                       section != "invariant H" && section != "params" && section != "flags" &&
                       section != "run") {
                fail(lineno, 1, "unknown section '" + section + "'");
            }
            continue;
        }

        if (section == "matrix A" || section == "matrix J") {
            matrix_accum += line + ";";
            continue;
        }
        if (section == "run") continue;  // consumed by the CLI layer

        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, 1, "expected 'name = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail(lineno, 1, "expected 'name = value'");

        if (section == "dims") {
            const double v = eval_expr(parse_expr(value), {});
            if (v <= 0 || v != std::floor(v)) fail(lineno, 1, "dimension must be a positive integer");
            if (key == "n_x")
                doc.n_x = static_cast<int>(v);
            else if (key == "n_y")
                doc.n_y = static_cast<int>(v);
            else
                fail(lineno, 1, "unknown dims key '" + key + "'");
        } else if (section == "field f") {
            f_parts[key] = parse_expr(value);
        } else if (section == "field g") {
            g_parts[key] = parse_expr(value);
        } else if (section == "invariant H") {
            if (key == "H")
                H = parse_expr(value);
            else
                fail(lineno, 1, "unknown invariant key '" + key + "' (only H supported)");
        } else if (section == "params") {
            doc.params[key] = eval_expr(parse_expr(value), {});
        } else if (section == "flags") {
            const bool on = value == "true" || value == "1";
            if (!on && value != "false" && value != "0")
                fail(lineno, 1, "flag value must be true/false");
            if (key == "origin_fixed_point")
                doc.origin_fixed_point = on;
            else if (key == "autonomous_at_zero")
                doc.autonomous_at_zero = on;
            else
                fail(lineno, 1, "unknown flag '" + key + "'");
        } else {
            fail(lineno, 1, "content outside any section");
        }
    }
    flush_matrix();

    require(doc.n_x > 0 && doc.n_y >= 0, ErrorKind::Parse, "document must declare [dims] n_x, n_y");
    require(doc.A.rows() == doc.n_x && doc.A.cols() == doc.n_x, ErrorKind::Parse,
            "[matrix A] must be n_x x n_x");
    require(doc.J.rows() == doc.n_y && doc.J.cols() == doc.n_y, ErrorKind::Parse,
            "[matrix J] must be n_y x n_y");

    auto gather = [&](std::map<std::string, ExprPtr>& parts, const char* prefix, int n,
                      std::vector<ExprPtr>& out) {
        out.resize(n);
        for (int i = 0; i < n; ++i) {
            const std::string key = std::string(prefix) + std::to_string(i + 1);
            auto it = parts.find(key);
            require(it != parts.end(), ErrorKind::Parse,
                    "missing component '" + key + "' in [field " + prefix + "]");
            out[i] = it->second;
            parts.erase(it);
        }
        require(parts.empty(), ErrorKind::Parse,
                std::string("unknown component '") + (parts.empty() ? "" : parts.begin()->first) +
                    "' in [field " + prefix + "]");
    };
    gather(f_parts, "f", doc.n_x, doc.f);
    gather(g_parts, "g", doc.n_y, doc.g);
    doc.H = H;

    // Every variable index must be within the declared dimensions.
    auto check_vars = [&](const ExprPtr& e, bool allow_u, const std::string& where) {
        for (const auto& v : free_variables(e)) {
            if (v == "t" || v == "eps" || v == "pi") continue;
            if (doc.params.count(v)) continue;
            auto idx_ok = [&](char c, int n) {
                if (v.size() < 2 || v[0] != c) return false;
                for (size_t i = 1; i < v.size(); ++i)
                    if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
                const int idx = std::stoi(v.substr(1));
                require(idx >= 1 && idx <= n, ErrorKind::Parse,
                        "variable '" + v + "' out of range in " + where);
                return true;
            };
            if (idx_ok('x', doc.n_x)) continue;
            if (idx_ok('y', doc.n_y)) continue;
            if (allow_u && idx_ok('u', doc.n_y)) continue;
            throw Error(ErrorKind::Parse, "unknown identifier '" + v + "' in " + where);
        }
    };
    for (const auto& e : doc.f) check_vars(e, false, "[field f]");
    for (const auto& e : doc.g) check_vars(e, false, "[field g]");
    if (doc.H) check_vars(doc.H, true, "[invariant H]");

    return doc;
}

SlowFastSystem build_system(const SystemSpecDoc& doc) {
    SlowFastSystem sys;
    sys.n_x = doc.n_x;
    sys.n_y = doc.n_y;
    sys.A = doc.A;
    sys.J = doc.J;
    sys.origin_fixed_point = doc.origin_fixed_point;
    sys.autonomous_at_zero = doc.autonomous_at_zero;
    sys.name = doc.name;

    auto make_field = [doc](std::vector<ExprPtr> exprs, int out_dim) -> FieldFn {
        return [doc, exprs, out_dim](const Vec& x, const Vec& y, double t, double eps) -> Vec {
            Env env;
            env["pi"] = 3.14159265358979323846;
            for (const auto& [k, v] : doc.params) env[k] = v;
            for (int i = 0; i < x.size(); ++i) env["x" + std::to_string(i + 1)] = x[i];
            for (int i = 0; i < y.size(); ++i) env["y" + std::to_string(i + 1)] = y[i];
            env["t"] = t;
            env["eps"] = eps;
            Vec out(out_dim);
            for (int i = 0; i < out_dim; ++i) out[i] = eval_expr(exprs[i], env);
            return out;
        };
    };
    sys.f = make_field(doc.f, doc.n_x);
    sys.g = make_field(doc.g, doc.n_y);

    if (doc.H) {
        InvariantOracle inv;
        ExprPtr H = doc.H;
        auto params = doc.params;
        inv.H = [H, params](const Vec& x, const Vec& u, double eps) -> double {
            Env env;
            env["pi"] = 3.14159265358979323846;
            for (const auto& [k, v] : params) env[k] = v;
            for (int i = 0; i < x.size(); ++i) env["x" + std::to_string(i + 1)] = x[i];
            for (int i = 0; i < u.size(); ++i) env["u" + std::to_string(i + 1)] = u[i];
            env["eps"] = eps;
            return eval_expr(H, env);
        };
        sys.inv = inv;
    }
    return sys;
}

SlowFastSystem parse_system(const std::string& text) {
    return build_system(parse_document(text));
}

std::string print_document(const SystemSpecDoc& doc) {
    std::ostringstream os;
    os.precision(17);
    os << "[dims]\n";
    os << "n_x = " << doc.n_x << "\n";
    os << "n_y = " << doc.n_y << "\n\n";
    auto print_mat = [&](const char* name, const Mat& M) {
        os << "[matrix " << name << "]\n";
        for (int i = 0; i < M.rows(); ++i) {
            for (int j = 0; j < M.cols(); ++j) {
                os << M(i, j);
                if (j + 1 < M.cols()) os << ", ";
            }
            os << (i + 1 < M.rows() ? ";\n" : "\n");
        }
        os << "\n";
    };
    print_mat("A", doc.A);
    print_mat("J", doc.J);
    os << "[field f]\n";
    for (size_t i = 0; i < doc.f.size(); ++i)
        os << "f" << i + 1 << " = " << pretty_print(doc.f[i]) << "\n";
    os << "\n[field g]\n";
    for (size_t i = 0; i < doc.g.size(); ++i)
        os << "g" << i + 1 << " = " << pretty_print(doc.g[i]) << "\n";
    if (doc.H) os << "\n[invariant H]\nH = " << pretty_print(doc.H) << "\n";
    if (!doc.params.empty()) {
        os << "\n[params]\n";
        for (const auto& [k, v] : doc.params) os << k << " = " << v << "\n";
    }
    os << "\n[flags]\n";
    os << "origin_fixed_point = " << (doc.origin_fixed_point ? "true" : "false") << "\n";
    os << "autonomous_at_zero = " << (doc.autonomous_at_zero ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace nesp::sysdsl
