#include "nesp/sysdsl.hpp"

#include "nesp/model.hpp"

#include <doctest.h>

#include <random>

using namespace nesp;
using namespace nesp::sysdsl;

TEST_CASE("arithmetic precedence: multiplication binds tighter") {
    CHECK(eval_expr(parse_expr("2+3*4"), {}) == doctest::Approx(14.0));
    CHECK(eval_expr(parse_expr("2*3+4"), {}) == doctest::Approx(10.0));
    CHECK(eval_expr(parse_expr("10-4-3"), {}) == doctest::Approx(3.0));  // left assoc
    CHECK(eval_expr(parse_expr("12/2/3"), {}) == doctest::Approx(2.0));
}

TEST_CASE("power is right-associative and beats unary minus") {
    CHECK(eval_expr(parse_expr("2^3^2"), {}) == doctest::Approx(512.0));
    CHECK(eval_expr(parse_expr("-x1^2"), {{"x1", 2.0}}) == doctest::Approx(-4.0));
    CHECK(eval_expr(parse_expr("(-x1)^2"), {{"x1", 2.0}}) == doctest::Approx(4.0));
    CHECK(eval_expr(parse_expr("-2^2"), {}) == doctest::Approx(-4.0));
}

TEST_CASE("unary minus binds tighter than binary ops") {
    CHECK(eval_expr(parse_expr("-2*3"), {}) == doctest::Approx(-6.0));
    CHECK(eval_expr(parse_expr("4--2"), {}) == doctest::Approx(6.0));
    CHECK(eval_expr(parse_expr("--2"), {}) == doctest::Approx(2.0));
}

TEST_CASE("simple bindings and functions") {
    CHECK(eval_expr(parse_expr("eps*y1"), {{"eps", 0.1}, {"y1", 3.0}}) == doctest::Approx(0.3));
    CHECK(eval_expr(parse_expr("atan(exp(t))"), {{"t", 0.0}}) == doctest::Approx(M_PI / 4));
    CHECK(eval_expr(parse_expr("pow(2, 10)"), {}) == doctest::Approx(1024.0));
    CHECK(eval_expr(parse_expr("abs(-3.5)"), {}) == doctest::Approx(3.5));
}

TEST_CASE("trigonometric identity on random inputs") {
    std::mt19937 gen(21);
    std::uniform_real_distribution<double> d(-10, 10);
    const auto e = parse_expr("sin(x1)^2 + cos(x1)^2");
    for (int i = 0; i < 50; ++i) {
        CHECK(eval_expr(e, {{"x1", d(gen)}}) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("evaluation domain errors are structured, never silent") {
    CHECK_THROWS_AS(eval_expr(parse_expr("log(0-1)"), {}), Error);
    CHECK_THROWS_AS(eval_expr(parse_expr("sqrt(0-1)"), {}), Error);
    CHECK_THROWS_AS(eval_expr(parse_expr("1/(2-2)"), {}), Error);
    CHECK_THROWS_AS(eval_expr(parse_expr("(0-2)^0.5"), {}), Error);
    CHECK_THROWS_AS(eval_expr(parse_expr("x9"), {}), Error);  // unbound
    CHECK_THROWS_AS(eval_expr(parse_expr("exp(10000)"), {}), Error);  // non-finite result
}

TEST_CASE("syntax errors carry line and column") {
    try {
        parse_expr("1 + * 2");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("1:5") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_expr("sin(1"), Error);
    CHECK_THROWS_AS(parse_expr("(1+2"), Error);
    CHECK_THROWS_AS(parse_expr(""), Error);
    CHECK_THROWS_AS(parse_expr("1 2"), Error);
    CHECK_THROWS_AS(parse_expr("sin()"), Error);
    CHECK_THROWS_AS(parse_expr("pow(1)"), Error);
}

// 30 golden parse-tree fixtures: input -> canonical printed form. The printed
// form doubles as the parse-tree serialization (parenthesization reflects the
// tree shape).
TEST_CASE("golden parse fixtures and round trip") {
    const std::vector<std::pair<std::string, std::string>> fixtures = {
        {"1+2", "1 + 2"},
        {"1+2+3", "1 + 2 + 3"},
        {"1-2-3", "1 - 2 - 3"},
        {"1-(2-3)", "1 - (2 - 3)"},
        {"2*3+4", "2*3 + 4"},
        {"2*(3+4)", "2*(3 + 4)"},
        {"2+3*4", "2 + 3*4"},
        {"a*b*c", "a*b*c"},
        {"a/b/c", "a/b/c"},
        {"a/(b/c)", "a/(b/c)"},
        {"a/b*c", "a/b*c"},
        {"2^3", "2^3"},
        {"2^3^4", "2^3^4"},
        {"(2^3)^4", "(2^3)^4"},
        {"-x", "-x"},
        {"--x", "-(-x)"},
        {"-x^2", "-x^2"},
        {"(-x)^2", "(-x)^2"},
        {"-x*y", "-x*y"},
        {"-(x*y)", "-(x*y)"},
        {"x--y", "x - -y"},
        {"sin(x)", "sin(x)"},
        {"sin(x)^2", "sin(x)^2"},
        {"pow(x, y+1)", "pow(x, y + 1)"},
        {"sqrt(abs(x))", "sqrt(abs(x))"},
        {"exp(-t/2)", "exp(-t/2)"},
        {"1e-3*eps", "0.001*eps"},
        {"2.5E2", "250"},
        {"cos(x1)*sin(y1) - tan(t)", "cos(x1)*sin(y1) - tan(t)"},
        {"1/(1+eps*y1)^2", "1/(1 + eps*y1)^2"},
    };
    REQUIRE(fixtures.size() == 30);
    for (const auto& [input, expected] : fixtures) {
        CAPTURE(input);
        const ExprPtr ast = parse_expr(input);
        const std::string printed = pretty_print(ast);
        CHECK(printed == expected);
        // round trip: reparse of the printed form is structurally identical
        const ExprPtr again = parse_expr(printed);
        CHECK(structurally_equal(ast, again));
    }
}

TEST_CASE("parser never crashes on arbitrary input (fuzz)") {
    std::mt19937 gen(12345);
    std::uniform_int_distribution<int> len(0, 48);
    const std::string alphabet = "0123456789.+-*/^()abcxyz_,eE \t\nsinco$#@\"'\\{}[]%!";
    std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
    long ok = 0, err = 0;
    for (int i = 0; i < 100000; ++i) {
        std::string input;
        const int n = len(gen);
        for (int j = 0; j < n; ++j) input += alphabet[pick(gen)];
        try {
            const auto e = parse_expr(input);
            eval_expr(e, {{"x", 1.0}, {"y", 2.0}});
            ++ok;
        } catch (const Error&) {
            ++err;  // structured failure is the contract
        }
    }
    CHECK(ok + err == 100000);
    CHECK(ok > 0);
    CHECK(err > 0);
}

namespace {
const char* kPendulumDoc = R"(# simple pendulum document
[dims]
n_x = 2
n_y = 2

[matrix A]
0, 1;
0, 0

[matrix J]
0, 1;
-1, 0

[field f]
f1 = x2
f2 = -g*sin(x1)

[field g]
g1 = 0
g2 = 0

[params]
g = 1

[flags]
origin_fixed_point = true
autonomous_at_zero = true
)";
}  // namespace

TEST_CASE("document parsing produces a working system") {
    const SlowFastSystem sys = parse_system(kPendulumDoc);
    CHECK(sys.n_x == 2);
    CHECK(sys.n_y == 2);
    CHECK(sys.J(0, 1) == doctest::Approx(1.0));
    Vec dx, dy;
    model::eval_rhs(sys, Vec::Zero(2), Vec::Zero(2), 0.0, 0.1, dx, dy);
    CHECK(dx.norm() == doctest::Approx(0.0));
    CHECK(dy.norm() == doctest::Approx(0.0));
    // f2 really is -g sin(x1)
    Vec x(2);
    x << 0.3, 0.0;
    const Vec f = sys.f(x, Vec::Zero(2), 0.0, 0.0);
    CHECK(f[1] == doctest::Approx(-std::sin(0.3)));
}

TEST_CASE("document errors: unknown identifier and bad dimensions") {
    std::string doc = kPendulumDoc;
    // variable out of the declared range
    auto broken = doc;
    broken.replace(broken.find("f1 = x2"), 7, "f1 = x7");
    CHECK_THROWS_AS(parse_system(broken), Error);
    // missing component
    auto missing = doc;
    missing.replace(missing.find("g2 = 0"), 6, "g3 = 0");
    CHECK_THROWS_AS(parse_system(missing), Error);
    // ragged matrix
    auto ragged = doc;
    ragged.replace(ragged.find("0, 1;\n0, 0"), 10, "0, 1;\n0");
    CHECK_THROWS_AS(parse_system(ragged), Error);
}

TEST_CASE("document fuzz never crashes") {
    std::mt19937 gen(999);
    std::uniform_int_distribution<int> len(0, 120);
    const std::string alphabet = "[]dimsnxy=0123456789 \n#,;.*+-/^abc";
    std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 3000; ++i) {
        std::string input;
        const int n = len(gen);
        for (int j = 0; j < n; ++j) input += alphabet[pick(gen)];
        try {
            parse_document(input);
        } catch (const Error&) {
        }
    }
    CHECK(true);
}

TEST_CASE("document round trip via print_document") {
    const SystemSpecDoc doc = parse_document(kPendulumDoc);
    const std::string printed = print_document(doc);
    const SystemSpecDoc again = parse_document(printed);
    CHECK(again.n_x == doc.n_x);
    CHECK((again.A - doc.A).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    REQUIRE(again.f.size() == doc.f.size());
    for (size_t i = 0; i < doc.f.size(); ++i)
        CHECK(structurally_equal(again.f[i], doc.f[i]));
}
