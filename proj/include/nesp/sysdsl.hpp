#pragma once

#include "nesp/common.hpp"
#include "nesp/model.hpp"

#include <map>
#include <memory>
#include <string>
#include <variant>

namespace nesp::sysdsl {

// ---------------------------------------------------------------------------
// Expression AST
// ---------------------------------------------------------------------------

enum class UnaryOp { Neg };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

/// Built-in function set is fixed; keeps evaluation pure and finite-difference
/// friendly.
enum class FuncId { Sin, Cos, Tan, Exp, Log, Sqrt, Atan, Abs, Pow };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    struct Constant {
        double value;
    };
    struct Variable {
        std::string name;  // x1.., y1.., u1.., t, eps, or named parameter
    };
    struct Unary {
        UnaryOp op;
        ExprPtr operand;
    };
    struct Binary {
        BinaryOp op;
        ExprPtr lhs, rhs;
    };
    struct Call {
        FuncId fn;
        std::vector<ExprPtr> args;
    };
    std::variant<Constant, Variable, Unary, Binary, Call> node;
};

/// Variable bindings for evaluation.
using Env = std::map<std::string, double, std::less<>>;

struct ParseError {
    int line = 0;
    int column = 0;
    std::string message;
    std::string to_string() const;
};

/// Parses a single expression. Throws Error(Parse) with line/column on bad input.
ExprPtr parse_expr(const std::string& text);

/// Evaluates with domain checking: log of non-positive, sqrt of negative,
/// division by zero, and fractional powers of negative bases raise
/// Error(Evaluation); unbound variables raise Error(Model). Results are
/// checked finite.
double eval_expr(const ExprPtr& ast, const Env& env);

/// Canonical textual form; parse(pretty_print(e)) is structurally identical to e.
std::string pretty_print(const ExprPtr& ast);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

/// Free variables of the expression (excluding none; includes t/eps if used).
std::vector<std::string> free_variables(const ExprPtr& ast);

// ---------------------------------------------------------------------------
// System-definition documents
// ---------------------------------------------------------------------------

/// Parsed document prior to oracle construction.
struct SystemSpecDoc {
    int n_x = 0, n_y = 0;
    Mat A, J;
    std::vector<ExprPtr> f;  // one per component
    std::vector<ExprPtr> g;
    ExprPtr H;               // optional invariant, in x1.., u1.., eps
    std::map<std::string, double> params;
    bool origin_fixed_point = false;
    bool autonomous_at_zero = false;
    std::string name = "document";
};

/// Parses the sectioned document format ([dims], [matrix A], [matrix J],
/// [field f], [field g], [invariant H], [params], [flags]).
SystemSpecDoc parse_document(const std::string& text);

/// Document -> SlowFastSystem with expression-backed oracles (Jacobians via
/// finite differences).
SlowFastSystem build_system(const SystemSpecDoc& doc);

/// parse_document + build_system.
SlowFastSystem parse_system(const std::string& text);

/// Renders a document for a system built from expressions (catalog export).
std::string print_document(const SystemSpecDoc& doc);

}  // namespace nesp::sysdsl
