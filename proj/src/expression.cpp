#include "heatlab/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace heatlab {

struct FieldExpression::Node {
    enum class Kind { Number, Coord, Neg, Add, Sub, Mul, Div, Pow, Call };
    Kind kind;
    double number = 0.0;
    int coord = 0;
    int fn = 0;  // index into kFunctions
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = FieldExpression::Node;
using ConstNodePtr = std::shared_ptr<const Node>;

const char* kFunctions[] = {"exp", "log", "sin", "cos", "sqrt", "tanh"};

double apply_fn(int fn, double v) {
    switch (fn) {
        case 0: return std::exp(v);
        case 1: return std::log(v);
        case 2: return std::sin(v);
        case 3: return std::cos(v);
        case 4: return std::sqrt(v);
        default: return std::tanh(v);
    }
}

class Parser {
  public:
    Parser(const std::string& src, int dim) : src_(src), dim_(dim) {}

    ConstNodePtr run() {
        skip_ws();
        ConstNodePtr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size())
            throw ParseError("unexpected trailing input at position " + std::to_string(pos_),
                             pos_, "end of input");
        return e;
    }

  private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    ConstNodePtr make(Node::Kind k, ConstNodePtr l = nullptr, ConstNodePtr r = nullptr) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    // expr := term (('+'|'-') term)*
    ConstNodePtr parse_expr() {
        ConstNodePtr e = parse_term();
        for (;;) {
            if (eat('+'))
                e = make(Node::Kind::Add, e, parse_term());
            else if (eat('-'))
                e = make(Node::Kind::Sub, e, parse_term());
            else
                return e;
        }
    }

    // term := unary (('*'|'/') unary)*
    ConstNodePtr parse_term() {
        ConstNodePtr e = parse_unary();
        for (;;) {
            if (eat('*'))
                e = make(Node::Kind::Mul, e, parse_unary());
            else if (eat('/'))
                e = make(Node::Kind::Div, e, parse_unary());
            else
                return e;
        }
    }

    // unary := '-' unary | power   (so -x1^2 parses as -(x1^2))
    ConstNodePtr parse_unary() {
        if (eat('-')) return make(Node::Kind::Neg, parse_unary());
        return parse_power();
    }

    // power := atom ('^' unary)?   (right-associative)
    ConstNodePtr parse_power() {
        ConstNodePtr base = parse_atom();
        if (eat('^')) return make(Node::Kind::Pow, base, parse_unary());
        return base;
    }

    ConstNodePtr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size())
            throw ParseError("unexpected end of input", pos_, "number, coordinate, or '('");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            ConstNodePtr e = parse_expr();
            if (!eat(')'))
                throw ParseError("missing ')' at position " + std::to_string(pos_), pos_, ")");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ParseError("unexpected character '" + std::string(1, c) + "' at position " +
                             std::to_string(pos_),
                         pos_, "number, coordinate, function, or '('");
    }

    ConstNodePtr parse_number() {
        const char* begin = src_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("malformed number at position " + std::to_string(pos_), pos_,
                             "number");
        pos_ += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Number;
        n->number = v;
        return n;
    }

    ConstNodePtr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name = src_.substr(start, pos_ - start);
        if (name.size() >= 2 && name[0] == 'x' &&
            std::isdigit(static_cast<unsigned char>(name[1]))) {
            int idx = std::atoi(name.c_str() + 1);
            if (idx < 1 || idx > dim_)
                throw ParseError("coordinate " + name + " out of range for dimension " +
                                     std::to_string(dim_) + " at position " +
                                     std::to_string(start),
                                 start, "coordinate index in 1.." + std::to_string(dim_));
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Coord;
            n->coord = idx - 1;
            return n;
        }
        for (int f = 0; f < 6; ++f) {
            if (name == kFunctions[f]) {
                if (!eat('('))
                    throw ParseError("expected '(' after " + name + " at position " +
                                         std::to_string(pos_),
                                     pos_, "(");
                ConstNodePtr arg = parse_expr();
                if (!eat(')'))
                    throw ParseError("missing ')' at position " + std::to_string(pos_), pos_,
                                     ")");
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Call;
                n->fn = f;
                n->lhs = std::move(arg);
                return n;
            }
        }
        throw ParseError("unknown identifier '" + name + "' at position " +
                             std::to_string(start),
                         start, "x<k>, exp, log, sin, cos, sqrt, or tanh");
    }

    const std::string& src_;
    int dim_;
    std::size_t pos_ = 0;
};

double eval_node(const Node& n, const Vec& x) {
    switch (n.kind) {
        case Node::Kind::Number: return n.number;
        case Node::Kind::Coord: return x[n.coord];
        case Node::Kind::Neg: return -eval_node(*n.lhs, x);
        case Node::Kind::Add: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
        case Node::Kind::Sub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
        case Node::Kind::Mul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
        case Node::Kind::Div: return eval_node(*n.lhs, x) / eval_node(*n.rhs, x);
        case Node::Kind::Pow: return std::pow(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
        default: return apply_fn(n.fn, eval_node(*n.lhs, x));
    }
}

}  // namespace

FieldExpression::FieldExpression() = default;
FieldExpression::~FieldExpression() = default;
FieldExpression::FieldExpression(FieldExpression&&) noexcept = default;
FieldExpression& FieldExpression::operator=(FieldExpression&&) noexcept = default;

FieldExpression FieldExpression::parse(const std::string& source, int dim) {
    if (dim < 1) throw ConfigError("FieldExpression: dimension must be >= 1");
    FieldExpression fe;
    fe.source_ = source;
    fe.dim_ = dim;
    fe.root_ = Parser(source, dim).run();
    return fe;
}

double FieldExpression::eval(const Vec& x) const {
    if (x.size() != dim_) throw ConfigError("FieldExpression: wrong evaluation dimension");
    return eval_node(*root_, x);
}

ScalarField FieldExpression::field() const {
    auto root = root_;
    int dim = dim_;
    return [root, dim](const Vec& x) -> double {
        if (x.size() != dim) throw ConfigError("FieldExpression: wrong evaluation dimension");
        return eval_node(*root, x);
    };
}

}  // namespace heatlab
