#pragma once

#include <memory>
#include <string>
#include <vector>

#include "heatlab/common.hpp"

namespace heatlab {

/// Parsed arithmetic expression over coordinates x1..xd, real literals,
/// operators + - * / ^ (right-associative power binding tighter than unary
/// minus) and functions exp, log, sin, cos, sqrt, tanh.
class FieldExpression {
  public:
    /// Parse; throws ParseError with position/expected on any other token,
    /// including coordinate indices above d.
    static FieldExpression parse(const std::string& source, int dim);

    double eval(const Vec& x) const;
    const std::string& source() const { return source_; }
    int dim() const { return dim_; }

    struct Node;
    using NodePtr = std::unique_ptr<Node>;

    FieldExpression(FieldExpression&&) noexcept;
    FieldExpression& operator=(FieldExpression&&) noexcept;
    FieldExpression(const FieldExpression&) = delete;
    FieldExpression& operator=(const FieldExpression&) = delete;
    ~FieldExpression();

    /// Shareable evaluator (the AST is immutable after parse).
    ScalarField field() const;

  private:
    FieldExpression();
    std::string source_;
    int dim_ = 0;
    std::shared_ptr<const Node> root_;
};

}  // namespace heatlab
