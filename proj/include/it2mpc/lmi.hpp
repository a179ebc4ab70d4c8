#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/matrix.hpp"

namespace it2mpc::lmi {

enum class VarKind { symmetric, general, scalar };

/// Handle to a matrix (or scalar) decision variable within one LmiProblem.
struct VarRef {
    int id = -1;
    std::string name;
    VarKind kind = VarKind::scalar;
    int rows = 0, cols = 0;

    bool valid() const { return id >= 0; }
};

/// One term of an affine block: left * V * right, or left * V^T * right when
/// transposed. For scalar variables the term is v * left and right is unused.
struct AffineTerm {
    Matrix left;
    int var = -1;
    Matrix right;
    bool transposed = false;
    bool scalar = false;
};

class Assignment;

/// Matrix-valued expression affine in the problem variables.
class AffineBlock {
public:
    AffineBlock(int rows, int cols) : rows_(rows), cols_(cols), constant_(rows, cols) {}

    explicit AffineBlock(Matrix constant)
        : rows_(constant.rows()), cols_(constant.cols()), constant_(std::move(constant)) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    void add_constant(const Matrix& c) {
        if (c.rows() != rows_ || c.cols() != cols_)
            throw StructuralError("AffineBlock: constant shape mismatch");
        constant_ += c;
    }

    void add_term(Matrix left, const VarRef& v, Matrix right, bool transposed = false) {
        if (v.kind == VarKind::scalar)
            throw StructuralError("AffineBlock: use add_scalar_term for scalar variables");
        const int vr = transposed ? v.cols : v.rows;
        const int vc = transposed ? v.rows : v.cols;
        if (left.cols() != vr)
            throw StructuralError("AffineBlock: left coefficient does not match variable '" + v.name + "'");
        if (right.rows() != vc)
            throw StructuralError("AffineBlock: right coefficient does not match variable '" + v.name + "'");
        if (left.rows() != rows_ || right.cols() != cols_)
            throw StructuralError("AffineBlock: term for variable '" + v.name +
                                  "' does not produce the block dimension");
        terms_.push_back({std::move(left), v.id, std::move(right), transposed, false});
    }

    void add_scalar_term(Matrix coeff, const VarRef& v) {
        if (v.kind != VarKind::scalar)
            throw StructuralError("AffineBlock: add_scalar_term requires a scalar variable");
        if (coeff.rows() != rows_ || coeff.cols() != cols_)
            throw StructuralError("AffineBlock: scalar coefficient shape mismatch for '" + v.name + "'");
        terms_.push_back({std::move(coeff), v.id, Matrix(), false, true});
    }

    const Matrix& constant() const { return constant_; }
    const std::vector<AffineTerm>& terms() const { return terms_; }

    Matrix evaluate(const Assignment& a) const;

private:
    int rows_, cols_;
    Matrix constant_;
    std::vector<AffineTerm> terms_;
};

enum class Sense { negative_definite, positive_semidefinite };

/// Block-structured matrix inequality, affine in the decision variables.
/// Upper-triangular blocks are authoritative; the assembled matrix is
/// symmetric for every assignment.
class LmiConstraint {
public:
    LmiConstraint(std::string label, Sense sense, std::vector<int> block_dims)
        : label_(std::move(label)), sense_(sense), dims_(std::move(block_dims)) {
        for (int d : dims_)
            if (d < 1)
                throw StructuralError("LmiConstraint: block dims must be >= 1");
    }

    void set_block(int bi, int bj, AffineBlock block) {
        const int nb = static_cast<int>(dims_.size());
        if (bi < 0 || bj < 0 || bi >= nb || bj >= nb || bi > bj)
            throw StructuralError("LmiConstraint '" + label_ + "': block (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") must lie in the upper triangle");
        if (block.rows() != dims_[bi] || block.cols() != dims_[bj])
            throw StructuralError("LmiConstraint '" + label_ + "': block (" + std::to_string(bi) + "," +
                                  std::to_string(bj) + ") has wrong shape");
        blocks_.insert_or_assign({bi, bj}, std::move(block));
    }

    const std::string& label() const { return label_; }
    Sense sense() const { return sense_; }
    const std::vector<int>& block_dims() const { return dims_; }
    const std::map<std::pair<int, int>, AffineBlock>& blocks() const { return blocks_; }

    int dim() const {
        int n = 0;
        for (int d : dims_)
            n += d;
        return n;
    }

private:
    std::string label_;
    Sense sense_;
    std::vector<int> dims_;
    std::map<std::pair<int, int>, AffineBlock> blocks_;
};

/// Linear inequality sum(coeff * var(i,j)) <= rhs on scalar entries of the
/// decision variables.
struct ScalarBound {
    struct Entry {
        int var = -1;
        int row = 0, col = 0;
        double coeff = 1.0;
    };
    std::string label;
    std::vector<Entry> terms;
    double rhs = 0.0;
};

class LmiProblem {
public:
    VarRef add_symmetric(const std::string& name, int dim) {
        return add_variable(name, VarKind::symmetric, dim, dim);
    }

    VarRef add_matrix(const std::string& name, int rows, int cols) {
        return add_variable(name, VarKind::general, rows, cols);
    }

    VarRef add_scalar(const std::string& name) { return add_variable(name, VarKind::scalar, 1, 1); }

    void add_constraint(LmiConstraint c) { constraints_.push_back(std::move(c)); }

    void add_scalar_bound(ScalarBound b) {
        for (const auto& t : b.terms)
            if (t.var < 0 || t.var >= static_cast<int>(vars_.size()))
                throw StructuralError("ScalarBound '" + b.label + "': unknown variable");
        bounds_.push_back(std::move(b));
    }

    void set_objective(const VarRef& v) {
        if (v.kind != VarKind::scalar)
            throw StructuralError("Objective must be a scalar variable");
        objective_ = v.id;
    }

    bool has_objective() const { return objective_ >= 0; }
    int objective() const { return objective_; }

    const std::vector<VarRef>& variables() const { return vars_; }
    const VarRef& variable(int id) const { return vars_.at(static_cast<std::size_t>(id)); }

    const VarRef& variable(const std::string& name) const {
        for (const auto& v : vars_)
            if (v.name == name)
                return v;
        throw StructuralError("No variable named '" + name + "'");
    }
    const std::vector<LmiConstraint>& constraints() const { return constraints_; }
    const std::vector<ScalarBound>& scalar_bounds() const { return bounds_; }

    /// Invariant check: the objective, when present, appears in at least one
    /// constraint.
    void validate() const {
        if (objective_ < 0)
            return;
        for (const auto& c : constraints_)
            for (const auto& [key, block] : c.blocks())
                for (const auto& t : block.terms())
                    if (t.var == objective_)
                        return;
        for (const auto& b : bounds_)
            for (const auto& t : b.terms)
                if (t.var == objective_)
                    return;
        throw StructuralError("Objective variable does not appear in any constraint");
    }

private:
    VarRef add_variable(const std::string& name, VarKind kind, int rows, int cols) {
        if (rows < 1 || cols < 1)
            throw StructuralError("Variable '" + name + "': dimensions must be >= 1");
        if (kind == VarKind::symmetric && rows != cols)
            throw StructuralError("Variable '" + name + "': symmetric kind requires rows == cols");
        for (const auto& v : vars_)
            if (v.name == name)
                throw StructuralError("Variable name '" + name + "' is not unique");
        VarRef v;
        v.id = static_cast<int>(vars_.size());
        v.name = name;
        v.kind = kind;
        v.rows = rows;
        v.cols = cols;
        vars_.push_back(v);
        return v;
    }

    std::vector<VarRef> vars_;
    std::vector<LmiConstraint> constraints_;
    std::vector<ScalarBound> bounds_;
    int objective_ = -1;
};

/// Values for every variable of a problem, stored as dense matrices
/// (scalars as 1x1).
class Assignment {
public:
    Assignment() = default;

    explicit Assignment(int nvars) : values_(nvars) {}

    void set(const VarRef& v, Matrix value) {
        ensure(v.id);
        if (value.rows() != v.rows || value.cols() != v.cols)
            throw StructuralError("Assignment: value for '" + v.name + "' has wrong shape");
        if (v.kind == VarKind::symmetric && !value.is_symmetric(1e-9 * std::max(1.0, value.max_abs())))
            throw StructuralError("Assignment: symmetric variable '" + v.name +
                                  "' assigned an asymmetric value");
        values_[static_cast<std::size_t>(v.id)] = std::move(value);
    }

    void set(const VarRef& v, const SymMatrix& value) { set(v, value.to_matrix()); }

    void set(const VarRef& v, double value) { set(v, Matrix{{value}}); }

    bool has(int id) const {
        return id >= 0 && id < static_cast<int>(values_.size()) &&
               values_[static_cast<std::size_t>(id)].has_value();
    }

    const Matrix& matrix(int id) const {
        if (!has(id))
            throw StructuralError("Assignment: variable id " + std::to_string(id) + " is unassigned");
        return *values_[static_cast<std::size_t>(id)];
    }

    const Matrix& matrix(const VarRef& v) const { return matrix(v.id); }

    double scalar(const VarRef& v) const { return matrix(v.id)(0, 0); }

    SymMatrix symmetric(const VarRef& v) const {
        return SymMatrix::from_matrix(matrix(v.id), 1e-9 * std::max(1.0, matrix(v.id).max_abs()));
    }

private:
    void ensure(int id) {
        if (id < 0)
            throw StructuralError("Assignment: invalid variable");
        if (id >= static_cast<int>(values_.size()))
            values_.resize(static_cast<std::size_t>(id) + 1);
    }

    std::vector<std::optional<Matrix>> values_;
};

inline Matrix AffineBlock::evaluate(const Assignment& a) const {
    Matrix out = constant_;
    for (const auto& t : terms_) {
        const Matrix& v = a.matrix(t.var);
        if (t.scalar) {
            out += t.left * v(0, 0);
        } else if (t.transposed) {
            out += t.left * v.transpose() * t.right;
        } else {
            out += t.left * v * t.right;
        }
    }
    return out;
}

/// Numeric assembled value of a constraint under an assignment.
inline SymMatrix evaluate(const LmiConstraint& c, const Assignment& a) {
    BlockSpec spec(c.block_dims());
    for (const auto& [key, block] : c.blocks())
        spec.set_block(key.first, key.second, block.evaluate(a));
    return assemble_symmetric(spec);
}

/// Scalar value of a linear bound expression.
inline double evaluate(const ScalarBound& b, const Assignment& a) {
    double s = 0.0;
    for (const auto& t : b.terms)
        s += t.coeff * a.matrix(t.var)(t.row, t.col);
    return s;
}

struct ConstraintMargin {
    std::string label;
    double min_eig = 0.0;
    double max_eig = 0.0;
    /// Positive means violated: max_eig + tol for ND, -(min_eig) - tol for PSD.
    double violation = 0.0;
    bool pass = false;
};

struct FeasReport {
    std::vector<ConstraintMargin> constraints;
    bool pass = true;
    double worst_violation = -1e300;
    std::string worst_label;
};

/// Per-constraint eigenvalue margins. A negative_definite constraint passes
/// when max_eig < -tol; a positive_semidefinite one when min_eig > -tol.
/// Scalar bounds pass when value <= rhs + tol.
inline FeasReport check_feasible(const LmiProblem& p, const Assignment& a, double tol) {
    if (tol <= 0.0)
        throw StructuralError("check_feasible: tol must be > 0");
    FeasReport report;
    auto record = [&](ConstraintMargin m) {
        if (m.violation > report.worst_violation) {
            report.worst_violation = m.violation;
            report.worst_label = m.label;
        }
        report.pass = report.pass && m.pass;
        report.constraints.push_back(std::move(m));
    };
    for (const auto& c : p.constraints()) {
        SymMatrix value = evaluate(c, a);
        auto eig = eigh(value);
        ConstraintMargin m;
        m.label = c.label();
        m.min_eig = eig.values.front();
        m.max_eig = eig.values.back();
        if (c.sense() == Sense::negative_definite) {
            m.violation = m.max_eig + tol;
            m.pass = m.max_eig < -tol;
        } else {
            m.violation = -m.min_eig - tol;
            m.pass = m.min_eig > -tol;
        }
        record(std::move(m));
    }
    for (const auto& b : p.scalar_bounds()) {
        const double value = evaluate(b, a);
        ConstraintMargin m;
        m.label = b.label;
        m.min_eig = b.rhs - value;
        m.max_eig = m.min_eig;
        m.violation = value - b.rhs - tol;
        m.pass = value <= b.rhs + tol;
        record(std::move(m));
    }
    return report;
}

/// Human-readable diagnostic dump: variable list, constraint block structure,
/// senses. Not a compatibility surface.
inline std::string dump(const LmiProblem& p) {
    std::ostringstream os;
    os << "variables (" << p.variables().size() << "):\n";
    for (const auto& v : p.variables()) {
        os << "  " << v.name << " : ";
        switch (v.kind) {
            case VarKind::symmetric: os << "symmetric " << v.rows << "x" << v.cols; break;
            case VarKind::general: os << "general " << v.rows << "x" << v.cols; break;
            case VarKind::scalar: os << "scalar"; break;
        }
        os << "\n";
    }
    if (p.has_objective())
        os << "objective: minimize " << p.variable(p.objective()).name << "\n";
    os << "constraints (" << p.constraints().size() << "):\n";
    for (const auto& c : p.constraints()) {
        os << "  " << c.label() << " ["
           << (c.sense() == Sense::negative_definite ? "< 0" : ">= 0") << "] dims";
        for (int d : c.block_dims())
            os << " " << d;
        os << ", blocks";
        for (const auto& [key, block] : c.blocks()) {
            os << " (" << key.first << "," << key.second << ")";
            if (block.terms().empty())
                os << ":const";
        }
        os << "\n";
    }
    if (!p.scalar_bounds().empty()) {
        os << "scalar bounds (" << p.scalar_bounds().size() << "):\n";
        for (const auto& b : p.scalar_bounds()) {
            os << "  " << b.label << ":";
            for (const auto& t : b.terms)
                os << " " << t.coeff << "*" << p.variable(t.var).name << "(" << t.row << "," << t.col
                   << ")";
            os << " <= " << b.rhs << "\n";
        }
    }
    return os.str();
}

}  // namespace it2mpc::lmi
