#include "joinsketch/faq.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

namespace joinsketch {

std::int64_t count_rows(const JoinQuery& q) {
  return faq_eval(q, CountSemiring{}, [](Index, Index) { return std::int64_t{1}; });
}

double join_quadratic(const JoinQuery& q, const VectorXd& w) {
  require_dims(w.size() == q.dim(), "join_quadratic: vector length differs from the join dimension");
  std::vector<VectorXd> proj;
  for (std::size_t t = 0; t < q.tables.size(); ++t) {
    VectorXd sub = VectorXd::Zero(q.tables[t].cols());
    for (const auto& [src, dst] : q.partition.assigned[t]) sub(src) = w(dst);
    proj.push_back(q.tables[t].values * sub);
  }
  const Moments m = faq_eval(q, MomentSemiring{}, [&](Index t, Index r) {
    return Moments{1.0, proj[static_cast<std::size_t>(t)](r), 0.0};
  });
  return m.sum_squares();
}

GramMatrix gram_via_faq(const JoinQuery& q, const std::vector<Index>& columns) {
  std::vector<Index> cols = columns;
  if (cols.empty())
    for (Index c = 0; c < q.dim(); ++c) cols.push_back(c);
  for (const Index c : cols)
    if (c < 0 || c >= q.dim()) throw DimensionError(fmt::format("gram_via_faq: column {} out of range", c));

  // Owning table and source column of every join column.
  std::vector<std::pair<Index, Index>> source(static_cast<std::size_t>(q.dim()));
  for (std::size_t t = 0; t < q.partition.assigned.size(); ++t)
    for (const auto& [src, dst] : q.partition.assigned[t])
      source[static_cast<std::size_t>(dst)] = {static_cast<Index>(t), src};

  GramMatrix out;
  const auto d = static_cast<Index>(cols.size());
  out.gram = MatrixXd::Zero(d, d);
  for (const Index c : cols) out.columns.push_back(q.partition.columns[static_cast<std::size_t>(c)]);
  for (Index a = 0; a < d; ++a) {
    for (Index b = a; b < d; ++b) {
      const auto [ta, ca] = source[static_cast<std::size_t>(cols[static_cast<std::size_t>(a)])];
      const auto [tb, cb] = source[static_cast<std::size_t>(cols[static_cast<std::size_t>(b)])];
      const double v = faq_eval(q, SumProductSemiring{}, [&](Index t, Index r) {
        const auto& vals = q.tables[static_cast<std::size_t>(t)].values;
        double f = 1.0;
        if (t == ta) f *= vals(r, ca);
        if (t == tb) f *= vals(r, cb);
        return f;
      });
      out.gram(a, b) = out.gram(b, a) = v;
      ++out.evaluations;
    }
  }
  return out;
}

double statistical_dimension(const MatrixXd& gram, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError(fmt::format("statistical dimension needs lambda >= 0, got {}", lambda));
  require_dims(gram.rows() == gram.cols(), "statistical_dimension: gram must be square");
  if (gram.size() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const VectorXd& ev = eig.eigenvalues();
  const double floor = 1e-12 * ev.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (const double l : ev)
    if (l > floor) s += l / (l + lambda);
  return s;
}

}  // namespace joinsketch
