#include "bpm/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bpm/error.hpp"

namespace bpm {

namespace {

class CountingObjective {
 public:
  explicit CountingObjective(const Objective& f) : f_(f) {}

  double operator()(const std::vector<double>& x) {
    ++count_;
    const double v = f_(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "objective returned " << v << " at evaluation " << count_ << ", x = [";
      for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
      msg << "]";
      throw Error(ErrorCode::kNonFiniteObjective, msg.str());
    }
    return v;
  }

  long count() const { return count_; }

 private:
  const Objective& f_;
  long count_ = 0;
};

}  // namespace

NelderMeadResult nelder_mead(const Objective& objective, std::span<const double> x0,
                             const NelderMeadOptions& options) {
  const std::size_t dim = x0.size();
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "empty starting point");
  const auto& step = options.initial_step;
  if (step.size() != 1 && step.size() != dim) {
    throw Error(ErrorCode::kInvalidArgument, "initial_step length must be 1 or dim");
  }
  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : 200 * static_cast<int>(dim);

  CountingObjective f(objective);
  std::vector<std::vector<double>> simplex(dim + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < dim; ++i) {
    simplex[i + 1][i] += step.size() == 1 ? step[0] : step[i];
  }
  std::vector<double> fv(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) fv[i] = f(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  auto budget_left = [&] {
    return options.max_evaluations <= 0 || f.count() < options.max_evaluations;
  };

  NelderMeadResult result;
  std::vector<double> centroid(dim), xr(dim), xe(dim), xc(dim);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[dim - 1];
    if (fv[worst] - fv[best] < options.f_tolerance) {
      result.converged = true;
      break;
    }
    if (!budget_left()) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < dim; ++v) {
      const auto& p = simplex[order[v]];
      for (std::size_t i = 0; i < dim; ++i) centroid[i] += p[i];
    }
    for (double& c : centroid) c /= static_cast<double>(dim);

    const auto& xw = simplex[worst];
    for (std::size_t i = 0; i < dim; ++i) {
      xr[i] = centroid[i] + options.reflection * (centroid[i] - xw[i]);
    }
    const double fr = f(xr);

    if (fr < fv[best]) {
      for (std::size_t i = 0; i < dim; ++i) {
        xe[i] = centroid[i] + options.expansion * (xr[i] - centroid[i]);
      }
      const double fe = f(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }

    const bool outside = fr < fv[worst];
    const auto& toward = outside ? xr : xw;
    for (std::size_t i = 0; i < dim; ++i) {
      xc[i] = centroid[i] + options.contraction * (toward[i] - centroid[i]);
    }
    const double fc = f(xc);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }

    // shrink toward the best vertex
    const auto xb = simplex[best];
    for (std::size_t v = 0; v <= dim; ++v) {
      if (v == best) continue;
      for (std::size_t i = 0; i < dim; ++i) {
        simplex[v][i] = xb[i] + options.shrink * (simplex[v][i] - xb[i]);
      }
      fv[v] = f(simplex[v]);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::min_element(fv.begin(), fv.end()) - fv.begin());
  result.x = simplex[best];
  result.f = fv[best];
  result.evaluations = f.count();
  result.iterations = iter;
  return result;
}

}  // namespace bpm
