#include "qme/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

namespace qme::opt {

using engine::pauli_string_expectation;
using linalg::Matrix;

namespace {

constexpr double pi = std::numbers::pi;

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

struct Candidate {
  std::vector<double> theta;
  double e = 0.0;
};

// Single-linkage clustering in the l-inf mod-2pi metric. Points are first
// collapsed onto a tol/2 bucket grid (converged duplicates are numerically
// identical, so this keeps the pass below quadratic in the seed count), and
// union-find then chains buckets within tol of each other. Each cluster is
// represented by its lowest-energy member, ties broken lexicographically.
std::vector<Candidate> cluster_representatives(const std::vector<Candidate>& pts, double tol) {
  if (pts.empty()) return {};
  const double quant = tol / 2.0;
  std::map<std::vector<long>, Candidate> buckets;
  for (const Candidate& c : pts) {
    std::vector<long> key(c.theta.size());
    for (size_t i = 0; i < c.theta.size(); ++i)
      key[i] = std::llround((c.theta[i] + pi) / quant);
    auto [it, inserted] = buckets.try_emplace(std::move(key), c);
    if (!inserted) {
      Candidate& best = it->second;
      if (c.e < best.e || (c.e == best.e && lex_less(c.theta, best.theta))) best = c;
    }
  }

  std::vector<Candidate> reps;
  reps.reserve(buckets.size());
  for (auto& [key, c] : buckets) reps.push_back(std::move(c));

  std::vector<size_t> parent(reps.size());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (size_t i = 0; i < reps.size(); ++i)
    for (size_t j = i + 1; j < reps.size(); ++j) {
      double d = 0.0;
      for (size_t k = 0; k < reps[i].theta.size(); ++k)
        d = std::max(d, angle_dist(reps[i].theta[k], reps[j].theta[k]));
      if (d <= tol) {
        const size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }

  std::map<size_t, Candidate> merged;
  for (size_t i = 0; i < reps.size(); ++i) {
    const size_t root = find(i);
    auto [it, inserted] = merged.try_emplace(root, reps[i]);
    if (!inserted) {
      Candidate& best = it->second;
      if (reps[i].e < best.e || (reps[i].e == best.e && lex_less(reps[i].theta, best.theta))) best = reps[i];
    }
  }
  std::vector<Candidate> out;
  out.reserve(merged.size());
  for (auto& [root, c] : merged) out.push_back(std::move(c));
  return out;
}

Classification classify_hessian(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  constexpr double deg_tol = 1e-7;
  bool pos = true, neg = true;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) < deg_tol) return Classification::degenerate;
    pos = pos && ev[i] > 0.0;
    neg = neg && ev[i] < 0.0;
  }
  if (pos) return Classification::minimum;
  if (neg) return Classification::maximum;
  return Classification::saddle;
}

StationaryPoint make_point(const FeedbackLandscape& land, std::vector<double> theta, double e) {
  StationaryPoint p;
  p.gradient_norm = l2_norm(land.gradient(theta));
  p.classification = classify_hessian(land.hessian(theta));
  p.theta = std::move(theta);
  p.feedback_energy = e;
  return p;
}

std::vector<StationaryPoint> flat_result(const FeedbackLandscape& land) {
  StationaryPoint p;
  p.theta.assign(land.sites(), 0.0);
  p.feedback_energy = land.energy(p.theta);
  p.gradient_norm = 0.0;
  p.classification = Classification::degenerate;
  return {p};
}

void sort_points(std::vector<StationaryPoint>& pts) {
  std::sort(pts.begin(), pts.end(), [](const StationaryPoint& a, const StationaryPoint& b) {
    if (a.feedback_energy != b.feedback_energy) return a.feedback_energy < b.feedback_energy;
    return lex_less(a.theta, b.theta);
  });
}

}  // namespace

double wrap_angle(double x) {
  double y = std::fmod(x + pi, 2.0 * pi);
  if (y < 0.0) y += 2.0 * pi;
  return y - pi;
}

double angle_dist(double x, double y) { return std::abs(wrap_angle(x - y)); }

void SearchConfig::validate() const {
  const double width = theta_max - theta_min;
  if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("search.grid_range must be non-empty");
  if (!(grid_spacing > 0.0) || grid_spacing >= width)
    throw ValidationError("search.grid_spacing must lie in (0, range width)");
  if (k_max < 1) throw ValidationError("search.k_max must be >= 1");
  if (!(convergence_tol > 0.0)) throw ValidationError("search.convergence_tol must be > 0");
  if (!(cluster_tol > 0.0)) throw ValidationError("search.cluster_tol must be > 0");
  if (!(gradient_tol > 0.0)) throw ValidationError("search.gradient_tol must be > 0");
}

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::minimum: return "minimum";
    case Classification::maximum: return "maximum";
    case Classification::saddle: return "saddle";
    case Classification::degenerate: return "degenerate";
  }
  return "unknown";
}

FeedbackLandscape::FeedbackLandscape(const OperatorMatrix& rho_m, const SystemSpec& spec) {
  spec.validate();
  n_ = spec.n_sites;
  if (rho_m.dim() != (1 << n_))
    throw ValidationError("FeedbackLandscape: state dimension does not match the spec");
  if (linalg::strict_checks() && !rho_m.has(linalg::tag_density) && !linalg::is_density(rho_m.m, 1e-10))
    throw ValidationError("FeedbackLandscape: input is not a density matrix");
  eps_ = spec.epsilon;
  a_.resize(n_);
  b_.resize(n_);
  for (int j = 0; j < n_; ++j) {
    const std::pair<int, char> z{j + 1, 'z'}, x{j + 1, 'x'};
    a_[j] = pauli_string_expectation(rho_m, {&z, 1});
    b_[j] = pauli_string_expectation(rho_m, {&x, 1});
  }
  pairs_.reserve(spec.coupling.size());
  for (const engine::Coupling& c : spec.coupling) {
    PairTerms t;
    t.j = c.j - 1;
    t.k = c.k - 1;
    t.delta = c.delta;
    const auto corr = [&](char aj, char ak) {
      const std::pair<int, char> ops[2] = {{c.j, aj}, {c.k, ak}};
      return pauli_string_expectation(rho_m, ops);
    };
    t.czz = corr('z', 'z');
    t.czx = corr('z', 'x');
    t.cxz = corr('x', 'z');
    t.cxx = corr('x', 'x');
    pairs_.push_back(t);
  }
}

void FeedbackLandscape::check_theta(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != n_)
    throw ValidationError("theta must carry one angle per site");
  for (double t : theta)
    if (!std::isfinite(t)) throw ValidationError("theta entries must be finite");
}

double FeedbackLandscape::energy(std::span<const double> theta) const {
  check_theta(theta);
  double e = 0.5;
  for (int j = 0; j < n_; ++j)
    e += 0.5 * eps_[j] * (a_[j] * std::cos(theta[j]) - b_[j] * std::sin(theta[j]));
  for (const PairTerms& p : pairs_) {
    const double cj = std::cos(theta[p.j]), sj = std::sin(theta[p.j]);
    const double ck = std::cos(theta[p.k]), sk = std::sin(theta[p.k]);
    e += p.delta * (p.czz * cj * ck - p.czx * cj * sk - p.cxz * sj * ck + p.cxx * sj * sk);
  }
  return e;
}

std::pair<double, double> FeedbackLandscape::coeffs(int j, std::span<const double> theta) const {
  check_theta(theta);
  if (j < 1 || j > n_) throw BadSite("coeffs: site " + std::to_string(j) + " outside 1.." + std::to_string(n_));
  const int j0 = j - 1;
  double a = 0.5 * eps_[j0] * a_[j0];
  double b = 0.5 * eps_[j0] * b_[j0];
  for (const PairTerms& p : pairs_) {
    if (p.j == j0) {
      const double ck = std::cos(theta[p.k]), sk = std::sin(theta[p.k]);
      a += p.delta * (p.czz * ck - p.czx * sk);
      b += p.delta * (p.cxz * ck - p.cxx * sk);
    } else if (p.k == j0) {
      const double cj = std::cos(theta[p.j]), sj = std::sin(theta[p.j]);
      a += p.delta * (p.czz * cj - p.cxz * sj);
      b += p.delta * (p.czx * cj - p.cxx * sj);
    }
  }
  return {a, b};
}

std::vector<double> FeedbackLandscape::gradient(std::span<const double> theta) const {
  check_theta(theta);
  std::vector<double> g(n_);
  for (int j = 0; j < n_; ++j) {
    const auto [a, b] = coeffs(j + 1, theta);
    g[j] = -(a * std::sin(theta[j]) + b * std::cos(theta[j]));
  }
  return g;
}

Eigen::MatrixXd FeedbackLandscape::hessian(std::span<const double> theta) const {
  check_theta(theta);
  constexpr double h = 1e-4;
  const double e0 = energy(theta);
  std::vector<double> t(theta.begin(), theta.end());
  Eigen::MatrixXd out(n_, n_);
  for (int i = 0; i < n_; ++i) {
    t[i] = theta[i] + h;
    const double ep = energy(t);
    t[i] = theta[i] - h;
    const double em = energy(t);
    t[i] = theta[i];
    out(i, i) = (ep - 2.0 * e0 + em) / (h * h);
  }
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) {
      double v = 0.0;
      for (int si = -1; si <= 1; si += 2)
        for (int sj = -1; sj <= 1; sj += 2) {
          t[i] = theta[i] + si * h;
          t[j] = theta[j] + sj * h;
          v += si * sj * energy(t);
        }
      t[i] = theta[i];
      t[j] = theta[j];
      out(i, j) = out(j, i) = v / (4.0 * h * h);
    }
  return out;
}

bool FeedbackLandscape::flat(double tol) const {
  for (int j = 0; j < n_; ++j)
    if (std::abs(eps_[j]) * std::hypot(a_[j], b_[j]) > tol) return false;
  for (const PairTerms& p : pairs_) {
    const double c = std::max({std::abs(p.czz), std::abs(p.czx), std::abs(p.cxz), std::abs(p.cxx)});
    if (std::abs(p.delta) * c > tol) return false;
  }
  return true;
}

double feedback_energy(const OperatorMatrix& rho_m, const SystemSpec& spec, std::span<const double> theta) {
  spec.validate();
  if (static_cast<int>(theta.size()) != spec.n_sites)
    throw ValidationError("feedback_energy: theta must carry one angle per site");
  const OperatorMatrix h = engine::build_hamiltonian(spec);
  const OperatorMatrix u = engine::local_feedback_unitary(theta);
  const Matrix h_f = u.m.adjoint() * h.m * u.m;
  return engine::energy(rho_m, OperatorMatrix(h_f, linalg::tag_hermitian));
}

std::pair<double, double> stationarity_coeffs_analytic(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                                       int j, std::span<const double> theta_others) {
  return FeedbackLandscape(rho_m, spec).coeffs(j, theta_others);
}

std::pair<double, double> stationarity_coeffs_numeric(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                                      int j, std::span<const double> theta_others) {
  spec.validate();
  if (j < 1 || j > spec.n_sites) throw BadSite("stationarity_coeffs_numeric: site outside register");
  std::vector<double> t(theta_others.begin(), theta_others.end());
  if (static_cast<int>(t.size()) != spec.n_sites)
    throw ValidationError("stationarity_coeffs_numeric: theta must carry one angle per site");
  const auto eval = [&](double angle) {
    t[j - 1] = angle;
    return feedback_energy(rho_m, spec, t);
  };
  const double a = (eval(0.0) - eval(pi)) / 2.0;
  const double b = (eval(3.0 * pi / 2.0) - eval(pi / 2.0)) / 2.0;
  return {a, b};
}

std::vector<double> gradient(const OperatorMatrix& rho_m, const SystemSpec& spec,
                             std::span<const double> theta) {
  return FeedbackLandscape(rho_m, spec).gradient(theta);
}

Eigen::MatrixXd hessian(const OperatorMatrix& rho_m, const SystemSpec& spec,
                        std::span<const double> theta) {
  return FeedbackLandscape(rho_m, spec).hessian(theta);
}

RefineResult fixed_point_refine(const FeedbackLandscape& land, std::span<const double> seed,
                                const SearchConfig& cfg, BranchRule rule) {
  cfg.validate();
  const int n = land.sites();
  if (static_cast<int>(seed.size()) != n)
    throw ValidationError("fixed_point_refine: seed must carry one angle per site");
  RefineResult res;
  res.theta.resize(n);
  for (int j = 0; j < n; ++j) res.theta[j] = wrap_angle(seed[j]);

  for (int iter = 1; iter <= cfg.k_max; ++iter) {
    double dmax = 0.0;
    for (int j = 0; j < n; ++j) {
      const auto [a, b] = land.coeffs(j + 1, res.theta);
      if (a * a + b * b < 1e-28) continue;  // angle carries no information here
      const double cand = std::atan2(-b, a);
      const double alt = wrap_angle(cand + pi);
      double next;
      if (rule == BranchRule::minimize) {
        // Per-coordinate contribution is a cos - b sin; the atan2 branch is
        // its maximum and the pi shift its minimum.
        const double e_cand = a * std::cos(cand) - b * std::sin(cand);
        const double e_alt = a * std::cos(alt) - b * std::sin(alt);
        next = e_alt < e_cand ? alt : cand;
      } else {
        next = angle_dist(cand, res.theta[j]) <= angle_dist(alt, res.theta[j]) ? cand : alt;
      }
      next = wrap_angle(next);
      dmax = std::max(dmax, angle_dist(next, res.theta[j]));
      res.theta[j] = next;
    }
    if (dmax < cfg.convergence_tol) {
      res.converged = true;
      res.iterations = iter;
      return res;
    }
  }
  res.converged = false;
  res.iterations = cfg.k_max;
  return res;
}

RefineResult fixed_point_refine(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                std::span<const double> seed, const SearchConfig& cfg) {
  return fixed_point_refine(FeedbackLandscape(rho_m, spec), seed, cfg, BranchRule::minimize);
}

std::vector<StationaryPoint> hybrid_search(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                           const SearchConfig& cfg, Exec exec) {
  cfg.validate();
  const FeedbackLandscape land(rho_m, spec);
  const int n = land.sites();
  if (land.flat()) return flat_result(land);

  const int per_axis =
      std::max(1, static_cast<int>(std::floor((cfg.theta_max - cfg.theta_min) / cfg.grid_spacing + 1e-9)));
  double total_d = 1.0;
  for (int j = 0; j < n; ++j) total_d *= per_axis;
  if (total_d > 8e6)
    throw SizeLimit("hybrid_search: " + std::to_string(total_d) + " seeds exceed the supported budget");
  const long total = static_cast<long>(total_d);

  std::vector<RefineResult> refined(total);
  parallel_for(total, exec, [&](long idx) {
    std::vector<double> seed(n);
    long rem = idx;
    for (int j = n - 1; j >= 0; --j) {
      seed[j] = cfg.theta_min + static_cast<double>(rem % per_axis) * cfg.grid_spacing;
      rem /= per_axis;
    }
    refined[idx] = fixed_point_refine(land, seed, cfg, BranchRule::minimize);
  });

  std::vector<Candidate> converged;
  for (const RefineResult& r : refined)
    if (r.converged) converged.push_back({r.theta, land.energy(r.theta)});
  if (converged.empty()) throw SearchFailed("hybrid_search: no seed converged within k_max sweeps");

  std::vector<Candidate> reps = cluster_representatives(converged, cfg.cluster_tol);

  // The tangent update is defined mod pi, so each representative spawns its
  // per-coordinate pi-shifted variants, refined under the nearest-branch
  // rule to land on the complementary stationary branches (maxima, saddles).
  std::vector<Candidate> pool = reps;
  if (n <= 8) {
    for (const Candidate& rep : reps) {
      for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::vector<double> seed = rep.theta;
        for (int j = 0; j < n; ++j)
          if ((mask >> j) & 1u) seed[j] = wrap_angle(seed[j] + pi);
        const RefineResult r = fixed_point_refine(land, seed, cfg, BranchRule::nearest);
        if (!r.converged) continue;
        if (l2_norm(land.gradient(r.theta)) >= cfg.gradient_tol) continue;
        pool.push_back({r.theta, land.energy(r.theta)});
      }
    }
  }

  std::vector<StationaryPoint> out;
  for (const Candidate& c : cluster_representatives(pool, cfg.cluster_tol)) {
    StationaryPoint p = make_point(land, c.theta, c.e);
    if (p.gradient_norm >= cfg.gradient_tol) continue;
    out.push_back(std::move(p));
  }
  if (out.empty()) throw SearchFailed("hybrid_search: no stationary point below the gradient tolerance");
  sort_points(out);
  return out;
}

std::vector<StationaryPoint> grid_search(const OperatorMatrix& rho_m, const SystemSpec& spec,
                                         const SearchConfig& cfg, int grid_size, Exec exec) {
  cfg.validate();
  if (grid_size < 8) throw ValidationError("grid_search: grid_size must be >= 8");
  const FeedbackLandscape land(rho_m, spec);
  const int n = land.sites();
  if (n > 3) throw SizeLimit("grid_search: at most three sites supported");
  if (land.flat()) return flat_result(land);

  double total_d = 1.0;
  for (int j = 0; j < n; ++j) total_d *= grid_size;
  if (total_d > 2e8) throw SizeLimit("grid_search: lattice too large");
  const long total = static_cast<long>(total_d);
  const double step = (cfg.theta_max - cfg.theta_min) / (grid_size - 1);

  const auto decode = [&](long idx, std::vector<double>& theta, std::vector<int>& digits) {
    for (int j = n - 1; j >= 0; --j) {
      digits[j] = static_cast<int>(idx % grid_size);
      theta[j] = cfg.theta_min + digits[j] * step;
      idx /= grid_size;
    }
  };

  std::vector<double> gnorm(total);
  parallel_for(total, exec, [&](long idx) {
    std::vector<double> theta(n);
    std::vector<int> digits(n);
    decode(idx, theta, digits);
    gnorm[idx] = l2_norm(land.gradient(theta));
  });

  // Offsets of the Chebyshev-1 lattice neighborhood, excluding the center.
  std::vector<std::vector<int>> offsets;
  {
    std::vector<int> off(n, -1);
    while (true) {
      if (std::any_of(off.begin(), off.end(), [](int v) { return v != 0; })) offsets.push_back(off);
      int j = n - 1;
      while (j >= 0 && off[j] == 1) off[j--] = -1;
      if (j < 0) break;
      ++off[j];
    }
  }

  std::vector<char> passes(total, 0);
  parallel_for(total, exec, [&](long idx) {
    if (gnorm[idx] < cfg.gradient_tol) {
      passes[idx] = 1;
      return;
    }
    std::vector<double> theta(n);
    std::vector<int> digits(n);
    decode(idx, theta, digits);
    for (const std::vector<int>& off : offsets) {
      long nb = 0;
      bool in_range = true;
      for (int j = 0; j < n && in_range; ++j) {
        const int d = digits[j] + off[j];
        if (d < 0 || d >= grid_size) in_range = false;
        nb = nb * grid_size + d;
      }
      if (in_range && gnorm[nb] < gnorm[idx]) return;
    }
    passes[idx] = 1;  // lattice-neighborhood local minimum of the gradient norm
  });

  std::vector<long> cand;
  for (long idx = 0; idx < total; ++idx)
    if (passes[idx]) cand.push_back(idx);
  if (cand.empty()) throw SearchFailed("grid_search: no candidate passed the gradient filter");

  // Cluster candidate cells by lattice adjacency before polishing, one
  // Newton seed per connected component (the cell with the smallest
  // gradient norm).
  std::unordered_map<long, size_t> ord;
  ord.reserve(cand.size() * 2);
  for (size_t i = 0; i < cand.size(); ++i) ord.emplace(cand[i], i);
  std::vector<size_t> parent(cand.size());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  {
    std::vector<double> theta(n);
    std::vector<int> digits(n);
    for (size_t i = 0; i < cand.size(); ++i) {
      decode(cand[i], theta, digits);
      for (const std::vector<int>& off : offsets) {
        long nb = 0;
        bool in_range = true;
        for (int j = 0; j < n && in_range; ++j) {
          const int d = digits[j] + off[j];
          if (d < 0 || d >= grid_size) in_range = false;
          nb = nb * grid_size + d;
        }
        if (!in_range) continue;
        auto it = ord.find(nb);
        if (it == ord.end()) continue;
        const size_t a = find(i), b = find(it->second);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<size_t, size_t> component_best;  // root -> candidate ordinal
  for (size_t i = 0; i < cand.size(); ++i) {
    const size_t root = find(i);
    auto [it, inserted] = component_best.try_emplace(root, i);
    if (!inserted && gnorm[cand[i]] < gnorm[cand[it->second]]) it->second = i;
  }

  std::vector<Candidate> polished;
  {
    std::vector<double> theta(n);
    std::vector<int> digits(n);
    for (const auto& [root, i] : component_best) {
      decode(cand[i], theta, digits);
      std::vector<double> t = theta;
      for (int iter = 0; iter < 5; ++iter) {
        const std::vector<double> g = land.gradient(t);
        if (l2_norm(g) < 1e-13) break;
        const Eigen::MatrixXd h = land.hessian(t);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
        if (!lu.isInvertible()) break;
        Eigen::VectorXd rhs(n);
        for (int j = 0; j < n; ++j) rhs[j] = -g[j];
        const Eigen::VectorXd d = lu.solve(rhs);
        for (int j = 0; j < n; ++j)
          t[j] = wrap_angle(t[j] + std::clamp(d[j], -step, step));
      }
      if (l2_norm(land.gradient(t)) < cfg.gradient_tol) polished.push_back({t, land.energy(t)});
    }
  }
  if (polished.empty())
    throw SearchFailed("grid_search: no candidate below the gradient tolerance after refinement");

  std::vector<StationaryPoint> out;
  for (const Candidate& c : cluster_representatives(polished, cfg.cluster_tol))
    out.push_back(make_point(land, c.theta, c.e));
  sort_points(out);
  return out;
}

namespace {

const StationaryPoint& best_minimum(const std::vector<StationaryPoint>& pts) {
  for (const StationaryPoint& p : pts)
    if (p.classification == Classification::minimum) return p;
  return pts.front();
}

}  // namespace

StationaryPoint optimal_feedback(const OperatorMatrix& rho_m, const SystemSpec& spec, Method method,
                                 const SearchConfig& cfg, int grid_size, Exec exec) {
  if (method == Method::hybrid) return best_minimum(hybrid_search(rho_m, spec, cfg, exec));
  if (method == Method::grid) return best_minimum(grid_search(rho_m, spec, cfg, grid_size, exec));
  const StationaryPoint h = best_minimum(hybrid_search(rho_m, spec, cfg, exec));
  const StationaryPoint g = best_minimum(grid_search(rho_m, spec, cfg, grid_size, exec));
  if (std::abs(h.feedback_energy - g.feedback_energy) > 1e-4)
    throw CrossCheckFailed("optimal_feedback: hybrid " + std::to_string(h.feedback_energy) +
                           " vs grid " + std::to_string(g.feedback_energy));
  return h;
}

StationaryPoint optimal_global_feedback(const OperatorMatrix& rho_m, const SystemSpec& spec) {
  spec.validate();
  if (spec.n_sites != 2) throw UnsupportedSize("optimal_global_feedback: two qubits only");
  if (rho_m.dim() != 4) throw ValidationError("optimal_global_feedback: state dimension must be 4");

  const auto corr = [&](std::initializer_list<std::pair<int, char>> ops) {
    std::vector<std::pair<int, char>> v(ops);
    return pauli_string_expectation(rho_m, v);
  };
  const double a1 = corr({{1, 'z'}});
  const double a2 = corr({{2, 'z'}});
  const double cxy = corr({{1, 'x'}, {2, 'y'}});
  const double cyx = corr({{1, 'y'}, {2, 'x'}});
  const double czz = corr({{1, 'z'}, {2, 'z'}});
  const double delta = spec.coupling_between(1, 2);

  // E(theta) = 1/2 + delta*czz + P cos(2 theta) - Q sin(2 theta). The zz term
  // is invariant under the collective rotation, so only the sinusoid moves.
  const double p = 0.5 * (spec.epsilon[0] * a1 + spec.epsilon[1] * a2);
  const double q = 0.5 * (spec.epsilon[0] * cxy + spec.epsilon[1] * cyx);
  const double base = 0.5 + delta * czz;
  const double r = std::hypot(p, q);

  StationaryPoint out;
  if (r < 1e-14) {
    out.theta = {0.0};
    out.feedback_energy = base;
    out.gradient_norm = 0.0;
    out.classification = Classification::degenerate;
    return out;
  }
  const double phi = std::atan2(q, -p);
  const double theta = wrap_angle(phi / 2.0);
  out.theta = {theta};
  out.feedback_energy = base - r;
  out.gradient_norm = std::abs(-2.0 * p * std::sin(2.0 * theta) - 2.0 * q * std::cos(2.0 * theta));
  out.classification = Classification::minimum;
  return out;
}

}  // namespace qme::opt
