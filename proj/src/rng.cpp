#include "ruc/rng.hpp"

#include "ruc/types.hpp"

#include <cmath>

namespace ruc {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

double sample_symmetric_beta(double a, Rng& rng) {
  std::gamma_distribution<double> gamma(a, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  if (x + y <= 0.0) return 0.5;
  return x / (x + y);
}

bool is_prob_vector(const ProbVector& p, double tol) {
  if (p.size() == 0) return false;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) return false;
    sum += p[i];
  }
  return std::abs(sum - 1.0) <= tol;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

ProbVector onehot(int cls, int classes) {
  ProbVector p = ProbVector::Zero(classes);
  p[cls] = 1.0;
  return p;
}

}  // namespace ruc
