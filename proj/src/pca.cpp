#include "flowcast/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flowcast/kernels.hpp"
#include "json.hpp"

namespace flowcast {

void jacobi_eigh(const Tensor& sym, std::vector<double>& eigenvalues, Tensor& eigenvectors) {
  if (sym.rank() != 2 || sym.dim(0) != sym.dim(1))
    throw std::invalid_argument("jacobi_eigh: matrix must be square");
  const int64_t d = sym.dim(0);
  Tensor a = sym;
  Tensor v({d, d});
  for (int64_t i = 0; i < d; ++i) v(i, i) = 1.0;

  // Cyclic-by-row Jacobi. Fixed sweep order keeps the routine deterministic.
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-26 * static_cast<double>(d * d)) break;

    for (int64_t p = 0; p < d; ++p) {
      for (int64_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int64_t k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  eigenvalues.assign(static_cast<size_t>(d), 0.0);
  for (int64_t i = 0; i < d; ++i) eigenvalues[static_cast<size_t>(i)] = a(i, i);
  // Sort ascending with index-stable tie-breaking, permuting columns of v.
  std::vector<int64_t> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t x, int64_t y) {
    return eigenvalues[static_cast<size_t>(x)] < eigenvalues[static_cast<size_t>(y)];
  });
  std::vector<double> ev_sorted(static_cast<size_t>(d));
  eigenvectors = Tensor({d, d});
  for (int64_t k = 0; k < d; ++k) {
    ev_sorted[static_cast<size_t>(k)] = eigenvalues[static_cast<size_t>(order[static_cast<size_t>(k)])];
    for (int64_t i = 0; i < d; ++i) eigenvectors(i, k) = v(i, order[static_cast<size_t>(k)]);
  }
  eigenvalues = std::move(ev_sorted);
}

PCAModel fit_pca(const Tensor& embeddings, double variance_target) {
  if (embeddings.rank() != 2) throw std::invalid_argument("fit_pca: need an [m x d] matrix");
  const int64_t m = embeddings.dim(0), d = embeddings.dim(1);
  if (m < 2) throw std::invalid_argument("fit_pca: need at least 2 rows");
  if (!(variance_target > 0.0 && variance_target <= 1.0))
    throw std::invalid_argument("fit_pca: variance_target must be in (0, 1]");
  if (!embeddings.all_finite()) throw std::invalid_argument("fit_pca: non-finite input");

  PCAModel model;
  model.d_input = d;
  model.variance_target = variance_target;
  model.mean.assign(static_cast<size_t>(d), 0.0);
  for (int64_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += embeddings(i, j);
    model.mean[static_cast<size_t>(j)] = s / static_cast<double>(m);
  }

  Tensor centered({m, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j)
      centered(i, j) = embeddings(i, j) - model.mean[static_cast<size_t>(j)];

  Tensor cov({d, d});
  kern::matmul_tn_acc(centered.data(), centered.data(), cov.data(), d, m, d);
  const double inv = 1.0 / static_cast<double>(m - 1);
  for (int64_t i = 0; i < cov.numel(); ++i) cov(i) *= inv;

  std::vector<double> evals;
  Tensor evecs;
  jacobi_eigh(cov, evals, evecs);

  // Descending order; clamp numerically-zero variances to exactly zero.
  std::vector<double> lam(static_cast<size_t>(d));
  for (int64_t k = 0; k < d; ++k) lam[static_cast<size_t>(k)] = evals[static_cast<size_t>(d - 1 - k)];
  const double lmax = lam.empty() ? 0.0 : std::max(0.0, lam[0]);
  double total = 0.0;
  for (auto& l : lam) {
    if (l < lmax * 1e-12 || l <= 0.0) l = 0.0;
    total += l;
  }

  if (total <= 0.0) {
    model.zero_variance_warning = true;
    model.d_reduced = 1;
    model.components = Tensor({1, d});
    for (int64_t j = 0; j < d; ++j) model.components(0, j) = evecs(j, d - 1);
    model.explained_variance_ratio = {0.0};
  } else {
    int64_t rank = 0;
    for (const double l : lam)
      if (l > 0.0) ++rank;
    int64_t keep = 0;
    double cum = 0.0;
    for (int64_t k = 0; k < rank; ++k) {
      cum += lam[static_cast<size_t>(k)];
      keep = k + 1;
      if (cum >= variance_target * total - 1e-15 * total) break;
    }
    if (keep < 1) keep = 1;
    model.d_reduced = keep;
    model.components = Tensor({keep, d});
    model.explained_variance_ratio.assign(static_cast<size_t>(keep), 0.0);
    for (int64_t k = 0; k < keep; ++k) {
      for (int64_t j = 0; j < d; ++j) model.components(k, j) = evecs(j, d - 1 - k);
      model.explained_variance_ratio[static_cast<size_t>(k)] = lam[static_cast<size_t>(k)] / total;
    }
  }

  // Sign convention: largest-magnitude coordinate positive (first such index
  // on ties), so refits of identical input are bit-identical.
  for (int64_t k = 0; k < model.d_reduced; ++k) {
    int64_t jmax = 0;
    double best = -1.0;
    for (int64_t j = 0; j < d; ++j) {
      const double mag = std::fabs(model.components(k, j));
      if (mag > best) {
        best = mag;
        jmax = j;
      }
    }
    if (model.components(k, jmax) < 0.0)
      for (int64_t j = 0; j < d; ++j) model.components(k, j) = -model.components(k, j);
  }
  return model;
}

std::vector<double> PCAModel::transform(const std::vector<double>& v) const {
  if (static_cast<int64_t>(v.size()) != d_input)
    throw std::invalid_argument("PCAModel::transform: dimension mismatch (" +
                                std::to_string(v.size()) + " vs " + std::to_string(d_input) + ")");
  std::vector<double> out(static_cast<size_t>(d_reduced), 0.0);
  for (int64_t k = 0; k < d_reduced; ++k) {
    double s = 0.0;
    for (int64_t j = 0; j < d_input; ++j)
      s += components(k, j) * (v[static_cast<size_t>(j)] - mean[static_cast<size_t>(j)]);
    out[static_cast<size_t>(k)] = s;
  }
  return out;
}

std::string PCAModel::to_json() const {
  nlohmann::json j;
  j["mean"] = mean;
  j["ratios"] = explained_variance_ratio;
  j["dim"] = d_reduced;
  j["input_dim"] = d_input;
  j["variance_target"] = variance_target;
  j["zero_variance_warning"] = zero_variance_warning;
  std::vector<std::vector<double>> rows;
  for (int64_t k = 0; k < d_reduced; ++k)
    rows.emplace_back(components.data() + k * d_input, components.data() + (k + 1) * d_input);
  j["components"] = rows;
  return j.dump(2);
}

PCAModel PCAModel::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  PCAModel m;
  m.mean = j.at("mean").get<std::vector<double>>();
  m.explained_variance_ratio = j.at("ratios").get<std::vector<double>>();
  m.d_reduced = j.at("dim").get<int64_t>();
  m.d_input = j.at("input_dim").get<int64_t>();
  m.variance_target = j.value("variance_target", 0.95);
  m.zero_variance_warning = j.value("zero_variance_warning", false);
  const auto rows = j.at("components").get<std::vector<std::vector<double>>>();
  m.components = Tensor({m.d_reduced, m.d_input});
  for (int64_t k = 0; k < m.d_reduced; ++k)
    for (int64_t jj = 0; jj < m.d_input; ++jj)
      m.components(k, jj) = rows[static_cast<size_t>(k)][static_cast<size_t>(jj)];
  return m;
}

void PCAModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write PCA model to " + path);
  out << to_json() << "\n";
}

PCAModel PCAModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read PCA model from " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace flowcast
