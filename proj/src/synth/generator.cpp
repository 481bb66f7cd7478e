#include "ramanmix/synth/generator.hpp"

#include <cmath>
#include <numbers>

#include "ramanmix/core/error.hpp"

namespace ramanmix::synth {

double evaluate_peak(const Peak& p, double x) {
  const double z = (x - p.center) / p.width;
  return p.height * std::exp(-0.5 * z * z);
}

Peak sample_peak(std::size_t bands, bool minor, Rng& rng) {
  // Beta(1, 3) by inverse CDF: F(x) = 1 - (1 - x)^3.
  const double h_beta = 1.0 - std::cbrt(1.0 - rng.uniform());
  const double h1 = minor ? 1.0 / 3.0 : 1.0 + 5.0 * h_beta;
  const double h2 = rng.uniform(0.1, 1.0);
  const double center = rng.uniform(10.0, static_cast<double>(bands) - 10.0);
  const double sigma = rng.uniform(0.1, 1.0);
  const double w = minor ? 2.0 : 1.0;
  return Peak{h1 * h2, center, w * sigma};
}

std::size_t sample_major_peak_count(Rng& rng) { return static_cast<std::size_t>(rng.uniform_int(5, 9)); }

void validate(const EndmemberSpec& spec) {
  if (spec.n < 1) throw ConfigError("endmembers.n must be >= 1");
  if (spec.b < 20) throw ConfigError("endmembers.b must be >= 20");
}

void validate(const SceneSpec& spec) {
  if (spec.height < 1 || spec.width < 1) throw ConfigError("scene dimensions must be >= 1");
  if (spec.n < 1) throw ConfigError("scene.n must be >= 1");
  if (spec.kind == SceneKind::Chessboard) {
    if (spec.patches_per_side < 1) throw ConfigError("scene.patches_per_side must be >= 1");
    if (spec.height % spec.patches_per_side != 0 || spec.width % spec.patches_per_side != 0) {
      throw ConfigError("chessboard scene " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                        " is not divisible into " + std::to_string(spec.patches_per_side) + " patches per side");
    }
  }
}

void validate(const ArtifactConfig& cfg) {
  if (!(cfg.sigma_noise >= 0.0)) throw ConfigError("artifacts.sigma_noise must be >= 0");
  if (!(cfg.p_baseline >= 0.0 && cfg.p_baseline <= 1.0)) throw ConfigError("artifacts.p_baseline must be in [0,1]");
  if (!(cfg.p_spike >= 0.0 && cfg.p_spike <= 1.0)) throw ConfigError("artifacts.p_spike must be in [0,1]");
  if (!std::isfinite(cfg.h_baseline) || !std::isfinite(cfg.h_spike)) throw ConfigError("artifact heights must be finite");
}

void validate(const DatasetSpec& spec) {
  validate(spec.endmembers);
  validate(spec.scene);
  if (spec.artifacts) validate(*spec.artifacts);
  if (spec.scene.n != spec.endmembers.n) {
    throw ConfigError("scene.n (" + std::to_string(spec.scene.n) + ") must equal endmembers.n (" +
                      std::to_string(spec.endmembers.n) + ")");
  }
}

EndmemberMatrix generate_endmembers(const EndmemberSpec& spec, Rng& rng, Rng& minor_rng, PeakRecord* record) {
  validate(spec);
  if (record) {
    record->major.assign(spec.n, {});
    record->minor.assign(spec.n, {});
  }
  const auto b = static_cast<Eigen::Index>(spec.b);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b, static_cast<Eigen::Index>(spec.n));
  auto add_peak = [&](Eigen::Index col, const Peak& p) {
    for (Eigen::Index j = 0; j < b; ++j) m(j, col) += evaluate_peak(p, static_cast<double>(j));
  };
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const auto count = sample_major_peak_count(rng);
    for (std::size_t k = 0; k < count; ++k) {
      const Peak p = sample_peak(spec.b, false, rng);
      add_peak(i, p);
      if (record) record->major[static_cast<std::size_t>(i)].push_back(p);
    }
  }
  if (spec.style == EndmemberStyle::Noisy) {
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      const auto count = static_cast<std::size_t>(minor_rng.uniform_int(50, 99));
      for (std::size_t k = 0; k < count; ++k) {
        const Peak p = sample_peak(spec.b, true, minor_rng);
        add_peak(i, p);
        if (record) record->minor[static_cast<std::size_t>(i)].push_back(p);
      }
    }
  }
  return EndmemberMatrix(std::move(m), SpectralAxis::band_indices(spec.b));
}

EndmemberMatrix generate_endmembers(const EndmemberSpec& spec, Rng& rng) {
  Rng minor = Rng::stream(rng.key(), "minor_peaks");
  return generate_endmembers(spec, rng, minor);
}

AbundanceMatrix generate_scene(const SceneSpec& spec, Rng& rng) {
  validate(spec);
  const auto h = spec.height;
  const auto w = spec.width;
  const auto n = static_cast<Eigen::Index>(spec.n);
  RowMatrix a = RowMatrix::Zero(static_cast<Eigen::Index>(h * w), n);

  switch (spec.kind) {
    case SceneKind::Chessboard: {
      const auto pps = spec.patches_per_side;
      std::vector<Eigen::Index> label(pps * pps);
      for (auto& l : label) l = rng.uniform_int(0, n - 1);
      const auto ph = h / pps;
      const auto pw = w / pps;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          a(static_cast<Eigen::Index>(r * w + c), label[(r / ph) * pps + c / pw]) = 1.0;
      break;
    }
    case SceneKind::Gaussian: {
      // Bump k sits at ((k + 0.5) H / n, (k + 0.5) W / n) with std H / (2n).
      // Rows are normalized in log space so far-away pixels do not underflow.
      const double nd = static_cast<double>(spec.n);
      const double s = static_cast<double>(h) / (2.0 * nd);
      std::vector<double> logit(spec.n);
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const double y = static_cast<double>(r) + 0.5;
          const double x = static_cast<double>(c) + 0.5;
          double mx = -INFINITY;
          for (std::size_t k = 0; k < spec.n; ++k) {
            const double cy = (static_cast<double>(k) + 0.5) * static_cast<double>(h) / nd;
            const double cx = (static_cast<double>(k) + 0.5) * static_cast<double>(w) / nd;
            logit[k] = -((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2.0 * s * s);
            mx = std::max(mx, logit[k]);
          }
          double total = 0.0;
          for (auto& v : logit) total += (v = std::exp(v - mx));
          for (std::size_t k = 0; k < spec.n; ++k)
            a(static_cast<Eigen::Index>(r * w + c), static_cast<Eigen::Index>(k)) = logit[k] / total;
        }
      }
      break;
    }
    case SceneKind::Dirichlet: {
      // Dirichlet(1, ..., 1) as normalized Exp(1) draws.
      for (Eigen::Index p = 0; p < a.rows(); ++p) {
        double total = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) total += (a(p, k) = rng.exponential());
        a.row(p) /= total;
      }
      break;
    }
  }
  return AbundanceMatrix(std::move(a), true);
}

SpectralDataset mix(const EndmemberMatrix& m, const AbundanceMatrix& a, MixtureModel model) {
  if (m.count() != a.count()) {
    throw ConfigError("mix: endmember count " + std::to_string(m.count()) + " does not match abundance columns " +
                      std::to_string(a.count()));
  }
  const Eigen::MatrixXd& sig = m.signatures();
  RowMatrix x = a.values() * sig.transpose();
  if (model == MixtureModel::BilinearFan) {
    // sum_{k != l} a_k m_k * a_l m_l = (M a) * (M a) - sum_k a_k^2 m_k * m_k
    const RowMatrix a2 = a.values().array().square();
    const Eigen::MatrixXd sig2 = sig.array().square();
    RowMatrix inter = x.array().square().matrix() - a2 * sig2.transpose();
    // Exact arithmetic gives inter >= 0; rounding can leave -1e-16 residue.
    x += inter.cwiseMax(0.0);
  }
  SpectralDataset d;
  d.axis = m.axis();
  d.intensities = std::move(x);
  return d;
}

Eigen::VectorXd baseline_signal(std::size_t bands, double height) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(bands));
  const double b = static_cast<double>(bands);
  for (std::size_t j = 1; j <= bands; ++j)
    v(static_cast<Eigen::Index>(j - 1)) = height * std::atan(std::numbers::pi * static_cast<double>(j) / b);
  return v;
}

SpectralDataset add_artifacts(const SpectralDataset& d, const ArtifactConfig& cfg, Rng& rng, ArtifactRecord* record) {
  validate(cfg);
  SpectralDataset out = d;
  const auto bands = static_cast<Eigen::Index>(d.bands());
  const Eigen::VectorXd baseline = baseline_signal(d.bands(), cfg.h_baseline);
  if (record) {
    record->baseline.assign(d.size(), false);
    record->spike.assign(d.size(), false);
  }
  // Per spectrum the draw order is: b noise variates, baseline coin, spike
  // coin, then (if spiking) band and intensity.
  for (Eigen::Index i = 0; i < out.intensities.rows(); ++i) {
    auto row = out.intensities.row(i);
    if (cfg.sigma_noise > 0.0) {
      for (Eigen::Index j = 0; j < bands; ++j) row(j) += cfg.sigma_noise * rng.normal();
    }
    const bool has_baseline = rng.bernoulli(cfg.p_baseline);
    const bool has_spike = rng.bernoulli(cfg.p_spike);
    if (has_baseline) row += baseline.transpose();
    if (has_spike && bands >= 4) {
      // b_S ~ U{2, b-2} counted from 1, i.e. 0-based indices 1..b-3.
      const auto band = rng.uniform_int(2, bands - 2) - 1;
      row(band) += cfg.h_spike * rng.uniform(0.75, 1.25);
    }
    if (record) {
      record->baseline[static_cast<std::size_t>(i)] = has_baseline;
      record->spike[static_cast<std::size_t>(i)] = has_spike;
    }
  }
  return out;
}

std::pair<SpectralDataset, GroundTruth> generate_dataset(const DatasetSpec& spec) {
  validate(spec);
  Rng em_rng = Rng::stream(spec.seed, "endmembers");
  Rng minor_rng = Rng::stream(spec.seed, "minor_peaks");
  Rng scene_rng = Rng::stream(spec.seed, "scene");
  Rng artifact_rng = Rng::stream(spec.seed, "artifacts");

  GroundTruth gt;
  gt.endmembers = generate_endmembers(spec.endmembers, em_rng, minor_rng);
  gt.abundances = generate_scene(spec.scene, scene_rng);
  gt.mixture_model = spec.model;
  gt.shape = {spec.scene.height, spec.scene.width};

  SpectralDataset d = mix(gt.endmembers, gt.abundances, spec.model);
  if (spec.artifacts) d = add_artifacts(d, *spec.artifacts, artifact_rng);
  d.shape = gt.shape;
  return {std::move(d), std::move(gt)};
}

std::string to_string(EndmemberStyle s) { return s == EndmemberStyle::Clean ? "clean" : "noisy"; }

std::string to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Chessboard: return "chessboard";
    case SceneKind::Gaussian: return "gaussian";
    case SceneKind::Dirichlet: return "dirichlet";
  }
  return "?";
}

EndmemberStyle endmember_style_from_string(const std::string& s) {
  if (s == "clean") return EndmemberStyle::Clean;
  if (s == "noisy") return EndmemberStyle::Noisy;
  throw ConfigError("unknown endmember style '" + s + "'");
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "chessboard") return SceneKind::Chessboard;
  if (s == "gaussian") return SceneKind::Gaussian;
  if (s == "dirichlet") return SceneKind::Dirichlet;
  throw ConfigError("unknown scene kind '" + s + "'");
}

}  // namespace ramanmix::synth
