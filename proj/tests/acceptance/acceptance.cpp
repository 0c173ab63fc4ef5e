// Acceptance report: one PASS / FAIL / SKIP line per criterion, always exit 0.
//
// Environment:
//   MHDM_DATA_DIR        directory with cameraman/barbara/texture/geometry.pgm
//   MHDM_ACCEPT_SEEDS    noise seeds per image-level check (default 5)
//   MHDM_ACCEPT_ONLY     comma-separated criterion numbers to run (default all)
//   MHDM_THREADS         worker threads for independent runs (default: hardware)
//   MHDM_ACCEPT_REPORT   copy of the report (default acceptance_report.txt in the
//                        working directory; ctest hides output of passing tests)

#include <algorithm>
#include <atomic>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../tv1d_oracle.hpp"
#include "mhdm.hpp"

using namespace mhdm;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Skip;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  return std::max(1, std::atoi(v));
}

std::set<int> selected_criteria() {
  std::set<int> out;
  const char* v = std::getenv("MHDM_ACCEPT_ONLY");
  if (!v || !*v) {
    for (int i = 1; i <= 12; ++i) out.insert(i);
    return out;
  }
  std::stringstream ss(v);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) out.insert(std::atoi(tok.c_str()));
  }
  return out;
}

std::string data_dir() {
  if (const char* v = std::getenv("MHDM_DATA_DIR")) return v;
#ifdef MHDM_DATA_DIR
  return MHDM_DATA_DIR;
#else
  return "data";
#endif
}

std::optional<ImageGrid> load_image(const std::string& name) {
  const std::string path = data_dir() + "/" + name + ".pgm";
  if (!std::filesystem::exists(path)) return std::nullopt;
  return io::read_pgm(path).pixels;
}

ImageGrid center_crop(const ImageGrid& img, std::size_t n) {
  const std::size_t top = (img.height() - n) / 2, left = (img.width() - n) / 2;
  ImageGrid out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) out(r, c) = img(top + r, left + c);
  }
  return out;
}

// Runs independent jobs on up to MHDM_THREADS threads; results keep job order.
template <class R>
std::vector<R> parallel_map(const std::vector<std::function<R()>>& jobs) {
  std::vector<R> out(jobs.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n = std::min<unsigned>(static_cast<unsigned>(env_int("MHDM_THREADS", static_cast<int>(hw))),
                                        static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) out[i] = jobs[i]();
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return out;
}

// ---- image-level pipeline with memoization across criteria ----

struct Setup {
  std::string label;
  Model model = Model::SO;
  Variant variant = Variant::Regular;
  SolverKind solver = SolverKind::EL;
  int num_scales = 15;
};

struct PipelineResult {
  bool ok = false;
  std::string error;
  int k_min = 0, k_star = 0;
  double rmse_kmin = 0.0, snr_kmin = 0.0, snr_kstar = 0.0;
  bool k_star_flagged = false;
  int last_scale = 0;
  double seconds = 0.0;
};

std::string key_of(const std::string& image, const Setup& s, double a, std::uint64_t seed, bool blur) {
  return fmt("%s|%s|%s|%s|%d|%g|%llu|%d", image.c_str(), to_string(s.model), to_string(s.variant), to_string(s.solver),
             s.num_scales, a, static_cast<unsigned long long>(seed), blur ? 1 : 0);
}

std::mutex cache_mutex;
std::map<std::string, PipelineResult> cache;

PipelineResult pipeline(const std::string& image, const ImageGrid& z, const Setup& s, double a, std::uint64_t seed,
                        bool blur) {
  const std::string key = key_of(image, s, a, seed, blur);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  PipelineResult out;
  const auto t0 = Clock::now();
  try {
    const ShiftPolicy shift;
    const BlurOperator T = blur ? gaussian_kernel(5, 2.0) : BlurOperator{};
    const ImageGrid zs = shift.forward(z);
    const ImageGrid f = degrade(zs, T, GammaNoiseSpec{a, seed});
    ModelConfig c;
    c.model = s.model;
    c.variant = s.variant;
    c.solver = s.solver;
    c.num_scales = s.num_scales;
    const MultiscaleResult r = run(f, T, c, zs, shift.amount);
    const NoiseLevel noise = noise_level(residual_kind(c.model), f, apply(T, zs), c.tau);
    const StoppingIndex stop = stopping_index(r, noise, stopping_mode(c.variant));
    out.k_min = *r.k_min;
    out.rmse_kmin = r.rmse[static_cast<std::size_t>(out.k_min)];
    out.snr_kmin = r.snr[static_cast<std::size_t>(out.k_min)];
    out.k_star = stop.k;
    out.snr_kstar = r.snr[static_cast<std::size_t>(stop.k)];
    out.k_star_flagged = stop.not_yet_discrepant || stop.none_above;
    out.last_scale = c.num_scales;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(t0);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache[key] = out;
  return out;
}

std::vector<std::uint64_t> seeds() {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < env_int("MHDM_ACCEPT_SEEDS", 5); ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

struct SeedSummary {
  bool ok = true;
  std::string error;
  double mean_snr = 0.0, mean_rmse = 0.0;
  std::vector<int> k_mins;
  std::string per_seed;
  double seconds = 0.0;
};

SeedSummary over_seeds(const std::string& image, const ImageGrid& z, const Setup& s, double a, bool blur) {
  std::vector<std::function<PipelineResult()>> jobs;
  for (std::uint64_t seed : seeds()) jobs.push_back([=, &z] { return pipeline(image, z, s, a, seed, blur); });
  const std::vector<PipelineResult> rs = parallel_map(jobs);
  SeedSummary out;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const PipelineResult& r = rs[i];
    out.seconds = std::max(out.seconds, r.seconds);
    if (!r.ok) {
      out.ok = false;
      out.error = r.error;
      continue;
    }
    out.mean_snr += r.snr_kmin / static_cast<double>(rs.size());
    out.mean_rmse += r.rmse_kmin / static_cast<double>(rs.size());
    out.k_mins.push_back(r.k_min);
    out.per_seed += fmt("%s[seed %zu: k_min %d, RMSE %.2f, SNR %.2f]", out.per_seed.empty() ? "" : " ", i, r.k_min,
                        r.rmse_kmin, r.snr_kmin);
  }
  return out;
}

bool all_within(const std::vector<int>& ks, int target, int tol) {
  return std::all_of(ks.begin(), ks.end(), [&](int k) { return std::abs(k - target) <= tol; });
}

Outcome missing(const std::string& what) { return Outcome{Status::Skip, "missing image data: " + what}; }

// ---- criteria ----

Outcome c1_gamma_sampler() {
  const auto t0 = Clock::now();
  GammaSampler g(25.0, 12345);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  const double t = seconds_since(t0);
  const bool ok = std::abs(mean - 1.0) <= 1e-3 && std::abs(sd - 0.2) <= 2e-3 && t < 5.0;
  return {ok ? Status::Pass : Status::Fail, fmt("mean %.5f, std %.5f over 1e6 draws, %.2f s", mean, sd, t)};
}

Outcome c2_adjoint() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> k(9);
  double total = 0.0;
  for (double& v : k) total += (v = std::abs(U(rng)) + 0.05);
  for (double& v : k) v /= total;
  const BlurOperator ops[] = {gaussian_kernel(5, 2.0), BlurOperator(3, k)};
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    ImageGrid u(32, 32), v(32, 32);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = U(rng);
      v[i] = U(rng);
    }
    const BlurOperator& T = ops[pair % 2];
    const double lhs = inner(apply(T, u), v), rhs = inner(u, apply_adjoint(T, v));
    worst = std::max(worst, std::abs(lhs - rhs) / (norm(u) * norm(v)));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-10 && t < 5.0 ? Status::Pass : Status::Fail,
          fmt("worst relative defect %.2e over 100 pairs (Gaussian 5x5 and asymmetric 3x3), %.2f s", worst, t)};
}

struct ModelCase {
  Model model;
  Variant variant;
  SolverKind solver;
};

const std::vector<ModelCase>& all_model_cases() {
  static const std::vector<ModelCase> cases = {
      {Model::SO, Variant::Regular, SolverKind::EL},      {Model::SO, Variant::Tight, SolverKind::EL},
      {Model::SO, Variant::Refined, SolverKind::EL},      {Model::SO, Variant::Regular, SolverKind::ADMM},
      {Model::SO, Variant::Tight, SolverKind::ADMM},      {Model::AA, Variant::Regular, SolverKind::EL},
      {Model::AAlog, Variant::Regular, SolverKind::EL},   {Model::AAlog, Variant::Tight, SolverKind::EL},
      {Model::AAlog, Variant::Refined, SolverKind::EL},   {Model::TNVlog, Variant::Regular, SolverKind::EL},
      {Model::TNVlog, Variant::Tight, SolverKind::EL},    {Model::TNV, Variant::Regular, SolverKind::EL}};
  return cases;
}

std::string case_name(const ModelCase& c) {
  std::string s = std::string(to_string(c.model)) + "/" + to_string(c.variant);
  if (c.model == Model::SO) s += std::string("/") + to_string(c.solver);
  return s;
}

const char* kImages[] = {"cameraman", "barbara", "texture", "geometry"};

Outcome c3_residual_monotonicity() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, ImageGrid>> crops;
  for (const char* name : kImages) {
    if (auto img = load_image(name)) crops.emplace_back(name, center_crop(*img, 64));
  }
  if (crops.size() < 4) return missing("need all four test images");
  struct Row {
    std::string what;
    double worst_rise = 0.0;
    int tight_rises = 0;
    std::string error;
  };
  std::vector<std::function<Row()>> jobs;
  for (const auto& crop : crops) {
    for (const ModelCase& mc : all_model_cases()) {
      jobs.push_back([&crop, mc] {
        const auto& [name, z] = crop;
        Row row;
        row.what = name + ":" + case_name(mc);
        try {
          const ImageGrid zs = z + 1.0;
          const ImageGrid f = degrade(zs, BlurOperator{}, GammaNoiseSpec{25.0, 0});
          ModelConfig c;
          c.model = mc.model;
          c.variant = mc.variant;
          c.solver = mc.solver;
          c.num_scales = 10;
          const MultiscaleResult r = run(f, BlurOperator{}, c);
          for (std::size_t k = 1; k < r.residuals.size(); ++k) {
            row.worst_rise = std::max(row.worst_rise, r.residuals[k] - r.residuals[k - 1]);
            if (r.tight_residuals[k] > r.tight_residuals[k - 1] + 1e-6) ++row.tight_rises;
          }
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        return row;
      });
    }
  }
  const std::vector<Row> rows = parallel_map(jobs);
  int failures = 0;
  std::string detail;
  double worst = 0.0;
  for (const Row& r : rows) {
    worst = std::max(worst, r.worst_rise);
    if (!r.error.empty() || r.worst_rise > 1e-6) {
      ++failures;
      detail += fmt(" [%s: %s]", r.what.c_str(), r.error.empty() ? fmt("rise %.3e", r.worst_rise).c_str() : r.error.c_str());
    }
  }
  const double t = seconds_since(t0);
  return {failures == 0 && t < 600.0 ? Status::Pass : Status::Fail,
          fmt("%zu runs (64x64 crops, k <= 10), %d violate, largest rise %.2e, %.0f s", rows.size(), failures, worst, t) +
              detail};
}

ImageGrid piecewise_constant_64() {
  ImageGrid z(64, 64, 40.0);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      if (r >= 10 && r < 34 && c >= 8 && c < 40) z(r, c) = 180.0;
      const double dr = static_cast<double>(r) - 44.0, dc = static_cast<double>(c) - 42.0;
      if (dr * dr + dc * dc < 225.0) z(r, c) = 110.0;
      if (r >= 50 && c < 20) z(r, c) = 230.0;
    }
  }
  return z;
}

Outcome c4_estimate_bound() {
  const auto t0 = Clock::now();
  const ImageGrid zs = piecewise_constant_64() + 1.0;
  const ImageGrid f = degrade(zs, BlurOperator{}, GammaNoiseSpec{25.0, 0});
  const double jz = tv_log(zs, 0.0);
  const std::vector<ModelCase> cases = {{Model::SO, Variant::Regular, SolverKind::EL},
                                        {Model::SO, Variant::Regular, SolverKind::ADMM},
                                        {Model::AAlog, Variant::Regular, SolverKind::EL},
                                        {Model::TNVlog, Variant::Regular, SolverKind::EL}};
  struct Row {
    std::string what;
    double worst_excess = -INFINITY;
    int worst_k = 0;
    std::string error;
  };
  std::vector<std::function<Row()>> jobs;
  for (const ModelCase& mc : cases) {
    jobs.push_back([&, mc] {
      Row row;
      row.what = case_name(mc);
      try {
        ModelConfig c;
        c.model = mc.model;
        c.variant = mc.variant;
        c.solver = mc.solver;
        c.num_scales = 12;
        const MultiscaleResult r = run(f, BlurOperator{}, c);
        const double d2 = noise_level(residual_kind(c.model), f, zs).delta_sq;
        for (std::size_t k = 0; k < r.residuals.size(); ++k) {
          const double excess = r.residuals[k] - (d2 + 2.0 * jz / ((k + 1.0) * c.lambda0));
          if (excess > row.worst_excess) {
            row.worst_excess = excess;
            row.worst_k = static_cast<int>(k);
          }
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      return row;
    });
  }
  const std::vector<Row> rows = parallel_map(jobs);
  bool ok = true;
  std::string detail;
  for (const Row& r : rows) {
    const bool pass = r.error.empty() && r.worst_excess <= 1e-6;
    ok = ok && pass;
    detail += r.error.empty() ? fmt(" [%s: max(H - bound) %.3e at k=%d]", r.what.c_str(), r.worst_excess, r.worst_k)
                              : fmt(" [%s: %s]", r.what.c_str(), r.error.c_str());
  }
  return {ok ? Status::Pass : Status::Fail,
          fmt("64x64 piecewise constant, tv_log(z) = %.4f, k <= 12, %.0f s", jz, seconds_since(t0)) + detail};
}

Outcome c5_log_exp_equivalence() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, ImageGrid>> inst;
  for (const char* name : kImages) {
    if (auto img = load_image(name)) inst.emplace_back(name, center_crop(*img, 32));
  }
  if (inst.empty()) return missing("no test images for the 32x32 instances");
  struct Row {
    std::string what;
    double worst = 0.0;
    int worst_k = 0;
    std::string error;
  };
  std::vector<std::function<Row()>> jobs;
  for (const auto& item : inst) {
    jobs.push_back([&item] {
      const auto& [name, z] = item;
      Row row;
      row.what = name;
      try {
        const ImageGrid f = degrade(z + 1.0, BlurOperator{}, GammaNoiseSpec{25.0, 0});
        ModelConfig c;
        c.num_scales = 10;
        c.solver_params.max_iters = 5000;
        c.model = Model::SO;
        const MultiscaleResult so = run(f, BlurOperator{}, c);
        c.model = Model::AAlog;
        const MultiscaleResult al = run(f, BlurOperator{}, c);
        for (std::size_t k = 0; k < so.cumulative.size(); ++k) {
          // Both models are scale invariant, so compare relative to the image level.
          const double d = rms(so.cumulative[k] - al.cumulative[k]) / rms(al.cumulative[k]);
          if (d > row.worst) {
            row.worst = d;
            row.worst_k = static_cast<int>(k);
          }
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      return row;
    });
  }
  const std::vector<Row> rows = parallel_map(jobs);
  bool ok = true;
  std::string detail;
  for (const Row& r : rows) {
    ok = ok && r.error.empty() && r.worst <= 1e-2;
    detail += r.error.empty() ? fmt(" [%s: %.4f at k=%d]", r.what.c_str(), r.worst, r.worst_k)
                              : fmt(" [%s: %s]", r.what.c_str(), r.error.c_str());
  }
  return {ok ? Status::Pass : Status::Fail,
          fmt("relative RMS of e^{y_k} - x_k over k <= 10, 5000 iterations per scale, %.0f s", seconds_since(t0)) + detail};
}

const Setup kSoEl{"so/regular/el", Model::SO, Variant::Regular, SolverKind::EL, 15};

Outcome c6_so_cameraman() {
  const auto z = load_image("cameraman");
  if (!z) return missing("cameraman");
  const SeedSummary s = over_seeds("cameraman", *z, kSoEl, 25.0, false);
  if (!s.ok) return {Status::Fail, "run failed: " + s.error};
  const bool ok = all_within(s.k_mins, 9, 1) && s.mean_rmse >= 10.2 && s.mean_rmse <= 11.6 &&
                  std::abs(s.mean_snr - 21.9) <= 0.5 && s.seconds < 900.0;
  return {ok ? Status::Pass : Status::Fail,
          fmt("mean RMSE %.3f (want [10.2, 11.6]), mean SNR %.2f dB (want 21.9 +- 0.5), k_min within 9 +- 1: %s, "
              "slowest run %.0f s; ",
              s.mean_rmse, s.mean_snr, all_within(s.k_mins, 9, 1) ? "yes" : "no", s.seconds) +
              s.per_seed};
}

Setup setup_of(const ModelCase& mc) {
  // q = 3 for tight/refined grows the weights fast; k_min sits well below 10.
  return Setup{case_name(mc), mc.model, mc.variant, mc.solver, mc.variant == Variant::Regular ? 15 : 10};
}

Outcome c7_stopping_quality() {
  const auto z = load_image("cameraman");
  if (!z) return missing("cameraman");
  std::vector<ModelCase> cases;
  for (const ModelCase& mc : all_model_cases()) {
    if (mc.model == Model::TNV) continue;                                     // no k* reported for it
    if (mc.model == Model::TNVlog && mc.variant == Variant::Tight) continue;  // known outlier, excluded from this check
    cases.push_back(mc);
  }
  std::vector<std::function<PipelineResult()>> jobs;
  for (const ModelCase& mc : cases) jobs.push_back([&, mc] { return pipeline("cameraman", *z, setup_of(mc), 25.0, 0, false); });
  const std::vector<PipelineResult> rs = parallel_map(jobs);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const PipelineResult& r = rs[i];
    if (!r.ok) {
      ok = false;
      detail += fmt(" [%s: %s]", case_name(cases[i]).c_str(), r.error.c_str());
      continue;
    }
    const bool pass = std::abs(r.k_star - r.k_min) <= 1 && std::abs(r.snr_kstar - r.snr_kmin) <= 1.2;
    ok = ok && pass;
    detail += fmt(" [%s %s: k_min %d SNR %.2f, k* %d%s SNR %.2f]", pass ? "ok" : "FAIL", case_name(cases[i]).c_str(),
                  r.k_min, r.snr_kmin, r.k_star, r.k_star_flagged ? " (edge)" : "", r.snr_kstar);
  }
  return {ok ? Status::Pass : Status::Fail, "cameraman, a = 25, seed 0;" + detail};
}

struct SpotCheck {
  const char* image;
  Setup setup;
  double target, tol;
  bool blur;
  double a = 25.0;
};

Outcome spot_checks(const std::vector<SpotCheck>& checks) {
  bool ok = true;
  std::string detail;
  for (const SpotCheck& c : checks) {
    const auto z = load_image(c.image);
    if (!z) return missing(c.image);
    const SeedSummary s = over_seeds(c.image, *z, c.setup, c.a, c.blur);
    if (!s.ok) {
      ok = false;
      detail += fmt(" [%s %s: %s]", c.image, c.setup.label.c_str(), s.error.c_str());
      continue;
    }
    const bool pass = std::abs(s.mean_snr - c.target) <= c.tol;
    ok = ok && pass;
    detail += fmt(" [%s %s %s: mean SNR %.2f vs %.2f +- %.1f; %s]", pass ? "ok" : "FAIL", c.image, c.setup.label.c_str(),
                  s.mean_snr, c.target, c.tol, s.per_seed.c_str());
  }
  return {ok ? Status::Pass : Status::Fail, fmt("%zu seeds each;", seeds().size()) + detail};
}

Outcome c8_denoising_spots() {
  return spot_checks({
      {"barbara", setup_of({Model::SO, Variant::Refined, SolverKind::EL}), 19.88, 0.5, false},
      {"geometry", setup_of({Model::SO, Variant::Tight, SolverKind::ADMM}), 34.60, 0.5, false},
      {"cameraman", setup_of({Model::AA, Variant::Regular, SolverKind::EL}), 21.76, 0.5, false},
  });
}

Outcome c9_deblurring_spots() {
  return spot_checks({
      {"cameraman", setup_of({Model::AAlog, Variant::Tight, SolverKind::EL}), 19.07, 0.5, true},
      {"geometry", setup_of({Model::TNVlog, Variant::Regular, SolverKind::EL}), 24.17, 0.5, true},
  });
}

Outcome c10_high_noise() {
  struct Case {
    const char* image;
    Setup setup;
    double a, snr, snr_tol;
    int k_min;
  };
  const Case cases[] = {
      {"cameraman", setup_of({Model::SO, Variant::Tight, SolverKind::EL}), 10.0, 18.03, 0.7, 6},
      {"geometry", setup_of({Model::AAlog, Variant::Tight, SolverKind::EL}), 1.0, 20.22, 1.0, 4},
  };
  bool ok = true;
  std::string detail = fmt("%zu seeds each;", seeds().size());
  for (const Case& c : cases) {
    const auto z = load_image(c.image);
    if (!z) return missing(c.image);
    const SeedSummary s = over_seeds(c.image, *z, c.setup, c.a, false);
    if (!s.ok) {
      ok = false;
      detail += fmt(" [%s: %s]", c.image, s.error.c_str());
      continue;
    }
    const bool pass = std::abs(s.mean_snr - c.snr) <= c.snr_tol && all_within(s.k_mins, c.k_min, 1);
    ok = ok && pass;
    detail += fmt(" [%s %s %s a=%g: mean SNR %.2f vs %.2f +- %.1f, k_min vs %d +- 1; %s]", pass ? "ok" : "FAIL",
                  c.image, c.setup.label.c_str(), c.a, s.mean_snr, c.snr, c.snr_tol, c.k_min, s.per_seed.c_str());
  }
  return {ok ? Status::Pass : Status::Fail, detail};
}

Outcome c11_prox_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 4.0), K(0.2, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(16);
    for (double& x : v) x = U(rng);
    const double kappa = K(rng);
    const std::vector<double> expect = oracle::tv1d_taut_string(v, kappa);
    // The certified bound is on the RMS; 16 samples turn 1e-8 RMS into < 1e-7 sup.
    const ImageGrid psi = tv_prox(ImageGrid(16, 1, v), ProxParams{kappa, 2000000, 1e-8});
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(psi[i] - expect[i]));
  }
  return {worst <= 1e-6 ? Status::Pass : Status::Fail,
          fmt("worst sup-norm gap %.2e over 200 signals, %.2f s", worst, seconds_since(t0))};
}

Outcome c12_property_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-1.0, 1.0), P(0.2, 3.0);
  auto random_grid = [&](std::size_t w, std::size_t h, bool positive) {
    ImageGrid g(w, h);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = positive ? P(rng) : U(rng);
    return g;
  };
  auto at = [](const ImageGrid& g, long r, long c) {
    r = std::clamp<long>(r, 0, static_cast<long>(g.height()) - 1);
    c = std::clamp<long>(c, 0, static_cast<long>(g.width()) - 1);
    return g(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  std::vector<std::string> failed;
  int checks = 0;
  auto check = [&](bool cond, const std::string& what) {
    ++checks;
    if (!cond) failed.push_back(what);
  };

  // Stencils against direct loops with replicate boundaries.
  for (int t = 0; t < 20; ++t) {
    const ImageGrid u = random_grid(6, 5, true), d = random_grid(6, 5, true);
    const ImageGrid w = stencil_weight_d(u, 0.01, true), chi = stencil_chi(d, u), diag = stencil_diag(d);
    double err = 0.0;
    for (long r = 0; r < 5; ++r) {
      for (long c = 0; c < 6; ++c) {
        const double dx = at(u, r, c + 1) - at(u, r, c), dy = at(u, r + 1, c) - at(u, r, c);
        const double wd = 1.0 / (std::abs(at(u, r, c)) * std::sqrt(1e-4 + dx * dx + dy * dy));
        const double ch = at(d, r, c) * at(u, r + 1, c) + at(d, r - 1, c) * at(u, r - 1, c) +
                          at(d, r, c) * at(u, r, c + 1) + at(d, r, c - 1) * at(u, r, c - 1);
        const double dg = 2 * at(d, r, c) + at(d, r - 1, c) + at(d, r, c - 1);
        err = std::max({err, std::abs(w(r, c) - wd) / wd, std::abs(chi(r, c) - ch), std::abs(diag(r, c) - dg)});
      }
    }
    check(err < 1e-12, "stencil loop oracle");
  }
  {
    const ImageGrid u = random_grid(7, 6, false), v = random_grid(7, 6, false), d = random_grid(7, 6, true);
    const ImageGrid chi = stencil_chi(d, u), diag = stencil_diag(d);
    const ImageGrid ux = finite_difference(u, Axis::X, DiffScheme::Forward), uy = finite_difference(u, Axis::Y, DiffScheme::Forward);
    const ImageGrid vx = finite_difference(v, Axis::X, DiffScheme::Forward), vy = finite_difference(v, Axis::Y, DiffScheme::Forward);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      lhs += (chi[i] - diag[i] * u[i]) * v[i];
      rhs -= d[i] * (ux[i] * vx[i] + uy[i] * vy[i]);
    }
    check(std::abs(lhs - rhs) < 1e-11, "stencil divergence is the negative adjoint of the forward gradient");
  }

  // Schedules: doubling law for the default growth factors, a_k non-increasing, vanishing and summable.
  for (Variant v : {Variant::Regular, Variant::Tight, Variant::Refined}) {
    ModelConfig c;
    c.variant = v;
    bool doubling = true;
    for (int k = 0; k < 30; ++k) doubling = doubling && 2.0 * lambda_schedule(c, k) <= lambda_schedule(c, k + 1) * (1 + 1e-15);
    check(doubling, std::string("2 lambda_k <= lambda_{k+1} (") + to_string(v) + ")");
  }
  {
    ModelConfig c;
    double sum = 0.0, prev = INFINITY;
    bool monotone = true;
    for (int k = 0; k <= 100000; ++k) {
      const double a = ak_schedule(c, k);
      monotone = monotone && a <= prev;
      prev = a;
      sum += a;
    }
    check(monotone && prev < 1e-7 && sum < 2.6124, "a_k non-increasing, to 0, summable");
  }

  // Penalty axioms for tv_log.
  for (int t = 0; t < 50; ++t) {
    const ImageGrid u = random_grid(9, 8, true), v = random_grid(9, 8, true);
    ImageGrid inv(9, 8), uv(9, 8);
    for (std::size_t i = 0; i < u.size(); ++i) {
      inv[i] = 1.0 / u[i];
      uv[i] = u[i] * v[i];
    }
    const double ju = tv_log(u, 0.0);
    check(std::abs(tv_log(inv, 0.0) - ju) <= 1e-12 * (1 + ju), "tv_log(u) = tv_log(1/u)");
    check(tv_log(uv, 0.0) <= ju + tv_log(v, 0.0) + 1e-12, "tv_log(uv) <= tv_log(u) + tv_log(v)");
  }
  check(tv_log(ImageGrid(9, 8, 1.0), 0.0) == 0.0, "tv_log(1) = 0");

  // Itakura-Saito scale invariance.
  for (int t = 0; t < 50; ++t) {
    const ImageGrid f = random_grid(10, 10, true), g = random_grid(10, 10, true);
    const double c = std::exp(3.0 * U(rng));
    const double h = fidelity(FidelityKind::ItakuraSaito, f, g);
    check(std::abs(fidelity(FidelityKind::ItakuraSaito, f * c, g * c) - h) <= 1e-12 * (1 + h), "IS(cf, cg) = IS(f, g)");
  }

  const double t = seconds_since(t0);
  const bool ok = failed.empty() && t < 60.0;
  std::string detail = fmt("%d checks, %zu failed, %.2f s", checks, failed.size(), t);
  for (std::size_t i = 0; i < std::min<std::size_t>(failed.size(), 5); ++i) detail += " [" + failed[i] + "]";
  return {ok ? Status::Pass : Status::Fail, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "gamma sampler statistics", c1_gamma_sampler},
      {2, "blur adjoint identity", c2_adjoint},
      {3, "residual monotonicity", c3_residual_monotonicity},
      {4, "residual estimate bound", c4_estimate_bound},
      {5, "log-exp equivalence", c5_log_exp_equivalence},
      {6, "SO EL cameraman reproduction", c6_so_cameraman},
      {7, "stopping-rule quality", c7_stopping_quality},
      {8, "denoising SNR spot checks", c8_denoising_spots},
      {9, "deblurring SNR spot checks", c9_deblurring_spots},
      {10, "high/severe-noise robustness", c10_high_noise},
      {11, "TV-prox 1D oracle", c11_prox_oracle},
      {12, "asset-free property suite", c12_property_suite},
  };
  const std::set<int> only = selected_criteria();
  const char* report_env = std::getenv("MHDM_ACCEPT_REPORT");
  std::FILE* report = std::fopen(report_env ? report_env : "acceptance_report.txt", "w");
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (report) {
      std::fputs(line.c_str(), report);
      std::fflush(report);
    }
  };
  emit(fmt("data directory: %s, seeds per image-level check: %zu\n", data_dir().c_str(), seeds().size()));
  int pass = 0, fail = 0, skip = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    if (!only.count(c.id)) {
      o = {Status::Skip, "not selected (MHDM_ACCEPT_ONLY)"};
    } else {
      try {
        o = c.fn();
      } catch (const std::exception& e) {
        o = {Status::Fail, std::string("exception: ") + e.what()};
      }
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    (o.status == Status::Pass ? pass : o.status == Status::Fail ? fail : skip)++;
    emit(fmt("criterion %2d %s  %s (%.1f s): %s\n", c.id, tag, c.name, seconds_since(t0), o.detail.c_str()));
  }
  emit(fmt("summary: %d pass, %d fail, %d skip\n", pass, fail, skip));
  if (report) std::fclose(report);
  return 0;
}
