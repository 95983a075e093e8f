#include "workstat/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "workstat/errors.hpp"
#include "workstat/numeric_format.hpp"
#include "workstat/spin_model.hpp"

#ifndef WORKSTAT_VERSION
#define WORKSTAT_VERSION "0.0.0"
#endif

namespace workstat::exp {
namespace {

using json = nlohmann::json;

struct Evaluation {
  ScanRecord record;
  ComplexMatrix u;
  spectral::SpectralDecomposition spec_i;
  spectral::SpectralDecomposition spec_f;
  OperatorMatrix h1;
};

Evaluation evaluate(const PointSpec& spec, double scan_value) {
  const auto start = std::chrono::steady_clock::now();
  Evaluation ev;
  const OperatorMatrix h0 = spin::build_hopping(spec.model, spec.max_sites);
  ev.h1 = spin::build_zz(spec.model, spec.max_sites);
  const OperatorMatrix hf = spin::assemble(h0, ev.h1, spec.protocol.lambda_end());
  drive::PropagateOptions opts;
  opts.use_sectors = spec.sector_blocks;
  if (spec.sector_blocks) {
    const auto sectors = spin::magnetization_sectors(spec.model.n_sites);
    ev.spec_i = spectral::eigendecompose_blocked(h0, sectors);
    ev.spec_f = spectral::eigendecompose_blocked(hf, sectors);
  } else {
    ev.spec_i = spectral::eigendecompose(h0);
    ev.spec_f = spectral::eigendecompose(hf);
  }

  ScanRecord& r = ev.record;
  r.scan_value = scan_value;
  if (spec.certify) {
    auto probe = drive::convergence_probe(h0, ev.h1, spec.protocol, spec.dt, spec.method, spec.beta, opts,
                                          spec.convention);
    r.infidelity = probe.infidelity_coarse;
    r.probe_shift = probe.infidelity_shift;
    r.probe_relative_shift = probe.relative_shift;
    r.unitarity_defect = probe.coarse.unitarity_defect;
    if (probe.infidelity_shift > kCertificationFloor && probe.relative_shift > kCertificationTolerance) {
      throw CertificationError("dt certification failed at scan value " + format_double(scan_value) + ": infidelity " +
                               format_double(probe.infidelity_coarse) + " (dt = " + format_double(spec.dt) + ") vs " +
                               format_double(probe.infidelity_fine) + " (dt/2), relative shift " +
                               format_double(probe.relative_shift));
    }
    ev.u = probe.coarse.unitary.matrix();
  } else {
    auto res = drive::propagate(h0, ev.h1, spec.protocol, spec.dt, spec.method, opts);
    r.unitarity_defect = res.unitarity_defect;
    ev.u = res.unitary.matrix();
    r.infidelity = spectral::infidelity_from_fidelity(drive::transfer_fidelity(ev.spec_i, ev.spec_f, ev.u, spec.beta),
                                                      spec.convention);
  }

  const auto dist = work::tpm_distribution(ev.spec_i, ev.spec_f, ev.u, spec.beta);
  r.avg_work = work::average_work(dist);
  r.jarzynski_deviation = work::jarzynski_check(dist, spectral::log_partition_function(ev.spec_i, spec.beta),
                                                spectral::log_partition_function(ev.spec_f, spec.beta), spec.beta)
                              .abs_deviation;
  r.delta_variance = work::delta_concentration(dist).variance;
  if (spec.record_timing) {
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return ev;
}

template <class T>
std::vector<T> parallel_map(const std::vector<std::function<T()>>& jobs, int threads) {
  std::vector<T> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t n = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, std::max<std::size_t>(jobs.size(), 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Progress locked(const Progress& progress) {
  if (!progress) return {};
  auto mutex = std::make_shared<std::mutex>();
  return [progress, mutex](const std::string& msg) {
    std::lock_guard lock(*mutex);
    progress(msg);
  };
}

std::vector<double> lambda_grid(const RunConfig& cfg) {
  return cfg.grid.empty() ? std::vector<double>{0.05, 0.1, 0.2} : cfg.grid;
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

ScanRecord run_point(const PointSpec& spec, double scan_value) { return evaluate(spec, scan_value).record; }

std::vector<ScanRecord> run_parallel(const std::vector<std::function<ScanRecord()>>& jobs, int threads) {
  return parallel_map(jobs, threads);
}

std::vector<double> default_velocity_grid() {
  std::vector<double> g;
  for (int k = 0; k < 12; ++k) g.push_back(1e-3 * std::pow(1e4, k / 11.0));
  g.front() = 1e-3;
  g.back() = 10.0;
  g.push_back(INFINITY);
  return g;
}

drive::DriveProtocol make_protocol(const ProtocolParams& params, double lambda1, double t_total) {
  switch (params.kind) {
    case drive::ProtocolKind::quench: return drive::DriveProtocol::quench(lambda1, t_total);
    case drive::ProtocolKind::sampled: return drive::DriveProtocol::sampled(params.samples);
    case drive::ProtocolKind::ramp_hold:
      if (std::isinf(params.velocity)) return drive::DriveProtocol::quench(lambda1, t_total);
      return drive::DriveProtocol::ramp_hold(params.velocity, lambda1, t_total, params.allow_partial);
  }
  throw InvalidArgument("unknown protocol kind");
}

PointSpec point_spec(const RunConfig& cfg, const spin::SpinChainSpec& model, drive::DriveProtocol protocol) {
  PointSpec s;
  s.model = model;
  s.max_sites = cfg.max_sites;
  s.beta = cfg.beta;
  s.protocol = std::move(protocol);
  s.dt = cfg.dt;
  s.method = cfg.method;
  s.sector_blocks = cfg.sector_blocks;
  s.certify = cfg.certify;
  s.record_timing = cfg.record_timing;
  s.convention = cfg.fidelity_convention;
  return s;
}

std::vector<ScanRecord> run_velocity_scan(const RunConfig& cfg, const Progress& progress) {
  std::vector<double> grid = cfg.grid.empty() ? default_velocity_grid() : cfg.grid;
  std::sort(grid.begin(), grid.end());
  double v_min = INFINITY;
  for (double v : grid) v_min = std::min(v_min, v);
  double t_total = cfg.protocol.t_total;
  if (!(t_total > 0.0)) {
    if (!std::isfinite(v_min)) throw ConfigError("velocity grid has no finite value to fix t_total", "grid");
    t_total = (cfg.lambda1 > 0.0 ? cfg.lambda1 : 1.0) / v_min;
  }
  const Progress report = locked(progress);
  std::vector<std::function<ScanRecord()>> jobs;
  for (double v : grid) {
    jobs.push_back([&cfg, v, t_total, report] {
      ProtocolParams params = cfg.protocol;
      params.kind = drive::ProtocolKind::ramp_hold;
      params.velocity = v;
      auto rec = run_point(point_spec(cfg, cfg.model, make_protocol(params, cfg.lambda1, t_total)), v);
      if (report) report("v = " + format_double(v) + ": infidelity " + format_double(rec.infidelity));
      return rec;
    });
  }
  return parallel_map(jobs, cfg.threads);
}

std::vector<ScanRecord> run_size_scan(const RunConfig& cfg, const Progress& progress) {
  if (cfg.grid.empty()) throw ConfigError("size scan needs a grid of chain lengths", "grid");
  std::vector<double> grid = cfg.grid;
  std::sort(grid.begin(), grid.end());
  const double t_total = cfg.protocol.t_total > 0.0 ? cfg.protocol.t_total : 100.0;
  const Progress report = locked(progress);
  std::vector<std::function<ScanRecord()>> jobs;
  for (double n : grid) {
    jobs.push_back([&cfg, n, t_total, report] {
      spin::SpinChainSpec model = cfg.model;
      model.n_sites = static_cast<int>(n);
      auto rec = run_point(point_spec(cfg, model, make_protocol(cfg.protocol, cfg.lambda1, t_total)), n);
      if (report) report("N = " + format_double(n) + ": infidelity " + format_double(rec.infidelity));
      return rec;
    });
  }
  return parallel_map(jobs, cfg.threads);
}

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, std::size_t* skipped) {
  if (x.size() != y.size()) throw InvalidArgument("loglog_fit: size mismatch");
  if (x.size() < 2) throw InvalidArgument("fit needs >= 2 points");
  std::vector<double> lx, ly;
  std::size_t skip = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] >= 1e-14) || !(x[i] > 0.0) || !std::isfinite(y[i]) || !std::isfinite(x[i])) {
      ++skip;
      continue;
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (skipped) *skipped = skip;
  LinearFit fit;
  fit.points = lx.size();
  if (lx.size() < 2) {
    fit.slope = fit.intercept = fit.r_squared = NAN;
    return fit;
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

LambdaScalingReport run_lambda_scaling(const RunConfig& cfg, const Progress& progress) {
  const auto grid = lambda_grid(cfg);
  if (grid.size() < 2) throw InvalidArgument("fit needs >= 2 points");
  LambdaScalingReport rep;
  rep.velocity = cfg.protocol.velocity;
  if (!(rep.velocity > 0.0) || !std::isfinite(rep.velocity)) {
    throw ConfigError("lambda scaling needs a finite positive protocol.velocity", "protocol.velocity");
  }
  const Progress report = locked(progress);
  std::vector<std::function<ScanRecord()>> jobs;
  for (double l : grid) {
    const double t_total = l / rep.velocity;
    jobs.push_back([&cfg, l, t_total, v = rep.velocity, report] {
      auto rec = run_point(point_spec(cfg, cfg.model, drive::DriveProtocol::ramp_hold(v, l, t_total)), l);
      if (report) report("ramp lambda1 = " + format_double(l) + ": infidelity " + format_double(rec.infidelity));
      return rec;
    });
    jobs.push_back([&cfg, l, t_total, report] {
      auto rec = run_point(point_spec(cfg, cfg.model, drive::DriveProtocol::quench(l, t_total)), l);
      if (report) report("quench lambda1 = " + format_double(l) + ": infidelity " + format_double(rec.infidelity));
      return rec;
    });
  }
  const auto all = parallel_map(jobs, cfg.threads);
  for (std::size_t i = 0; i < all.size(); i += 2) {
    rep.adiabatic.push_back(all[i]);
    rep.quench.push_back(all[i + 1]);
  }
  auto fit = [&](const std::vector<ScanRecord>& recs, const char* name) {
    std::vector<double> x, y;
    for (const auto& r : recs) {
      x.push_back(r.scan_value);
      y.push_back(r.infidelity);
    }
    std::size_t skipped = 0;
    LinearFit f = loglog_fit(x, y, &skipped);
    if (skipped) {
      rep.warnings.push_back(std::string(name) + ": " + std::to_string(skipped) +
                             " point(s) with infidelity < 1e-14 left out of the fit");
    }
    return f;
  };
  rep.fit_adiabatic = fit(rep.adiabatic, "adiabatic");
  rep.fit_quench = fit(rep.quench, "quench");
  return rep;
}

PertCompareReport run_pert_compare(const RunConfig& cfg, const Progress& progress) {
  const auto grid = lambda_grid(cfg);
  const auto u_grid = work::default_u_grid(cfg.beta, cfg.u_points, cfg.u_half_width);
  const Progress report = locked(progress);
  std::vector<std::function<PertComparePoint()>> jobs;
  for (double l : grid) {
    jobs.push_back([&cfg, &u_grid, l, report] {
      double t_total = cfg.protocol.t_total;
      const bool ramp = cfg.protocol.kind == drive::ProtocolKind::ramp_hold && std::isfinite(cfg.protocol.velocity);
      if (!(t_total > 0.0)) t_total = ramp && l > 0.0 ? l / cfg.protocol.velocity : 1.0;
      const auto protocol = make_protocol(cfg.protocol, l, t_total);
      const PointSpec spec = point_spec(cfg, cfg.model, protocol);
      const Evaluation ev = evaluate(spec, l);

      PertComparePoint pt;
      pt.lambda1 = l;
      pt.u = u_grid;
      pt.record = ev.record;
      const auto dist = work::tpm_distribution(ev.spec_i, ev.spec_f, ev.u, cfg.beta);
      const auto exact = work::cfw_from_distribution(dist, u_grid);
      pt.exact = exact.ln_chi;
      pt.linearity_exact = work::corollary1_linearity(exact);

      const auto measure = pert::two_point_measure(ev.spec_i, ev.h1, cfg.beta);
      const double first = pert::first_cumulant(ev.spec_i, ev.h1, cfg.beta);
      pert::SecondOrderOptions opts;
      opts.zero_mode = cfg.zero_mode;
      const auto second = pert::lnchi_second_order(measure, protocol, first, protocol.lambda_end(), u_grid, opts);
      pt.second_order = second.samples.ln_chi;
      pt.linearity_second = work::corollary1_linearity(second.samples);
      pt.zero_mode_weight = second.zero_mode_weight;
      pt.dropped_weight = second.dropped_weight;
      opts.zero_mode = pert::ZeroModePolicy::exclude;
      pt.linearity_second_excluded = work::corollary1_linearity(
          pert::lnchi_second_order(measure, protocol, first, protocol.lambda_end(), u_grid, opts).samples);

      if (protocol.kind() == drive::ProtocolKind::ramp_hold) {
        const auto third =
            pert::lnchi_third_order_adiabatic(pert::three_point_measure(ev.spec_i, ev.h1, cfg.beta), l, u_grid);
        pt.third_order = third.samples.ln_chi;
        pt.third_order_dropped_weight = third.dropped_weight;
      }
      if (cfg.quadrature_check) {
        pt.quadrature =
            pert::lnchi_second_order_quadrature(measure, first, protocol, protocol.lambda_end(), u_grid).ln_chi;
        for (std::size_t k = 0; k < u_grid.size(); ++k) {
          pt.max_quadrature_gap = std::max(pt.max_quadrature_gap, std::abs(pt.quadrature[k] - pt.second_order[k]));
        }
      }
      for (std::size_t k = 0; k < u_grid.size(); ++k) {
        pt.max_residual = std::max(pt.max_residual, std::abs(pt.exact[k] - pt.second_order[k]));
      }
      if (report) report("lambda1 = " + format_double(l) + ": max residual " + format_double(pt.max_residual));
      return pt;
    });
  }
  PertCompareReport rep;
  rep.points = parallel_map(jobs, cfg.threads);
  for (const auto& pt : rep.points) {
    if (pt.dropped_weight > 1e-12) {
      rep.warnings.push_back("lambda1 = " + format_double(pt.lambda1) + ": zero-frequency weight " +
                             format_double(pt.dropped_weight) + " dropped from the second-order sum");
    }
    if (pt.third_order_dropped_weight > 1e-12) {
      rep.warnings.push_back("lambda1 = " + format_double(pt.lambda1) + ": weight " +
                             format_double(pt.third_order_dropped_weight) +
                             " on vanishing denominators dropped from the third-order sum");
    }
  }
  if (rep.points.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& pt : rep.points) {
      x.push_back(pt.lambda1);
      y.push_back(pt.max_residual);
    }
    std::size_t skipped = 0;
    rep.residual_fit = loglog_fit(x, y, &skipped);
    rep.has_fit = rep.residual_fit.points >= 2;
    if (skipped) rep.warnings.push_back(std::to_string(skipped) + " residual(s) below 1e-14 left out of the fit");
  }
  return rep;
}

ScanRecord run_single(const RunConfig& cfg) {
  double t_total = cfg.protocol.t_total;
  if (!(t_total > 0.0)) {
    if (cfg.protocol.kind == drive::ProtocolKind::ramp_hold && std::isfinite(cfg.protocol.velocity) &&
        cfg.protocol.velocity > 0.0 && cfg.lambda1 > 0.0) {
      t_total = cfg.lambda1 / cfg.protocol.velocity;
    } else {
      t_total = 1.0;
    }
  }
  const auto protocol = make_protocol(cfg.protocol, cfg.lambda1, t_total);
  return run_point(point_spec(cfg, cfg.model, protocol), cfg.protocol.velocity);
}

std::string csv_text(const std::vector<ScanRecord>& records) {
  std::ostringstream out;
  out << "scan_value,infidelity,avg_work,jarzynski_deviation,delta_variance,runtime_seconds\n";
  for (const auto& r : records) {
    out << format_double(r.scan_value) << ',' << format_double(r.infidelity) << ',' << format_double(r.avg_work) << ','
        << format_double(r.jarzynski_deviation) << ',' << format_double(r.delta_variance) << ','
        << format_double(r.runtime_seconds) << '\n';
  }
  return out.str();
}

void emit_csv(const std::vector<ScanRecord>& records, const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << csv_text(records);
}

void emit_json_summary(const Summary& summary, const std::string& path) {
  json root;
  root["config"] = json::parse(dump_config(summary.config));
  json records = json::array();
  for (const auto& r : summary.records) {
    records.push_back({{"scan_value", number(r.scan_value)},
                       {"infidelity", number(r.infidelity)},
                       {"avg_work", number(r.avg_work)},
                       {"jarzynski_deviation", number(r.jarzynski_deviation)},
                       {"delta_variance", number(r.delta_variance)},
                       {"runtime_seconds", number(r.runtime_seconds)},
                       {"probe_relative_shift", number(r.probe_relative_shift)}});
  }
  root["records"] = records;
  json fits = json::object();
  for (const auto& [k, v] : summary.fits) fits[k] = number(v);
  root["fits"] = fits;
  root["warnings"] = summary.warnings;
  root["tool_version"] = tool_version();
  root["wall_time"] = summary.wall_time;
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << root.dump(2) << '\n';
}

std::string tool_version() { return WORKSTAT_VERSION; }

}  // namespace workstat::exp
