"""Command-line entry point for the torus gas laboratory.

Exit codes: 0 pass, 1 threshold failure, 2 solver failure, 3 sampler
failure, 64 usage error.  All commands write their delimited outputs plus a
manifest; report-style commands also render companion figures unless
plotting is disabled in the config.
"""
from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import report
from .equilibrium import SolverError, SolverOptions, solve_thermal_equilibrium
from .fields import (
    estimate_specific_entropy,
    field_to_files,
    intensity_profile,
    poisson_relative_entropy_rate,
    tagged_empirical_field,
)
from .geometry import centered_box
from .kernels import validate_kernel, zero_kernel
from .manifest import ConfigError, ExperimentManifest, RunConfig, write_csv
from .pointconfig import PointConfig, config_to_record, read_config_stream
from .potentials import bernoulli_potential
from .sampling import (
    GibbsSpec,
    SamplerConfig,
    SamplerError,
    make_rng,
    sample_gibbs,
    sample_poisson_box,
)

EXIT_PASS = 0
EXIT_THRESHOLD = 1
EXIT_SOLVER = 2
EXIT_SAMPLER = 3
EXIT_USAGE = 64


def _load_config(path) -> RunConfig:
    import yaml
    try:
        return RunConfig.load(path)
    except FileNotFoundError:
        click.echo(f"config file not found: {path}", err=True)
        sys.exit(EXIT_USAGE)
    except (ConfigError, yaml.YAMLError) as err:
        click.echo(f"bad config: {err}", err=True)
        sys.exit(EXIT_USAGE)


def common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="run configuration (YAML)")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="override the config seed")(fn)
    fn = click.option("--workers", type=int, default=1,
                      help="worker pool size for independent jobs")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None,
                      help="override the output directory")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "ndjson"]),
                      default=None, help="delimited output format")(fn)
    return fn


def _setup(command, config_path, seed, out_dir):
    config = _load_config(config_path)
    seed = config["seed"] if seed is None else seed
    outdir = Path(out_dir or config["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = ExperimentManifest(command=command,
                                  config_digest=config.digest(),
                                  seed=int(seed), config=config.raw)
    manifest.started = ExperimentManifest.now()
    if Path(config.path).exists():
        manifest.add_input(config.path)
    return config, int(seed), outdir, manifest


def _write_rows(outdir, stem, header, rows, config, fmt=None):
    """Write result rows as CSV or NDJSON per the requested format."""
    fmt = fmt or config["output"]["format"]
    if fmt == "ndjson":
        path = outdir / f"{stem}.ndjson"
        with open(path, "w") as fh:
            for row in rows:
                fh.write(json.dumps({k: (float(v) if isinstance(v, np.floating)
                                         else bool(v) if isinstance(v, np.bool_)
                                         else int(v) if isinstance(v, np.integer)
                                         else v)
                                     for k, v in zip(header, row)}) + "\n")
        return path
    path = outdir / f"{stem}.csv"
    write_csv(path, header, rows)
    return path


def _finish(manifest, outdir, outputs, passed):
    for out in outputs:
        manifest.add_output(out)
    manifest.finished = ExperimentManifest.now()
    manifest.passed = bool(passed)
    manifest.write(outdir / "manifest.json")


def _solve_raw(config, tight=False, resolution=None):
    geom = config.geometry(resolution)
    kernel = config.kernel(geom)
    V, v_exact = config.potential(geom)
    s = config["solver"]
    tol = min(s["tol"], 1e-13) if tight else s["tol"]
    sol = solve_thermal_equilibrium(
        kernel, V, config.theta(),
        SolverOptions(tol=tol, max_iterations=s["max_iterations"],
                      damping=s["damping"]))
    return geom, kernel, V, v_exact, sol


@click.group()
def main():
    """Numerical laboratory for high-temperature torus gases."""


# ---------------------------------------------------------------------------


@main.command("validate-kernel")
@common_options
def cmd_validate_kernel(config_path, seed, workers, out_dir, fmt):
    """Report symmetry/integrability/positive-definiteness of the kernel."""
    config, seed, outdir, manifest = _setup("validate-kernel", config_path,
                                            seed, out_dir)
    rep = validate_kernel(config.kernel())
    path = outdir / "kernel_report.json"
    path.write_text(json.dumps(asdict(rep), indent=2) + "\n")
    click.echo(json.dumps(asdict(rep), indent=2))
    _finish(manifest, outdir, [path], rep.ok)
    sys.exit(EXIT_PASS if rep.ok else EXIT_THRESHOLD)


@main.command("solve-eq")
@common_options
def cmd_solve_eq(config_path, seed, workers, out_dir, fmt):
    """Solve the thermal equilibrium measure; write density + sidecar."""
    config, seed, outdir, manifest = _setup("solve-eq", config_path, seed,
                                            out_dir)
    try:
        geom, kernel, V, v_exact, sol = _solve_raw(config)
    except SolverError as err:
        click.echo(f"solver failure: {err}", err=True)
        sys.exit(EXIT_SOLVER)
    csv_path = outdir / "mu_theta.csv"
    sidecar = outdir / "mu_theta.json"
    sol.to_files(csv_path, sidecar)
    outputs = [csv_path, sidecar]
    if config["output"]["plot"]:
        outputs.append(report.render_density(
            geom, sol.mu_theta.values, outdir / "mu_theta.png",
            title="thermal equilibrium density"))
    click.echo(f"first-order residual: {sol.residual:.3e} "
               f"({sol.iterations} iterations)")
    _finish(manifest, outdir, outputs, True)
    sys.exit(EXIT_PASS)


@main.command("sample")
@common_options
def cmd_sample(config_path, seed, workers, out_dir, fmt):
    """Run the Metropolis chain and stream configurations to NDJSON."""
    config, seed, outdir, manifest = _setup("sample", config_path, seed,
                                            out_dir)
    try:
        geom, kernel, V, v_exact, sol = _solve_raw(config)
    except SolverError as err:
        click.echo(f"solver failure: {err}", err=True)
        sys.exit(EXIT_SOLVER)
    s = config["sampler"]
    spec = GibbsSpec(kernel, V, int(config["particles"]["n"]),
                     theta=config.theta(), initial_density=sol.mu_theta)
    cfg = SamplerConfig(seed=seed, burn_in=s["burn_in"], thin=s["thin"],
                        proposal_scale=s.get("proposal_scale"),
                        target_acceptance=s["target_acceptance"])
    path = outdir / "samples.ndjson"
    try:
        with open(path, "w") as fh:
            for smp in sample_gibbs(spec, cfg, n_samples=s["n_samples"]):
                fh.write(config_to_record(
                    smp.config, sweep_index=smp.sweep_index,
                    energy=smp.energy,
                    acceptance_rate=smp.acceptance_rate) + "\n")
    except SamplerError as err:
        click.echo(f"sampler failure: {err}", err=True)
        sys.exit(EXIT_SAMPLER)
    click.echo(f"wrote {s['n_samples']} configurations to {path}")
    _finish(manifest, outdir, [path], True)
    sys.exit(EXIT_PASS)


@main.command("field")
@common_options
@click.option("--input", "input_path", type=click.Path(exists=False),
              default=None, help="sample stream (defaults to out/samples.ndjson)")
@click.option("--index", type=int, default=-1,
              help="which sampled configuration to blow up")
def cmd_field(config_path, seed, workers, out_dir, fmt, input_path, index):
    """Build the tagged empirical field of one sampled configuration."""
    config, seed, outdir, manifest = _setup("field", config_path, seed,
                                            out_dir)
    src = Path(input_path or outdir / "samples.ndjson")
    if not src.exists():
        click.echo(f"sample stream not found: {src}", err=True)
        sys.exit(EXIT_USAGE)
    manifest.add_input(src)
    configs = read_config_stream(src)
    if not configs:
        click.echo("sample stream is empty", err=True)
        sys.exit(EXIT_USAGE)
    f = config["field"]
    sample = tagged_empirical_field(configs[index], f["m_tags"],
                                    f["window_radius"])
    nd = outdir / "field.ndjson"
    head = outdir / "field.json"
    field_to_files(sample, nd, head)
    prof = intensity_profile(sample, n_bins=min(16, len(sample.tags)))
    rows = [(i, float(v)) for i, v in enumerate(prof.intensities)]
    rows.append(("total", prof.total))
    ipath = _write_rows(outdir, "intensity", ["bin", "intensity"], rows,
                        config, fmt)
    click.echo(f"tagged field with {len(sample.tags)} tags, "
               f"window side {sample.window_radius}, "
               f"intensity total {prof.total:.3f}")
    _finish(manifest, outdir, [nd, head, ipath], True)
    sys.exit(EXIT_PASS)


@main.command("entropy")
@common_options
def cmd_entropy(config_path, seed, workers, out_dir, fmt):
    """Estimate the specific relative entropy of Poisson windows."""
    config, seed, outdir, manifest = _setup("entropy", config_path, seed,
                                            out_dir)
    rows, passed, outputs = _entropy_check(config.raw, seed, outdir,
                                           config["output"]["plot"])
    path = _write_rows(outdir, "entropy", ["quantity", "value"], rows,
                       config, fmt)
    outputs.insert(0, path)
    for name, value in rows:
        click.echo(f"{name}: {value}")
    _finish(manifest, outdir, outputs, passed)
    sys.exit(EXIT_PASS if passed else EXIT_THRESHOLD)


def _entropy_check(raw, seed, outdir=None, plot=False):
    config = RunConfig(raw)
    e = config["entropy"]
    rng = make_rng(seed, 21)
    box = centered_box(e["window_side"], config.geometry().dim)
    windows = [sample_poisson_box(e["window_intensity"], box, rng)
               for _ in range(e["n_windows"])]
    est = estimate_specific_entropy(windows, e["reference_intensity"],
                                    e["box_side"], e["cell_side"], seed=seed)
    oracle = poisson_relative_entropy_rate(e["window_intensity"],
                                           e["reference_intensity"])
    rel_err = abs(est.value - oracle) / abs(oracle) if oracle else abs(est.value)
    passed = rel_err <= config["thresholds"]["entropy_relative_error"]
    rows = [("estimate", est.value), ("stderr", est.stderr),
            ("bias_estimate", est.bias_estimate), ("oracle", oracle),
            ("relative_error", rel_err)]
    outputs = []
    if plot and outdir is not None:
        outputs.append(report.render_entropy(est, oracle,
                                             outdir / "entropy.png"))
    return rows, passed, outputs


@main.command("split-check")
@common_options
def cmd_split_check(config_path, seed, workers, out_dir, fmt):
    """Splitting-identity residuals plus a grid refinement study."""
    config, seed, outdir, manifest = _setup("split-check", config_path, seed,
                                            out_dir)
    rows, passed = _split_check(config.raw, seed)
    path = _write_rows(outdir, "split",
                       ["kind", "resolution", "index", "relative_residual"],
                       rows, config, fmt)
    outputs = [path]
    if config["output"]["plot"]:
        outputs.append(report.render_split(rows, outdir / "split.png"))
    worst = max(r[3] for r in rows if r[0] == "reference")
    click.echo(f"worst reference residual: {worst:.3e}  pass={passed}")
    _finish(manifest, outdir, outputs, passed)
    sys.exit(EXIT_PASS if passed else EXIT_THRESHOLD)


def _split_check(raw, seed):
    from .experiments import split_hamiltonian
    config = RunConfig(raw)
    sp = config["split"]
    threshold = config["thresholds"]["split_relative_residual"]
    geom, kernel, V, v_exact, sol = _solve_raw(config, tight=True)
    rng = make_rng(seed, 31)
    rows = []
    for i in range(sp["n_configs"]):
        pts = rng.uniform(0, geom.side, (sp["n_particles"], geom.dim))
        rep = split_hamiltonian(PointConfig(geom, pts), sol, kernel, V,
                                v_exact=v_exact)
        rows.append(("reference", geom.resolution, i, rep.relative_residual))
    # refinement on a potential with an algebraic Fourier tail, so the
    # interpolation error is resolvable and the trend genuine
    pts = rng.uniform(0, config.geometry().side, (sp["n_particles"], 1))
    refine_vals = []
    for n in sp["refinement"]:
        g = config.geometry(n)
        vb, vb_exact = bernoulli_potential(
            g, order=sp["refinement_potential_order"])
        kb = config.kernel(g)
        solb = solve_thermal_equilibrium(kb, vb, config.theta(),
                                         SolverOptions(tol=1e-13))
        rep = split_hamiltonian(PointConfig(g, pts), solb, kb, vb,
                                v_exact=vb_exact)
        rows.append(("refinement", n, 0, rep.relative_residual))
        refine_vals.append(rep.relative_residual)
    worst = max(r[3] for r in rows if r[0] == "reference")
    decreasing = all(refine_vals[i] > refine_vals[i + 1]
                     for i in range(len(refine_vals) - 1))
    return rows, bool(worst <= threshold and decreasing)


@main.command("k-check")
@common_options
def cmd_k_check(config_path, seed, workers, out_dir, fmt):
    """Next-order partition function: g=0 exactness and the size trend."""
    config, seed, outdir, manifest = _setup("k-check", config_path, seed,
                                            out_dir)
    rows, passed = _k_check(config.raw, seed)
    path = _write_rows(outdir, "kcheck",
                       ["case", "n", "log_k_over_n", "error_bar", "mode"],
                       rows, config, fmt)
    outputs = [path]
    if config["output"]["plot"]:
        outputs.append(report.render_partition(
            [(r[1], r[2], r[3], r[4]) for r in rows if r[0] == "interacting"],
            outdir / "kcheck.png"))
    for r in rows:
        click.echo(f"{r[0]} N={r[1]}: log K/N = {r[2]:+.3e}")
    _finish(manifest, outdir, outputs, passed)
    sys.exit(EXIT_PASS if passed else EXIT_THRESHOLD)


def _k_check(raw, seed):
    from .experiments import estimate_next_order_partition
    config = RunConfig(raw)
    # tensor quadrature over grid^N: coarsen so N=4 stays under the direct
    # cap; the periodic rectangle rule is spectrally accurate for smooth data
    quad_res = min(config.geometry().resolution, 32)
    geom, kernel, V, v_exact, sol = _solve_raw(config, tight=True,
                                               resolution=quad_res)
    rows = []
    zk = zero_kernel(geom)
    sol0 = solve_thermal_equilibrium(zk, V, config.theta(),
                                     SolverOptions(tol=1e-14))
    g0 = estimate_next_order_partition(zk, V, config.theta(), [1, 2, 3],
                                       sol=sol0, seed=seed)
    for est in g0:
        rows.append(("g0", est.n, est.log_k_over_n, est.error_bar, est.mode))
    inter = estimate_next_order_partition(kernel, V, config.theta(),
                                          config["particles"]["n_list"],
                                          sol=sol, seed=seed)
    for est in inter:
        rows.append(("interacting", est.n, est.log_k_over_n, est.error_bar,
                     est.mode))
    g0_ok = max(abs(r[2]) for r in rows if r[0] == "g0") \
        <= config["thresholds"]["partition_g0"]
    vals = [abs(r[2]) for r in rows if r[0] == "interacting"]
    trend_ok = all(vals[i] >= vals[i + 1] - 1e-12 for i in range(len(vals) - 1))
    return rows, bool(g0_ok and trend_ok)


@main.command("minimize")
@common_options
def cmd_minimize(config_path, seed, workers, out_dir, fmt):
    """Annealed Hamiltonian minimum against the mean-field minimum."""
    config, seed, outdir, manifest = _setup("minimize", config_path, seed,
                                            out_dir)
    rows, passed = _minimize_check(config.raw, seed)
    path = _write_rows(outdir, "minimize", ["quantity", "value"], rows,
                       config, fmt)
    for name, value in rows:
        click.echo(f"{name}: {value}")
    _finish(manifest, outdir, [path], passed)
    sys.exit(EXIT_PASS if passed else EXIT_THRESHOLD)


def _minimize_check(raw, seed):
    from .equilibrium import mean_field_energy
    from .experiments import minimize_hamiltonian
    config = RunConfig(raw)
    geom = config.geometry()
    kernel = config.kernel(geom)
    V, _ = config.potential(geom)
    mz = config["minimize"]
    n = mz.get("n") or config["particles"]["n"]
    proxy = solve_thermal_equilibrium(
        kernel, V, mz["proxy_theta"],
        SolverOptions(tol=1e-12, max_iterations=300000))
    e_min = mean_field_energy(proxy.mu_theta, kernel, V)
    _, value = minimize_hamiltonian(kernel, V, n, restarts=mz["restarts"],
                                    seed=seed)
    gap = abs(value - e_min) / max(abs(e_min), 1e-12)
    passed = gap <= config["thresholds"]["minimize_relative_gap"]
    rows = [("annealed_h_over_n2", value), ("mean_field_minimum", e_min),
            ("relative_gap", gap), ("n_particles", n)]
    return rows, passed


@main.command("rate")
@common_options
def cmd_rate(config_path, seed, workers, out_dir, fmt):
    """Estimate the delta-ball rate around a typical tagged field."""
    config, seed, outdir, manifest = _setup("rate", config_path, seed,
                                            out_dir)
    rows, passed, predicted = _rate_check(config.raw, seed)
    path = _write_rows(outdir, "rate",
                       ["n", "rate", "lower", "upper", "hits", "samples"],
                       rows, config, fmt)
    outputs = [path]
    if config["output"]["plot"]:
        outputs.append(report.render_rate(rows, predicted,
                                          outdir / "rate.png"))
    for r in rows:
        click.echo(f"N={r[0]}: rate {r[1]:+.4f} [{r[2]:.4f}, {r[3]:.4f}] "
                   f"hits {r[4]}/{r[5]}")
    click.echo(f"energy+entropy prediction: {predicted:.4f}")
    _finish(manifest, outdir, outputs, passed)
    sys.exit(EXIT_PASS if passed else EXIT_THRESHOLD)


def _rate_check(raw, seed):
    from .experiments import calibrate_ball_radius, estimate_rate
    from .sampling import sample_iid
    config = RunConfig(raw)
    rt = config["rate"]
    f = config["field"]
    geom, kernel, V, v_exact, sol = _solve_raw(config, tight=True)
    n = config["particles"]["n"]
    n_list = rt.get("n_list") or [n]
    rng = make_rng(seed, 41)
    target_cfg = sample_iid(sol.mu_theta, n, rng)
    target = tagged_empirical_field(target_cfg, f["m_tags"],
                                    f["window_radius"])
    delta = rt.get("delta")
    if delta is None:
        delta = calibrate_ball_radius(
            kernel, V, config.theta(), target, n,
            pilot_samples=rt["pilot_samples"], quantile=rt["quantile"],
            seed=seed, m_tags=f["m_tags"],
            dictionary_size=rt["dictionary_size"], sol=sol)
    est = estimate_rate(kernel, V, config.theta(), target, delta,
                        n_list=n_list, samples_per_n=rt["samples_per_n"],
                        seed=seed, m_tags=f["m_tags"],
                        dictionary_size=rt["dictionary_size"], sol=sol)
    rows = []
    for i, n_val in enumerate(est.n_grid):
        lo, hi = est.error_bars[i]
        rows.append((n_val, est.minus_log_prob_over_n[i], lo, hi,
                     est.hit_counts[i], est.sample_counts[i]))
    bound = config["thresholds"]["rate_bound"]
    passed = all(not lb and -bound <= r[1] <= bound
                 for lb, r in zip(est.lower_bound_only, rows))
    return rows, passed, est.predicted


# ---------------------------------------------------------------------------
# verify: the acceptance suite at config scale
# ---------------------------------------------------------------------------

def _check_kernel(raw, seed):
    config = RunConfig(raw)
    rep = validate_kernel(config.kernel())
    return [("kernel-valid", float(rep.min_nonzero_mode_coefficient), 0.0,
             rep.ok)]


def _check_g0_closed_form(raw, seed):
    config = RunConfig(raw)
    geom = config.geometry(64)
    V, _ = config.potential(geom)
    sol = solve_thermal_equilibrium(zero_kernel(geom), V, config.theta(),
                                    SolverOptions(tol=1e-14))
    weights = np.exp(-config.theta() * V.values)
    closed = weights / (weights.sum() * geom.cell_volume)
    gap = float(np.max(np.abs(sol.mu_theta.values - closed)))
    return [("g0-closed-form", gap, 1e-10, gap <= 1e-10)]


def _check_el_residual(raw, seed):
    config = RunConfig(raw)
    _, _, _, _, sol = _solve_raw(config)
    thr = config["thresholds"]["el_residual"]
    return [("el-residual", sol.residual, thr, sol.residual <= thr)]


def _check_split(raw, seed):
    config = RunConfig(raw)
    rows, passed = _split_check(raw, seed)
    worst = max(r[3] for r in rows if r[0] == "reference")
    return [("split-identity", worst,
             config["thresholds"]["split_relative_residual"], passed)]


def _check_partition(raw, seed):
    config = RunConfig(raw)
    rows, passed = _k_check(raw, seed)
    worst_g0 = max(abs(r[2]) for r in rows if r[0] == "g0")
    return [("partition-function", worst_g0,
             config["thresholds"]["partition_g0"], passed)]


def _check_entropy(raw, seed):
    config = RunConfig(raw)
    rows, passed, _ = _entropy_check(raw, seed)
    rel = dict((k, v) for k, v in rows)["relative_error"]
    return [("entropy-oracle", rel,
             config["thresholds"]["entropy_relative_error"], passed)]


def _check_rate(raw, seed):
    config = RunConfig(raw)
    rows, passed, _ = _rate_check(raw, seed)
    return [("rate-typical-event", rows[0][1],
             config["thresholds"]["rate_bound"], passed)]


def _check_minimize(raw, seed):
    config = RunConfig(raw)
    rows, passed = _minimize_check(raw, seed)
    gap = dict(rows)["relative_gap"]
    return [("mean-field-compatibility", gap,
             config["thresholds"]["minimize_relative_gap"], passed)]


def _check_poisson_law(raw, seed):
    from scipy import stats
    config = RunConfig(raw)
    dim = config.geometry().dim
    box = centered_box(1.0, dim)
    worst_p = 1.0
    for k, lam in enumerate((0.5, 2.0, 8.0)):
        rng = make_rng(seed, 51 + k)
        counts = np.array([len(sample_poisson_box(lam, box, rng))
                           for _ in range(100_000)])
        kmax = int(max(counts.max(), np.ceil(lam + 6 * np.sqrt(lam) + 5)))
        observed = np.bincount(counts, minlength=kmax + 1).astype(float)
        expected = stats.poisson.pmf(np.arange(kmax + 1), lam) * len(counts)
        expected[-1] = len(counts) - expected[:-1].sum()
        keep = expected >= 5.0
        obs = np.append(observed[keep], observed[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        if exp[-1] <= 0:
            obs, exp = obs[:-1], exp[:-1]
        chi2 = float(np.sum((obs - exp) ** 2 / exp))
        worst_p = min(worst_p, float(stats.chi2.sf(chi2, df=len(exp) - 1)))
    return [("poisson-count-law", worst_p, 0.01, worst_p >= 0.01)]


VERIFY_CHECKS = [
    ("kernel-valid", _check_kernel),
    ("g0-closed-form", _check_g0_closed_form),
    ("el-residual", _check_el_residual),
    ("poisson-count-law", _check_poisson_law),
    ("split-identity", _check_split),
    ("partition-function", _check_partition),
    ("entropy-oracle", _check_entropy),
    ("mean-field-compatibility", _check_minimize),
    ("rate-typical-event", _check_rate),
]


def _run_check(args):
    name, raw, seed = args
    fn = dict(VERIFY_CHECKS)[name]
    return fn(raw, seed)


@main.command("verify")
@common_options
def cmd_verify(config_path, seed, workers, out_dir, fmt):
    """Run the acceptance checks; exit 0 only if every threshold passes."""
    config, seed, outdir, manifest = _setup("verify", config_path, seed,
                                            out_dir)
    tasks = [(name, config.raw, seed) for name, _ in VERIFY_CHECKS]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_run_check, tasks):
                rows.extend(result)
    else:
        for task in tasks:
            rows.extend(_run_check(task))
    path = _write_rows(outdir, "verify",
                       ["check", "value", "threshold", "pass"], rows,
                       config, fmt)
    outputs = [path]
    if config["output"]["plot"]:
        outputs.append(report.render_verify(rows, outdir / "verify.png"))
    all_pass = all(r[3] for r in rows)
    for name, value, threshold, ok in rows:
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {name}: value {value:.4g} "
                   f"(threshold {threshold:.4g})")
    _finish(manifest, outdir, outputs, all_pass)
    sys.exit(EXIT_PASS if all_pass else EXIT_THRESHOLD)


if __name__ == "__main__":
    main()
