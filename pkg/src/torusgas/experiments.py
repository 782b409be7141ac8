"""Runnable experiments: splitting identity, next-order partition function,
mean-field compatibility, discrepancy diagnostics, and rate estimation.

Particle-level field values (h, zeta, V) are evaluated by trigonometric
interpolation of their grid representations, which keeps the splitting
identity exact up to solver residual and genuine discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .equilibrium import (
    EquilibriumSolution,
    ThermalSolution,
    thermal_energy,
    zeta_thermal,
)
from .fields import (
    TaggedFieldSample,
    FieldDictionary,
    intensity_profile,
    poisson_relative_entropy_rate,
    tagged_empirical_field,
)
from .geometry import (
    GridMeasure,
    SignedGridField,
    trig_interpolate,
)
from .kernels import KernelSpec, convolve, self_energy
from .pointconfig import PointConfig
from .sampling import GibbsSpec, SamplerConfig, make_rng, sample_gibbs, sample_iid


def _is_singular(kernel: KernelSpec) -> bool:
    return kernel.form == "riesz_periodic"


def _pair_sum(kernel: KernelSpec, config: PointConfig) -> float:
    """sum over ordered pairs i != j of g(x_i - x_j) from the continuous form.

    Coincident pairs under a singular kernel propagate as +inf.
    """
    deltas = config.pair_deltas()
    if len(deltas) == 0:
        return 0.0
    if _is_singular(kernel):
        if float(np.min(np.sqrt(np.sum(deltas * deltas, axis=-1)))) < 1e-12:
            return float("inf")
    return 2.0 * float(np.sum(kernel.point_eval(deltas)))


def fn_energy(x_n: PointConfig, mu: GridMeasure, kernel: KernelSpec) -> float:
    """Fluctuation energy of a configuration around a background density.

    (1/N^2) sum_{i != j} g(x_i - x_j) + E(mu) - 2 G(emp_N, mu); the cross term
    integrates the interpolated potential g * mu at the particle positions.
    Coincident particles under a singular kernel give +inf.
    """
    n = len(x_n)
    if n == 0:
        raise ValueError("fn_energy needs at least one particle")
    pair = _pair_sum(kernel, x_n) / n**2
    if pair == float("inf"):
        return pair
    e_mu = self_energy(kernel, mu)
    h_mu = convolve(kernel, mu.as_signed())
    h_at = trig_interpolate(h_mu.values, mu.geometry, x_n.points)
    cross = 2.0 * float(np.mean(h_at))
    return pair + e_mu - cross


@dataclass
class SplitReport:
    h_direct: float
    mean_field_term: float
    fn_term: float
    zeta_term: float
    residual: float
    relative_residual: float


def split_hamiltonian(x_n: PointConfig, sol: ThermalSolution,
                      kernel: KernelSpec, V: SignedGridField,
                      v_exact=None) -> SplitReport:
    """Check the exact rewriting of the Hamiltonian around the thermal measure.

    Per-particle values of the solution's fields are interpolated from the
    grid.  When ``v_exact`` supplies the true potential, the direct
    Hamiltonian uses it and the identity defect exposes the interpolation
    error of the grid fields; otherwise the same interpolant serves both
    sides and the defect reduces to the solver residual.
    """
    geom = sol.mu_theta.geometry
    n = len(x_n)
    theta = sol.theta
    if v_exact is not None:
        v_at = np.asarray(v_exact(x_n.points), float)
    else:
        v_at = trig_interpolate(V.values, geom, x_n.points)
    h_direct = _pair_sum(kernel, x_n) + n * float(np.sum(v_at))

    mean_field = n**2 * thermal_energy(sol.mu_theta, kernel, V, theta)
    pair = _pair_sum(kernel, x_n)
    e_mu = self_energy(kernel, sol.mu_theta)
    h_mu = convolve(kernel, sol.mu_theta.as_signed())
    h_at = trig_interpolate(h_mu.values, geom, x_n.points)
    fn_term = pair + n**2 * e_mu - 2.0 * n * float(np.sum(h_at))
    zeta = zeta_thermal(sol)
    zeta_at = trig_interpolate(zeta.values, geom, x_n.points)
    zeta_term = n * float(np.sum(zeta_at))

    residual = abs(h_direct - (mean_field + fn_term + zeta_term))
    return SplitReport(
        h_direct=h_direct,
        mean_field_term=mean_field,
        fn_term=fn_term,
        zeta_term=zeta_term,
        residual=residual,
        relative_residual=residual / (abs(h_direct) + 1.0),
    )


# ---------------------------------------------------------------------------
# next-order partition function
# ---------------------------------------------------------------------------

DIRECT_QUADRATURE_CAP = 10**7


@dataclass
class PartitionEstimate:
    n: int
    log_k_over_n: float
    error_bar: float
    mode: str


def _direct_log_z(kernel: KernelSpec, V: SignedGridField, beta: float,
                  n_particles: int) -> float:
    """Tensor-grid quadrature of the partition integral."""
    geom = V.geometry
    n_states = geom.n_cells**n_particles
    if n_states > DIRECT_QUADRATURE_CAP:
        raise MemoryError(f"direct quadrature needs {n_states} evaluations")
    tab = kernel.grid_table().ravel()
    v = V.values.ravel()
    m = geom.n_cells
    shape = (m,) * n_particles
    idx = [a.ravel() for a in np.meshgrid(*([np.arange(m)] * n_particles),
                                          indexing="ij")]
    energy = np.zeros(n_states)
    if geom.dim == 1:
        for a in range(n_particles):
            energy += n_particles * v[idx[a]]
            for b in range(n_particles):
                if a != b:
                    energy += tab[(idx[a] - idx[b]) % m]
    else:
        coords = [np.array(np.unravel_index(idx[a], geom.shape)).T
                  for a in range(n_particles)]
        for a in range(n_particles):
            energy += n_particles * v[idx[a]]
            for b in range(n_particles):
                if a != b:
                    diff = tuple(((coords[a][:, ax] - coords[b][:, ax])
                                  % geom.resolution)
                                 for ax in range(geom.dim))
                    energy += kernel.grid_table()[diff]
    x = -beta * energy
    xmax = x.max()
    return float(xmax + np.log(np.sum(np.exp(x - xmax)))
                 + n_particles * np.log(geom.cell_volume))


def _thermo_integration_log_z(kernel, V, beta, n_particles, seed,
                              levels=16, sweeps_per_level=400,
                              burn_in=150) -> tuple:
    """log Z by integrating the mean energy over inverse temperature."""
    geom = V.geometry
    t = geom.side
    log_z0 = n_particles * geom.dim * np.log(t)
    if beta == 0:
        return log_z0, 0.0
    betas = beta * np.geomspace(2.0**-12, 1.0, levels)
    grid = np.concatenate([[0.0], betas])
    # at beta = 0 the mean energy has a closed form under the uniform law
    tab_mean = float(kernel.grid_table().mean())
    v_mean = float(V.values.mean())
    means = [n_particles * (n_particles - 1) * tab_mean
             + n_particles**2 * v_mean]
    variances = [0.0]
    for li, b in enumerate(betas):
        spec = GibbsSpec(kernel, V, n_particles, beta=float(b))
        cfg = SamplerConfig(seed=int(seed) + li + 1, burn_in=burn_in, thin=2)
        energies = [s.energy for s in sample_gibbs(spec, cfg,
                                                   n_samples=sweeps_per_level)]
        means.append(float(np.mean(energies)))
        variances.append(float(np.var(energies) / max(len(energies), 1)))
    means = np.array(means)
    log_z = log_z0 - np.trapezoid(means, grid)
    half = np.diff(grid) / 2.0
    weights = np.zeros(len(grid))
    weights[:-1] += half
    weights[1:] += half
    err = float(np.sqrt(np.sum(weights**2 * np.array(variances))))
    return float(log_z), err


def estimate_next_order_partition(kernel: KernelSpec, V: SignedGridField,
                                  theta: float, n_list: Sequence[int],
                                  sol: Optional[ThermalSolution] = None,
                                  mode: str = "auto",
                                  seed: int = 0) -> List[PartitionEstimate]:
    """Per-N estimates of log(K_N)/N, exact by quadrature where affordable.

    K_N normalizes the partition function by the mean-field free-energy
    factor exp(-N^2 beta E), with beta = theta / N, so the g = 0 case must
    return exactly zero.
    """
    from .equilibrium import solve_thermal_equilibrium
    if sol is None:
        sol = solve_thermal_equilibrium(kernel, V, theta)
    e_theta = thermal_energy(sol.mu_theta, kernel, V, theta)
    out = []
    for n in n_list:
        beta = theta / n
        chosen = mode
        if mode == "auto":
            chosen = ("direct" if V.geometry.n_cells**n <= DIRECT_QUADRATURE_CAP
                      else "mcmc")
        if chosen == "direct":
            log_z = _direct_log_z(kernel, V, beta, n)
            err = 0.0
        else:
            log_z, err = _thermo_integration_log_z(kernel, V, beta, n, seed)
        log_k = log_z + n**2 * beta * e_theta
        out.append(PartitionEstimate(n=n, log_k_over_n=log_k / n,
                                     error_bar=err / n, mode=chosen))
    return out


# ---------------------------------------------------------------------------
# mean-field compatibility
# ---------------------------------------------------------------------------

def _config_energy(kernel, V, points, n):
    geom = V.geometry
    pair = 0.0
    if n >= 2:
        i, j = np.triu_indices(n, k=1)
        pair = 2.0 * float(np.sum(kernel.point_eval(points[i] - points[j])))
    v_at = trig_interpolate(V.values, geom, points)
    return pair + n * float(np.sum(v_at))


def minimize_hamiltonian(kernel: KernelSpec, V: SignedGridField, n: int,
                         restarts: int = 8, seed: int = 0,
                         cooling: float = 0.95,
                         proposals_per_stage: Optional[int] = None,
                         min_temperature_ratio: float = 3e-3
                         ) -> tuple[PointConfig, float]:
    """Simulated annealing plus local descent; returns (config, H/n^2).

    The value is an upper-bound certificate for the minimal energy per
    particle pair.  Geometric cooling by ``cooling`` every 100 n proposals;
    all restart chains advance in lockstep as one vectorized batch.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    geom = V.geometry
    from .geometry import TrigInterpolator
    v_interp = TrigInterpolator(V.values, geom)
    stage_len = proposals_per_stage or 100 * n
    rng = make_rng(seed)
    c = restarts
    points = rng.uniform(0, geom.side, size=(c, n, geom.dim))
    rows = np.arange(c)
    g_self = float(kernel.point_eval(np.zeros((1, geom.dim)))[0])

    def batch_delta(idx, new):
        """Energy change per chain when particle idx[c] moves to new[c]."""
        old = points[rows, idx]
        if n >= 2:
            d_new = new[:, None, :] - points       # (c, n, dim)
            d_old = old[:, None, :] - points
            g_new = kernel.point_eval(d_new.reshape(c * n, -1)).reshape(c, n)
            g_old = kernel.point_eval(d_old.reshape(c * n, -1)).reshape(c, n)
            # remove the self term (j = idx) from both sums
            sum_new = g_new.sum(axis=1) - g_new[rows, idx]
            sum_old = g_old.sum(axis=1) - g_self
            pair = 2.0 * (sum_new - sum_old)
        else:
            pair = np.zeros(c)
        dv = v_interp(new) - v_interp(old)
        return pair + n * dv

    probes = [
        _config_energy(kernel, V, rng.uniform(0, geom.side, (n, geom.dim)), n)
        for _ in range(8)
    ]
    temp0 = max(float(np.std(probes)), 1e-6)
    temp = temp0
    scale = geom.side * n ** (-1.0 / geom.dim)
    while temp > temp0 * min_temperature_ratio:
        for _ in range(stage_len):
            idx = rng.integers(n, size=c)
            new = geom.wrap(points[rows, idx]
                            + rng.normal(0, scale, size=(c, geom.dim)))
            delta = batch_delta(idx, new)
            accept = (delta <= 0) | (rng.uniform(size=c) < np.exp(
                -np.clip(delta, 0, 700) / temp))
            points[rows[accept], idx[accept]] = new[accept]
        temp *= cooling
    for descent_scale in (scale, scale / 4, scale / 16):
        for _ in range(25 * n):
            idx = rng.integers(n, size=c)
            new = geom.wrap(points[rows, idx]
                            + rng.normal(0, descent_scale, size=(c, geom.dim)))
            delta = batch_delta(idx, new)
            accept = delta < 0
            points[rows[accept], idx[accept]] = new[accept]
    energies = np.array([_config_energy(kernel, V, points[k], n)
                         for k in range(c)])
    best = int(np.argmin(energies))
    return PointConfig(geom, points[best]), float(energies[best]) / n**2


# ---------------------------------------------------------------------------
# discrepancy
# ---------------------------------------------------------------------------

def discrepancy(x_n: PointConfig, rho: GridMeasure, eta: float) -> float:
    """Max absolute cell-mass gap between the empirical measure and rho.

    Cells have side eta; the last cell per axis absorbs any remainder.  The
    density's grid cells are assigned to eta-cells by their centers.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    geom = rho.geometry
    side = geom.side
    n_cells = max(1, int(np.floor(side / eta + 1e-12)))
    d = geom.dim

    def cell_of(coords):
        return np.minimum((coords // eta).astype(int), n_cells - 1)

    emp = np.zeros((n_cells,) * d)
    if len(x_n):
        idx = cell_of(x_n.points)
        np.add.at(emp, tuple(idx.T), 1.0 / len(x_n))
    rho_mass = np.zeros((n_cells,) * d)
    centers = geom.centers().reshape(-1, d)
    idx = cell_of(centers)
    np.add.at(rho_mass, tuple(idx.T),
              rho.values.ravel() * geom.cell_volume / rho.mass)
    return float(np.max(np.abs(emp - rho_mass)))


# ---------------------------------------------------------------------------
# rate-function estimation
# ---------------------------------------------------------------------------

@dataclass
class RateEstimate:
    n_grid: List[int]
    minus_log_prob_over_n: List[float]
    error_bars: List[tuple]
    hit_counts: List[int]
    sample_counts: List[int]
    lower_bound_only: List[bool]
    predicted: float
    ball_radius: float


def _wilson_interval(hits: int, total: int, z: float = 1.96) -> tuple:
    if total == 0:
        return (0.0, 1.0)
    p = hits / total
    denom = 1 + z**2 / total
    center = (p + z**2 / (2 * total)) / denom
    half = z * np.sqrt(p * (1 - p) / total + z**2 / (4 * total**2)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


def predicted_rate(target: TaggedFieldSample, sol: ThermalSolution,
                   kernel: KernelSpec, n_bins: int = 16) -> float:
    """Energy-plus-entropy prediction for the delta-ball event at the target.

    rho is read off the target's intensity profile; the entropy term
    integrates the per-volume Poisson rate of rho against the thermal density.
    """
    geom = sol.mu_theta.geometry
    prof = intensity_profile(target, n_bins)
    rho = prof.as_grid_measure(geom.resolution)
    diff = SignedGridField(geom, rho.values - sol.mu_theta.values)
    energy_term = sol.theta * self_energy(kernel, diff)
    rates = [
        poisson_relative_entropy_rate(float(r), float(m))
        for r, m in zip(rho.values.ravel(), sol.mu_theta.values.ravel())
    ]
    entropy_term = float(np.sum(rates) * geom.cell_volume)
    return energy_term + entropy_term


def estimate_rate(kernel: KernelSpec, V: SignedGridField, theta: float,
                  target: TaggedFieldSample, delta: float,
                  n_list: Sequence[int], samples_per_n: int,
                  seed: int = 0, m_tags: int = 64,
                  dictionary_size: int = 256,
                  sol: Optional[ThermalSolution] = None,
                  mode: str = "auto",
                  mcmc_burn_in: int = 100, mcmc_thin: int = 2) -> RateEstimate:
    """Monte Carlo estimate of -(1/N) log P(field within delta of target).

    For g = 0 the Gibbs measure factorizes, so sampling is i.i.d. from the
    thermal density; otherwise a Metropolis chain supplies the samples.  Zero
    hits produce a one-sided lower bound instead of a point estimate.
    """
    from .equilibrium import solve_thermal_equilibrium
    if delta <= 0:
        raise ValueError("delta must be positive")
    if sol is None:
        sol = solve_thermal_equilibrium(kernel, V, theta)
    geom = sol.mu_theta.geometry
    dictionary = FieldDictionary(geom, target.window_radius,
                                 size=dictionary_size, seed=seed)
    target_features = dictionary.features(target)

    g_is_zero = float(np.max(np.abs(kernel.grid_table()))) == 0.0
    use_iid = mode == "iid" or (mode == "auto" and g_is_zero)

    estimates, bars, hit_counts, totals, lower_only = [], [], [], [], []
    for ni, n in enumerate(n_list):
        rng = make_rng(seed, 101 + ni)
        hits = 0
        if use_iid:
            draws = (sample_iid(sol.mu_theta, n, rng)
                     for _ in range(samples_per_n))
        else:
            spec = GibbsSpec(kernel, V, n, theta=theta,
                             initial_density=sol.mu_theta)
            cfg = SamplerConfig(seed=int(seed) + 7000 + ni,
                                burn_in=mcmc_burn_in, thin=mcmc_thin)
            draws = (s.config for s in sample_gibbs(spec, cfg,
                                                    n_samples=samples_per_n))
        for cfg_draw in draws:
            sample = tagged_empirical_field(cfg_draw, m_tags,
                                            target.window_radius)
            dist = float(np.max(np.abs(dictionary.features(sample)
                                       - target_features)))
            if dist <= delta:
                hits += 1
        lo, hi = _wilson_interval(hits, samples_per_n)
        if hits == 0:
            estimates.append(-np.log(hi) / n)  # one-sided lower bound
            bars.append((-np.log(hi) / n, float("inf")))
            lower_only.append(True)
        else:
            freq = hits / samples_per_n
            estimates.append(-np.log(freq) / n)
            upper = -np.log(lo) / n if lo > 0 else float("inf")
            bars.append((-np.log(hi) / n, upper))
            lower_only.append(False)
        hit_counts.append(hits)
        totals.append(samples_per_n)
    return RateEstimate(
        n_grid=list(n_list),
        minus_log_prob_over_n=estimates,
        error_bars=bars,
        hit_counts=hit_counts,
        sample_counts=totals,
        lower_bound_only=lower_only,
        predicted=predicted_rate(target, sol, kernel),
        ball_radius=delta,
    )


def calibrate_ball_radius(kernel: KernelSpec, V: SignedGridField, theta: float,
                          target: TaggedFieldSample, n: int,
                          pilot_samples: int = 100, quantile: float = 0.6,
                          seed: int = 0, m_tags: int = 64,
                          dictionary_size: int = 256,
                          sol: Optional[ThermalSolution] = None) -> float:
    """Pick delta as a quantile of pilot distances from typical samples."""
    from .equilibrium import solve_thermal_equilibrium
    if sol is None:
        sol = solve_thermal_equilibrium(kernel, V, theta)
    geom = sol.mu_theta.geometry
    dictionary = FieldDictionary(geom, target.window_radius,
                                 size=dictionary_size, seed=seed)
    target_features = dictionary.features(target)
    rng = make_rng(seed, 55)
    dists = []
    for _ in range(pilot_samples):
        cfg = sample_iid(sol.mu_theta, n, rng)
        sample = tagged_empirical_field(cfg, m_tags, target.window_radius)
        dists.append(float(np.max(np.abs(dictionary.features(sample)
                                         - target_features))))
    return float(np.quantile(dists, quantile))


# ---------------------------------------------------------------------------
# appendix constants for the Euclidean-window equilibrium measure
# ---------------------------------------------------------------------------

@dataclass
class MidTemperatureConstants:
    ent_mu_v: float
    support_volume: float
    omega_volume: float
    c_omega_sigma: float
    predicted_limit: float
    omega_table: dict


def riesz_midtemp_constants(eqsol: EquilibriumSolution,
                            n_beta_values: Sequence[float] = (10.0, 100.0, 1000.0),
                            zero_tol: Optional[float] = None
                            ) -> MidTemperatureConstants:
    """Entropy constant, support volume, and the exponential-weight table.

    The candidate limit is ent[mu] - 1 + |support|; omega collects the cells
    where the obstacle field vanishes.  Refuses solutions whose support
    touches the window boundary (the support would be untrusted).
    """
    if eqsol.boundary_contact:
        raise ValueError("support touches the window boundary; "
                         "enlarge the window before extracting constants")
    cv = eqsol.grid.cell_volume
    mu = eqsol.mu_V
    pos = mu[mu > 0]
    ent_mu = float(np.sum(pos * np.log(pos)) * cv)
    support_volume = float(np.count_nonzero(eqsol.support_mask) * cv)
    zeta = eqsol.zeta()
    tol = zero_tol if zero_tol is not None else max(10 * eqsol.residual, 1e-9)
    omega_volume = float(np.count_nonzero(np.abs(zeta) <= tol) * cv)
    table = {
        float(nb): float(np.sum(np.exp(-2.0 * nb * np.maximum(zeta, 0.0))) * cv)
        for nb in n_beta_values
    }
    return MidTemperatureConstants(
        ent_mu_v=ent_mu,
        support_volume=support_volume,
        omega_volume=omega_volume,
        c_omega_sigma=float(np.log(omega_volume) - support_volume + 1.0),
        predicted_limit=ent_mu - 1.0 + support_volume,
        omega_table=table,
    )
