"""Samplers: Poisson point processes, i.i.d. draws, and the Metropolis chain.

All randomness flows through numpy Generators seeded from a SeedSequence, so
identical seeds reproduce bit-identical streams and sub-streams can be
spawned for parallel work.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .geometry import (
    Box,
    GridMeasure,
    SignedGridField,
    nearest_cell_values,
)
from .kernels import KernelSpec, validate_kernel
from .pointconfig import PointConfig


class SamplerError(RuntimeError):
    """Sampler could not be initialized or exhausted its attempt budget."""


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Deterministic generator; extra integers select independent sub-streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


@dataclass
class SamplerConfig:
    seed: int = 0
    burn_in: int = 200          # sweeps discarded before emitting samples
    thin: int = 1               # sweeps between kept samples
    proposal_scale: Optional[float] = None
    target_acceptance: float = 0.3
    adapt: bool = True
    init_attempts: int = 100

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0,1)")


@dataclass
class GibbsSpec:
    """Gibbs measure of the pairwise-plus-confinement Hamiltonian."""

    kernel: KernelSpec
    V: SignedGridField
    n_particles: int
    theta: Optional[float] = None   # high-temperature mode: beta = theta / N
    beta: Optional[float] = None    # explicit inverse temperature
    initial_density: Optional[GridMeasure] = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if (self.theta is None) == (self.beta is None):
            raise ValueError("specify exactly one of theta or beta")
        if self.theta is not None and self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be nonnegative")

    @property
    def effective_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return self.theta / self.n_particles


# ---------------------------------------------------------------------------
# Poisson and i.i.d. reference samplers
# ---------------------------------------------------------------------------

def sample_poisson_box(lam: float, box: Box, rng: np.random.Generator) -> PointConfig:
    """Homogeneous Poisson process: Poisson count, then uniform locations."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    n = int(rng.poisson(lam * box.volume))
    lo = np.asarray(box.lower, float)
    hi = np.asarray(box.upper, float)
    pts = rng.uniform(lo, hi, size=(n, box.dim))
    return PointConfig(box, pts)


def _cells_and_jitter(mu: GridMeasure, n: int, rng) -> np.ndarray:
    """n points i.i.d. from mu via cell-index inversion plus in-cell jitter."""
    geom = mu.geometry
    weights = mu.values.ravel()
    total = weights.sum()
    flat = rng.choice(len(weights), size=n, p=weights / total)
    idx = np.array(np.unravel_index(flat, geom.shape)).T
    h = geom.cell_side
    return (idx + rng.uniform(0, 1, size=(n, geom.dim))) * h


def sample_poisson_inhomogeneous(mu: GridMeasure, rng) -> PointConfig:
    """Poisson process with intensity mu: total count Poisson(mass of mu)."""
    geom = mu.geometry
    if mu.mass <= 0:
        return PointConfig(geom, np.zeros((0, geom.dim)))
    n = int(rng.poisson(mu.mass))
    if n == 0:
        return PointConfig(geom, np.zeros((0, geom.dim)))
    return PointConfig(geom, _cells_and_jitter(mu, n, rng))


def sample_iid(mu: GridMeasure, n: int, rng) -> PointConfig:
    if n < 0:
        raise ValueError("n must be nonnegative")
    geom = mu.geometry
    if n == 0:
        return PointConfig(geom, np.zeros((0, geom.dim)))
    return PointConfig(geom, _cells_and_jitter(mu, n, rng))


def condition_on_count(intensity: GridMeasure, n: int, rng,
                       rejection: bool = False,
                       max_attempts: int = 1_000_000) -> PointConfig:
    """Poisson process conditioned on a total count of n.

    Given the count, Poisson points are i.i.d. from the normalized intensity,
    so the direct mode needs no rejection.  The rejection mode resamples
    Poisson draws until the count matches and exists for validation.
    """
    if intensity.mass <= 0:
        raise ValueError("conditioning requires positive total intensity")
    if not rejection:
        return sample_iid(intensity.normalized(), n, rng)
    for _ in range(max_attempts):
        draw = sample_poisson_inhomogeneous(intensity, rng)
        if len(draw) == n:
            return draw
    raise SamplerError(f"no count-{n} draw within {max_attempts} attempts")


# ---------------------------------------------------------------------------
# Metropolis chain for the Gibbs measure
# ---------------------------------------------------------------------------

@dataclass
class GibbsSample:
    config: PointConfig
    sweep_index: int
    energy: float
    acceptance_rate: float


def hamiltonian(spec: GibbsSpec, points: np.ndarray) -> float:
    """sum_{i != j} g(x_i - x_j) + N sum_i V(x_i), pair term off-grid exact."""
    n = len(points)
    geom = spec.V.geometry
    pair = 0.0
    if n >= 2:
        i, j = np.triu_indices(n, k=1)
        deltas = points[i] - points[j]
        pair = 2.0 * float(np.sum(spec.kernel.point_eval(deltas)))
    v_vals = nearest_cell_values(spec.V.values, geom, points)
    return pair + spec.n_particles * float(np.sum(v_vals))


def sample_gibbs(spec: GibbsSpec, cfg: SamplerConfig,
                 n_samples: Optional[int] = None) -> Iterator[GibbsSample]:
    """Metropolis chain over particle positions on the torus.

    Single-particle wrapped-Gaussian proposals; the energy change is computed
    incrementally in O(N).  During burn-in the proposal scale adapts toward
    the target acceptance rate.  Emits a configuration every ``thin`` sweeps
    after burn-in, indefinitely unless ``n_samples`` is given.
    """
    report = validate_kernel(spec.kernel)
    if not report.symmetric:
        raise SamplerError("asymmetric kernel: the chain would not be reversible")
    geom = spec.V.geometry
    n = spec.n_particles
    beta = spec.effective_beta
    rng = make_rng(cfg.seed)
    scale = cfg.proposal_scale
    if scale is None:
        scale = geom.side * n ** (-1.0 / geom.dim)  # the microscopic scale

    init_mu = spec.initial_density
    points = None
    for _ in range(cfg.init_attempts):
        if init_mu is not None:
            cand = _cells_and_jitter(init_mu, n, rng)
        else:
            cand = rng.uniform(0, geom.side, size=(n, geom.dim))
        if np.isfinite(hamiltonian(spec, cand)):
            points = cand
            break
    if points is None:
        raise SamplerError("could not find a finite-energy initial state")

    v_vals = nearest_cell_values(spec.V.values, geom, points)
    accepted = 0
    proposed = 0
    sweep = 0
    emitted = 0
    while n_samples is None or emitted < n_samples:
        sweep += 1
        for i in range(n):
            proposed += 1
            old = points[i].copy()
            new = geom.wrap(old + rng.normal(0.0, scale, size=geom.dim))
            others = np.delete(np.arange(n), i)
            if len(others):
                g_new = spec.kernel.point_eval(new[None, :] - points[others])
                g_old = spec.kernel.point_eval(old[None, :] - points[others])
            else:
                g_new = g_old = np.zeros(0)
            v_new = float(nearest_cell_values(spec.V.values, geom, new[None, :])[0])
            delta = (2.0 * float(g_new.sum() - g_old.sum())
                     + n * (v_new - v_vals[i]))
            if np.isfinite(delta) and np.log(rng.uniform()) < -beta * delta:
                accepted += 1
                points[i] = new
                v_vals[i] = v_new
        if cfg.adapt and sweep <= cfg.burn_in and sweep % 25 == 0:
            rate = accepted / max(proposed, 1)
            scale *= float(np.exp(0.5 * (rate - cfg.target_acceptance)))
            scale = float(np.clip(scale, 1e-6 * geom.side, geom.side))
        if sweep > cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
            emitted += 1
            yield GibbsSample(
                config=PointConfig(geom, points.copy()),
                sweep_index=sweep,
                energy=hamiltonian(spec, points),
                acceptance_rate=accepted / max(proposed, 1),
            )


# ---------------------------------------------------------------------------
# fully enumerated discrete toy (validation of the Metropolis kernel)
# ---------------------------------------------------------------------------

def toy_states(n_cells: int, n_particles: int):
    return list(itertools.product(range(n_cells), repeat=n_particles))


def toy_hamiltonian(state, kernel_table: np.ndarray, v_table: np.ndarray,
                    n_particles: int) -> float:
    n_cells = len(v_table)
    pair = 0.0
    for a in range(len(state)):
        for b in range(len(state)):
            if a != b:
                pair += kernel_table[(state[a] - state[b]) % n_cells]
    return pair + n_particles * sum(v_table[c] for c in state)


def toy_transition_matrix(kernel_table: np.ndarray, v_table: np.ndarray,
                          n_particles: int, beta: float) -> tuple:
    """Metropolis kernel on the discretized toy: returns (P, stationary pi).

    Proposal: pick a particle uniformly, move it one cell left or right with
    equal probability; accept with min(1, exp(-beta * dH)).
    """
    n_cells = len(v_table)
    states = toy_states(n_cells, n_particles)
    index = {s: k for k, s in enumerate(states)}
    energies = np.array([toy_hamiltonian(s, kernel_table, v_table, n_particles)
                         for s in states])
    m = len(states)
    P = np.zeros((m, m))
    for k, s in enumerate(states):
        for i in range(n_particles):
            for step in (-1, 1):
                t = list(s)
                t[i] = (t[i] + step) % n_cells
                kk = index[tuple(t)]
                prob = (1.0 / (2 * n_particles)) * min(
                    1.0, float(np.exp(-beta * (energies[kk] - energies[k]))))
                P[k, kk] += prob
        P[k, k] += 1.0 - P[k].sum()
    weights = np.exp(-beta * (energies - energies.min()))
    return P, weights / weights.sum()
