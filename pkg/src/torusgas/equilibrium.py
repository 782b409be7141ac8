"""Energy/entropy functionals and equilibrium-measure solvers.

Covers the thermal equilibrium measure on the torus (damped fixed point on
the first-order condition) and the classical equilibrium measure on a
Euclidean window (projected gradient over the probability simplex).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .geometry import (
    Box,
    GridMeasure,
    SignedGridField,
    grid_from_csv,
    grid_to_csv,
    require_same_geometry,
)
from .kernels import KernelSpec, convolve, interaction_energy, validate_kernel

DENSITY_FLOOR = 1e-300  # clamp before logs; keeps "mu > 0 a.e." representable
RESIDUAL_CUTOFF = 1e-14  # cells below this are excluded from the EL residual


class SolverError(RuntimeError):
    """Solver did not converge; carries the last iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


def entropy(mu: GridMeasure) -> float:
    """int log(d mu) d mu by cell quadrature, with 0 log 0 = 0."""
    vals = mu.values
    if np.any(vals < 0):
        raise ValueError("entropy requires a nonnegative density")
    pos = vals[vals > 0]
    return float(np.sum(pos * np.log(pos)) * mu.geometry.cell_volume)


def relative_entropy_measures(mu: GridMeasure, nu: GridMeasure) -> float:
    """int (dmu/dnu) log(dmu/dnu) dnu; +inf if mu is not dominated by nu."""
    require_same_geometry(mu, nu)
    m, n = mu.values, nu.values
    if np.any((m > 0) & (n <= 0)):
        return float("inf")
    mask = m > 0
    ratio = m[mask] / n[mask]
    return float(np.sum(n[mask] * ratio * np.log(ratio)) * mu.geometry.cell_volume)


def mean_field_energy(mu: GridMeasure, kernel: KernelSpec,
                      V: SignedGridField) -> float:
    """E(mu) + int V dmu, the interaction functional without the entropy term."""
    require_same_geometry(mu.as_signed(), V)
    e = interaction_energy(kernel, mu, mu)
    pot = float(np.sum(V.values * mu.values) * mu.geometry.cell_volume)
    return e + pot


def thermal_energy(mu: GridMeasure, kernel: KernelSpec, V: SignedGridField,
                   theta: float) -> float:
    """Mean-field energy plus entropy at inverse strength 1/theta."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return mean_field_energy(mu, kernel, V) + entropy(mu) / theta


@dataclass
class SolverOptions:
    tol: float = 1e-10          # sup-norm change between accepted iterates
    max_iterations: int = 50000
    damping: float = 0.5
    skip_validation: bool = False


@dataclass
class ThermalSolution:
    mu_theta: GridMeasure
    theta: float
    el_constant: float
    residual: float
    iterations: int
    energy: float

    def to_files(self, csv_path, sidecar_path) -> None:
        grid_to_csv(self.mu_theta, csv_path)
        Path(sidecar_path).write_text(json.dumps({
            "theta": self.theta,
            "el_constant": self.el_constant,
            "residual": self.residual,
            "iterations": self.iterations,
            "energy": self.energy,
        }, indent=2) + "\n")

    @classmethod
    def from_files(cls, csv_path, sidecar_path):
        mu = grid_from_csv(csv_path, kind="measure")
        meta = json.loads(Path(sidecar_path).read_text())
        return cls(mu, meta["theta"], meta["el_constant"], meta["residual"],
                   meta["iterations"], meta.get("energy", float("nan")))


def _first_order_stats(mu_vals, h_vals, V_vals, theta, cell_volume):
    """EL constant (mass-weighted mean) and sup residual of the condition."""
    logmu = np.log(np.maximum(mu_vals, DENSITY_FLOOR))
    lhs = 2.0 * h_vals + V_vals + logmu / theta
    weights = mu_vals * cell_volume
    c = float(np.sum(lhs * weights) / np.sum(weights))
    mask = mu_vals > RESIDUAL_CUTOFF
    residual = float(np.max(np.abs(lhs[mask] - c))) if mask.any() else float("inf")
    return c, residual


def solve_thermal_equilibrium(kernel: KernelSpec, V: SignedGridField,
                              theta: float,
                              opts: Optional[SolverOptions] = None,
                              initial: Optional[GridMeasure] = None) -> ThermalSolution:
    """Minimize the thermal energy over probability densities on the torus.

    Damped fixed-point iteration on mu = normalize(exp(-theta(2 g*mu + V))).
    Iterates are accepted only if the thermal energy does not increase (within
    1e-12 slack); on an increase the damping factor is halved and the step
    retried.  The returned residual is the sup-norm violation of the
    first-order condition, with the constant chosen as the mass-weighted mean.
    """
    opts = opts or SolverOptions()
    if theta <= 0:
        raise ValueError("theta must be positive")
    if not opts.skip_validation:
        report = validate_kernel(kernel)
        if not (report.symmetric and report.weakly_positive_definite):
            raise SolverError(f"kernel failed validation: {report}")
    geom = require_same_geometry(V)
    if kernel.geometry != geom:
        raise SolverError("kernel and potential geometries differ")

    if initial is not None:
        mu = initial.values.copy()
    else:
        mu = np.full(geom.shape, 1.0 / geom.side**geom.dim)
    alpha = opts.damping
    energy = thermal_energy(GridMeasure(geom, mu), kernel, V, theta)
    iterations = 0
    change = float("inf")
    for iterations in range(1, opts.max_iterations + 1):
        h = convolve(kernel, SignedGridField(geom, mu)).values
        exponent = -theta * (2.0 * h + V.values)
        exponent -= exponent.max()  # stabilize before exponentiation
        target = np.exp(exponent)
        target /= target.sum() * geom.cell_volume
        accepted = False
        while alpha > 1e-8:
            candidate = (1.0 - alpha) * mu + alpha * target
            cand_energy = thermal_energy(GridMeasure(geom, candidate), kernel,
                                         V, theta)
            if cand_energy <= energy + 1e-12:
                accepted = True
                break
            alpha *= 0.5  # oscillation guard: halve the damping
        if not accepted:
            break
        change = float(np.max(np.abs(candidate - mu)))
        mu = candidate
        energy = cand_energy
        if change < opts.tol:
            break

    h = convolve(kernel, SignedGridField(geom, mu)).values
    c, residual = _first_order_stats(mu, h, V.values, theta, geom.cell_volume)
    solution = ThermalSolution(GridMeasure(geom, mu), theta, c, residual,
                               iterations, energy)
    if change >= opts.tol:
        raise SolverError(
            f"thermal solver did not converge in {iterations} iterations "
            f"(last change {change:.3e}, residual {residual:.3e})",
            solution=solution)
    return solution


def zeta_thermal(sol: ThermalSolution) -> SignedGridField:
    """The confinement-like field -(1/theta) log mu_theta."""
    vals = -np.log(np.maximum(sol.mu_theta.values, DENSITY_FLOOR)) / sol.theta
    return SignedGridField(sol.mu_theta.geometry, vals)


# ---------------------------------------------------------------------------
# classical equilibrium measure on a Euclidean window
# ---------------------------------------------------------------------------

@dataclass
class WindowGrid:
    """Uniform grid over a Euclidean box window (1d supported)."""

    box: Box
    resolution: int

    @property
    def cell_side(self) -> float:
        return float(self.box.sides[0]) / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.cell_side ** self.box.dim

    def centers(self) -> np.ndarray:
        lo = np.asarray(self.box.lower)
        h = self.cell_side
        axes = [lo[a] + (np.arange(self.resolution) + 0.5) * h
                for a in range(self.box.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.box.dim)


def log_window_kernel() -> Callable[[np.ndarray], np.ndarray]:
    """g(x) = -log|x| on Euclidean space."""
    def g(r):
        return -np.log(np.maximum(r, 1e-300))
    return g


def riesz_window_kernel(d: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    p = d - 2 * s
    def g(r):
        return np.maximum(r, 1e-300) ** (-p)
    return g


def window_kernel_matrix(grid: WindowGrid, g: Callable, diag_samples: int = 20001
                         ) -> np.ndarray:
    """Dense pairwise kernel matrix with a cell-averaged diagonal.

    The diagonal entry is the average of g over displacements inside one cell,
    which keeps energies finite for integrable singularities.
    """
    pts = grid.centers()
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    mat = g(r)
    h = grid.cell_side
    if grid.box.dim == 1:
        xs = (np.arange(diag_samples) + 0.5) / diag_samples * h - h / 2
        diag = float(np.mean(g(np.abs(xs))))
    else:
        m = 64
        axis = (np.arange(m) + 0.5) / m * h - h / 2
        mesh = np.meshgrid(*([axis] * grid.box.dim), indexing="ij")
        rr = np.sqrt(sum(c * c for c in mesh))
        diag = float(np.mean(g(rr)))
    np.fill_diagonal(mat, diag)
    return mat


def _project_simplex_weighted(v: np.ndarray, w: float, total: float) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, w * sum(x) = total}."""
    target = total / w
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    cond = u - (css - target) / k > 0
    rho = np.max(k[cond])
    lam = (css[rho - 1] - target) / rho
    return np.maximum(v - lam, 0.0)


@dataclass
class EquilibriumSolution:
    grid: WindowGrid
    mu_V: np.ndarray
    support_mask: np.ndarray
    obstacle_constant: float
    residual: float
    iterations: int
    boundary_contact: bool
    h_field: np.ndarray
    V_values: np.ndarray

    def zeta(self) -> np.ndarray:
        """h + V/2 + c; zero on the support, nonnegative off it."""
        return self.h_field + 0.5 * self.V_values + self.obstacle_constant


def solve_equilibrium_measure(grid: WindowGrid, g, V_values: np.ndarray,
                              max_iterations: int = 40000, tol: float = 1e-12,
                              step: Optional[float] = None) -> EquilibriumSolution:
    """Projected gradient descent for the obstacle-type equilibrium problem.

    ``g`` is either a radial callable or a precomputed kernel matrix.  The
    returned solution carries the support mask (cells above mass * 1e-8) and
    the complementarity residual of the first-order conditions.
    """
    mat = g if isinstance(g, np.ndarray) else window_kernel_matrix(grid, g)
    V = np.asarray(V_values, float).ravel()
    m = len(V)
    cv = grid.cell_volume
    mu = np.full(m, 1.0 / (m * cv))
    # Lipschitz scale of the gradient 2*K*mu*cv + V
    lip = 2.0 * np.max(np.sum(np.abs(mat), axis=1)) * cv * cv
    gamma = step if step is not None else 1.0 / max(lip, 1e-12)

    def energy_and_grad(x):
        h = mat @ x * cv
        e = float(x @ h * cv + x @ V * cv)
        return e, 2.0 * h + V

    energy, grad = energy_and_grad(mu)
    iterations = 0
    change = float("inf")
    for iterations in range(1, max_iterations + 1):
        candidate = _project_simplex_weighted(mu - gamma * grad, cv, 1.0)
        cand_energy, cand_grad = energy_and_grad(candidate)
        if cand_energy > energy + 1e-14:
            gamma *= 0.5
            if gamma < 1e-18:
                break
            continue
        change = float(np.max(np.abs(candidate - mu)))
        mu, energy, grad = candidate, cand_energy, cand_grad
        if change < tol:
            break
    converged = change < tol or gamma < 1e-18

    h = mat @ mu * cv
    support = mu > mu.sum() * cv * 1e-8
    c = -float(np.mean(h[support] + 0.5 * V[support]))
    zeta = h + 0.5 * V + c
    on_res = float(np.max(np.abs(zeta[support]))) if support.any() else np.inf
    off = ~support
    off_res = float(max(0.0, -np.min(zeta[off]))) if off.any() else 0.0
    residual = max(on_res, off_res)
    # support touching the window edge means the window was too small
    edge = np.zeros(m, bool).reshape((grid.resolution,) * grid.box.dim)
    for a in range(grid.box.dim):
        sl = [slice(None)] * grid.box.dim
        sl[a] = 0
        edge[tuple(sl)] = True
        sl[a] = -1
        edge[tuple(sl)] = True
    boundary_contact = bool(np.any(support.reshape(edge.shape) & edge))
    solution = EquilibriumSolution(grid, mu, support, c, residual, iterations,
                                   boundary_contact, h, V)
    if not converged:
        raise SolverError(
            f"window solver did not converge in {iterations} iterations "
            f"(last change {change:.3e})", solution=solution)
    return solution
