"""Splitting identity, partition function, annealing, discrepancy, rate."""
import numpy as np
import pytest

from torusgas.geometry import GridMeasure, SignedGridField, TorusGeometry, uniform_measure
from torusgas.kernels import cosine_kernel, riesz_kernel, self_energy, zero_kernel
from torusgas.potentials import bernoulli_potential, cosine_potential, zero_potential
from torusgas.equilibrium import (
    SolverOptions,
    WindowGrid,
    solve_thermal_equilibrium,
)
from torusgas.experiments import (
    calibrate_ball_radius,
    discrepancy,
    estimate_next_order_partition,
    estimate_rate,
    fn_energy,
    minimize_hamiltonian,
    riesz_midtemp_constants,
    split_hamiltonian,
)
from torusgas.fields import tagged_empirical_field
from torusgas.pointconfig import PointConfig
from torusgas.sampling import make_rng, sample_iid

TIGHT = SolverOptions(tol=1e-13)


# -- fn_energy -----------------------------------------------------------------

def test_fn_energy_single_particle():
    geom = TorusGeometry(1, 1.0, 32)
    kernel = cosine_kernel(geom)
    mu = uniform_measure(geom)
    cfg = PointConfig(geom, np.array([[0.3]]))
    # empty pair sum; uniform background has zero energy for a zero-mean kernel
    assert fn_energy(cfg, mu, kernel) == pytest.approx(0.0, abs=1e-12)


def test_fn_energy_two_particles_hand_formula():
    geom = TorusGeometry(1, 1.0, 64)
    kernel = cosine_kernel(geom)
    mu = uniform_measure(geom)
    rng = make_rng(0)
    for _ in range(5):
        x1, x2 = rng.uniform(0, 1, 2)
        cfg = PointConfig(geom, np.array([[x1], [x2]]))
        want = np.cos(2 * np.pi * (x1 - x2)) / 2.0
        assert fn_energy(cfg, mu, kernel) == pytest.approx(want, abs=1e-12)


def test_fn_energy_lln_trend():
    geom = TorusGeometry(1, 1.0, 64)
    kernel = cosine_kernel(geom)
    vals = 1.0 + 0.5 * np.cos(2 * np.pi * geom.axis_centers())
    mu = GridMeasure(geom, vals)
    rng = make_rng(1)
    means = []
    for n in (8, 32, 128):
        fs = [abs(fn_energy(sample_iid(mu, n, rng), mu, kernel))
              for _ in range(40)]
        means.append(np.mean(fs))
    assert means[0] > means[1] > means[2]
    assert means[2] < 0.05


def test_fn_energy_lsc_surrogate():
    # liminf of F_N(emp, mu) dominates E(nu - mu) for iid-from-nu samples
    geom = TorusGeometry(1, 1.0, 64)
    kernel = cosine_kernel(geom)
    vals = 1.0 + 0.5 * np.cos(2 * np.pi * geom.axis_centers())
    nu = GridMeasure(geom, vals)
    mu = uniform_measure(geom)
    gap = self_energy(kernel, SignedGridField(geom, nu.values - mu.values))
    rng = make_rng(2)
    fs = [fn_energy(sample_iid(nu, 128, rng), mu, kernel) for _ in range(40)]
    assert np.mean(fs) >= gap - 0.05


def test_fn_energy_singular_coincident_is_infinite():
    geom = TorusGeometry(1, 1.0, 32)
    kernel = riesz_kernel(geom, s=0.25)
    mu = uniform_measure(geom)
    cfg = PointConfig(geom, np.array([[0.25], [0.25]]))
    assert fn_energy(cfg, mu, kernel) == float("inf")


# -- splitting identity ----------------------------------------------------------

def test_split_g0_exact():
    geom = TorusGeometry(1, 1.0, 64)
    V, _ = cosine_potential(geom)
    kernel = zero_kernel(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, SolverOptions(tol=1e-14))
    rng = make_rng(3)
    for _ in range(10):
        cfg = PointConfig(geom, rng.uniform(0, 1, (32, 1)))
        rep = split_hamiltonian(cfg, sol, kernel, V)
        assert rep.relative_residual <= 1e-10


def test_split_single_particle():
    geom = TorusGeometry(1, 1.0, 64)
    V, v_exact = cosine_potential(geom)
    kernel = cosine_kernel(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, TIGHT)
    cfg = PointConfig(geom, np.array([[0.37]]))
    rep = split_hamiltonian(cfg, sol, kernel, V, v_exact=v_exact)
    assert rep.h_direct == pytest.approx(v_exact(cfg.points)[0], abs=1e-12)
    assert rep.relative_residual <= 1e-10


def test_split_reference_and_refinement():
    rng = make_rng(4)
    pts = rng.uniform(0, 1, (32, 1))
    residuals = []
    for n in (32, 64, 128):
        geom = TorusGeometry(1, 1.0, n)
        V, v_exact = bernoulli_potential(geom, order=6)
        kernel = cosine_kernel(geom)
        sol = solve_thermal_equilibrium(kernel, V, 1.0, TIGHT)
        rep = split_hamiltonian(PointConfig(geom, pts), sol, kernel, V,
                                v_exact=v_exact)
        residuals.append(rep.relative_residual)
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[2] <= 1e-6
    # observed order at least 1 in 1/n
    order = np.log2(residuals[0] / residuals[2]) / 2.0
    assert order >= 1.0


def test_split_propagates_singular_pairs():
    geom = TorusGeometry(1, 1.0, 32)
    kernel = riesz_kernel(geom, s=0.25)
    V, _ = cosine_potential(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, TIGHT)
    cfg = PointConfig(geom, np.array([[0.25], [0.25]]))
    rep = split_hamiltonian(cfg, sol, kernel, V)
    assert rep.h_direct == float("inf")


# -- next-order partition function -----------------------------------------------

def test_partition_g0_exact():
    geom = TorusGeometry(1, 1.0, 32)
    V, _ = cosine_potential(geom)
    kernel = zero_kernel(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, SolverOptions(tol=1e-14))
    for est in estimate_next_order_partition(kernel, V, 1.0, [1, 2, 3],
                                             sol=sol):
        assert abs(est.log_k_over_n) <= 1e-9
        assert est.mode == "direct"


def test_partition_interacting_trend():
    geom = TorusGeometry(1, 1.0, 32)
    V, _ = cosine_potential(geom)
    kernel = cosine_kernel(geom, amplitude=0.5)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, TIGHT)
    ests = estimate_next_order_partition(kernel, V, 1.0, [1, 2, 3, 4], sol=sol)
    vals = [abs(e.log_k_over_n) for e in ests]
    assert all(vals[i] >= vals[i + 1] - 1e-12 for i in range(3))


def test_partition_cross_mode_agreement():
    geom = TorusGeometry(1, 1.0, 24)
    V, _ = cosine_potential(geom)
    kernel = cosine_kernel(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, TIGHT)
    direct = estimate_next_order_partition(kernel, V, 1.0, [1], sol=sol,
                                           mode="direct")[0]
    mcmc = estimate_next_order_partition(kernel, V, 1.0, [1], sol=sol,
                                         mode="mcmc", seed=5)[0]
    assert np.isfinite(direct.log_k_over_n)
    tol = max(3 * mcmc.error_bar, 0.02)
    assert abs(direct.log_k_over_n - mcmc.log_k_over_n) <= tol


# -- annealing ---------------------------------------------------------------------

def test_minimize_g0_stacks_at_argmin():
    geom = TorusGeometry(1, 1.0, 32)
    V, _ = cosine_potential(geom)  # min -1 at x = 1/2
    kernel = zero_kernel(geom)
    cfg, value = minimize_hamiltonian(kernel, V, n=6, restarts=4, seed=1,
                                      proposals_per_stage=200,
                                      min_temperature_ratio=0.01)
    assert value == pytest.approx(-1.0, abs=5e-3)
    assert np.max(np.abs(cfg.points - 0.5)) < 0.05


def test_minimize_v0_spreading_trend():
    # zero-mean PD kernel with V = 0: optimum approaches 0 from below like -g(0)/N
    geom = TorusGeometry(1, 1.0, 32)
    kernel = cosine_kernel(geom)
    V, _ = zero_potential(geom)
    values = []
    for n in (4, 8, 16):
        _, value = minimize_hamiltonian(kernel, V, n=n, restarts=4, seed=2,
                                        proposals_per_stage=200,
                                        min_temperature_ratio=0.01)
        values.append(value)
        assert -1.5 / n <= value <= 0.0
    assert values[0] < values[1] < values[2] <= 0.0


# -- discrepancy ---------------------------------------------------------------------

def test_discrepancy_exact_cases():
    geom = TorusGeometry(1, 1.0, 64)
    rho = uniform_measure(geom)
    pts = geom.axis_centers().reshape(-1, 1)
    assert discrepancy(PointConfig(geom, pts), rho, eta=0.25) == pytest.approx(
        0.0, abs=1e-12)
    stacked = PointConfig(geom, np.full((10, 1), 0.1))
    assert discrepancy(stacked, rho, eta=0.5) == pytest.approx(0.5, abs=1e-12)


def test_discrepancy_2d_all_in_one_cell():
    geom = TorusGeometry(2, 1.0, 16)
    rho = uniform_measure(geom)
    stacked = PointConfig(geom, np.full((5, 2), 0.1))
    want = 1.0 - 2.0 ** (-2)
    assert discrepancy(stacked, rho, eta=0.5) == pytest.approx(want, abs=1e-12)


def test_discrepancy_lln_trend():
    geom = TorusGeometry(1, 1.0, 64)
    vals = 1.0 + 0.5 * np.cos(2 * np.pi * geom.axis_centers())
    rho = GridMeasure(geom, vals)
    rng = make_rng(6)
    means = []
    for n in (100, 1000, 10000):
        ds = [discrepancy(sample_iid(rho, n, rng), rho, eta=0.25)
              for _ in range(10)]
        means.append(np.mean(ds))
    assert means[0] > means[1] > means[2]


def test_discrepancy_translation_invariance():
    geom = TorusGeometry(1, 1.0, 64)
    vals = 1.0 + 0.5 * np.cos(2 * np.pi * geom.axis_centers())
    rho = GridMeasure(geom, vals)
    rng = make_rng(7)
    pts = rng.uniform(0, 1, (50, 1))
    base = discrepancy(PointConfig(geom, pts), rho, eta=0.25)
    # translate both the particles and the density by whole cells
    shift_cells = 16
    shift = shift_cells * geom.cell_side
    moved = PointConfig(geom, pts + shift)
    rho_moved = GridMeasure(geom, np.roll(rho.values, shift_cells))
    assert discrepancy(moved, rho_moved, eta=0.25) == pytest.approx(base,
                                                                    abs=1e-12)
    # and under relabeling
    perm = rng.permutation(50)
    assert discrepancy(PointConfig(geom, pts[perm]), rho, eta=0.25) == base


# -- rate estimation ------------------------------------------------------------------

@pytest.fixture(scope="module")
def g0_reference():
    geom = TorusGeometry(1, 1.0, 64)
    V, _ = cosine_potential(geom)
    kernel = zero_kernel(geom)
    sol = solve_thermal_equilibrium(kernel, V, 1.0, SolverOptions(tol=1e-13))
    return geom, V, kernel, sol


def test_rate_typical_event_small(g0_reference):
    geom, V, kernel, sol = g0_reference
    rng = make_rng(8)
    target = tagged_empirical_field(sample_iid(sol.mu_theta, 32, rng), 32, 8.0)
    delta = calibrate_ball_radius(kernel, V, 1.0, target, n=32,
                                  pilot_samples=60, quantile=0.6, seed=9,
                                  m_tags=32, sol=sol)
    est = estimate_rate(kernel, V, 1.0, target, delta, n_list=[32],
                        samples_per_n=150, seed=10, m_tags=32, sol=sol)
    assert not est.lower_bound_only[0]
    assert -0.1 <= est.minus_log_prob_over_n[0] <= 0.1
    lo, hi = est.error_bars[0]
    assert lo <= est.minus_log_prob_over_n[0] <= hi


def test_rate_zero_hits_lower_bound(g0_reference):
    geom, V, kernel, sol = g0_reference
    rng = make_rng(11)
    target = tagged_empirical_field(sample_iid(sol.mu_theta, 32, rng), 32, 8.0)
    est = estimate_rate(kernel, V, 1.0, target, delta=1e-9, n_list=[32],
                        samples_per_n=50, seed=12, m_tags=32, sol=sol)
    assert est.lower_bound_only[0]
    assert est.hit_counts[0] == 0
    assert est.minus_log_prob_over_n[0] > 0
    assert est.error_bars[0][1] == float("inf")


def test_rate_deterministic(g0_reference):
    geom, V, kernel, sol = g0_reference
    rng = make_rng(13)
    target = tagged_empirical_field(sample_iid(sol.mu_theta, 16, rng), 16, 4.0)
    kwargs = dict(n_list=[16], samples_per_n=40, seed=14, m_tags=16, sol=sol)
    a = estimate_rate(kernel, V, 1.0, target, 0.2, **kwargs)
    b = estimate_rate(kernel, V, 1.0, target, 0.2, **kwargs)
    assert a.minus_log_prob_over_n == b.minus_log_prob_over_n
    assert a.hit_counts == b.hit_counts


# -- appendix constants -----------------------------------------------------------------

def synthetic_equilibrium(density, support, zeta, res, side):
    from torusgas.equilibrium import EquilibriumSolution
    from torusgas.geometry import centered_box
    grid = WindowGrid(centered_box(side, 1), res)
    return EquilibriumSolution(
        grid=grid, mu_V=density, support_mask=support, obstacle_constant=0.0,
        residual=1e-12, iterations=1, boundary_contact=False,
        h_field=np.zeros(res), V_values=2.0 * zeta)


def test_midtemp_constants_uniform_unit_support():
    res, side = 200, 2.0
    x = (np.arange(res) + 0.5) / res * side - side / 2
    support = np.abs(x) <= 0.5
    density = np.where(support, 1.0, 0.0)
    zeta = np.maximum(np.abs(x) - 0.5, 0.0)
    sol = synthetic_equilibrium(density, support, zeta, res, side)
    out = riesz_midtemp_constants(sol)
    assert out.ent_mu_v == pytest.approx(0.0, abs=1e-12)
    assert out.support_volume == pytest.approx(1.0, abs=1e-9)
    assert out.predicted_limit == pytest.approx(0.0, abs=1e-9)


def test_midtemp_constants_density_two():
    res, side = 400, 2.0
    x = (np.arange(res) + 0.5) / res * side - side / 2
    support = np.abs(x) <= 0.25
    density = np.where(support, 2.0, 0.0)
    zeta = np.maximum(np.abs(x) - 0.25, 0.0)
    sol = synthetic_equilibrium(density, support, zeta, res, side)
    out = riesz_midtemp_constants(sol)
    assert out.ent_mu_v == pytest.approx(np.log(2), abs=1e-9)
    assert out.predicted_limit == pytest.approx(np.log(2) - 1 + 0.5, abs=1e-9)


def test_midtemp_omega_table_monotone():
    res, side = 400, 4.0
    x = (np.arange(res) + 0.5) / res * side - side / 2
    support = np.abs(x) <= 0.5
    density = np.where(support, 1.0, 0.0)
    zeta = np.maximum(np.abs(x) - 0.5, 0.0) ** 2
    sol = synthetic_equilibrium(density, support, zeta, res, side)
    out = riesz_midtemp_constants(sol, n_beta_values=(10.0, 100.0, 1000.0))
    vals = [out.omega_table[k] for k in (10.0, 100.0, 1000.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] >= out.omega_volume - 1e-9


def test_midtemp_refuses_boundary_contact():
    res, side = 100, 1.0
    x = (np.arange(res) + 0.5) / res * side - side / 2
    sol = synthetic_equilibrium(np.ones(res), np.ones(res, bool),
                                np.zeros(res), res, side)
    sol.boundary_contact = True
    with pytest.raises(ValueError, match="boundary"):
        riesz_midtemp_constants(sol)
