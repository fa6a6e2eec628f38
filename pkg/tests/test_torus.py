import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncbloch.errors import (
    GridTooCoarse, InvalidSpectralParameter, NonPositiveTime, QuadratureNotConverged, TruncationNotConverged,
)
from ncbloch.torus import (
    LandauModel, analytic_levels, discrete_eigenpairs, discrete_eigenvalues, discrete_green, discretize_h_lambda, heat_trace,
    hermiticity_defect, intertwining_residual, landau_spectrum, magnetic_shift, plane_green_heat,
    plane_green_kintegral, plane_heat_kernel, plane_magnetic_green, plaquette_fluxes, shifted_green,
    t_lambda_map, torus_green,
)

TWO_PI = 2 * math.pi
UNIT = LandauModel(1)


# ---------------------------------------------------------------- model

def test_model_validation():
    with pytest.raises(ValueError):
        LandauModel(0)
    with pytest.raises(ValueError):
        LandauModel(1, mu=1.0)
    with pytest.raises(ValueError):
        LandauModel(1, nu=-0.1)
    assert LandauModel(-3).omega == 3 / math.pi


# ---------------------------------------------------------------- plane

def test_plane_heat_kernel_conserves_mass_scale():
    # |p| integrates to b / (4 pi sinh(b t)) * 4 pi / (b coth(b t)) = 1 / cosh(b t)
    b = UNIT.field_strength
    xs = np.linspace(-12, 12, 601)
    x, y = np.meshgrid(xs, xs, indexing="ij")
    p = np.abs(plane_heat_kernel(UNIT, 0.7, x, y, 0.3, -0.2))
    mass = np.sum(p) * (xs[1] - xs[0]) ** 2
    assert abs(mass - 1 / math.cosh(b * 0.7)) <= 1e-8


def test_plane_green_near_diagonal_is_real_positive():
    val = plane_magnetic_green(UNIT, -1.0, 0.0, 0.4, 0.3, 0.4, method="kintegral")
    assert abs(val.imag) <= 1e-12 and val.real > 0
    assert abs(val - plane_magnetic_green(UNIT, -1.0, 0.0, 0.4, 0.3, 0.4, method="heat")) <= 1e-8


def test_plane_green_diverges_on_the_diagonal():
    with pytest.raises(QuadratureNotConverged):
        plane_green_heat(UNIT, -1.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(QuadratureNotConverged):
        plane_green_kintegral(UNIT, -1.0, 0.0, 0.0, 0.0, 0.0)
    # logarithmic growth: G ~ -log(r) / (2 pi) as r -> 0
    near = plane_green_heat(UNIT, -1.0, 0.0, 0.0, 1e-3, 0.0).real
    nearer = plane_green_heat(UNIT, -1.0, 0.0, 0.0, 1e-4, 0.0).real
    assert abs((nearer - near) - math.log(10) / TWO_PI) <= 1e-4


@pytest.mark.parametrize("n_flux", [1, 2, -1])
def test_plane_routes_agree(n_flux):
    model = LandauModel(n_flux)
    for p in [(0.2, 0.1, 1.4, -0.6), (1.0, 0.5, 2.0, 1.5)]:
        a = plane_green_kintegral(model, -1.0, *p)
        b = plane_green_heat(model, -1.0, *p)
        assert abs(a - b) <= 1e-8 * abs(b)


def test_plane_hermitian_symmetry():
    z = -1.0 + 0.4j
    p1, p2 = (0.2, 0.1), (1.4, -0.6)
    a = plane_green_heat(UNIT, z, *p1, *p2)
    b = plane_green_heat(UNIT, np.conj(z), *p2, *p1)
    assert abs(a - np.conj(b)) <= 1e-10 * abs(a)


def test_plane_y_translation_invariance():
    p = (0.2, 0.1, 1.4, -0.6)
    base = plane_green_kintegral(UNIT, -1.0, *p)
    moved = plane_green_kintegral(UNIT, -1.0, p[0], p[1] + 2.3, p[2], p[3] + 2.3)
    assert abs(base - moved) <= 1e-9


def test_plane_x_translation_covariance():
    a = 0.7
    x1, y1, x2, y2 = 0.2, 0.1, 1.4, -0.6
    base = plane_green_kintegral(UNIT, -1.0, x1, y1, x2, y2)
    moved = plane_green_kintegral(UNIT, -1.0, x1 + a, y1, x2 + a, y2)
    assert abs(moved - np.exp(-1j * a * (y1 - y2) / TWO_PI) * base) <= 1e-9


def test_magnetic_translation_covariance():
    # W_{a,b} commutes with the plane operator, so G(W p1, W p2) carries the two phases
    a, b = 0.9, -0.4
    p1, p2 = (0.3, 0.8), (1.1, -0.2)
    q1x, q1y, ph1 = magnetic_shift(UNIT, a, b, *p1)
    q2x, q2y, ph2 = magnetic_shift(UNIT, a, b, *p2)
    lhs = ph1 * plane_green_heat(UNIT, -1.0, q1x, q1y, q2x, q2y) * np.conj(ph2)
    assert abs(lhs - plane_green_heat(UNIT, -1.0, *p1, *p2)) <= 1e-9


def test_plane_requires_negative_real_part():
    with pytest.raises(InvalidSpectralParameter):
        plane_green_heat(UNIT, 0.2, 0, 0, 1, 1)
    with pytest.raises(NonPositiveTime):
        plane_heat_kernel(UNIT, -1.0, 0, 0, 1, 1)


# ---------------------------------------------------------------- torus Green function

POINT = (1.0, 0.5, 2.0, 1.5)


def test_variants_agree():
    pois = torus_green(UNIT, -1.0, *POINT, truncation=6, variant="poisson")
    direct = torus_green(UNIT, -1.0, *POINT, truncation=6, variant="direct")
    assert abs(pois.value - direct.value) <= 1e-4
    assert pois.est_error <= 1e-4 and direct.est_error <= 1e-6


def test_variants_converge_to_each_other():
    gaps = [abs(torus_green(UNIT, -1.0, *POINT, truncation=k, variant="poisson").value
                - torus_green(UNIT, -1.0, *POINT, truncation=8, variant="direct").value) for k in (2, 4, 6)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("model", [LandauModel(1, 0.25, 0.5), LandauModel(2, 0.1, 0.3)])
def test_equivariance_under_period_shifts(model):
    x1, y1, x2, y2 = 0.7, 1.2, 2.5, 0.4
    z = -1.0
    base = torus_green(model, z, x1, y1, x2, y2, variant="direct").value
    n = model.flux_n
    x_moved = torus_green(model, z, x1 + TWO_PI, y1, x2, y2, variant="direct").value
    assert abs(x_moved - np.exp(TWO_PI * 1j * model.mu) * np.exp(-1j * n * y1) * base) <= 1e-9
    y_moved = torus_green(model, z, x1, y1 + TWO_PI, x2, y2, variant="direct").value
    assert abs(y_moved - np.exp(TWO_PI * 1j * model.nu) * base) <= 1e-9
    src_moved = torus_green(model, z, x1, y1, x2 + TWO_PI, y2, variant="direct").value
    assert abs(src_moved - np.exp(-TWO_PI * 1j * model.mu) * np.exp(1j * n * y2) * base) <= 1e-9


def test_shift_identity():
    model = LandauModel(1, 0.25, 0.5)
    lhs = torus_green(model, -1.0, *POINT, variant="direct").value
    assert abs(lhs - shifted_green(model, -1.0, *POINT, variant="direct")) <= 1e-6


def test_grid_resolvent_oracle():
    grid = 128
    h = TWO_PI / grid
    op = discretize_h_lambda(UNIT, grid)
    j1, l1, j2, l2 = (int(round(c / h)) for c in POINT)
    disc = discrete_green(op, -1.0, (j2, l2))[j1, l1]
    val = torus_green(UNIT, -1.0, j1 * h, l1 * h, j2 * h, l2 * h, variant="direct").value
    assert abs(disc - val) <= 0.02 * abs(val)


def test_truncation_guard():
    with pytest.raises(TruncationNotConverged):
        torus_green(UNIT, -1.0, *POINT, truncation=1, variant="poisson", tol=1e-12)
    with pytest.raises(ValueError):
        torus_green(UNIT, -1.0, *POINT, variant="lattice")
    with pytest.raises(InvalidSpectralParameter):
        torus_green(UNIT, 0.5, *POINT)


# ---------------------------------------------------------------- spectrum

def test_analytic_levels():
    assert landau_spectrum(UNIT, 0).levels == [(pytest.approx(1 / TWO_PI, abs=1e-15), 1)]
    level, mult = landau_spectrum(LandauModel(-3), 1).levels[1]
    assert abs(level - 9 / TWO_PI) <= 1e-15 and mult == 3
    assert np.allclose(analytic_levels(LandauModel(2), 2), [1 / math.pi, 1 / math.pi], rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        landau_spectrum(UNIT, -1)


def test_spectrum_does_not_depend_on_character():
    a = landau_spectrum(LandauModel(2, 0.0, 0.0), 4).levels
    b = landau_spectrum(LandauModel(2, 0.3, 0.7), 4).levels
    assert a == b


# ---------------------------------------------------------------- discretization

def test_grid_guard():
    with pytest.raises(GridTooCoarse):
        discretize_h_lambda(UNIT, 15)


@pytest.mark.parametrize("model", [UNIT, LandauModel(3, 0.3, 0.7), LandauModel(-2, 0.5, 0.1)])
def test_hermitian_and_uniform_flux(model):
    op = discretize_h_lambda(model, 24)
    assert hermiticity_defect(op) <= 1e-12
    flux = plaquette_fluxes(op)
    expected = model.flux_n * op.spacing ** 2 / TWO_PI
    assert np.max(np.abs(np.angle(np.exp(1j * (flux - expected))))) <= 1e-12


def test_second_order_convergence():
    exact = 1 / TWO_PI
    errs = [abs(discrete_eigenvalues(discretize_h_lambda(UNIT, n), 1)[0] - exact) for n in (32, 64)]
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_degenerate_ground_pair_at_moderate_grid():
    vals = discrete_eigenvalues(discretize_h_lambda(LandauModel(2), 64), 4)
    assert (vals[1] - vals[0]) / vals[0] <= 1e-3
    assert (vals[2] - vals[1]) / vals[1] > 0.5


def test_character_independence_at_moderate_grid():
    a = discrete_eigenvalues(discretize_h_lambda(LandauModel(1, 0.0, 0.0), 48), 6)
    b = discrete_eigenvalues(discretize_h_lambda(LandauModel(1, 0.3, 0.7), 48), 6)
    assert np.max(np.abs(a - b) / a) <= 1e-3


# ---------------------------------------------------------------- unitary equivalence map

def random_grid(seed, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_map_is_identity_for_trivial_character():
    phi = random_grid(0, 32)
    assert np.max(np.abs(t_lambda_map(UNIT, phi) - phi)) <= 1e-12


def test_map_preserves_norm():
    phi = random_grid(1, 64)
    out = t_lambda_map(LandauModel(1, 0.25, 0.5), phi)
    assert abs(np.linalg.norm(out) / np.linalg.norm(phi) - 1) <= 1e-10


def test_map_intertwines_at_fine_grid():
    assert intertwining_residual(LandauModel(1, 0.25, 0.5), 128, random_grid(2, 128)) <= 5e-3


def smooth_section(model, grid, seed, count=6):
    """A random combination of low eigenvectors of the untwisted grid operator."""
    _, vecs = discrete_eigenpairs(discretize_h_lambda(model.with_character(0.0, 0.0), grid), count)
    return (vecs @ np.random.default_rng(seed).normal(size=count)).reshape(grid, grid)


@settings(max_examples=15, deadline=None)
@given(n_flux=st.sampled_from([1, 2, -1, 4]), mu=st.floats(0, 0.99), nu=st.floats(0, 0.99),
       seed=st.integers(0, 1000))
def test_map_intertwines_property(n_flux, mu, nu, seed):
    # off-grid shifts are exact only for smooth data; rough grid noise is not band-limited
    model = LandauModel(n_flux, mu, nu)
    phi = smooth_section(model, 32, seed)
    assert abs(np.linalg.norm(t_lambda_map(model, phi)) / np.linalg.norm(phi) - 1) <= 1e-10
    assert intertwining_residual(model, 32, phi) <= 5e-3


def test_map_requires_divisible_grid():
    with pytest.raises(ValueError):
        t_lambda_map(LandauModel(3, 0.1, 0.1), random_grid(0, 32))


# ---------------------------------------------------------------- heat trace

def test_trace_closed_forms():
    rep = heat_trace(UNIT, 1.0)
    assert abs(rep.eigen_sum - 1 / (2 * math.sinh(1 / TWO_PI))) <= 1e-14
    assert abs(rep.eigen_sum - 3.1284) <= 1e-4
    assert abs(rep.quoted_closed_form - 12.513) <= 1e-3
    assert rep.discrete_trace is None and rep.supported is None


def test_trace_eigen_sum_is_geometric_series():
    model = LandauModel(3)
    rep = heat_trace(model, 0.8)
    series = sum(3 * math.exp(-0.8 * model.omega * (l + 0.5)) for l in range(400))
    assert abs(rep.eigen_sum - series) <= 1e-12


def test_trace_large_time_ground_dominance():
    model = LandauModel(2)
    t = 60.0
    rep = heat_trace(model, t)
    assert abs(rep.eigen_sum / (2 * math.exp(-t * model.omega / 2)) - 1) <= 1e-10


def test_trace_rejects_non_positive_time():
    with pytest.raises(NonPositiveTime):
        heat_trace(UNIT, 0.0)
