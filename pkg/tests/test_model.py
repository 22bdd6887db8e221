import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nldirac.errors import BetaOrderError, NewtonDivergence, OmegaOutOfGap, SingularRadius, ValidationError
from nldirac.model import (
    ISOTROPIC,
    BetaParams,
    DualPoint,
    MassiveParams,
    TrajectoryState,
    det_hessian,
    grad_G,
    hamiltonian,
    hessian,
    legendre,
    limit_field,
    massive_field,
    massive_hamiltonian,
    massless_field,
)

B07 = BetaParams(1.0, 0.7)
coord = st.floats(-10, 10, allow_nan=False)
betas = st.tuples(st.floats(0.1, 5.0), st.floats(0.05, 1.0)).map(lambda t: BetaParams(t[0], t[0] * t[1]))


# ---------------------------------------------------------------- parameters


def test_beta_order_enforced():
    assert BetaParams(1, 1).beta2 == 1.0
    with pytest.raises(BetaOrderError):
        BetaParams(1.0, 1.5)
    with pytest.raises(ValidationError):
        BetaParams(1.0, 0.0)
    with pytest.raises(ValidationError):
        BetaParams(math.nan, 0.5)


def test_beta_order_error_code():
    with pytest.raises(BetaOrderError) as exc:
        BetaParams(0.5, 1.0)
    assert exc.value.code == "BETA_ORDER"


def test_massive_params_gap():
    mp = MassiveParams(1.0, 0.5)
    assert mp.kappa == pytest.approx(math.sqrt(0.75), rel=1e-15)
    for w in (1.0, -1.0, 1.5):
        with pytest.raises(OmegaOutOfGap):
            MassiveParams(1.0, w)
    with pytest.raises(ValidationError):
        MassiveParams(0.0, 0.0)


def test_state_and_dual_point_validation():
    TrajectoryState(0.0, 1.0, 2.0)
    with pytest.raises(ValidationError):
        TrajectoryState(-1.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        TrajectoryState(1.0, math.inf, 0.0)
    with pytest.raises(ValidationError):
        DualPoint(math.nan, 0.0)


# ---------------------------------------------------------------- hamiltonian


def test_hamiltonian_examples():
    assert hamiltonian((0.0, 0.0), B07) == 0.0
    assert hamiltonian((1.0, 1.0), ISOTROPIC) == 1.0
    h = math.sqrt(2) / 2
    assert hamiltonian((h, h), ISOTROPIC) == pytest.approx(0.25, rel=1e-15)
    # identity uv = 2 r H on the closed form at r = 1
    assert h * h == pytest.approx(2 * 1.0 * hamiltonian((h, h), ISOTROPIC), rel=1e-15)


@given(coord, coord, betas)
def test_hamiltonian_positive_definite(u, v, beta):
    H = hamiltonian((u, v), beta)
    assert H >= 0
    if u != 0 or v != 0:
        assert H > 0 or (u * u + v * v) ** 2 < 1e-300


def test_grad_examples():
    assert grad_G((0.0, 0.0), ISOTROPIC) == (0.0, 0.0)
    assert grad_G((1.0, 0.0), ISOTROPIC) == (1.0, 0.0)
    gu, gv = grad_G((1.0, 2.0), B07)
    assert gu == pytest.approx(6.6, rel=1e-14)
    assert gv == pytest.approx(10.8, rel=1e-14)


def _fd_grad(p, beta, h):
    u, v = p
    du = (hamiltonian((u + h, v), beta) - hamiltonian((u - h, v), beta)) / (2 * h)
    dv = (hamiltonian((u, v + h), beta) - hamiltonian((u, v - h), beta)) / (2 * h)
    return np.array([du, dv])


def test_grad_matches_finite_differences_example():
    g = np.array(grad_G((1.0, 2.0), B07))
    assert np.allclose(_fd_grad((1.0, 2.0), B07, 1e-6), g, rtol=1e-6)


def test_grad_matches_finite_differences_random():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-10, 10, size=(1000, 2))
    for beta in (ISOTROPIC, B07, BetaParams(2.0, 1.0)):
        for p in pts:
            g = np.array(grad_G(p, beta))
            fd = _fd_grad(p, beta, 1e-4 * max(1.0, np.abs(p).max()))
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g) + 1e-12


def test_grad_broadcasts():
    u = np.linspace(-1, 1, 5)
    v = np.ones(5)
    gu, gv = grad_G((u, v), ISOTROPIC)
    assert gu.shape == (5,) and gv.shape == (5,)
    assert gu[2] == 0.0


# ---------------------------------------------------------------- hessian


def test_det_hessian_examples():
    assert det_hessian((0.0, 0.0), ISOTROPIC) == 0.0
    assert det_hessian((1.0, 1.0), BetaParams(1, 1)) == 9.0
    assert det_hessian((1.0, 1.0), ISOTROPIC) == 12.0
    assert det_hessian((1.0, 1.0), ISOTROPIC) >= 4.5 * 0.25 * 2


def test_det_hessian_matches_second_differences():
    h = 1e-4
    for p, beta in [((1.0, 1.0), ISOTROPIC), ((0.3, -1.2), B07), ((2.0, 0.5), BetaParams(2, 1))]:
        u, v = p
        H = lambda a, b: hamiltonian((a, b), beta)  # noqa: E731
        huu = (H(u + h, v) - 2 * H(u, v) + H(u - h, v)) / h**2
        hvv = (H(u, v + h) - 2 * H(u, v) + H(u, v - h)) / h**2
        huv = (H(u + h, v + h) - H(u + h, v - h) - H(u - h, v + h) + H(u - h, v - h)) / (4 * h**2)
        fd = huu * hvv - huv**2
        assert fd == pytest.approx(det_hessian(p, beta), rel=1e-6)
        assert np.linalg.det(hessian(p, beta)) == pytest.approx(det_hessian(p, beta), rel=1e-12)


@given(coord, coord, betas)
def test_det_hessian_lower_bound(u, v, beta):
    if u == 0 and v == 0:
        return
    det = det_hessian((u, v), beta)
    bound = 4.5 * beta.beta2**2 * (u**4 + v**4)
    # equality holds at beta1 = beta2, |u| = |v|
    assert det >= bound * (1 - 1e-12)
    if beta.beta2 < 0.999 * beta.beta1 and bound > 1e-300:
        assert det > bound


def test_det_hessian_bound_is_sharp():
    beta = BetaParams(1.0, 1.0)
    assert det_hessian((1.0, 1.0), beta) == pytest.approx(4.5 * 2.0, rel=1e-15)


# ---------------------------------------------------------------- legendre


def test_legendre_origin():
    assert legendre(DualPoint(0.0, 0.0), ISOTROPIC) == (0.0, (0.0, 0.0))


def test_legendre_isotropic_unit():
    for ang in np.linspace(0, 2 * np.pi, 7):
        val, p = legendre((math.cos(ang), math.sin(ang)), ISOTROPIC)
        assert val == pytest.approx(0.75, rel=1e-12)
        assert np.allclose(grad_G(p, ISOTROPIC), (math.cos(ang), math.sin(ang)), atol=1e-12)


def test_legendre_isotropic_grid_search():
    q = np.array([0.6, 0.8])
    uu, vv = np.meshgrid(np.linspace(-2, 2, 801), np.linspace(-2, 2, 801))
    sup = np.max(uu * q[0] + vv * q[1] - hamiltonian((uu, vv), ISOTROPIC))
    val, _ = legendre(q, ISOTROPIC)
    assert val == pytest.approx(sup, rel=1e-4)
    assert val >= sup


def test_legendre_euler_example():
    q = grad_G((1.0, 2.0), B07)
    val, p = legendre(q, B07)
    assert hamiltonian((1.0, 2.0), B07) == pytest.approx(7.05, rel=1e-14)
    assert val == pytest.approx(21.15, rel=1e-10)
    assert np.allclose(p, (1.0, 2.0), rtol=1e-10)


def test_legendre_homogeneity():
    rng = np.random.default_rng(3)
    for beta in (ISOTROPIC, B07, BetaParams(1, 1)):
        for q in rng.normal(size=(50, 2)):
            base, _ = legendre(q, beta)
            for t in (2.0, 10.0, 0.1):
                val, _ = legendre(t * q, beta)
                assert val == pytest.approx(t ** (4 / 3) * base, rel=1e-8)


def test_fenchel_young_equality():
    rng = np.random.default_rng(4)
    for beta in (ISOTROPIC, B07, BetaParams(2, 1)):
        for p in rng.normal(scale=3, size=(100, 2)):
            q = grad_G(p, beta)
            val, _ = legendre(q, beta)
            H = hamiltonian(p, beta)
            assert val + H == pytest.approx(p[0] * q[0] + p[1] * q[1], rel=1e-8)
            assert val + H == pytest.approx(4 * H, rel=1e-8)


@settings(max_examples=200)
@given(coord, coord, coord, coord, betas)
def test_young_inequality(u, v, w, z, beta):
    val, _ = legendre((w, z), beta)
    lhs = u * w + v * z
    rhs = hamiltonian((u, v), beta) + val
    assert lhs <= rhs + 1e-9 * (abs(rhs) + abs(lhs) + 1)


def test_legendre_reports_divergence():
    with pytest.raises(NewtonDivergence):
        legendre((1.0, 2.0), B07, max_iter=0)


# ---------------------------------------------------------------- fields


def test_massless_field_examples():
    assert massless_field(TrajectoryState(1.0, 0.0, 1.0), ISOTROPIC) == (1.0, 0.0)
    h = math.sqrt(2) / 2
    du, dv = massless_field((1.0, h, h), ISOTROPIC)
    assert abs(du) <= 1e-12
    assert dv == pytest.approx(-h, abs=1e-12)
    assert massless_field((2.0, 1.0, 0.0), ISOTROPIC) == (-0.5, -1.0)


def test_massless_field_matches_closed_form_derivative():
    # u = r/(1+r^2) sqrt(2), v = sqrt(2)/(1+r^2): derivatives in closed form
    s = math.sqrt(2)
    for r in (0.1, 1.0, 3.0):
        u, v = s * r / (1 + r * r), s / (1 + r * r)
        du = s * (1 - r * r) / (1 + r * r) ** 2
        dv = -2 * s * r / (1 + r * r) ** 2
        fu, fv = massless_field((r, u, v), ISOTROPIC)
        assert fu == pytest.approx(du, abs=1e-12)
        assert fv == pytest.approx(dv, abs=1e-12)


def test_singular_radius():
    with pytest.raises(SingularRadius):
        massless_field((0.0, 0.0, 1.0), ISOTROPIC)
    with pytest.raises(SingularRadius):
        massive_field((0.0, 0.0, 1.0), ISOTROPIC, MassiveParams(1, 0))


def test_limit_field_examples():
    assert limit_field((0.0, 0.0), ISOTROPIC) == (0.0, 0.0)
    assert limit_field((1.0, 0.0), BetaParams(1, 1)) == (0.0, -1.0)
    assert limit_field((0.0, 1.0), ISOTROPIC) == (1.0, 0.0)


@given(st.floats(0.01, 100), coord, coord, betas)
def test_massless_minus_singular_term_is_limit(r, u, v, beta):
    du, dv = massless_field((r, u, v), beta)
    lu, lv = limit_field((u, v), beta)
    assert du + u / r == pytest.approx(lu, rel=1e-12, abs=1e-12 * (1 + abs(u / r)))
    assert dv == lv


def test_massive_field_examples():
    assert massive_field((1.0, 0.0, 1.0), ISOTROPIC, MassiveParams(1, 0)) == (0.0, 0.0)
    assert massive_field((1.0, 0.0, 1.0), ISOTROPIC, MassiveParams(1, 0.5)) == (0.5, 0.0)


def test_massive_field_massless_limit():
    class Zero:
        m = 0.0
        omega = 0.0

    rng = np.random.default_rng(5)
    for r, u, v in rng.uniform(0.1, 3.0, size=(20, 3)):
        assert massive_field((r, u, v), B07, Zero) == massless_field((r, u, v), B07)


def test_massive_energy_decreases_along_flow():
    mp = MassiveParams(1.0, 0.3)
    rng = np.random.default_rng(6)
    for r, u, v in rng.uniform(0.1, 3.0, size=(50, 3)):
        du, dv = massive_field((r, u, v), B07, mp)
        # d/dr of the massive energy along the radial flow is -(u/r) dH_m/du
        grad_u = u * (B07.beta1 * u * u + 2 * B07.beta2 * v * v) + (mp.m + mp.omega) * u
        grad_v = v * (2 * B07.beta2 * u * u + B07.beta1 * v * v) - (mp.m - mp.omega) * v
        rate = grad_u * du + grad_v * dv
        assert rate == pytest.approx(-(u / r) * grad_u, rel=1e-10, abs=1e-12)
        assert massive_hamiltonian((u, v), B07, mp) == pytest.approx(
            hamiltonian((u, v), B07) + 0.5 * (1.3 * u * u - 0.7 * v * v), rel=1e-14
        )
