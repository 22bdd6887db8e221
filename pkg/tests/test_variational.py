import numpy as np
import pytest

from nldirac.errors import NonDecayingProfile, ValidationError
from nldirac.integrator import Profile, Termination
from nldirac.massive import shoot_profile
from nldirac.massless import rescale, solve_massless
from nldirac.model import ISOTROPIC, BetaParams, MassiveParams
from nldirac.variational import ActionReport, action_value, dual_check

from conftest import MATRIX_BETAS, MATRIX_LAMBDAS

B07 = BetaParams(1.0, 0.7)


def _v_doubled(p):
    def dense(r):
        uv = np.asarray(p.dense(r)).reshape(2, -1)
        return np.vstack([uv[0], 2 * uv[1]])

    return Profile(p.grid, p.u, 2 * p.v, p.lam, p.beta, None, p.termination, dense)


def test_closed_form_values(closed_form):
    rep = action_value(closed_form)
    assert isinstance(rep, ActionReport)
    # potential: int_0^inf r/(1+r^2)^2 dr = 1/2; kinetic = 2 potential
    assert rep.potential == pytest.approx(0.5, abs=1e-4)
    assert rep.kinetic == pytest.approx(1.0, abs=2e-4)
    assert rep.action == pytest.approx(0.5, abs=1e-4)
    assert abs(rep.nehari_residual) <= 1e-3
    assert abs(rep.nehari_residual) <= 1e-3 * rep.kinetic


def test_trivial_profile():
    grid = np.geomspace(1e-4, 50, 100)
    p = Profile(grid, np.zeros(100), np.zeros(100), 0.0, ISOTROPIC)
    assert action_value(p) == ActionReport(0.0, 0.0, 0.0, 0.0, 0.0)
    assert dual_check(p) == 0.0


@pytest.mark.parametrize("delta", [0.25, 4.0])
def test_scale_invariance_closed_form(closed_form, delta):
    a = action_value(closed_form).action
    b = action_value(rescale(closed_form, delta)).action
    assert b == pytest.approx(a, rel=1e-4)


def test_dual_check_closed_form(closed_form):
    assert dual_check(closed_form) <= 1e-6


def test_dual_check_solution():
    assert dual_check(solve_massless(1.0, B07)) <= 1e-4


def test_non_solution_separated_by_nehari_and_dual_gap(closed_form):
    bad = _v_doubled(closed_form)
    rep = action_value(bad)
    # the Euler identity H*(grad H) = 3H holds pointwise for any profile
    assert abs(rep.dual_action - rep.potential) <= 1e-6 * rep.potential
    # but the profile is not critical
    assert abs(rep.nehari_residual) > 1.0
    assert dual_check(bad) > 1.0


def test_field_derivatives_make_nehari_vacuous(closed_form):
    bad = _v_doubled(closed_form)
    rep = action_value(bad, derivatives="field")
    assert abs(rep.nehari_residual) <= 1e-12 * rep.kinetic
    with pytest.raises(ValidationError):
        action_value(closed_form, derivatives="spline")


def test_invariants_on_matrix():
    for b in MATRIX_BETAS:
        beta = BetaParams(*b)
        for lam in MATRIX_LAMBDAS:
            p = solve_massless(lam, beta)
            rep = action_value(p)
            assert abs(rep.nehari_residual) <= 1e-3 * abs(rep.kinetic)
            assert abs(rep.action - rep.potential) <= 1e-3 * abs(rep.potential)
            assert dual_check(p) <= 1e-4
            for delta in (0.25, 4.0):
                assert action_value(rescale(p, delta)).action == pytest.approx(rep.action, rel=1e-4)


def test_action_independent_of_lambda():
    # all lambda are related by scaling, so the action is one number per beta
    vals = [action_value(solve_massless(lam, B07)).action for lam in (1.0, 2.0)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-4)


def test_non_decaying_profile():
    grid = np.geomspace(1e-3, 50, 200)
    p = Profile(grid, np.ones(200), np.ones(200), 1.0, ISOTROPIC)
    with pytest.raises(NonDecayingProfile):
        action_value(p)
    q = Profile(grid, 1 / (1 + grid), 1 / (1 + grid), 1.0, ISOTROPIC, termination=Termination.BLOW_UP)
    with pytest.raises(NonDecayingProfile):
        dual_check(q)


def test_slow_tail_rejected():
    grid = np.geomspace(1e-3, 1e3, 400)
    f = 1 / np.sqrt(1 + grid)
    p = Profile(grid, f, f, 1.0, ISOTROPIC)
    with pytest.raises(NonDecayingProfile):
        action_value(p)


def test_massive_profile_rejected():
    p = shoot_profile(2.0, ISOTROPIC, MassiveParams(1.0, 0.0))
    with pytest.raises(ValidationError):
        action_value(p)
