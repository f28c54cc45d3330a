import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caustica.profiles import (
    DomainError,
    PerturbationField,
    constant,
    linear_squared,
    munk,
    perturbed_channel,
    quadratic_channel,
)
from oracles import central_diff, second_diff

# Frozen Munk values, computed with 50-digit mpmath from the defining
# formula (eps = 0.00737, z_c = 1300).
MUNK_N_1340 = 0.99998632706408041
MUNK_N_1000 = 0.99907978598075420
MUNK_DN2_1340 = -1.3533762958832798e-6
MUNK_D2N2_1340 = -3.2801278042861872e-8


def test_constant_profile():
    p = constant(1.5)
    assert p.eval_n_squared(3.0, -7.0) == 2.25
    assert p.eval_grad_n_squared(3.0, -7.0) == (0.0, 0.0)
    assert p.eval_d2n2_dz2(0.0, 12.0) == 0.0


def test_linear_squared_values():
    p = linear_squared(n0=1.0, a=1.0)
    assert p.eval_n_squared(0.0, 0.25) == pytest.approx(0.75, abs=1e-15)
    assert p.eval_grad_n_squared(5.0, 0.25) == (0.0, -1.0)
    p2 = linear_squared(n0=2.0, a=0.3)
    assert p2.eval_n_squared(0.0, -1.0) == pytest.approx(4.3, abs=1e-14)


def test_quadratic_channel_values():
    p = quadratic_channel(n0=1.0, alpha=0.01)
    assert p.eval_n_squared(0.0, 3.0) == pytest.approx(0.91, abs=1e-15)
    gx, gz = p.eval_grad_n_squared(0.0, 3.0)
    assert gx == 0.0
    assert gz == pytest.approx(-0.06, abs=1e-15)
    assert p.eval_d2n2_dz2(0.0, 3.0) == pytest.approx(-0.02, abs=1e-16)


def test_munk_axis_and_off_axis():
    p = munk(epsilon=0.00737, z_c=1300.0)
    assert p.n(0.0, 1300.0) == 1.0
    assert p.n(0.0, 1340.0) == pytest.approx(MUNK_N_1340, abs=1e-14)
    assert p.n(0.0, 1000.0) == pytest.approx(MUNK_N_1000, abs=1e-14)
    _, gz = p.eval_grad_n_squared(0.0, 1340.0)
    assert gz == pytest.approx(MUNK_DN2_1340, rel=1e-13)
    assert p.eval_d2n2_dz2(0.0, 1340.0) == pytest.approx(MUNK_D2N2_1340, rel=1e-13)


def test_munk_deep_tail_is_finite_and_small():
    # far below the channel the index-squared force decays; the stable
    # evaluation must not overflow on the way there
    p = munk(epsilon=0.00737, z_c=1300.0)
    _, gz = p.eval_grad_n_squared(0.0, -2.0e5)
    assert np.isfinite(gz)
    assert abs(gz) < 1e-30


def test_perturbed_channel_matches_plain_channel_when_sigma_zero():
    p = perturbed_channel(n0=1.0, alpha=0.01, sigma=0.0, rho=1.0, z_axis=0.0)
    q = quadratic_channel(n0=1.0, alpha=0.01)
    for z in (-5.0, 0.0, 2.5, 11.0):
        assert p.eval_n_squared(0.0, z) == pytest.approx(
            q.eval_n_squared(0.0, z), abs=1e-15)


def test_perturbed_channel_axis_curvature():
    p = perturbed_channel(n0=1.0, alpha=0.01, sigma=0.03, rho=0.05, z_axis=2.0)
    # on the axis both quadratic terms contribute to the curvature
    assert p.eval_d2n2_dz2(0.0, 2.0) == pytest.approx(-2 * 0.01 - 2 * 0.03, abs=1e-15)
    _, gz = p.eval_grad_n_squared(0.0, 2.0)
    assert gz == 0.0


@pytest.mark.parametrize("profile,z_lo,z_hi,h,h2", [
    (quadratic_channel(1.0, 0.01), -30.0, 30.0, 1e-5, 1e-3),
    (linear_squared(1.0, 0.04), -30.0, 30.0, 1e-5, 1e-2),
    (munk(0.00737, 1300.0), 200.0, 5000.0, 1e-3, 1.0),
    (perturbed_channel(1.0, 0.01, 0.03, 0.05, 2.0), -30.0, 30.0, 1e-5, 1e-3),
])
def test_gradient_matches_central_difference(profile, z_lo, z_hi, h, h2):
    for z in np.linspace(z_lo, z_hi, 17):
        f = lambda zz: profile.eval_n_squared(0.0, zz)
        want = central_diff(f, z, h)
        _, got = profile.eval_grad_n_squared(0.0, z)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-12)
        # h2 balances truncation against the eps/h^2 roundoff of the oracle
        want2 = second_diff(f, z, h2)
        got2 = profile.eval_d2n2_dz2(0.0, z)
        assert got2 == pytest.approx(want2, rel=1e-4, abs=1e-9)


@given(z=st.floats(min_value=-80.0, max_value=80.0))
@settings(max_examples=80, deadline=None)
def test_channel_gradient_property(z):
    p = quadratic_channel(n0=1.2, alpha=0.007)
    _, gz = p.eval_grad_n_squared(0.0, z)
    assert gz == pytest.approx(-2 * 0.007 * z, rel=1e-12, abs=1e-14)


def test_perturbation_values_and_edges():
    f = PerturbationField(kind="ZSquared", center=1.0, amplitude=2.0)
    assert f.value(3.0) == 8.0
    assert f.derivative(3.0) == 8.0
    assert f.second_derivative(3.0) == 4.0

    g = PerturbationField(kind="ZLinear", center=-2.0, amplitude=0.5)
    assert g.value(0.0) == 1.0
    assert g.derivative(123.0) == 0.5
    assert g.second_derivative(0.0) == 0.0

    b = PerturbationField(kind="GaussianBump", center=0.0, width=2.0, amplitude=3.0)
    # at v = width the damped quadratic equals amplitude * width^2 / e
    assert b.value(2.0) == pytest.approx(3.0 * 4.0 / np.e, rel=1e-14)

    c = PerturbationField(kind="CompactSupport", center=0.0, width=1.5, amplitude=2.0)
    assert c.value(0.0) == 2.0
    assert c.value(1.5) == 0.0
    assert c.value(-1.5) == 0.0
    assert c.value(97.0) == 0.0
    assert c.derivative(1.5) == 0.0
    assert c.second_derivative(-97.0) == 0.0
    assert 0.0 < c.value(1.49) < 1e-30


@pytest.mark.parametrize("field", [
    PerturbationField(kind="ZSquared", center=0.7, amplitude=1.3),
    PerturbationField(kind="ZLinear", center=-0.4, amplitude=-2.0),
    PerturbationField(kind="GaussianBump", center=0.5, width=1.7, amplitude=0.9),
    PerturbationField(kind="CompactSupport", center=0.0, width=2.0, amplitude=1.1),
])
def test_perturbation_derivatives_match_fd(field):
    for z in np.linspace(-1.6, 1.6, 13):
        want = central_diff(field.value, z, 1e-6)
        assert field.derivative(z) == pytest.approx(want, rel=1e-6, abs=1e-9)
        want2 = central_diff(field.derivative, z, 1e-6)
        assert field.second_derivative(z) == pytest.approx(want2, rel=1e-5, abs=1e-8)


def test_perturbed_is_additive_and_nonstacking():
    base = quadratic_channel(n0=1.0, alpha=0.01)
    field = PerturbationField(kind="GaussianBump", center=3.0, width=2.0, amplitude=1.0)
    pert = base.perturbed(field, strength=0.25)
    for z in (-4.0, 0.0, 2.0, 3.0, 9.0):
        assert pert.eval_n_squared(0.0, z) == pytest.approx(
            base.eval_n_squared(0.0, z) + 0.25 * field.value(z), rel=1e-14)
        _, gb = base.eval_grad_n_squared(0.0, z)
        _, gp = pert.eval_grad_n_squared(0.0, z)
        assert gp == pytest.approx(gb + 0.25 * field.derivative(z), rel=1e-13, abs=1e-15)
    zero = base.perturbed(field, strength=0.0)
    assert zero.eval_n_squared(0.0, 5.0) == base.eval_n_squared(0.0, 5.0)
    with pytest.raises(ValueError):
        pert.perturbed(field, strength=0.1)


def test_array_evaluation_broadcasts():
    p = quadratic_channel(n0=1.0, alpha=0.01)
    z = np.linspace(-3, 3, 7)
    n2 = p.eval_n_squared(0.0, z)
    assert n2.shape == (7,)
    assert n2[3] == pytest.approx(1.0)
    gx, gz = p.eval_grad_n_squared(np.zeros(7), z)
    assert gx.shape == gz.shape == (7,)
    assert np.all(gx == 0.0)
    assert isinstance(p.eval_n_squared(0.0, 1.0), float)


def test_domain_error_on_nonfinite():
    p = constant(1.0)
    with pytest.raises(DomainError):
        p.eval_n_squared(0.0, np.nan)
    with pytest.raises(DomainError):
        p.eval_n_squared(np.inf, 0.0)
    q = linear_squared(1.0, 1.0)
    with pytest.raises(DomainError):
        q.n(0.0, 5.0)  # n2 < 0 there


def test_unknown_kinds_rejected():
    with pytest.raises(ValueError):
        PerturbationField(kind="Cubic")
    from caustica.profiles import ProfileModel
    with pytest.raises(ValueError):
        ProfileModel(kind="Parabolic")
