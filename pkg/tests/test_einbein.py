import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caustica.einbein import (
    channel_action,
    cusp_action,
    effective_cusp_for_ghost,
    action_for_profile,
    exact_action,
    action_derivative,
    find_critical_points,
    ghost_sources,
    laurent_gamma1,
    linear_action,
    poles_and_residues,
    predict_cusps,
    caustic_curve_from_effective,
    residue_pde_residuals,
    EinbeinAction,
)
from caustica.profiles import quadratic_channel
from oracles import complex_central_diff, linear_profile_stationary_lambda

RNG = np.random.default_rng(20240817)

MODELS = [
    (linear_action(n0=1.1, a=0.3, x_s=0.5, z_s=-0.2), 1.3, 0.7),
    (cusp_action(n0=0.9, mu=1.3), 0.8, 1.1),
    (channel_action(n0=1.0, alpha=0.01, z_s=3.0), 25.0, -1.5),
    (effective_cusp_for_ghost(
        ghost=ghost_sources(channel_action(1.0, 0.01, z_s=3.0))[0], B=0.1),
     20.0, -2.0),
]


def _random_lams(action, x, z, count, seed=7):
    rng = np.random.default_rng(seed)
    scale = action.scale(x, z)
    poles = action.pole_positions()
    out = []
    while len(out) < count:
        lam = complex(rng.uniform(0.05, 1.8) * scale,
                      rng.uniform(-0.4, 0.4) * scale)
        if np.min(np.abs(lam - poles)) < 0.05 * scale:
            continue
        out.append(lam)
    return out


@pytest.mark.parametrize("action,x,z", MODELS)
def test_action_derivatives_match_fd(action, x, z):
    h = 1e-6 * action.scale(x, z)
    for lam in _random_lams(action, x, z, 12):
        f = lambda l: exact_action(action, l, x, z)
        d1 = action_derivative(action, lam, x, z, 1)
        want1 = complex_central_diff(f, lam, h)
        assert d1 == pytest.approx(want1, rel=2e-6, abs=1e-10)
        g = lambda l: action_derivative(action, l, x, z, 1)
        d2 = action_derivative(action, lam, x, z, 2)
        want2 = complex_central_diff(g, lam, h)
        assert d2 == pytest.approx(want2, rel=2e-6, abs=1e-10)


@pytest.mark.parametrize("action,x,z", MODELS)
def test_residues_match_circle_integral(action, x, z):
    # residue = (1/2 pi i) closed integral of Sbar around the pole
    poles = action.pole_positions()
    for pr in poles_and_residues(action, x, z):
        others = poles[np.abs(poles - pr.lam) > 1e-12]
        gap = np.min(np.abs(others - pr.lam)) if others.size else 1.0
        r = 0.3 * gap
        theta = 2 * np.pi * np.arange(256) / 256
        lam = pr.lam + r * np.exp(1j * theta)
        vals = np.array([exact_action(action, l, x, z) for l in lam])
        resid = np.mean(vals * r * np.exp(1j * theta))
        assert resid.imag == pytest.approx(0.0, abs=1e-9 * max(1, abs(resid)))
        assert resid.real == pytest.approx(pr.residue, rel=1e-9, abs=1e-12)


def test_channel_free_limit_matches_uniform_medium():
    ch = channel_action(n0=1.0, alpha=1e-12, z_s=0.5)
    un = linear_action(n0=1.0, a=0.0, z_s=0.5)
    for lam in (0.3, 1.7, 4.0 + 0.5j):
        a = exact_action(ch, lam, 2.0, 1.0)
        b = exact_action(un, lam, 2.0, 1.0)
        assert a == pytest.approx(b, rel=1e-8)


def test_simple_cusp_critical_points_match_quartic():
    n0, mu = 1.0, 1.0
    action = cusp_action(n0=n0, mu=mu)
    wide = (-2.5, 2.5, -1.2, 1.2)

    def quartic(x, z):
        # stationary condition cleared of denominators
        c4 = 4 * n0 ** 2
        c3 = -8 * n0 ** 2 * mu
        c2 = 4 * n0 ** 2 * mu ** 2 - x ** 2 - z ** 2
        c1 = 2 * mu * z ** 2
        c0 = -mu ** 2 * z ** 2
        return np.roots([c4, c3, c2, c1, c0])

    # inside the astroid the quartic has four real roots; three sit on the
    # positive half-axis (three-arrival interference region)
    x, z = 0.3, 0.4
    cps = find_critical_points(action, x, z, region=wide, expected=4)
    assert len(cps) == 4
    assert all(cp.classification == "real" for cp in cps)
    want = np.sort(quartic(x, z).real)
    got = np.sort([cp.lam.real for cp in cps])
    assert np.allclose(got, want, rtol=1e-8, atol=1e-10)
    pos = find_critical_points(action, x, z)
    assert len(pos) == 3
    assert all(cp.lam.real > 0 for cp in pos)

    # outside: two real roots plus one complex-conjugate pair; the
    # positive half-axis keeps one real arrival and the evanescent pair
    x, z = 2.5, 1.5
    cps = find_critical_points(action, x, z, region=wide, expected=4)
    assert len(cps) == 4
    n_real = sum(cp.classification == "real" for cp in cps)
    assert n_real == 2
    pair = [cp.lam for cp in cps if cp.classification == "complex-pair member"]
    assert pair[0] == pytest.approx(np.conj(pair[1]), rel=1e-9)
    roots = quartic(x, z)
    for cp in cps:
        assert np.min(np.abs(roots - cp.lam)) < 1e-7
    pos = find_critical_points(action, x, z)
    assert sum(cp.classification == "real" for cp in pos) == 1
    assert sum(cp.classification == "complex-pair member" for cp in pos) == 2


def test_linear_profile_critical_points_match_biquadratic():
    n0, a = 1.0, 0.2
    action = linear_action(n0=n0, a=a)
    x, z = 3.0, 1.0
    cands = linear_profile_stationary_lambda(n0, a, x, z, 0.0, 0.0)
    scale = action.scale(x, z)
    region = (1e-6 * scale, 2.5 * scale, -1.2 * scale, 1.2 * scale)
    cps = find_critical_points(action, x, z, region=region)
    assert cps, "no stationary points found"
    inside = [c for c in cands
              if region[0] <= c.real <= region[1]
              and region[2] <= c.imag <= region[3]
              and abs(complex(action.derivative(c, x, z, 1))) < 1e-8]
    assert len(cps) == len(inside)
    for cp in cps:
        assert np.min(np.abs(np.array(inside) - cp.lam)) < 1e-7


def test_critical_point_derivative_is_zero_and_second_matches():
    action = channel_action(n0=1.0, alpha=0.01, z_s=3.0)
    gap = action.pole_gap()
    region = (0.05 * gap, 2.5 * gap, -0.8 * gap, 0.8 * gap)
    cps = find_critical_points(action, 40.0, -1.0, region=region)
    assert cps
    for cp in cps:
        assert abs(action_derivative(action, cp.lam, 40.0, -1.0, 1)) < 1e-9
        d2 = complex_central_diff(
            lambda l: action_derivative(action, l, 40.0, -1.0, 1),
            cp.lam, 1e-6 * gap)
        assert cp.second_derivative == pytest.approx(d2, rel=1e-5)


@pytest.mark.parametrize("action,x,z,n2_of", [
    (linear_action(1.1, 0.3, 0.0, 0.0), 1.2, 0.4,
     lambda x, z: 1.1 ** 2 - 0.3 * z),
    (cusp_action(0.9, 1.3), 0.7, 1.2, lambda x, z: 0.81),
    (channel_action(1.0, 0.01, z_s=3.0, m_max=2), 22.0, -2.0,
     lambda x, z: 1.0 - 0.01 * z * z),
    (effective_cusp_for_ghost(
        ghost=ghost_sources(channel_action(1.0, 0.01, z_s=3.0))[0]),
     18.0, -2.5, lambda x, z: 1.0 - 0.01 * 9.0),
])
def test_integrand_solves_pathlength_schrodinger(action, x, z, n2_of):
    # (Lap + k0^2 n2) Psi + i k0 dPsi/dLam = 0 with Psi = P exp(i k0 Sbar);
    # this pins the exact prefactor for every model.  Psi is renormalized
    # by its center value so the FD works on O(1) numbers with small
    # phases; the identity is linear, so nothing is lost.
    k0 = 3.0
    h = 5e-5
    rng = np.random.default_rng(11)
    scale = action.scale(x, z)
    poles = action.pole_positions()

    def expo(lam, xx, zz):
        return (action.log_prefactor(lam, k0, xx, zz)
                + 1j * k0 * action.action(lam, xx, zz))

    checked = 0
    while checked < 50:
        lam = complex(rng.uniform(0.05, 0.9) * scale,
                      rng.uniform(-0.1, 0.1) * scale)
        if np.min(np.abs(lam - poles)) < 0.05 * scale:
            continue
        if abs(lam.imag) < 1e-3 * scale:
            continue
        if action.model == "QuadraticChannel":
            # avoid the vertical branch-cut lines of the prefactor log
            w_re = 2.0 * np.sqrt(action.alpha) * lam.real
            if abs(((w_re - 1.5 * np.pi) % (2 * np.pi)) - 0.0) < 1e-3 \
               or abs(((w_re - 1.5 * np.pi) % (2 * np.pi)) - 2 * np.pi) < 1e-3:
                continue
        C = expo(lam, x, z)

        def psi(l, xx, zz):
            return np.exp(expo(l, xx, zz) - C)

        pxx = (psi(lam, x + h, z) - 2.0 + psi(lam, x - h, z)) / h ** 2
        pzz = (psi(lam, x, z + h) - 2.0 + psi(lam, x, z - h)) / h ** 2
        plam = (psi(lam + h, x, z) - psi(lam - h, x, z)) / (2 * h)
        resid = pxx + pzz + k0 ** 2 * n2_of(x, z) + 1j * k0 * plam
        norm = max(abs(pxx), k0 ** 2, k0 * abs(plam))
        assert abs(resid) / norm < 1e-4
        checked += 1


def test_channel_poles_and_residues_structure():
    action = channel_action(n0=1.0, alpha=0.01, x_s=1.0, z_s=3.0, m_max=8)
    recs = poles_and_residues(action, 40.0, 5.0)
    assert len(recs) == 17
    gap = np.pi / 0.2
    origin = [r for r in recs if r.m == 0][0]
    assert origin.lam == 0.0
    assert origin.codim == 2
    assert origin.residue == pytest.approx(((40 - 1) ** 2 + 2 ** 2) / 4)
    m1 = [r for r in recs if r.m == 1][0]
    assert m1.lam == pytest.approx(gap)
    assert m1.codim == 1
    assert m1.residue == pytest.approx((5 + 3) ** 2 / 4)
    m2 = [r for r in recs if r.m == 2][0]
    assert m2.residue == pytest.approx((5 - 3) ** 2 / 4)
    neg = [r for r in recs if r.m == -1][0]
    assert neg.lam == pytest.approx(-gap)


def test_ghost_sources_mirror_depths():
    action = channel_action(n0=1.0, alpha=0.01, x_s=0.0, z_s=3.0, m_max=4)
    ghosts = ghost_sources(action)
    assert [g.m for g in ghosts] == [1, 2, 3, 4]
    assert ghosts[0].point == (0.0, -3.0)
    assert ghosts[1].point == (0.0, 3.0)
    assert ghosts[0].n_eff == pytest.approx(np.sqrt(0.91))
    assert ghosts[0].lam_pole == pytest.approx(np.pi / 0.2)


def test_predict_cusps_worked_example():
    # alpha = 0.01, n0 = 1, source depth 3: first return cusp at depth -3,
    # propagation distance 2 n(3) L_1 = 29.9684, horizontal offset 29.36
    action = channel_action(n0=1.0, alpha=0.01, x_s=0.0, z_s=3.0)
    preds = predict_cusps(action, m_values=[1, 2])
    p1 = preds[0]
    assert p1.z == -3.0
    assert p1.distance == pytest.approx(2 * np.sqrt(0.91) * np.pi / 0.2, rel=1e-12)
    assert p1.distance == pytest.approx(29.9684, abs=5e-4)
    assert p1.x_offsets[0] == pytest.approx(29.36, abs=5e-3)
    p2 = preds[1]
    assert p2.z == 3.0
    assert p2.distance == pytest.approx(2 * np.sqrt(0.91) * np.pi / 0.1, rel=1e-12)


def test_laurent_gamma1_at_ghost_point():
    action = channel_action(n0=1.0, alpha=0.01, x_s=0.0, z_s=3.0)
    gap = action.pole_gap()
    # at the ghost point itself the coefficient is the squared local index
    g1 = laurent_gamma1(action, 0.0, -3.0, gap)
    assert g1.imag == pytest.approx(0.0, abs=1e-10)
    assert g1.real == pytest.approx(0.91, abs=1e-8)
    # off the ghost range the range-curvature term enters
    g1b = laurent_gamma1(action, 10.0, -3.0, gap)
    assert g1b.real == pytest.approx(0.91 - 100.0 / (4 * gap ** 2), abs=1e-8)


def test_laurent_gamma1_against_hand_expansion():
    # about the pole at mu the regular part is g(L) = z^2/(4 L) + L n0^2,
    # so gamma_1 = g'(mu) = n0^2 - z^2/(4 mu^2); about the origin pole the
    # regular part is x^2/(4 (L - mu)) + L n0^2, gamma_1 = n0^2 - x^2/(4 mu^2)
    n0, mu = 0.9, 1.3
    action = cusp_action(n0=n0, mu=mu)
    for x, z in [(0.7, 1.1), (0.2, 0.3), (1.9, -0.6)]:
        got = laurent_gamma1(action, x, z, mu)
        assert got.imag == pytest.approx(0.0, abs=1e-12)
        assert got.real == pytest.approx(n0 ** 2 - z ** 2 / (4 * mu ** 2), rel=1e-10)
        got0 = laurent_gamma1(action, x, z, 0.0)
        assert got0.real == pytest.approx(n0 ** 2 - x ** 2 / (4 * mu ** 2), rel=1e-10)


def test_residue_pde_residuals_small():
    # |grad R|^2 = R and Lap R = codim/2 for every pole residue
    action = channel_action(n0=1.0, alpha=0.01, x_s=0.5, z_s=3.0, m_max=6)
    pts = np.column_stack([RNG.uniform(-50, 50, 25), RNG.uniform(-20, 20, 25)])
    _, res = residue_pde_residuals(action, pts)
    assert np.max(np.abs(res)) < 1e-6
    action2 = cusp_action(n0=1.0, mu=1.0)
    _, res2 = residue_pde_residuals(action2, pts / 10.0)
    assert np.max(np.abs(res2)) < 1e-6


def test_caustic_curve_is_astroid_when_symmetric():
    mu, n_eff = 15.7, 0.95
    r2 = np.linspace(-2 * n_eff * mu, 2 * n_eff * mu, 101)
    r2o, r1, gaps = caustic_curve_from_effective(mu, n_eff, r2, B=0.0)
    assert gaps == []
    k = (2 * n_eff * mu) ** (2.0 / 3.0)
    ok = ~np.isnan(r1)
    lhs = r1[ok] ** (2.0 / 3.0) + np.abs(r2o[ok]) ** (2.0 / 3.0)
    assert np.allclose(lhs, k, rtol=1e-10)


def test_caustic_curve_reports_gaps_for_strong_asymmetry():
    mu, n_eff = 10.0, 1.0
    r2 = np.linspace(-30, 30, 301)
    _, r1, gaps = caustic_curve_from_effective(mu, n_eff, r2, B=0.2)
    assert gaps, "expected missing-curve intervals"
    assert np.isnan(r1).any()


def test_action_for_profile_roundtrip():
    prof = quadratic_channel(n0=1.0, alpha=0.01)
    act = action_for_profile(prof, x_s=0.0, z_s=3.0)
    assert act.model == "QuadraticChannel"
    assert act.alpha == 0.01
    from caustica.profiles import munk
    with pytest.raises(ValueError):
        action_for_profile(munk(0.00737, 1300.0))


def test_log_prefactor_ignored_mode():
    action = EinbeinAction(model="SimpleCusp", n0=1.0, mu=1.0,
                           log_prefactor_mode="ignored")
    assert action.log_prefactor(0.7 + 0.1j, 10.0) == 0.0
    assert action.dlog_prefactor(0.7 + 0.1j) == 0.0


def test_channel_prefactor_reduces_to_free():
    # branch anchored so P -> 1/(4 pi Lambda) at the origin
    action = channel_action(n0=1.0, alpha=0.01)
    for lam in (1e-3, 1e-2):
        P = np.exp(action.log_prefactor(lam, 10.0))
        assert P.real == pytest.approx(1.0 / (4 * np.pi * lam), rel=1e-4)
        assert abs(P.imag) < 1e-6 * abs(P.real)


@given(lam=st.floats(min_value=0.05, max_value=40.0),
       z=st.floats(min_value=-10.0, max_value=10.0))
@settings(max_examples=60, deadline=None)
def test_channel_action_real_on_real_axis(lam, z):
    action = channel_action(n0=1.0, alpha=0.01, z_s=3.0)
    gap = action.pole_gap()
    if np.min(np.abs(lam - action.pole_positions())) < 1e-3 * gap:
        return
    val = exact_action(action, lam, 30.0, z)
    assert abs(val.imag) <= 1e-9 * max(1.0, abs(val.real))
