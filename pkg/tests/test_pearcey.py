"""Quartic canonical integral and the uniform cusp field built on it."""

import numpy as np
import pytest
from scipy.special import gamma

from caustica.einbein import cusp_action
from caustica.contour_field import (
    integrate_real_axis,
    pearcey,
    pearcey_grid,
    pearcey_map,
    uniform_cusp_field,
)


def test_origin_value():
    # closed form: P(0,0) = 2 Gamma(5/4) exp(i pi/8)
    ref = 2.0 * gamma(1.25) * np.exp(1j * np.pi / 8)
    assert abs(pearcey(0.0, 0.0) - ref) < 1e-10


# high-precision quadrature references (30-digit arithmetic, independent
# contour), frozen
MP_REFS = [
    (-5.0, 2.0, -0.17109372286753688 - 1.2457577737549907j),
    (3.0, -4.0, 0.7470761606353791 - 0.32402575735938594j),
    (0.0, 1.0, 1.5509271275992316 + 0.4278926248262675j),
]


@pytest.mark.parametrize("z2,z1,ref", MP_REFS)
def test_reference_values(z2, z1, ref):
    assert abs(pearcey(z2, z1) - ref) < 1e-10


def test_symmetry_in_zeta1():
    rng = np.random.default_rng(42)
    for _ in range(20):
        z2 = rng.uniform(-20.0, 20.0)
        z1 = rng.uniform(0.0, 20.0)
        assert abs(pearcey(z2, z1) - pearcey(z2, -z1)) < 1e-9


def test_grid_matches_scalar():
    z2s = np.array([-2.5, -0.5, 1.5])
    z1s = np.array([-1.5, 0.5, 2.5])
    G = pearcey_grid(z2s, z1s)
    assert G.shape == (3, 3)
    for i in range(3):
        for j in range(3):
            assert abs(G[i, j] - pearcey(z2s[i], z1s[j])) < 1e-10


def test_map_orientation_and_scaling():
    k0 = 2000.0
    act = cusp_action(n0=1.0, mu=1.0)  # cusp at (0, 2)
    inside = pearcey_map(act, 0.0, 1.95, k0)
    outside = pearcey_map(act, 0.0, 2.05, k0)
    assert inside.zeta2 < 0 < outside.zeta2
    off = pearcey_map(act, 0.01, 2.0, k0)
    assert off.zeta1 > 0
    assert abs(off.zeta1 - k0 ** 0.75 * np.sqrt(2.0) * 0.01) < 1e-9
    assert inside.within_trust and outside.within_trust
    far = pearcey_map(act, 0.0, 3.0, k0)
    assert not far.within_trust
    # amplitude mapping factor at mu = n0 = 1
    assert abs(off.jacobian - 1.0 / (np.sqrt(2 * np.pi) * k0 ** 0.75)) < 1e-12


def test_cusp_point_amplitude():
    # on-cusp closed form: sqrt(2) Gamma(1/4) mu^(1/4)
    #                      / (4 sqrt(pi) k0^(3/4) n0^(1/2))
    k0 = 2000.0
    act = cusp_action(n0=1.0, mu=1.0)
    ref = np.sqrt(2.0) * gamma(0.25) / (4.0 * np.sqrt(np.pi) * k0 ** 0.75)
    val = abs(uniform_cusp_field(act, 0.0, 2.0, k0))
    assert abs(val - ref) / ref < 1e-8


def test_uniform_matches_exact_field_near_cusp():
    # spot check of the acceptance comparison (full grid in the
    # acceptance suite): uniform amplitude vs the real-axis integral
    k0 = 2000.0
    act = cusp_action(n0=1.0, mu=1.0)
    for z2, z1 in [(-1.5, 0.5), (0.5, -1.5), (2.5, 2.5)]:
        z = 2.0 + z2 / np.sqrt(k0)
        x = z1 / (k0 ** 0.75 * np.sqrt(2.0))
        uni = abs(uniform_cusp_field(act, x, z, k0))
        ref = abs(integrate_real_axis(act, x, z, k0))
        assert abs(uni / ref - 1.0) < 0.05
