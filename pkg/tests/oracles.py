"""Independent numerical oracles used to freeze expected test values.

Everything here is deliberately simple and slow: central differences,
dense scans, brute-force quadrature, closed forms solved by generic root
finders.  Production code never imports this module; tests compare the
fast implementations against these.
"""

import numpy as np


def central_diff(f, x, h):
    """Two-point central first derivative."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def second_diff(f, x, h):
    """Three-point central second derivative."""
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def complex_central_diff(f, x, h):
    """Central derivative of a complex-valued function of one complex
    variable along the real direction of h."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def channel_oscillation(z0, v0, omega, tau):
    """Closed-form solution of Z'' = -omega^2 Z with Z(0) = z0, Z'(0) = v0.

    This is the exact boundary-value trajectory for the quadratic channel,
    used as the oracle for the generic ODE integration.
    """
    tau = np.asarray(tau, dtype=float)
    if omega == 0.0:
        return z0 + v0 * tau
    return z0 * np.cos(omega * tau) + (v0 / omega) * np.sin(omega * tau)


def quartic_roots(coeffs):
    """All roots of a polynomial via the companion matrix (numpy.roots),
    highest degree first, as delivered."""
    return np.roots(coeffs)


def linear_profile_stationary_lambda(n0, a, x, z, x_s, z_s):
    """Stationary points of the linear-profile phase, from the closed-form
    biquadratic: Lambda^2 = [c1 +- sqrt(c1^2 - a^2 R^2 / 4)] / (a^2 / 2),
    c1 = n0^2 - a (z + z_s)/2, R^2 = (x - x_s)^2 + (z - z_s)^2.

    Returns the full set of complex Lambda candidates (both square roots of
    both branches).
    """
    R2 = (x - x_s) ** 2 + (z - z_s) ** 2
    c1 = n0 ** 2 - a * (z + z_s) / 2.0
    disc = complex(c1 * c1 - a * a * R2 / 4.0)
    lam2 = [(c1 + np.sqrt(disc)) / (a * a / 2.0),
            (c1 - np.sqrt(disc)) / (a * a / 2.0)]
    out = []
    for l2 in lam2:
        r = np.sqrt(complex(l2))
        out.extend([r, -r])
    return np.array(out)


def trapz_complex(f, a, b, n):
    """Plain trapezoid rule for a complex integrand on [a, b], n panels."""
    t = np.linspace(a, b, n + 1)
    y = np.array([f(v) for v in t])
    return np.trapezoid(y, t)
