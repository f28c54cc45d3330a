"""Depth-dependent refractive-index profiles and analytic perturbation fields.

Every model exposes the squared index n2, because n2 is the quantity that
enters the wave equation, the ray Hamiltonian, and the boundary-value force
2 Lambda^2 grad n2.  All supported profiles vary in depth z only, so the
transverse gradient component is identically zero; evaluation still takes
(x, z) to keep callers geometry-agnostic.

Kinds
-----
Constant          n2 = n0^2
LinearSquared     n2 = n0^2 - a z
QuadraticChannel  n2 = n0^2 - alpha z^2
Munk              n = 1/D,  D = 1 + eps (eta - 1 + exp(-eta)),
                  eta = 2 (z - z_c) / z_c
PerturbedChannel  n2 = n0^2 - alpha u^2 - sigma u^2 exp(-rho u^2),
                  u = z - z_axis

An additive perturbation strength * Omega(z) can ride on any base kind via
ProfileModel.perturbed; Omega is a PerturbationField.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "DomainError",
    "PerturbationField",
    "ProfileModel",
    "constant",
    "linear_squared",
    "munk",
    "perturbed_channel",
    "quadratic_channel",
]


class DomainError(ValueError):
    """Profile evaluated at a non-finite point, or the evaluation itself
    produced a non-finite value."""


PERTURBATION_KINDS = ("ZSquared", "ZLinear", "GaussianBump", "CompactSupport")

PROFILE_KINDS = (
    "Constant",
    "LinearSquared",
    "QuadraticChannel",
    "Munk",
    "PerturbedChannel",
)

# Mollifier edge sliver: where 1 - u^2 < _EDGE the factor exp(1 - 1/(1 - u^2))
# underflows to exactly 0.0 in doubles, so treating the sliver as outside the
# support changes nothing and avoids 0/0 in the derivative formulas.
_EDGE = 1e-8


@dataclass(frozen=True)
class PerturbationField:
    """Analytic depth perturbation Omega(z) with exact first and second
    derivatives.

    With v = z - center:

        ZSquared        amplitude * v^2
        ZLinear         amplitude * v
        GaussianBump    amplitude * v^2 * exp(-(v/width)^2)
        CompactSupport  amplitude * exp(1 - 1/(1 - (v/width)^2)) for |v| < width,
                        identically zero outside (smooth at the edge)

    GaussianBump is a quadratic with Gaussian suppression at depth scale
    width; CompactSupport is the standard mollifier bump.
    """

    kind: str
    center: float = 0.0
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind: {self.kind!r}")
        if not np.all(np.isfinite([self.center, self.width, self.amplitude])):
            raise ValueError("perturbation parameters must be finite")
        if self.kind in ("GaussianBump", "CompactSupport") and self.width <= 0:
            raise ValueError("width must be positive")

    def value(self, z):
        """Omega(z).  Scalar in, float out; arrays map elementwise."""
        v = np.asarray(z, dtype=float) - self.center
        A = self.amplitude
        if self.kind == "ZSquared":
            out = A * v * v
        elif self.kind == "ZLinear":
            out = A * v
        elif self.kind == "GaussianBump":
            out = A * v * v * np.exp(-((v / self.width) ** 2))
        else:
            out = A * self._moll(v)[1]
        return out if np.ndim(z) else float(out)

    def derivative(self, z):
        """dOmega/dz."""
        v = np.asarray(z, dtype=float) - self.center
        A = self.amplitude
        if self.kind == "ZSquared":
            out = 2.0 * A * v
        elif self.kind == "ZLinear":
            out = A * np.ones_like(v)
        elif self.kind == "GaussianBump":
            q = (v / self.width) ** 2
            out = 2.0 * A * v * (1.0 - q) * np.exp(-q)
        else:
            u, f, s, inside = self._moll(v, full=True)
            with np.errstate(divide="ignore", over="ignore"):
                d = np.where(inside, f * (-2.0 * u) / (s * s), 0.0)
            out = A * d / self.width
        return out if np.ndim(z) else float(out)

    def second_derivative(self, z):
        """d2Omega/dz2."""
        v = np.asarray(z, dtype=float) - self.center
        A = self.amplitude
        w2 = self.width * self.width
        if self.kind == "ZSquared":
            out = 2.0 * A * np.ones_like(v)
        elif self.kind == "ZLinear":
            out = np.zeros_like(v)
        elif self.kind == "GaussianBump":
            q = (v / self.width) ** 2
            out = A * (2.0 - 10.0 * q + 4.0 * q * q) * np.exp(-q)
        else:
            u, f, s, inside = self._moll(v, full=True)
            u2 = u * u
            with np.errstate(divide="ignore", over="ignore"):
                d2 = np.where(
                    inside,
                    f * (4.0 * u2 / s**4 - 2.0 * (1.0 + 3.0 * u2) / s**3),
                    0.0,
                )
            out = A * d2 / w2
        return out if np.ndim(z) else float(out)

    def _moll(self, v, full=False):
        u = v / self.width
        s = 1.0 - u * u
        inside = s > _EDGE
        s = np.where(inside, s, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            f = np.where(inside, np.exp(1.0 - 1.0 / s), 0.0)
        if full:
            return u, f, s, inside
        return u, f


@dataclass(frozen=True)
class ProfileModel:
    """A depth-dependent squared-index model, optionally carrying one
    additive perturbation omega_strength * omega(z).

    Instances are frozen; `perturbed` returns a new model.  Parameters not
    used by a given kind are simply ignored by the evaluation.
    """

    kind: str
    n0: float = 1.0
    a: float = 0.0
    alpha: float = 0.0
    epsilon: float = 0.0
    z_c: float = 1.0
    sigma: float = 0.0
    rho: float = 0.0
    z_axis: float = 0.0
    omega: Optional[PerturbationField] = None
    omega_strength: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind: {self.kind!r}")
        nums = [self.n0, self.a, self.alpha, self.epsilon, self.z_c,
                self.sigma, self.rho, self.z_axis, self.omega_strength]
        if not np.all(np.isfinite(nums)):
            raise ValueError("profile parameters must be finite")
        if self.kind == "Munk" and self.z_c == 0.0:
            raise ValueError("Munk profile needs z_c != 0")

    # -- public evaluation ------------------------------------------------

    def eval_n_squared(self, x, z):
        """Squared index n2 at (x, z).

        Inputs broadcast; scalar inputs return a float.  Raises
        DomainError for non-finite inputs or a non-finite result.
        """
        xf, zf = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
        out = self._n2(zf)
        if self.omega is not None and self.omega_strength != 0.0:
            out = out + self.omega_strength * np.asarray(self.omega.value(zf))
        out = np.broadcast_to(out, xf.shape)
        self._check(xf, zf, out)
        if np.ndim(x) == 0 and np.ndim(z) == 0:
            return float(out)
        return out

    def eval_grad_n_squared(self, x, z):
        """Gradient (d n2/dx, d n2/dz) at (x, z).

        The x component is identically zero for every supported kind; it is
        returned anyway so ray and boundary-value code can stay general.
        """
        xf, zf = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
        dz = self._dn2_dz(zf)
        if self.omega is not None and self.omega_strength != 0.0:
            dz = dz + self.omega_strength * np.asarray(self.omega.derivative(zf))
        dz = np.broadcast_to(dz, xf.shape)
        dx = np.zeros_like(dz)
        self._check(xf, zf, dz)
        if np.ndim(x) == 0 and np.ndim(z) == 0:
            return (0.0, float(dz))
        return (dx, dz)

    def eval_d2n2_dz2(self, x, z):
        """Second depth derivative d2 n2/dz2, for the variational (Jacobi)
        system of the ray tracer."""
        xf, zf = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
        out = self._d2n2_dz2(zf)
        if self.omega is not None and self.omega_strength != 0.0:
            out = out + self.omega_strength * np.asarray(
                self.omega.second_derivative(zf))
        out = np.broadcast_to(out, xf.shape)
        self._check(xf, zf, out)
        if np.ndim(x) == 0 and np.ndim(z) == 0:
            return float(out)
        return out

    def n(self, x, z):
        """Index n = sqrt(n2).  Raises DomainError where n2 < 0 (no real
        propagation speed there)."""
        n2 = self.eval_n_squared(x, z)
        arr = np.asarray(n2, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError("n2 < 0 at the requested point")
        out = np.sqrt(arr)
        if np.ndim(x) == 0 and np.ndim(z) == 0:
            return float(out)
        return out

    def perturbed(self, field: PerturbationField, strength: float) -> "ProfileModel":
        """New model with n2 -> n2 + strength * field(z).

        Only one perturbation may be attached; stacking is rejected rather
        than silently composed.
        """
        if self.omega is not None:
            raise ValueError("profile already carries a perturbation")
        if not np.isfinite(strength):
            raise ValueError("strength must be finite")
        return dataclasses.replace(self, omega=field, omega_strength=float(strength))

    # -- per-kind internals ----------------------------------------------

    def _n2(self, z):
        if self.kind == "Constant":
            return np.full_like(z, self.n0 * self.n0)
        if self.kind == "LinearSquared":
            return self.n0 * self.n0 - self.a * z
        if self.kind == "QuadraticChannel":
            return self.n0 * self.n0 - self.alpha * z * z
        if self.kind == "Munk":
            invD = self._munk_invD(z)[0]
            return invD * invD
        u = z - self.z_axis
        u2 = u * u
        return (self.n0 * self.n0 - self.alpha * u2
                - self.sigma * u2 * np.exp(-self.rho * u2))

    def _dn2_dz(self, z):
        if self.kind == "Constant":
            return np.zeros_like(z)
        if self.kind == "LinearSquared":
            return np.full_like(z, -self.a)
        if self.kind == "QuadraticChannel":
            return -2.0 * self.alpha * z
        if self.kind == "Munk":
            invD, Dz, _ = self._munk_invD(z, derivs=True)
            # ordered as (Dz/D) * invD^2 so the exp tail underflows cleanly
            return -2.0 * (invD * Dz) * (invD * invD)
        u = z - self.z_axis
        ru2 = self.rho * u * u
        return (-2.0 * self.alpha * u
                - 2.0 * self.sigma * u * (1.0 - ru2) * np.exp(-ru2))

    def _d2n2_dz2(self, z):
        if self.kind in ("Constant", "LinearSquared"):
            return np.zeros_like(z)
        if self.kind == "QuadraticChannel":
            return np.full_like(z, -2.0 * self.alpha)
        if self.kind == "Munk":
            invD, Dz, Dzz = self._munk_invD(z, derivs=True)
            r = invD * Dz
            q = invD * Dzz
            return (6.0 * r * r - 2.0 * q) * (invD * invD)
        u = z - self.z_axis
        ru2 = self.rho * u * u
        return (-2.0 * self.alpha
                - 2.0 * self.sigma * (1.0 - 5.0 * ru2 + 2.0 * ru2 * ru2)
                * np.exp(-ru2))

    def _munk_invD(self, z, derivs=False):
        eta = 2.0 * (z - self.z_c) / self.z_c
        # exp saturates below eta = -600: there D^-1 underflows anyway, so the
        # clipped force/index are exactly the double-precision limits (0).
        E = np.exp(np.minimum(-eta, 600.0))
        D = 1.0 + self.epsilon * (eta - 1.0 + E)
        invD = 1.0 / D
        if not derivs:
            return (invD,)
        c = 2.0 / self.z_c
        Dz = self.epsilon * (1.0 - E) * c
        Dzz = self.epsilon * E * c * c
        return invD, Dz, Dzz

    def _check(self, xf, zf, out):
        if not (np.all(np.isfinite(xf)) and np.all(np.isfinite(zf))
                and np.all(np.isfinite(out))):
            raise DomainError(f"non-finite evaluation for profile kind {self.kind}")


# -- factories ------------------------------------------------------------

def constant(n0: float = 1.0) -> ProfileModel:
    """Uniform medium n2 = n0^2."""
    return ProfileModel(kind="Constant", n0=n0)


def linear_squared(n0: float, a: float) -> ProfileModel:
    """n2 = n0^2 - a z."""
    return ProfileModel(kind="LinearSquared", n0=n0, a=a)


def quadratic_channel(n0: float, alpha: float) -> ProfileModel:
    """Waveguide channel n2 = n0^2 - alpha z^2, symmetric about z = 0."""
    return ProfileModel(kind="QuadraticChannel", n0=n0, alpha=alpha)


def munk(epsilon: float, z_c: float) -> ProfileModel:
    """Canonical deep-sound-channel profile with axis depth z_c."""
    return ProfileModel(kind="Munk", epsilon=epsilon, z_c=z_c)


def perturbed_channel(n0: float, alpha: float, sigma: float, rho: float,
                      z_axis: float) -> ProfileModel:
    """Channel plus a Gaussian-suppressed quadratic term about z_axis."""
    return ProfileModel(kind="PerturbedChannel", n0=n0, alpha=alpha,
                        sigma=sigma, rho=rho, z_axis=z_axis)
