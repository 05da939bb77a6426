"""Exactly solvable one-dimensional reference models.

Hard rods on a segment (the Tonks gas) and the ideal gas.  These provide
independent values for everything the numerical pipeline computes: the
pressure from the transcendental equation w*exp(a*w) = z, the density
from its derivative, thermodynamic-limit series coefficients in closed
form, and the exact truncated partition zeros of the ideal gas.  Nothing
in here touches the quadrature or matrix machinery, which is the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchError
from .integrals import Box, build_table
from .potentials import PairPotential


@dataclass(frozen=True)
class TonksModel:
    """Hard rods of diameter a on a line, thermodynamic limit."""

    a: float = 1.0

    @property
    def branch_point(self):
        """Activity at which the pressure equation folds: -1/(e*a)."""
        return -1.0 / (math.e * self.a)

    @property
    def cluster_radius(self):
        """Radius of the activity series of pressure and density: 1/(e*a)."""
        return 1.0 / (math.e * self.a)

    @property
    def regularity_constant(self):
        """C(beta) = integral of |f|: two half-intervals of length a."""
        return 2.0 * self.a

    def pressure(self, z, tol=1e-13, max_iter=100):
        """beta*p solving (beta*p) * exp(a*beta*p) = z on the principal branch.

        Positive activities are solved in logarithmic form, where Newton
        converges globally and overflow cannot occur however large z is;
        negative ones by safeguarded Newton on the bracket [-1/a, 0].
        Requires z >= -1/(e*a); the relative residual of the returned
        root is at most tol.
        """
        a = self.a
        if z < self.branch_point:
            raise BranchError(
                f"activity {z} lies beyond the branch point {self.branch_point}",
                z=z, branch_point=self.branch_point,
            )
        if z == 0.0:
            return 0.0
        if z > 0.0:
            # with u = a*w the equation reads log(u) + u = log(a*z);
            # the left side is increasing and concave in u, so Newton
            # brackets itself after one step from any positive start
            x = a * z
            lx = math.log(x)
            u = math.log1p(x)
            for _ in range(max_iter):
                step = (math.log(u) + u - lx) / (1.0 / u + 1.0)
                u -= step
                if abs(step) <= 1e-16 * (1.0 + abs(u)):
                    break
            resid = abs(math.log(u) + u - lx) / (1.0 + abs(lx) + u)
            if resid > tol:
                raise BranchError(
                    f"pressure solve stalled at residual {resid}", z=z
                )
            return u / a

        def g(w):
            return w * math.exp(a * w) - z

        # -1/(e*a) <= z < 0: the root lies on the bracket [-1/a, 0]
        lo, hi = -1.0 / a, 0.0
        w = z  # exact at leading order for small |z|
        if not (lo <= w <= hi):
            w = 0.5 * (lo + hi)
        for _ in range(max_iter):
            gv = g(w)
            if gv > 0:
                hi = w
            else:
                lo = w
            dg = (1.0 + a * w) * math.exp(a * w)
            step_ok = dg > 0.0
            if step_ok:
                w_new = w - gv / dg
            if not step_ok or not (lo < w_new < hi):
                w_new = 0.5 * (lo + hi)
            if abs(w_new - w) <= 1e-16 * (1.0 + abs(w)):
                w = w_new
                break
            w = w_new
        resid = abs(w * math.exp(a * w) - z) / (abs(z) + abs(w) + 1e-300)
        if resid > tol:
            raise BranchError(f"pressure solve stalled at residual {resid}", z=z)
        return w

    def density(self, z):
        """rho_1(z) = beta*p / (1 + a*beta*p); always below 1/a."""
        w = self.pressure(z)
        return w / (1.0 + self.a * w)

    def pressure_series(self, N):
        """Activity series of beta*p: (-1)^(k-1) k^(k-1) a^(k-1) / k!, k = 1..N."""
        return np.array(
            [(-1.0) ** (k - 1) * k ** (k - 1) * self.a ** (k - 1) / math.factorial(k)
             for k in range(1, N + 1)]
        )

    def density_series(self, N):
        """Activity series of rho_1: (-1)^(k-1) k^k a^(k-1) / k!, k = 1..N."""
        return np.array(
            [(-1.0) ** (k - 1) * k**k * self.a ** (k - 1) / math.factorial(k)
             for k in range(1, N + 1)]
        )

    def virial_series(self, N):
        """Density series of beta*p = rho/(1 - a*rho): coefficients a^(k-1)."""
        return np.array([self.a ** (k - 1) for k in range(1, N + 1)])

    @property
    def virial_radius(self):
        return 1.0 / self.a

    def pressure_from_density(self, rho):
        if not 0 <= rho < 1.0 / self.a:
            raise ValueError("density must lie in [0, 1/a)")
        return rho / (1.0 - self.a * rho)


def tonks_pressure(z, a=1.0):
    return TonksModel(a).pressure(z)


def tonks_density(z, a=1.0):
    return TonksModel(a).density(z)


def tonks_mayer_coefficients(N, a=1.0, which="density"):
    """Thermodynamic-limit activity-series coefficients, closed form."""
    model = TonksModel(a)
    if which == "density":
        return model.density_series(N)
    if which == "pressure":
        return model.pressure_series(N)
    raise ValueError("which must be 'density' or 'pressure'")


@dataclass(frozen=True)
class IdealModel:
    """Non-interacting gas: Xi = exp(z*V), no zeros, rho_n = z^n."""

    volume: float = 1.0

    def pressure(self, z):
        return z

    def density(self, z):
        return z

    def density_series(self, N):
        return np.array([1.0] + [0.0] * (N - 1))

    @property
    def cluster_radius(self):
        return float("inf")


def ideal_truncated_zeros(volume, M, beta=1.0):
    """Zeros of the degree-M partial sum of exp(z*V), via the shared pipeline.

    The truncated ideal-gas partition function is sum_{k<=M} (zV)^k / k!;
    its smallest zero modulus grows without bound as M does, the contrast
    case to interacting gases whose zeros converge.
    """
    from .partition import assemble, zeros

    p = PairPotential.ideal(beta=beta, dimension=1)
    box = Box((volume,))
    table = build_table(p, box, M)
    return zeros(assemble(table)).zeros
