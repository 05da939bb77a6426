"""Pair potentials and energies of finite point configurations.

Four families are implemented: an ideal (non-interacting) gas, a hard core
of diameter a, a positive step of height epsilon on (0, a), and a custom
tabulated potential used to exercise the stable-regular code paths in
tests.  Energies are always reported together with the Boltzmann weight
exp(-beta * U) so that hard-core overlaps never travel through exp(+inf):
an overlapping pair short-circuits to weight 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _sciint

from .errors import ConfigError, NotRegular, NotStable

FAMILIES = ("ideal", "hardcore", "step", "custom")

# ball volume and sphere surface in nu dimensions
def _ball_volume(radius, dim):
    return math.pi ** (dim / 2.0) * radius**dim / math.gamma(dim / 2.0 + 1.0)


def _sphere_surface(dim):
    # measure of the unit sphere S^{dim-1}; equals 2 for dim == 1
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class StabilityInfo:
    """Lower-bound constant B with U >= -B*n, plus structural flags."""

    B: float
    is_positive: bool
    has_hard_core: bool
    estimated: bool = False  # True when B came from a probe grid, not a closed form


@dataclass
class PairPotential:
    """Radial pair potential with inverse temperature folded in.

    Parameters
    ----------
    family : str
        One of "ideal", "hardcore", "step", "custom".
    a : float
        Core (or step) range.  Unused for "ideal".
    epsilon : float
        Step height, "step" family only.
    beta : float
        Inverse temperature used by every weight computed here.
    dimension : int
        Spatial dimension nu of the points the potential acts on.
    table : (r, phi) arrays
        Knots for the "custom" family; linear interpolation between knots,
        zero beyond the last knot.
    """

    family: str
    a: float = 1.0
    epsilon: float = 0.0
    beta: float = 1.0
    dimension: int = 1
    table: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown potential family {self.family!r}")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.family in ("hardcore", "step") and self.a <= 0:
            raise ConfigError("range a must be positive")
        if self.family == "step" and self.epsilon < 0:
            raise ConfigError("step height epsilon must be >= 0")
        if self.family == "custom":
            if self.table is None:
                raise ConfigError("custom potential needs a (r, phi) table")
            r, phi = (np.asarray(v, dtype=float) for v in self.table)
            if r.ndim != 1 or r.shape != phi.shape or len(r) < 2:
                raise ConfigError("custom table must be two 1-d arrays of equal length >= 2")
            if not np.all(np.diff(r) > 0):
                raise ConfigError("custom table radii must be strictly increasing")
            object.__setattr__(self, "table", (r, phi))

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def ideal(beta=1.0, dimension=1):
        return PairPotential("ideal", a=0.0, beta=beta, dimension=dimension)

    @staticmethod
    def hardcore(a, beta=1.0, dimension=1):
        return PairPotential("hardcore", a=a, beta=beta, dimension=dimension)

    @staticmethod
    def step(a, epsilon, beta=1.0, dimension=1):
        return PairPotential("step", a=a, epsilon=epsilon, beta=beta, dimension=dimension)

    @staticmethod
    def custom(r, phi, beta=1.0, dimension=1):
        return PairPotential("custom", a=float(np.max(r)), beta=beta,
                             dimension=dimension, table=(r, phi))

    @staticmethod
    def from_config(cfg: dict) -> "PairPotential":
        """Build from the structured config mapping (keys: family, a, epsilon, beta, dimension)."""
        if "family" not in cfg:
            raise ConfigError("potential config needs a 'family' key")
        kwargs = dict(
            family=cfg["family"],
            a=float(cfg.get("a", 1.0)),
            epsilon=float(cfg.get("epsilon", 0.0)),
            beta=float(cfg.get("beta", 1.0)),
            dimension=int(cfg.get("dimension", 1)),
        )
        if cfg["family"] == "custom":
            try:
                kwargs["table"] = (cfg["r_values"], cfg["phi_values"])
            except KeyError as exc:
                raise ConfigError("custom potential config needs r_values and phi_values") from exc
        return PairPotential(**kwargs)

    @staticmethod
    def from_file(path) -> "PairPotential":
        with open(path) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"potential config {path} is not valid JSON: {exc}") from exc
        return PairPotential.from_config(cfg)

    def to_config(self) -> dict:
        cfg = {
            "family": self.family,
            "a": self.a,
            "epsilon": self.epsilon,
            "beta": self.beta,
            "dimension": self.dimension,
        }
        if self.family == "custom":
            r, phi = self.table
            cfg["r_values"] = [float(v) for v in r]
            cfg["phi_values"] = [float(v) for v in phi]
        return cfg

    # -- pointwise evaluation ------------------------------------------------

    def evaluate_phi(self, r):
        """Potential value at separation r (scalar or array).  May be +inf."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("separations must be >= 0")
        if self.family == "ideal":
            out = np.zeros_like(r)
        elif self.family == "hardcore":
            out = np.where(r < self.a, np.inf, 0.0)
        elif self.family == "step":
            out = np.where(r < self.a, self.epsilon, 0.0)
        else:
            rk, pk = self.table
            out = np.interp(r, rk, pk, left=pk[0], right=0.0)
        return out if out.ndim else float(out)

    def boltzmann(self, r):
        """exp(-beta*phi(r)) without evaluating exp at +inf."""
        r = np.asarray(r, dtype=float)
        if self.family == "ideal":
            out = np.ones_like(r)
        elif self.family == "hardcore":
            out = np.where(r < self.a, 0.0, 1.0)
        else:
            phi = np.asarray(self.evaluate_phi(r), dtype=float)
            out = np.zeros_like(phi)
            finite = np.isfinite(phi)
            out[finite] = np.exp(-self.beta * phi[finite])
        return out if out.ndim else float(out)

    def mayer_f(self, r):
        """Mayer function exp(-beta*phi(r)) - 1."""
        b = np.asarray(self.boltzmann(r), dtype=float)
        out = b - 1.0
        return out if out.ndim else float(out)

    @property
    def interaction_range(self):
        """Radius beyond which the Mayer function vanishes identically (inf if none)."""
        if self.family == "ideal":
            return 0.0
        if self.family in ("hardcore", "step"):
            return self.a
        r, phi = self.table
        nz = np.nonzero(phi)[0]
        return float(r[nz[-1] + 1]) if len(nz) and nz[-1] + 1 < len(r) else float(r[-1])

    @property
    def has_hard_core(self):
        if self.family == "hardcore":
            return True
        if self.family == "custom":
            return bool(np.any(~np.isfinite(self.table[1])))
        return False

    @property
    def is_positive(self):
        if self.family in ("ideal", "hardcore", "step"):
            return True
        return bool(np.all(self.table[1] >= 0))

    # -- configuration energies ----------------------------------------------

    def _pair_separations(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] < 2:
            return np.empty(0)
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        iu = np.triu_indices(pts.shape[0], k=1)
        return dist[iu]

    def total_energy(self, points):
        """Total pair energy U of a configuration and its weight exp(-beta*U).

        Returns (U, weight).  U may be +inf; the weight is then exactly 0
        and no overflowing exponential is ever formed.
        """
        seps = self._pair_separations(points)
        if seps.size == 0:
            return 0.0, 1.0
        phi = np.asarray(self.evaluate_phi(seps), dtype=float)
        if np.any(np.isinf(phi)):
            return float("inf"), 0.0
        U = float(phi.sum())
        return U, math.exp(-self.beta * U)

    def cross_energy(self, x1, others):
        """Energy between one point and a configuration, with its weight.

        This is the difference U(x1, others) - U(others) computed directly
        from the cross pairs, so it stays well-defined even when the others
        overlap among themselves.
        """
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        others = np.atleast_2d(np.asarray(others, dtype=float))
        if others.size == 0:
            return 0.0, 1.0
        seps = np.sqrt(((others - x1[None, :]) ** 2).sum(axis=-1))
        phi = np.asarray(self.evaluate_phi(seps), dtype=float)
        if np.any(np.isinf(phi)):
            return float("inf"), 0.0
        W = float(phi.sum())
        return W, math.exp(-self.beta * W)

    def weights_many(self, configs):
        """Vectorized exp(-beta*U) over an array of configurations.

        configs has shape (nc, n, dim); returns shape (nc,).
        """
        configs = np.asarray(configs, dtype=float)
        nc, n, _ = configs.shape
        if n < 2:
            return np.ones(nc)
        iu = np.triu_indices(n, k=1)
        diff = configs[:, iu[0], :] - configs[:, iu[1], :]
        seps = np.sqrt((diff**2).sum(axis=-1))
        if self.family == "ideal":
            return np.ones(nc)
        if self.family == "hardcore":
            return np.where((seps < self.a).any(axis=1), 0.0, 1.0)
        phi = self.evaluate_phi(seps)
        bad = np.isinf(phi).any(axis=1)
        U = np.where(bad, 0.0, phi.sum(axis=1))
        out = np.exp(-self.beta * U)
        out[bad] = 0.0
        return out


# -- stability and regularity ----------------------------------------------


def stability_constant(p: PairPotential, probe_sizes=range(2, 9), seed=7) -> StabilityInfo:
    """Constant B with U(x)_n >= -B*n for all probed configurations.

    The three named families are nonnegative, so B = 0 exactly.  For the
    custom family the constant is estimated on a probe grid of random
    configurations; a per-particle energy that keeps sinking as n grows is
    reported as NotStable.
    """
    if p.family in ("ideal", "hardcore", "step"):
        return StabilityInfo(B=0.0, is_positive=True, has_hard_core=p.family == "hardcore")
    if p.is_positive:
        return StabilityInfo(B=0.0, is_positive=True, has_hard_core=p.has_hard_core, estimated=False)

    rng = np.random.default_rng(seed)
    span = 2.0 * p.interaction_range if p.interaction_range > 0 else 2.0
    per_particle = []
    for n in probe_sizes:
        best = 0.0
        for _ in range(200):
            pts = rng.uniform(0.0, span, size=(n, p.dimension))
            U, _ = p.total_energy(pts)
            if np.isfinite(U):
                best = min(best, U / n)
        per_particle.append(best)
    per_particle = np.asarray(per_particle)
    # catastrophe test: the per-particle minimum must level off with n
    drops = np.diff(per_particle)
    if len(drops) >= 3 and np.all(drops < -1e-3) and drops[-1] <= drops[0] * 0.5:
        raise NotStable(
            f"per-particle energy keeps sinking with n: {per_particle.tolist()}"
        )
    B = max(0.0, -float(per_particle.min()))
    return StabilityInfo(B=B, is_positive=False, has_hard_core=p.has_hard_core, estimated=True)


def regularity_C(p: PairPotential):
    """Integral of |exp(-beta*phi) - 1| over space, with an error bound.

    Closed forms exist for the named families (the integrand is an
    indicator times a constant); the custom family is integrated by
    adaptive radial quadrature.  Returns (C, error_bound).
    """
    dim = p.dimension
    if p.family == "ideal":
        return 0.0, 0.0
    if p.family == "hardcore":
        return _ball_volume(p.a, dim), 0.0
    if p.family == "step":
        return (1.0 - math.exp(-p.beta * p.epsilon)) * _ball_volume(p.a, dim), 0.0

    r_knots, phi = p.table
    if not np.all(np.isfinite(phi)):
        raise NotRegular("custom table contains non-finite potential values")
    rmax = float(r_knots[-1])

    def integrand(r):
        return abs(p.mayer_f(r)) * r ** (dim - 1)

    val, err = _sciint.quad(integrand, 0.0, rmax, limit=200,
                            points=list(map(float, r_knots[:-1])) if len(r_knots) <= 50 else None)
    if not np.isfinite(val):
        raise NotRegular("radial quadrature of |f| diverged")
    s = _sphere_surface(dim)
    return s * val, s * err
