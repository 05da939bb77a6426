"""Configuration integrals over a box: exact, quadrature, and sampled routes.

The central objects are the canonical integrals

    Z_m = integral over Lambda^m of exp(-beta * U(y_1..y_m)) dy

and their anchored variants where n points are held fixed.  Three methods
are implemented and tagged on every value: "exact" (closed forms: ideal
gas in any dimension, hard rods on a segment, both plain and anchored),
"quadrature" (tensorized panel Gauss-Legendre, capped in total dimension),
and "sampling" (scrambled Sobol averages with replicate standard errors).

Boxes have per-axis extents with coordinates in [0, extent]; particles are
points (rod centers in one dimension) and there is no wall potential, so
the box only truncates the integration domain.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import qmc

from .errors import ConfigError, UseSampling
from .potentials import PairPotential
from .slog import SLog

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DIMENSION_CAP = 6  # tensor quadrature refuses beyond nu*m axes
_POINT_BUDGET = 400_000  # total tensor nodes per integral


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with coordinates in [0, extent] along each axis."""

    extents: tuple

    def __post_init__(self):
        ext = tuple(float(e) for e in np.atleast_1d(self.extents))
        if any(e <= 0 for e in ext):
            raise ConfigError("box extents must be positive")
        object.__setattr__(self, "extents", ext)

    @property
    def dimension(self):
        return len(self.extents)

    @property
    def volume(self):
        return float(np.prod(self.extents))

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ext = np.asarray(self.extents)
        return bool(np.all(pts >= 0.0) and np.all(pts <= ext[None, :]))

    def to_json(self):
        return list(self.extents)


# -- exact hard-rod formulas -------------------------------------------------


def exact_hardrod_Z(L, a, m) -> SLog:
    """Canonical integral of m labeled hard rods of diameter a on [0, L].

    The classic free-volume result (L - (m-1)a)^m, zero once the rods no
    longer fit.  Returned in signed-log form; m = 0 gives 1.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return SLog(1, 0.0)
    free = L - (m - 1) * a
    if free <= 0.0:
        return SLog(0, float("-inf"))
    return SLog(1, m * math.log(free))


def exact_mp_Z(p, box, m):
    """Arbitrary-precision Z_m for the closed-form routes, or None.

    Mirrors the exact cases of build_table but evaluates them under the
    caller's mpmath working precision.  Downstream root finding needs this:
    for a wide hard-rod box the smallest zero is so ill-conditioned that
    the double rounding of the coefficients alone moves it in the third
    decimal, so the float64 table cannot be re-used.
    """
    import mpmath as mp

    if m == 0:
        return mp.mpf(1)
    if p.family == "ideal":
        return mp.mpf(box.volume) ** m
    if m == 1:
        return mp.mpf(box.volume)
    if p.family == "hardcore" and box.dimension == 1:
        free = mp.mpf(box.extents[0]) - (m - 1) * mp.mpf(p.a)
        return free**m if free > 0 else mp.mpf(0)
    return None


def _compositions(total, parts):
    """All tuples of nonnegative ints of the given length summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def hardrod_anchored_many(L, a, anchors, m):
    """Anchored hard-rod integrals for a batch of anchor rows, exactly.

    anchors has shape (nc, n) (n may be 0); returns shape (nc,) with

        A_m(x_1..x_n) = integral over [0,L]^m of exp(-beta*U(x, y)) dy,

    which for hard rods counts the free volume of m labeled rods among the
    fixed ones.  Sorting the anchors splits [0, L] into n+1 gaps; each way
    of distributing the m rods over the gaps contributes a multinomial
    times the per-gap free volume (ell - (k-1)a)_+^k.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    nc, n = anchors.shape
    if m < 0:
        raise ValueError("m must be >= 0")

    if n == 0:
        val = exact_hardrod_Z(L, a, m).value
        return np.full(nc, val)

    srt = np.sort(anchors, axis=1)
    alive = np.ones(nc, dtype=bool)
    if n >= 2:
        alive &= (np.diff(srt, axis=1) >= a).all(axis=1)
    if m == 0:
        return alive.astype(float)

    # gap lengths available to free rod centers
    gaps = np.empty((nc, n + 1))
    gaps[:, 0] = srt[:, 0] - a
    if n >= 2:
        gaps[:, 1:n] = np.diff(srt, axis=1) - 2.0 * a
    gaps[:, n] = L - srt[:, -1] - a

    out = np.zeros(nc)
    m_fact = math.factorial(m)
    for comp in _compositions(m, n + 1):
        coef = m_fact
        term = np.ones(nc)
        for k, g in zip(comp, gaps.T):
            if k == 0:
                continue
            coef //= math.factorial(k)
            free = g - (k - 1) * a
            term = term * np.where(free > 0.0, free, 0.0) ** k
        out += coef * term
    out[~alive] = 0.0
    return out


def hardrod_anchored(L, a, anchors, m) -> float:
    """Single-configuration variant of hardrod_anchored_many."""
    anchors = np.atleast_1d(np.asarray(anchors, dtype=float))
    return float(hardrod_anchored_many(L, a, anchors.reshape(1, -1), m)[0])


# -- panel Gauss quadrature ---------------------------------------------------


def panel_rule(lo, hi, breakpoints, order):
    """Gauss-Legendre nodes/weights on [lo, hi] split at interior breakpoints."""
    cuts = sorted({lo, hi} | {b for b in breakpoints if lo < b < hi})
    base_x, base_w = leggauss(max(2, int(order)))
    nodes, weights = [], []
    for left, right in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (right - left)
        nodes.append(half * (base_x + 1.0) + left)
        weights.append(half * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def contact_lattice(extent, a, kmax, anchors=()):
    """Axis breakpoints at multiples of the interaction range a.

    Includes offsets from the box walls and, when given, from anchor
    coordinates; used to align quadrature panels with the loci where
    hard-core and step weights switch value.
    """
    if a <= 0:
        return []
    pts = set()
    for k in range(1, kmax + 1):
        pts.add(k * a)
        pts.add(extent - k * a)
    for x in anchors:
        for k in range(1, kmax + 1):
            pts.add(x + k * a)
            pts.add(x - k * a)
    return sorted(p for p in pts if 0.0 < p < extent)


def _tensor_axes(box, m, order, breaks_per_axis):
    """Per-axis panel rules for an m-particle tensor integral."""
    axes = []
    for _ in range(m):
        for d, ext in enumerate(box.extents):
            axes.append(panel_rule(0.0, ext, breaks_per_axis[d], order))
    return axes


def _tensor_eval(p, box, m, order, breaks_per_axis, anchors=None):
    """Tensor quadrature of the Boltzmann weight, optionally with anchors."""
    axes = _tensor_axes(box, m, order, breaks_per_axis)
    node_list = [ax[0] for ax in axes]
    wt_list = [ax[1] for ax in axes]
    mesh = np.meshgrid(*node_list, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)  # (N, m*dim)
    wmesh = np.meshgrid(*wt_list, indexing="ij")
    wts = np.prod(np.stack([g.reshape(-1) for g in wmesh], axis=-1), axis=-1)

    configs = pts.reshape(-1, m, box.dimension)
    if anchors is not None:
        anc = np.broadcast_to(anchors, (configs.shape[0],) + anchors.shape)
        configs = np.concatenate([anc, configs], axis=1)
    # chunk the weight evaluation to bound memory
    total = 0.0
    N = configs.shape[0]
    step = 200_000
    for i in range(0, N, step):
        total += float(np.dot(wts[i : i + step], p.weights_many(configs[i : i + step])))
    return total


def _axis_budget(box, m, order, npanels):
    dim_total = box.dimension * m
    per_axis_cap = max(2, int(_POINT_BUDGET ** (1.0 / dim_total)))
    return max(2, min(int(order), per_axis_cap // max(1, npanels) or 2))


def _ladder_orders(o_fine):
    """Refinement window below o_fine, distinct, finest first.

    Mixes near-unit steps (one of them odd) with a descent to a quarter
    of the order.  The near-unit steps shift the aliasing phase of a
    kinked integrand against the node pattern, exposing oscillation; the
    deep rung exposes a common slowly decaying bias that every level in a
    narrow window would share.
    """
    raw = (o_fine, 3 * o_fine // 4, o_fine // 2 + 1, o_fine // 2, o_fine // 4)
    return list(dict.fromkeys(max(2, o) for o in raw))


def _refinement_error(vals):
    """Error estimate for the finest level of an order-refinement window.

    Panel quadrature of an integrand whose kink crosses panels diagonally
    converges below first order, non-monotonically, and with a one-signed
    bias that persists across whole stretches of orders.  Adjacent levels
    therefore agree while sharing the bias, which rules out every
    two-point difference and rate-extrapolation estimate.  The reported
    error is the full spread of a window reaching down to a quarter of
    the order, tripled: over that span the bias itself decays enough to
    enter the spread, and no rate claim is made at all.  A window with a
    single distinct level reports the value itself, since no refinement
    information means no convergence claim.
    """
    if len(vals) == 1:
        return abs(vals[0])
    return 3.0 * (max(vals) - min(vals)) + 1e-14 * abs(vals[0])


def quadrature_Z(p: PairPotential, box: Box, m, order=16):
    """Tensor panel quadrature of Z_m with an order-refinement error estimate.

    Returns (value, error_bound).  Raises UseSampling when nu*m exceeds the
    dimension cap; the error bound is the tripled spread of a four-order
    refinement window, which stays honest for the discontinuous hard-core
    integrands this has to face (see _refinement_error).
    """
    dim_total = box.dimension * m
    if m == 0:
        return 1.0, 0.0
    if dim_total > DIMENSION_CAP:
        raise UseSampling(
            f"nu*m = {dim_total} exceeds quadrature cap {DIMENSION_CAP}",
            dim_total=dim_total,
            cap=DIMENSION_CAP,
        )
    if m == 1:
        return box.volume, 0.0
    rng_a = p.interaction_range
    breaks = []
    for ext in box.extents:
        breaks.append(contact_lattice(ext, rng_a, min(m, 4)) if rng_a > 0 else [])
    npanels = max(len(b) + 1 for b in breaks)
    orders = _ladder_orders(_axis_budget(box, m, order, npanels))
    vals = [_tensor_eval(p, box, m, o, breaks) for o in orders]
    return vals[0], _refinement_error(vals)


def sampled_Z(p: PairPotential, box: Box, m, n_samples=1 << 16, seed=42, replicates=8):
    """Scrambled-Sobol estimate of Z_m with a replicate standard error.

    Deterministic for a given seed.  The points are split into
    independently scrambled replicates; the reported error is the standard
    error of the replicate means.
    """
    if n_samples < 1000:
        raise ConfigError("sampled_Z needs at least 1000 samples")
    if m == 0:
        return 1.0, 0.0
    dim_total = box.dimension * m
    vol = box.volume**m
    if p.family == "ideal":
        return vol, 0.0
    k = max(1, math.ceil(math.log2(max(2, n_samples // replicates))))
    seeds = np.random.SeedSequence(seed).spawn(replicates)
    ext = np.asarray(box.extents)
    means = []
    for ss in seeds:
        eng = qmc.Sobol(d=dim_total, scramble=True, seed=np.random.default_rng(ss))
        u = eng.random_base2(k)
        configs = (u * np.tile(ext, m)).reshape(-1, m, box.dimension)
        means.append(float(p.weights_many(configs).mean()))
    means = np.asarray(means)
    value = vol * float(means.mean())
    stderr = vol * float(means.std(ddof=1) / math.sqrt(replicates))
    return value, stderr


# -- anchored integrals --------------------------------------------------------


def anchored_integral(p: PairPotential, box: Box, anchors, m, order=16, seed=42,
                      strategy=None):
    """A_m(anchors): Boltzmann integral with n points held fixed.

    Routes to the exact closed form when one exists (ideal gas anywhere,
    hard rods in one dimension), otherwise to panel quadrature with panels
    aligned to the anchor contact lattice, falling back to Sobol sampling
    past the dimension cap.  Returns (value, error_bound).
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    if anchors.size == 0:
        anchors = anchors.reshape(0, box.dimension)
    n = anchors.shape[0]
    if anchors.shape[1] != box.dimension:
        raise ConfigError("anchor dimension does not match the box")

    if p.family == "ideal":
        return box.volume**m, 0.0
    if p.family == "hardcore" and box.dimension == 1:
        val = hardrod_anchored(box.extents[0], p.a, anchors[:, 0], m)
        return val, 0.0

    if m == 0:
        _, w = p.total_energy(anchors)
        return w, 0.0

    dim_total = box.dimension * m
    if strategy == "sampling" or dim_total > DIMENSION_CAP:
        return _anchored_sampled(p, box, anchors, m, seed)

    rng_a = p.interaction_range
    breaks = []
    for d, ext in enumerate(box.extents):
        anc = anchors[:, d] if n else ()
        breaks.append(contact_lattice(ext, rng_a, 2, anchors=anc) if rng_a > 0 else [])
    npanels = max(len(b) + 1 for b in breaks)
    orders = _ladder_orders(_axis_budget(box, m, order, npanels))
    vals = [_tensor_eval(p, box, m, o, breaks, anchors=anchors) for o in orders]
    return vals[0], _refinement_error(vals)


def _anchored_sampled(p, box, anchors, m, seed, n_samples=1 << 14, replicates=8):
    dim_total = box.dimension * m
    vol = box.volume**m
    k = max(1, math.ceil(math.log2(max(2, n_samples // replicates))))
    seeds = np.random.SeedSequence(seed).spawn(replicates)
    ext = np.asarray(box.extents)
    means = []
    for ss in seeds:
        eng = qmc.Sobol(d=dim_total, scramble=True, seed=np.random.default_rng(ss))
        u = eng.random_base2(k)
        configs = (u * np.tile(ext, m)).reshape(-1, m, box.dimension)
        anc = np.broadcast_to(anchors, (configs.shape[0],) + anchors.shape)
        full = np.concatenate([anc, configs], axis=1)
        means.append(float(p.weights_many(full).mean()))
    means = np.asarray(means)
    return vol * float(means.mean()), vol * float(means.std(ddof=1) / math.sqrt(replicates))


# -- integral tables with a JSON cache ----------------------------------------


@dataclass
class ZEntry:
    m: int
    slog: SLog
    error: float
    method: str

    @property
    def value(self):
        return self.slog.value


@dataclass
class IntegralTable:
    """Z_m for m = 0..M over one box and potential, with provenance per entry."""

    potential: PairPotential
    box: Box
    M: int
    entries: list = field(default_factory=list)
    built_with: dict = field(default_factory=dict)

    @property
    def fingerprint(self):
        return table_fingerprint(self.potential, self.box)

    def values(self):
        return np.array([e.value for e in self.entries])

    def errors(self):
        return np.array([e.error for e in self.entries])

    def entry(self, m):
        return self.entries[m]

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "fingerprint": self.fingerprint,
            "potential": self.potential.to_config(),
            "box": self.box.to_json(),
            "M": self.M,
            "built_with": self.built_with,
            "entries": [
                {
                    "m": e.m,
                    "log_value": None if e.slog.sign == 0 else e.slog.log_mag,
                    "sign": e.slog.sign,
                    "error": e.error,
                    "method": e.method,
                }
                for e in self.entries
            ],
        }

    def save(self, path):
        payload = json.dumps(self.to_json(), indent=1, sort_keys=True)
        # atomic write so a concurrent reader never sees a torn file
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return path


def table_fingerprint(p: PairPotential, box: Box):
    blob = json.dumps({"potential": p.to_config(), "box": box.to_json()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_path(cache_dir, p: PairPotential, box: Box):
    return os.path.join(cache_dir, f"table_{table_fingerprint(p, box)[:24]}.json")


def load_table(path, p: PairPotential, box: Box):
    """Load a cached table; return None (with a warning) on any corruption."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"schema_version {raw.get('schema_version')!r}")
        if raw["fingerprint"] != table_fingerprint(p, box):
            raise ValueError("fingerprint mismatch")
        entries = []
        for e in sorted(raw["entries"], key=lambda d: d["m"]):
            sign = int(e["sign"])
            lm = float("-inf") if e["log_value"] is None else float(e["log_value"])
            entries.append(ZEntry(int(e["m"]), SLog.from_log(sign, lm), float(e["error"]), e["method"]))
        if [e.m for e in entries] != list(range(len(entries))):
            raise ValueError("entry indices are not 0..M")
        M = int(raw["M"])
        if M != len(entries) - 1:
            raise ValueError("M does not match entry count")
        return IntegralTable(p, box, M, entries, raw.get("built_with", {}))
    except FileNotFoundError:
        return None
    except Exception as exc:  # corrupt cache: rebuild, never crash
        log.warning("ignoring corrupt table cache %s (%s); rebuilding", path, exc)
        return None


def build_table(p: PairPotential, box: Box, M, order=16, n_samples=1 << 16, seed=42,
                cache_dir=None, force=False) -> IntegralTable:
    """Z_0..Z_M with the best available method per entry, using the cache.

    Method preference is exact > quadrature > sampling.  A cached file is
    reused when it covers the requested M; a corrupt or stale cache file is
    rebuilt in place with a warning.
    """
    path = cache_path(cache_dir, p, box) if cache_dir else None
    if path and not force:
        cached = load_table(path, p, box)
        if cached is not None and cached.M >= M:
            if cached.M == M:
                return cached
            trimmed = IntegralTable(p, box, M, cached.entries[: M + 1], cached.built_with)
            return trimmed

    entries = []
    for m in range(M + 1):
        if m == 0:
            entries.append(ZEntry(0, SLog(1, 0.0), 0.0, "exact"))
            continue
        if p.family == "ideal":
            entries.append(ZEntry(m, SLog.from_value(box.volume**m), 0.0, "exact"))
            continue
        if m == 1:
            entries.append(ZEntry(1, SLog.from_value(box.volume), 0.0, "exact"))
            continue
        if p.family == "hardcore" and box.dimension == 1:
            entries.append(ZEntry(m, exact_hardrod_Z(box.extents[0], p.a, m), 0.0, "exact"))
            continue
        try:
            val, err = quadrature_Z(p, box, m, order=order)
            method = "quadrature"
        except UseSampling:
            val, err = sampled_Z(p, box, m, n_samples=n_samples, seed=seed)
            method = "sampling"
        entries.append(ZEntry(m, SLog.from_value(val), err, method))

    table = IntegralTable(
        p, box, M, entries,
        built_with={"order": order, "n_samples": n_samples, "seed": seed},
    )
    if path:
        table.save(path)
    return table
