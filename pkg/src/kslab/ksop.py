"""The integral-equation operator: matrix realization and residual checks.

Coefficient space.  On families whose level-m member is a constant times
the bare Boltzmann weight, the operator shifts coefficients down one level
while the lowest level picks up the linear constraint that ties the family
to the partition coefficients.  That action is the M x M companion matrix

    first row  (-c_1, ..., -c_M),   subdiagonal 1,

whose characteristic polynomial is lambda^M * Xi(1/lambda): eigenvalues
are exactly the reciprocals of the partition zeros.  This matrix is the
computational core; it is exact given the coefficients.

Function space.  The operator's direct form,

    (K phi)(x_1..x_n) = e^{-W} * sum_m (1/m!) *
        integral of prod_k f(x_1 - y_k) * phi(x'_2..x'_n, y_1..y_m) dy,

is implemented as a verifier only, with panel quadrature whose panels are
aligned to the contact lattice of the anchors.  The kernel vanishes beyond
the interaction range, so the y-integrals live on a short interval around
x_1; for hard rods every integrand is then piecewise polynomial on the
panels and the quadrature is exact to rounding.

Truncation bookkeeping, fixed here once and used by the residual check:
with the degree-M family on the left, the exact finite-truncation identity
feeds the operator the degree-(M-1) family and, at level 1, replaces the
inhomogeneous constant 1 by Xi_{M-1}/Xi_M.  With exact integrals the
residual of that discrete system is zero to rounding at every truncation;
the gap to the constant-1 form (the genuine truncation tail) is reported
separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .integrals import Box, contact_lattice, panel_rule
from .partition import PartitionPolynomial, correlation, evaluate
from .potentials import PairPotential

_SOBOL_SAMPLES = 1 << 12


@dataclass
class KSMatrix:
    """Companion realization of the operator at truncation M."""

    matrix: np.ndarray  # unscaled, first row -c_1..-c_M, subdiagonal 1
    scale: float
    coeffs: np.ndarray  # c_0..c_M of the underlying polynomial

    @property
    def M(self):
        return self.matrix.shape[0]

    def scaled_matrix(self):
        """Similarity-equivalent companion built on b_m = c_m * scale^m.

        Its eigenvalues are scale times the unscaled ones; eigensolvers run
        on this better-conditioned variant and divide out the scale.
        """
        b = self.coeffs * self.scale ** np.arange(self.M + 1)
        out = np.zeros_like(self.matrix)
        out[0, :] = -b[1:]
        out[1:, :-1] = np.eye(self.M - 1)
        return out

    def conditioned_matrix(self):
        """Balanced scaled companion for resolvent work.

        A single geometric rescale cannot flatten the concave coefficient
        profile of larger boxes; diagonal balancing can, and contour
        integrals of the resolvent need it.  Same eigenvalues (times scale);
        projections and norm ratios are reported in this frame.
        """
        from scipy.linalg import matrix_balance

        out, _ = matrix_balance(self.scaled_matrix(), permute=False)
        return out

    def to_json(self):
        return {
            "M": self.M,
            "first_row": [float(v) for v in self.matrix[0]],
            "scale": self.scale,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
        return path


def build_ks_matrix(poly: PartitionPolynomial, scale=None) -> KSMatrix:
    """Companion matrix of the truncated operator from a partition polynomial."""
    if poly.M < 1:
        raise ConfigError("need M >= 1 to build the operator matrix")
    c = poly.coeffs
    M = poly.M
    mat = np.zeros((M, M))
    mat[0, :] = -c[1:]
    mat[1:, :-1] = np.eye(M - 1)
    return KSMatrix(mat, poly.scale if scale is None else float(scale), c.copy())


# -- anchored-function families -------------------------------------------------


class CorrelationFamily:
    """Correlations as a vectorized anchored-function family.

    Evaluates rho(z; configs) at a fixed activity for whole batches of
    configurations, with the numerator truncated at total degree `degree`.
    The hard-rod and ideal families get the exact closed-form fast path;
    anything else falls back to per-row quadrature.
    """

    def __init__(self, poly: PartitionPolynomial, z, degree=None):
        self.poly = poly
        self.z = complex(z)
        self.degree = poly.M if degree is None else int(degree)
        xi, cond = evaluate(poly, z)
        self.xi = xi
        self.error_scale = 0.0  # closed-form families carry no integral error
        # correlations of a hard-core gas are zero on overlapping
        # configurations, which licenses the rod-packing cutoff in the
        # operator quadrature
        self.vanishes_on_overlap = bool(poly.potential.has_hard_core)

    def __call__(self, level, configs):
        configs = np.asarray(configs, dtype=float)
        nc = configs.shape[0]
        p, box = self.poly.potential, self.poly.box
        jmax = min(self.poly.M - level, self.degree - level)
        if jmax < 0:
            return np.zeros(nc, dtype=complex)
        if p.family == "hardcore" and box.dimension == 1:
            from .integrals import hardrod_anchored_many

            rows = configs.reshape(nc, level)
            num = np.zeros(nc, dtype=complex)
            for j in range(jmax + 1):
                A = hardrod_anchored_many(box.extents[0], p.a, rows, j)
                num += self.z ** (level + j) * A / math.factorial(j)
            return num / self.xi
        if p.family == "ideal":
            V = box.volume
            num = sum(self.z ** (level + j) * V**j / math.factorial(j) for j in range(jmax + 1))
            return np.full(nc, num / self.xi, dtype=complex)
        out = np.empty(nc, dtype=complex)
        for i in range(nc):
            cv = correlation(self.poly, self.z, configs[i].reshape(level, -1),
                             degree=self.degree)
            out[i] = cv.value
        return out


class CallableFamily:
    """Wrap a user function (level, configs) -> values as a family.

    Set vanishes_on_overlap only for functions that are zero whenever two
    arguments come closer than the hard core; it unlocks a packing cutoff
    in the operator quadrature that is wrong for anything else.
    """

    def __init__(self, fn, error_scale=0.0, vanishes_on_overlap=False):
        self.fn = fn
        self.error_scale = error_scale
        self.vanishes_on_overlap = vanishes_on_overlap

    def __call__(self, level, configs):
        return np.asarray(self.fn(level, np.asarray(configs, dtype=float)), dtype=complex)


# -- direct application by quadrature -------------------------------------------


def _kernel_window(p: PairPotential, box: Box, x1):
    r = p.interaction_range
    if r <= 0:
        return None
    lo = max(0.0, x1 - r)
    hi = min(box.extents[0], x1 + r)
    if hi - lo <= 0:
        return None
    return lo, hi


def _static_breaks(p, box, anchors_1d, kmax):
    return contact_lattice(box.extents[0], p.interaction_range, kmax, anchors=anchors_1d)


def _ordered_nodes(p, box, x1, rest_coords, m, order, inner_order, kmax):
    """Node rows and weights for the ordered sector y_1 <= ... <= y_m in the window.

    Panels split at the static contact lattice of the anchors plus, per
    nesting level, at offsets from the already-placed y nodes, so that
    piecewise-defined integrands never straddle a panel.
    """
    window = _kernel_window(p, box, x1)
    if window is None:
        return np.empty((0, m)), np.empty(0)
    lo, hi = window
    a = p.interaction_range
    # anchor coordinates themselves must be breakpoints: after inner
    # integration the outer integrand kinks where a dynamic offset y + k*a
    # crosses the window edge, and those crossings sit on the anchor lattice
    anchor_pts = np.append(rest_coords, x1)
    static = _static_breaks(p, box, anchor_pts, kmax)
    static = sorted(set(static) | {float(c) for c in anchor_pts
                                   if 0.0 < c < box.extents[0]})

    rows, weights = [], []

    def rec(level, y_prev, prefix, wacc):
        left = lo if level == 1 else y_prev
        if left >= hi:
            return
        dyn = [y + k * a for y in prefix for k in (1, 2, 3)]
        nodes, ws = panel_rule(left, hi, static + dyn, order if level == 1 else inner_order)
        if level == m:
            for nd, w in zip(nodes, ws):
                rows.append(prefix + [nd])
                weights.append(wacc * w)
        else:
            for nd, w in zip(nodes, ws):
                rec(level + 1, nd, prefix + [nd], wacc * w)

    rec(1, lo, [], 1.0)
    return np.asarray(rows).reshape(-1, m), np.asarray(weights)


def _term_quadrature(p, box, phi, n, x1, rest, m, order, inner_order, kmax):
    """One m-term of the operator sum (without the e^{-W} prefactor)."""
    if m == 0:
        return complex(phi(n - 1, rest.reshape(1, n - 1, 1))[0])
    # ordered sector times m! cancels the 1/m! prefactor
    if p.family == "hardcore":
        window = _kernel_window(p, box, x1)
        if window is None:
            return 0.0 + 0.0j
        # the kernel itself does not exclude the y's from each other; only
        # a family that dies on overlaps justifies the packing cutoff
        if (getattr(phi, "vanishes_on_overlap", False)
                and (m - 1) * p.a >= window[1] - window[0]):
            return 0.0 + 0.0j
    ys, ws = _ordered_nodes(p, box, x1, rest, m, order, inner_order, kmax)
    if len(ws) == 0:
        return 0.0 + 0.0j
    kern = np.prod(p.mayer_f(np.abs(ys - x1)), axis=1)
    level = n - 1 + m
    configs = np.concatenate(
        [np.broadcast_to(rest, (len(ws), n - 1)), ys], axis=1
    ).reshape(-1, level, 1)
    vals = phi(level, configs)
    return complex(np.dot(ws * kern, vals))


def _term_sampled(p, box, phi, n, x1, rest, m, seed):
    window = _kernel_window(p, box, x1)
    if m == 0:
        return complex(phi(n - 1, rest.reshape(1, n - 1, 1))[0]), 0.0
    if window is None:
        return 0.0 + 0.0j, 0.0
    lo, hi = window
    from scipy.stats import qmc

    seeds = np.random.SeedSequence(seed).spawn(8)
    means = []
    k = max(4, int(math.log2(_SOBOL_SAMPLES // 8)))
    for ss in seeds:
        eng = qmc.Sobol(d=m, scramble=True, seed=np.random.default_rng(ss))
        ys = lo + (hi - lo) * eng.random_base2(k)
        kern = np.prod(p.mayer_f(np.abs(ys - x1)), axis=1)
        level = n - 1 + m
        configs = np.concatenate(
            [np.broadcast_to(rest, (len(ys), n - 1)), ys], axis=1
        ).reshape(-1, level, 1)
        vals = phi(level, configs)
        means.append(np.mean(kern * vals) * (hi - lo) ** m)
    means = np.asarray(means)
    val = complex(means.mean()) / math.factorial(m)
    # standard error of the replicate mean, not the spread of |deviations|
    err = float(means.std(ddof=1)) / math.sqrt(len(means)) / math.factorial(m)
    return val, err


def apply_ks_function(p: PairPotential, box: Box, phi, n, anchors, M,
                      strategy="quadrature", order=64, seed=42):
    """(K phi) at one anchor configuration, summed over m = 0..M-n.

    For n = 1 the sum starts at m = 1: the empty-product constant term of
    the first equation is the caller's to add.  phi is a family callable
    (level, configs) -> values.  Returns (value, error_bound); the bound
    covers quadrature (order refinement) or sampling (replicate spread).
    """
    if box.dimension != 1 and strategy == "quadrature":
        raise ConfigError("quadrature application is one-dimensional; use sampling")
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    if anchors.shape[0] != n:
        raise ConfigError("anchor count does not match the level n")
    x1 = float(anchors[0, 0])
    rest = anchors[1:, 0].copy()

    if n == 1:
        eW = 1.0
        m_start = 1
    else:
        _, eW = p.cross_energy(anchors[0], anchors[1:])
        m_start = 0
        if eW == 0.0:
            return 0.0 + 0.0j, 0.0

    kmax = min(M + 1, 12)
    inner_order = max(8, min(order, M + n + 4))
    total = 0.0 + 0.0j
    err = 0.0
    # families that die on overlaps zero every term past two kernel
    # coordinates (the window holds at most two rod diameters); for any
    # other family those terms exist but nested panel quadrature over them
    # is combinatorial, so they go to the replicate-sampled route and
    # carry its spread in the bound
    packing_pruned = p.family == "hardcore" and getattr(
        phi, "vanishes_on_overlap", False
    )
    for m in range(m_start, M - n + 1):
        sample_term = (strategy == "sampling" or (m >= 3 and not packing_pruned))
        if sample_term and m >= 1:
            val, e = _term_sampled(p, box, phi, n, x1, rest, m, seed + m)
            total += val
            err += e
            continue
        fine = _term_quadrature(p, box, phi, n, x1, rest, m, order, inner_order, kmax)
        if m >= 1:
            coarse = _term_quadrature(p, box, phi, n, x1, rest, m,
                                      max(4, order // 2), max(6, inner_order - 3), kmax)
            err += 2.0 * abs(fine - coarse) + 1e-15 * abs(fine)
        total += fine
    err += getattr(phi, "error_scale", 0.0)
    return eW * total, eW * err


# -- residual of the full system --------------------------------------------------


@dataclass
class LevelResidual:
    n: int
    sup_residual: float
    error_bound: float
    truncation_gap: float  # |consistent constant - 1| contribution at this level
    n_probes: int
    sup_rho: float


@dataclass
class KSResidualReport:
    z: complex
    M: int
    strategy: str
    order: int
    constant_term: str
    levels: list
    probe_spacing: str = "uniform plus contact offsets"

    @property
    def sup_residual(self):
        return max(l.sup_residual for l in self.levels)

    @property
    def error_bound(self):
        return max(l.error_bound for l in self.levels)

    def to_json(self):
        return {
            "z": [self.z.real, self.z.imag],
            "M": self.M,
            "strategy": self.strategy,
            "order": self.order,
            "constant_term": self.constant_term,
            "sup_residual": self.sup_residual,
            "error_bound": self.error_bound,
            "levels": [
                {
                    "n": l.n,
                    "sup_residual": l.sup_residual,
                    "error_bound": l.error_bound,
                    "truncation_gap": l.truncation_gap,
                    "n_probes": l.n_probes,
                    "sup_rho": l.sup_rho,
                }
                for l in self.levels
            ],
        }


def probe_anchor_sets(box: Box, p: PairPotential, n, count=64):
    """Deterministic probe configurations for level n.

    Level 1 walks a uniform grid densified near the contact lattice; higher
    levels pair a coarser grid of first anchors with fixed admissible
    companion offsets (and one overlapping companion, which must give a
    zero row on both sides of the equation).
    """
    L = box.extents[0]
    a = p.interaction_range
    base = [(i + 0.5) * L / count for i in range(count)]
    if a > 0:
        for bp in contact_lattice(L, a, 3):
            for off in (-0.03 * a, 0.03 * a):
                q = bp + off
                if 0 < q < L:
                    base.append(q)
    base = sorted(base)
    if n == 1:
        return [np.array([[x]]) for x in base]
    step = max(1.2 * a, 0.15 * L) if a > 0 else 0.2 * L
    coarse = base[:: max(1, len(base) // 8)]
    sets = []
    for x in coarse:
        offs = [x + j * step for j in range(1, n)]
        if offs and offs[-1] < L:
            sets.append(np.array([[x]] + [[o] for o in offs]))
    if a > 0 and n == 2:
        x = L / 2.0
        sets.append(np.array([[x], [min(L, x + 0.4 * a)]]))  # overlapping pair
    return sets


def ks_residual(poly: PartitionPolynomial, z, n_max, strategy="quadrature",
                order=64, count=64, constant_term="consistent", seed=42) -> KSResidualReport:
    """Residual of the truncated integral-equation system at activity z.

    The left side is the correlation family at degree M; the operator is
    fed the degree-(M-1) family, which is the exact discrete pairing.  With
    constant_term="consistent" the level-1 inhomogeneity is Xi_{M-1}/Xi_M
    (exact at finite M, default); "unit" uses the constant 1 of the
    infinite system, appropriate for families given in closed form.
    """
    p, box = poly.potential, poly.box
    M = poly.M
    if n_max < 1 or n_max > M - 1:
        raise ConfigError("need 1 <= n_max <= M-1")
    from .partition import smallest_zero, zeros

    z_c = smallest_zero(zeros(poly)).z_c
    if abs(z) >= abs(z_c):
        raise ConfigError(f"|z| = {abs(z)} is not below the smallest zero modulus {abs(z_c)}")

    fam = CorrelationFamily(poly, z, degree=M - 1)
    xi_full, _ = evaluate(poly, z)
    xi_lower = complex(np.polyval(poly.coeffs[:-1][::-1], z))
    const = xi_lower / xi_full if constant_term == "consistent" else 1.0
    trunc_gap = abs(z) * abs(xi_lower / xi_full - 1.0)

    levels = []
    for n in range(1, n_max + 1):
        sup_r = 0.0
        sup_b = 0.0
        sup_rho = 0.0
        probes = probe_anchor_sets(box, p, n, count=count)
        for anchors in probes:
            lhs = correlation(poly, z, anchors, degree=M)
            op, op_err = apply_ks_function(p, box, fam, n, anchors, M,
                                           strategy=strategy, order=order, seed=seed)
            rhs = z * (const + op) if n == 1 else z * op
            sup_r = max(sup_r, abs(lhs.value - rhs))
            sup_b = max(sup_b, lhs.error + abs(z) * op_err)
            sup_rho = max(sup_rho, abs(lhs.value))
        sup_b = max(sup_b, 1e-15 * (abs(z) + sup_rho))  # roundoff floor
        levels.append(LevelResidual(n, sup_r, sup_b, trunc_gap if n == 1 else 0.0,
                                    len(probes), sup_rho))
    return KSResidualReport(complex(z), M, strategy, order, constant_term, levels)


# -- weighted sup norm of coefficient families -------------------------------------


def dxi_norm(a, xi, p: PairPotential = None, box: Box = None, seed=11, n_probe=200):
    """Weighted norm sup_m |a_m| xi^{-m} esssup exp(-beta U) at truncation M.

    a holds the level constants a_1..a_M.  For nonnegative potentials the
    ess-sup factor is exactly 1; otherwise it is estimated on a seeded
    probe grid of configurations per level.
    """
    a = np.asarray(a, dtype=float)
    M = len(a)
    if xi <= 0:
        raise ConfigError("xi must be positive")
    if p is None or p.is_positive:
        factors = np.ones(M)
    else:
        rng = np.random.default_rng(seed)
        ext = np.asarray(box.extents)
        factors = np.empty(M)
        for m in range(1, M + 1):
            best = 0.0
            pts = rng.uniform(0.0, 1.0, size=(n_probe, m, box.dimension)) * ext
            w = p.weights_many(pts)
            best = float(w.max()) if len(w) else 1.0
            factors[m - 1] = max(best, 1.0 if m == 1 else best)
    m_idx = np.arange(1, M + 1)
    return float(np.max(np.abs(a) * xi ** (-m_idx.astype(float)) * factors))
