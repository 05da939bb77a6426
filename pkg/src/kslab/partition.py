"""Grand-canonical partition polynomials, their zeros, and correlations.

The finite-truncation partition function is the polynomial

    Xi(z) = sum_{m=0..M} c_m z^m,   c_m = Z_m / m!,

assembled from an integral table.  Everything downstream hangs off its
zeros, so the zero finder is deliberately careful: balanced companion
eigenvalues, an Aberth-Ehrlich polish to small scaled residuals, enforced
conjugate symmetry, and an extended-precision fallback when the balanced
companion matrix still spans too many orders of magnitude.

Evaluation uses Horner in 80-bit extended precision together with the
coefficient-magnitude sum as a condition estimate, which is what the zero
residuals and near-pole guards are measured against.
"""

from __future__ import annotations

import cmath
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Degenerate, NearPole
from .integrals import IntegralTable, anchored_integral
from .slog import SLog

_LONG = np.clongdouble


@dataclass
class PartitionPolynomial:
    """Coefficients c_m = Z_m/m! plus the conditioning scale used on them."""

    coeffs: np.ndarray  # raw float c_m, index m = 0..M
    coeff_slogs: list  # SLog per coefficient, authoritative for huge tables
    coeff_errors: np.ndarray
    scale: float
    table: IntegralTable
    _anchored_cache: dict = field(default_factory=dict, repr=False)

    @property
    def M(self):
        return len(self.coeffs) - 1

    @property
    def box(self):
        return self.table.box

    @property
    def potential(self):
        return self.table.potential

    def scaled_coeffs(self):
        """b_m = c_m * scale^m, the polynomial actually handed to solvers."""
        m = np.arange(self.M + 1)
        return self.coeffs * self.scale**m

    def mp_coefficients(self):
        """Coefficients rebuilt in arbitrary precision, or None.

        Available only when every table entry came from a closed form; the
        values are re-derived from the potential and box under the caller's
        mpmath precision, so no float64 rounding of the table enters.  The
        smallest zero of a wide hard-rod box is sensitive enough that this
        distinction decides its third decimal.
        """
        from .integrals import exact_mp_Z

        if any(e.method != "exact" for e in self.table.entries):
            return None
        import mpmath as mp

        out = []
        for e in self.table.entries:
            zval = exact_mp_Z(self.table.potential, self.table.box, e.m)
            if zval is None:
                return None
            out.append(zval / mp.factorial(e.m))
        return out


def assemble(table: IntegralTable, scale=None) -> PartitionPolynomial:
    """Partition polynomial from a Z-table.

    The default conditioning scale equalizes the first and last nonzero
    rescaled coefficients geometrically (computed in log space), which
    keeps companion entries within a workable range even when the raw
    coefficients span a hundred decades.
    """
    slogs = []
    coeffs = np.empty(table.M + 1)
    errs = np.empty(table.M + 1)
    for e in table.entries:
        cs = e.slog.scaled(-math.lgamma(e.m + 1))
        slogs.append(cs)
        coeffs[e.m] = cs.value
        errs[e.m] = e.error / math.factorial(e.m) if e.m < 170 else 0.0
    if scale is None:
        nz = [m for m in range(1, table.M + 1) if slogs[m].sign != 0]
        if len(nz) >= 2 and nz[-1] > nz[0]:
            first, last = nz[0], nz[-1]
            scale = math.exp((slogs[first].log_mag - slogs[last].log_mag)
                             / (last - first))
        else:
            scale = 1.0
    return PartitionPolynomial(coeffs, slogs, errs, float(scale), table)


# -- evaluation ----------------------------------------------------------------


def evaluate(poly: PartitionPolynomial, z):
    """Xi(z) by extended-precision Horner, with a condition estimate.

    Returns (value, cond) where cond = sum_m |b_m| |w|^m is the magnitude
    the rounding error is proportional to; residuals and the near-pole
    guard are scaled by it.
    """
    b = poly.scaled_coeffs()
    w = complex(z) / poly.scale
    acc = _LONG(0.0) + 0j
    for bm in b[::-1]:
        acc = acc * _LONG(w) + _LONG(bm)
    cond = float(np.polyval(np.abs(b)[::-1], abs(w)))
    return complex(acc), cond


def evaluate_derivative(poly: PartitionPolynomial, z):
    """d Xi/dz at z, same evaluation scheme as evaluate()."""
    b = poly.scaled_coeffs()
    db = (b * np.arange(len(b)))[1:]  # derivative in w; unscale by 1/s below
    w = complex(z) / poly.scale
    acc = _LONG(0.0) + 0j
    for bm in db[::-1]:
        acc = acc * _LONG(w) + _LONG(bm)
    return complex(acc) / poly.scale


def evaluate_second_derivative(poly: PartitionPolynomial, z):
    """d^2 Xi/dz^2 at z, same evaluation scheme as evaluate()."""
    b = poly.scaled_coeffs()
    k = np.arange(len(b))
    ddb = (b * k * (k - 1))[2:]
    w = complex(z) / poly.scale
    acc = _LONG(0.0) + 0j
    for bm in ddb[::-1]:
        acc = acc * _LONG(w) + _LONG(bm)
    return complex(acc) / poly.scale**2


# -- zeros ---------------------------------------------------------------------


@dataclass
class ZeroSet:
    zeros: np.ndarray  # complex, unscaled activities
    residuals: np.ndarray  # scaled residuals |Xi(z)| / cond at each zero
    method: str  # "lapack" or "mpmath"
    poly: PartitionPolynomial

    def gaps(self):
        """Distance from each zero to its nearest distinct neighbor."""
        zs = self.zeros
        if len(zs) == 1:
            return np.array([np.inf])
        d = np.abs(zs[:, None] - zs[None, :])
        np.fill_diagonal(d, np.inf)
        return d.min(axis=1)


def _poly_eval_scaled(b, w):
    """Horner value of sum b_m w^m in extended precision, plus magnitude sum.

    Both stay in extended precision: the huge outer roots of wide
    coefficient ranges push intermediate magnitudes past float64 overflow,
    so callers must divide before casting down.
    """
    acc = _LONG(0.0) + 0j
    mag = np.longdouble(0.0)
    aw = np.longdouble(abs(w))
    for bm in b[::-1]:
        acc = acc * _LONG(w) + _LONG(bm)
        mag = mag * aw + np.longdouble(abs(bm))
    return acc, mag


def _scaled_residual(b, w):
    """|p(w)| relative to the accumulated coefficient magnitude at w."""
    acc, mag = _poly_eval_scaled(b, w)
    return float(np.abs(acc) / (mag + np.longdouble(1e-300)))


def _aberth_polish(b, roots, tol=1e-12, max_iter=60):
    """Aberth-Ehrlich refinement of all roots of sum b_m w^m simultaneously."""
    deg = len(b) - 1
    db = b[1:] * np.arange(1, deg + 1)
    w = roots.astype(complex).copy()
    for _ in range(max_iter):
        res = np.empty(deg)
        newton = np.empty(deg, dtype=complex)
        for i, wi in enumerate(w):
            pv, mag = _poly_eval_scaled(b, wi)
            dv, _ = _poly_eval_scaled(db, wi)
            res[i] = float(np.abs(pv) / (mag + np.longdouble(1e-300)))
            newton[i] = complex(pv / dv) if dv != 0 else 0.0
        if res.max() <= tol:
            break
        diff = w[:, None] - w[None, :]
        np.fill_diagonal(diff, np.inf)
        sums = (1.0 / diff).sum(axis=1)
        denom = 1.0 - newton * sums
        step = np.where(np.abs(denom) > 1e-30, newton / denom, newton)
        w = w - step
    return w, np.array([_scaled_residual(b, wi) for wi in w])


def _pair_conjugates(w):
    """Force conjugate symmetry on the root multiset of a real polynomial."""
    w = w.copy()
    used = np.zeros(len(w), dtype=bool)
    out = []
    idx = np.lexsort((np.abs(w.imag), w.real, np.abs(w)))
    for i in idx:
        if used[i]:
            continue
        v = w[i]
        if abs(v.imag) <= 1e-12 * (abs(v) + 1e-300):
            out.append(complex(v.real, 0.0))
            used[i] = True
            continue
        # find the best conjugate partner among the unused
        cand = np.where(~used)[0]
        cand = cand[cand != i]
        if len(cand) == 0:
            out.append(v)
            used[i] = True
            continue
        j = cand[np.argmin(np.abs(w[cand] - v.conjugate()))]
        pair = 0.5 * (v + w[j].conjugate())
        out.append(pair)
        out.append(pair.conjugate())
        used[i] = used[j] = True
    return np.array(out)


def zeros(poly: PartitionPolynomial, polish_tol=1e-12) -> ZeroSet:
    """All zeros of Xi, polished to scaled residual <= polish_tol.

    Balanced companion eigenvalues seed an Aberth-Ehrlich iteration on the
    activity-rescaled coefficients; when the balanced companion still has
    entry dynamic range past 1e14 the roots come from arbitrary-precision
    polyroots instead.
    """
    b = poly.scaled_coeffs()
    # strip exactly-vanishing leading coefficients (smaller boxes cut the degree)
    deg = poly.M
    while deg > 0 and b[deg] == 0.0:
        deg -= 1
    if deg == 0:
        raise Degenerate("partition polynomial has no zeros: degree 0 after stripping")
    b = b[: deg + 1]

    comp = np.zeros((deg, deg))
    comp[0, :] = -b[:-1][::-1] / b[-1]
    comp[1:, :-1] = np.eye(deg - 1)
    # routing on the raw entry range: LAPACK balances internally on the eig
    # path, and scipy's explicit balancer breaks down past ~1e50 anyway
    nz = np.abs(comp[comp != 0.0])
    dynamic = nz.max() / nz.min() if nz.size else 1.0

    if dynamic > 1e14:
        import mpmath as mp

        # coefficient rounding alone moves clustered roots by (unit roundoff)
        # x (root condition number), so closed-form families are rebuilt in
        # full precision rather than re-read from the float64 table
        with mp.workdps(max(60, 2 * deg + 20)):
            cs = poly.mp_coefficients()
            if cs is not None:
                s = mp.mpf(poly.scale)
                bmp = [cs[m] * s**m for m in range(deg + 1)]
                method = "mpmath-exact"
            else:
                bmp = [mp.mpf(float(c)) for c in b]
                method = "mpmath"
            raw = mp.polyroots(bmp[::-1], maxsteps=400, extraprec=200)
        w = np.array([complex(r) for r in raw])
    else:
        w = np.linalg.eigvals(comp)
        w, _ = _aberth_polish(b, w, tol=polish_tol)
        method = "lapack"

    w = _pair_conjugates(w)
    res = np.array([_scaled_residual(b, wi) for wi in w])
    zs = w * poly.scale
    order = np.lexsort((zs.imag, zs.real, np.abs(zs)))
    return ZeroSet(zs[order], res[order], method, poly)


@dataclass
class SmallestZero:
    z_c: complex
    derivative_certificate: float  # |Xi'(z_c)| / (|z_c| |Xi''(z_c)|); 0 at a double root
    min_gap: float  # nearest other zero, relative to |z_c|
    tie: bool
    root_conditioning: float  # sum_m |c_m z_c^m| / |z_c Xi'(z_c)|


def _mp_derivative_data(poly: PartitionPolynomial, z_c):
    """(|Xi'|/(|z_c||Xi''|), cond/|z_c Xi'|) in arbitrary precision, or None.

    Clustered zero sets push |Xi'(z_c)| below the float64 evaluation noise
    (roundoff is proportional to the coefficient magnitude sum), so when
    the closed-form coefficients are available the certificate is computed
    there: the seed root is re-polished by Newton, then both derivatives
    are exact evaluations.  Both returned ratios are invariant under the
    activity rescaling, so everything stays in the scaled frame.
    """
    cs = poly.mp_coefficients()
    if cs is None:
        return None
    import mpmath as mp

    with mp.workdps(max(60, 2 * poly.M + 20)):
        s = mp.mpf(poly.scale)
        b = [c * s**m for m, c in enumerate(cs)]
        db = [m * b[m] for m in range(1, len(b))]
        ddb = [m * db[m] for m in range(1, len(db))]
        w = mp.mpc(complex(z_c)) / s
        for _ in range(6):
            f = mp.polyval(b[::-1], w)
            df = mp.polyval(db[::-1], w)
            if df == 0:
                break
            w = w - f / df
        dv = mp.polyval(db[::-1], w)
        ddv = mp.polyval(ddb[::-1], w) if ddb else mp.mpf(0)
        cond = mp.fsum(abs(bm) * abs(w) ** m for m, bm in enumerate(b))
        cert = abs(dv) / (abs(w) * abs(ddv)) if ddv != 0 else mp.inf
        kappa = cond / (abs(w) * abs(dv)) if dv != 0 else mp.inf
        return float(cert), float(kappa)


def smallest_zero(zs: ZeroSet, tie_rel=1e-9) -> SmallestZero:
    """Zero of smallest modulus with a simplicity certificate.

    The certificate pair is (curvature-scaled derivative, relative gap to
    the nearest other zero).  The first entry |Xi'(z_c)| / (|z_c| |Xi''(z_c)|)
    is a dimensionless Newton-basin radius: it collapses to zero when the
    zero degenerates into a double root and stays of order the zero spacing
    for honestly simple zeros, independent of any rescaling of the activity
    or the coefficients.  The separately reported root_conditioning is the
    coefficient magnitude sum over |z_c Xi'(z_c)|: the amplification factor
    from relative coefficient error to relative root error.  It grows
    exponentially with the box when zeros cluster toward the bulk
    singularity, which says the root is expensive to locate, not that it
    is degenerate; that is why it is not part of the pass/fail pair.

    Moduli within tie_rel of the minimum count as tied; a tie is broken
    toward the negative real axis when such a candidate exists, otherwise
    the tie flag is set and the candidate with nonnegative imaginary part
    is reported.
    """
    z = zs.zeros
    mods = np.abs(z)
    mmin = mods.min()
    cand = np.where(mods <= mmin * (1.0 + tie_rel))[0]
    tie = len(cand) > 1
    pick = None
    for i in cand:
        if z[i].real < 0 and abs(z[i].imag) <= tie_rel * mods[i]:
            pick = i
            break
    if pick is None:
        up = [i for i in cand if z[i].imag >= 0]
        pick = up[0] if up else cand[0]
    z_c = complex(z[pick])

    poly = zs.poly
    data = _mp_derivative_data(poly, z_c)
    if data is not None:
        cert, kappa = data
    else:
        dv = evaluate_derivative(poly, z_c)
        ddv = evaluate_second_derivative(poly, z_c)
        _, cond = evaluate(poly, z_c)
        cert = abs(dv) / (abs(z_c) * abs(ddv)) if ddv != 0 else float("inf")
        kappa = cond / (abs(z_c) * abs(dv)) if dv != 0 else float("inf")
    others = np.delete(z, pick)
    min_gap = float(np.min(np.abs(others - z_c)) / abs(z_c)) if len(others) else float("inf")
    return SmallestZero(z_c, float(cert), min_gap, bool(tie), float(kappa))


# -- correlations ----------------------------------------------------------------


@dataclass
class CorrelationValue:
    value: complex
    error: float
    chi: float  # indicator that the anchors sit inside the box
    n: int
    z: complex
    degree: int  # total z-degree kept in the numerator


def _anchored_cached(poly: PartitionPolynomial, anchors, m):
    key = (anchors.tobytes(), anchors.shape, int(m))
    hit = poly._anchored_cache.get(key)
    if hit is None:
        hit = anchored_integral(poly.potential, poly.box, anchors, m)
        poly._anchored_cache[key] = hit
    return hit


def correlation(poly: PartitionPolynomial, z, anchors, degree=None) -> CorrelationValue:
    """n-point correlation rho(z; x_1..x_n) at truncation M.

    The numerator keeps every term z^{n+m} A_m / m! with total degree
    n + m <= degree (default M); the denominator is the full Xi.  Raises
    NearPole when z is numerically on a partition zero.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = anchors.shape[0]
    if n < 1:
        raise ValueError("correlation needs at least one anchor")
    if degree is None:
        degree = poly.M
    if degree < n:
        raise ValueError("degree budget smaller than the anchor count")

    chi = 1.0 if poly.box.contains(anchors) else 0.0
    xi, cond = evaluate(poly, z)
    if abs(xi) <= 1e-10 * cond:
        zc = smallest_zero(zeros(poly)).z_c
        raise NearPole(f"Xi({z}) is numerically zero", z=z, nearest_zero=zc)
    if chi == 0.0:
        return CorrelationValue(0.0, 0.0, 0.0, n, complex(z), degree)

    mmax = min(poly.M - n, degree - n)
    num = 0.0 + 0.0j
    num_err = 0.0
    zlc = complex(z)
    for m in range(mmax + 1):
        A, Aerr = _anchored_cached(poly, anchors, m)
        fac = math.factorial(m)
        num += zlc ** (n + m) * (A / fac)
        num_err += abs(zlc) ** (n + m) * (Aerr / fac)

    # propagate both the numerator error and the table error inside Xi
    xi_err = float(np.polyval(poly.coeff_errors[::-1], abs(zlc)))
    value = num / xi
    error = num_err / abs(xi) + abs(value) * xi_err / abs(xi)
    return CorrelationValue(value, float(error), chi, n, zlc, degree)


def numerator_coefficients(poly: PartitionPolynomial, anchors, degree=None):
    """Coefficients of N(z) = sum_m A_m z^{n+m}/m! as a plain z-polynomial."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = anchors.shape[0]
    if degree is None:
        degree = poly.M
    out = np.zeros(degree + 1)
    errs = np.zeros(degree + 1)
    for m in range(min(poly.M - n, degree - n) + 1):
        A, Aerr = _anchored_cached(poly, anchors, m)
        fac = math.factorial(m)
        out[n + m] = A / fac
        errs[n + m] = Aerr / fac
    return out, errs


def series_divide(num, den, K):
    """First K+1 Taylor coefficients of num(z)/den(z); den[0] must be nonzero."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if den[0] == 0.0:
        raise ZeroDivisionError("series division needs den[0] != 0")
    out = np.zeros(K + 1)
    for k in range(K + 1):
        acc = num[k] if k < len(num) else 0.0
        jmax = min(k, len(den) - 1)
        for j in range(1, jmax + 1):
            acc -= den[j] * out[k - j]
        out[k] = acc / den[0]
    return out


def taylor_coefficients(poly: PartitionPolynomial, anchors, K):
    """Taylor coefficients of z -> rho(z; anchors)/z^n at 0, orders 0..K.

    Power-series division of the anchored numerator by Xi; the ratios of
    these coefficients converge to the reciprocal of the smallest zero.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = anchors.shape[0]
    num, _ = numerator_coefficients(poly, anchors)
    shifted = num[n:]  # divide out z^n
    return series_divide(shifted, poly.coeffs, K)


# -- exports -----------------------------------------------------------------------


def zeros_to_rows(zs: ZeroSet, smallest: SmallestZero = None):
    if smallest is None:
        smallest = smallest_zero(zs)
    gaps = zs.gaps()
    rows = []
    for i, z in enumerate(zs.zeros):
        rows.append(
            {
                "re": float(z.real),
                "im": float(z.imag),
                "residual": float(zs.residuals[i]),
                "is_smallest": int(abs(z - smallest.z_c) == 0.0),
                "gap": float(gaps[i]),
            }
        )
    return rows


def zeros_to_csv(zs: ZeroSet, path, smallest: SmallestZero = None):
    rows = zeros_to_rows(zs, smallest)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["re", "im", "residual", "is_smallest", "gap"])
        writer.writeheader()
        writer.writerows(rows)
    return path


def zeros_to_json(zs: ZeroSet, smallest: SmallestZero = None):
    sm = smallest if smallest is not None else smallest_zero(zs)
    return {
        "zeros": zeros_to_rows(zs, sm),
        "method": zs.method,
        "smallest": {
            "re": sm.z_c.real,
            "im": sm.z_c.imag,
            "derivative_certificate": sm.derivative_certificate,
            "min_gap": sm.min_gap,
            "tie": sm.tie,
            "root_conditioning": sm.root_conditioning,
        },
        "scale": zs.poly.scale,
        "M": zs.poly.M,
    }
