"""Spectral analysis of the operator matrix.

Eigenvalues are computed in the rescaled companion frame and mapped back;
contour objects (projection, reduced resolvent, nilpotent part) are
computed and reported in the balanced frame, where norm ratios are
meaningful.  The resolvent sign convention is

    R(lam) = (K - lam)^(-1),      P = -(1/2 pi i) oint R(lam) dlam,

so the trapezoid sum on a circle of radius r about the leading eigenvalue
is P = -(r/N) sum_k R(lam_k) e^{i theta_k}, and the plain node average of
R is the reduced resolvent S (the holomorphic coefficient of the Laurent
expansion), which satisfies PS = SP = 0 and (K - lam_c) S = I - P.

Companion matrices of clustered zeros are strongly non-normal: their
pseudospectra swallow any contour long before float64 runs out of digits,
so the solver falls back to exact-structure resolvent rows evaluated in
mpmath when double precision cannot certify the projection algebra.  The
closed form costs O(M^2) per node, which keeps the escalation cheap.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError, Degenerate, InsufficientData, NearEigenvalue
from .ksop import KSMatrix
from .partition import (PartitionPolynomial, evaluate, evaluate_derivative,
                        numerator_coefficients, smallest_zero, zeros)

_TIE_REL = 1e-9
_LONG = np.clongdouble


@dataclass
class Spectrum:
    eigenvalues: np.ndarray  # unscaled, sorted by descending modulus
    lam_c: complex
    lam2_mod: float
    dist_gap: float          # min distance from lam_c to the rest (unscaled)
    is_tie: bool
    right: np.ndarray        # right eigenvector of the scaled companion
    left: np.ndarray         # left eigenvector, normalized left^T right = 1
    normalized: bool         # False when the pair is numerically defective
    scale: float

    @property
    def spectral_radius(self):
        return abs(self.lam_c)


def _companion_vectors(lam_scaled, coeffs, scale):
    """Exact eigenvector pair of the scaled companion at one eigenvalue.

    Right vector (lam^{M-1}, .., lam, 1); the left one follows the first-row
    recurrence nu_{j+1} = lam nu_j + b_{j+1} nu_0.
    """
    M = len(coeffs) - 1
    b = coeffs * scale ** np.arange(M + 1)
    v = lam_scaled ** np.arange(M - 1, -1, -1)
    nu = np.empty(M, dtype=complex)
    nu[0] = 1.0
    for j in range(M - 1):
        nu[j + 1] = lam_scaled * nu[j] + b[j + 1]
    return v.astype(complex), nu


def _polish_reciprocal(lam_scaled, b):
    """Newton-polish companion eigenvalues through w = 1/lam.

    The characteristic polynomial evaluated in lam suffers catastrophic
    cancellation when the coefficients span many decades; Xi(w) at
    w = 1/lam is well conditioned instead.  Steps are kept only when they
    shrink |Xi| (extended precision throughout).
    """
    bl = b.astype(_LONG)
    dbl = (bl * np.arange(len(bl)))[1:]
    out = lam_scaled.astype(complex).copy()
    live = np.abs(out) > 1e-12 * max(1.0, np.abs(out).max())
    w = np.zeros_like(out, dtype=_LONG)
    w[live] = 1.0 / out[live].astype(_LONG)

    def horner(c, x):
        acc = np.zeros_like(x)
        for ck in c[::-1]:
            acc = acc * x + ck
        return acc

    for _ in range(3):
        val = horner(bl, w)
        dval = horner(dbl, w)
        ok = live & (np.abs(dval) > 0)
        step = np.where(ok, val / np.where(dval == 0, 1, dval), 0)
        w_try = w - step
        better = np.abs(horner(bl, w_try)) < np.abs(val)
        w = np.where(ok & better, w_try, w)
    out[live] = (1.0 / w[live]).astype(complex)
    return out


def spectrum(ks: KSMatrix, polish=True) -> Spectrum:
    """Eigenvalues of the operator matrix with the leading pair identified."""
    A = ks.scaled_matrix()
    lam_scaled = np.linalg.eigvals(A)
    b = ks.coeffs * ks.scale ** np.arange(ks.M + 1)
    if polish:
        lam_scaled = _polish_reciprocal(lam_scaled, b)
    lam = lam_scaled / ks.scale
    order = np.lexsort((lam.imag, lam.real, -np.abs(lam)))
    lam = lam[order]
    lam_c = complex(lam[0])
    rest = lam[1:]
    lam2 = float(np.max(np.abs(rest))) if len(rest) else 0.0
    tie = len(rest) > 0 and (abs(lam_c) - lam2) <= _TIE_REL * abs(lam_c)
    dist = float(np.min(np.abs(rest - lam_c))) if len(rest) else math.inf
    v, nu = _companion_vectors(lam_c * ks.scale, ks.coeffs, ks.scale)
    pairing = complex(np.dot(nu, v))  # bilinear nu^T v, no conjugation
    normalized = abs(pairing) > 1e-12 * np.linalg.norm(nu) * np.linalg.norm(v)
    if normalized:
        nu = nu / pairing
    return Spectrum(lam, lam_c, lam2, dist, tie, v, nu, normalized, ks.scale)


def resolvent_apply(mat, lam, rhs, eigs=None):
    """(K - lam)^{-1} rhs, guarding against shifts at an eigenvalue."""
    mat = np.asarray(mat)
    if eigs is not None:
        d = np.abs(np.asarray(eigs) - lam)
        j = int(np.argmin(d))
        if d[j] <= 1e-12 * max(1.0, abs(lam)):
            raise NearEigenvalue(lam, complex(np.asarray(eigs)[j]))
    A = mat.astype(complex) - lam * np.eye(mat.shape[0])
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NearEigenvalue(lam, None) from exc


@dataclass
class RieszResult:
    P: np.ndarray
    S: np.ndarray            # reduced resolvent, node average of R
    center: complex
    radius: float
    n_nodes: int
    idempotency_defect: float          # ||P^2 - P|| / ||P||
    annihilation_defect: float         # max(||PS||, ||SP||) / (||P|| ||S||)
    reduced_identity_defect: float     # ||(K-c)S - (I-P)|| / ||I-P||
    nilpotent_ratio: float             # ||(K-c)P|| / ||K||
    pole_order: int                    # pole order at the center; 0 = not resolved in chain cap
    rank: int
    second_singular_ratio: float
    precision: str           # "float64" or "mp<digits>"

    @property
    def algebra_defect(self):
        return max(self.idempotency_defect, self.annihilation_defect,
                   self.reduced_identity_defect)


def _algebra_defects(mat, center, P, S):
    nP = np.linalg.norm(P, 2)
    nS = np.linalg.norm(S, 2)
    I = np.eye(mat.shape[0])
    idem = np.linalg.norm(P @ P - P, 2) / max(1e-300, nP)
    annih = max(np.linalg.norm(P @ S, 2), np.linalg.norm(S @ P, 2))
    annih /= max(1e-300, nP * nS)
    shifted = mat - center * I
    red = np.linalg.norm(shifted @ S - (I - P), 2) / max(1.0, np.linalg.norm(I - P, 2))
    nil = np.linalg.norm(shifted @ P, 2) / max(1e-300, np.linalg.norm(mat, 2))
    return float(idem), float(annih), float(red), float(nil)


def _svd_ratio(P):
    sv = np.linalg.svd(np.asarray(P, dtype=complex), compute_uv=False)
    if sv[0] <= 0:
        return 0, 0.0
    rank = int(np.sum(sv > 1e-8 * sv[0]))
    ratio = float(sv[1] / sv[0]) if len(sv) > 1 else 0.0
    return rank, ratio


_POLE_THRESHOLD = 1e-8


def _pole_from_chain(norm_ratios):
    """First power q with ||D^q|| / ||K||^q below threshold; 0 if none."""
    for q, r in enumerate(norm_ratios, start=1):
        if r <= _POLE_THRESHOLD:
            return q
    return 0


def riesz_projection(mat, center, radius, eigs=None, n_start=64, n_max=1024,
                     rtol=1e-10) -> RieszResult:
    """Spectral projection and reduced resolvent by circle trapezoid sums.

    Doubles the node count until the projection algebra certifies at rtol;
    trapezoid sums of analytic integrands converge geometrically, so the
    loop settles fast once the contour resolves the spectrum.  Dense
    float64 route for general matrices; operator companions with wide
    coefficient ranges go through leading_projection instead.
    """
    mat = np.asarray(mat, dtype=complex)
    dim = mat.shape[0]
    if radius <= 0:
        raise ContourError("contour radius must be positive")
    if eigs is not None:
        d = np.abs(np.abs(np.asarray(eigs) - center) - radius)
        if np.min(d) <= 1e-9 * radius:
            raise ContourError(
                f"eigenvalue within 1e-9 of the contour (radius {radius})")
    I = np.eye(dim)
    n = n_start
    while True:
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        P = np.zeros((dim, dim), dtype=complex)
        S = np.zeros((dim, dim), dtype=complex)
        for t in theta:
            lam = center + radius * cmath.exp(1j * t)
            R = np.linalg.solve(mat - lam * I, I)
            S += R
            P += R * cmath.exp(1j * t)
        P *= -radius / n
        S /= n
        idem, annih, red, nil = _algebra_defects(mat, center, P, S)
        defect = max(idem, annih, red)
        if defect <= rtol or n >= n_max:
            break
        n *= 2
    if defect > rtol:
        raise ContourError(
            f"projection algebra stalled at defect {defect} with {n} nodes; "
            "matrix is likely too non-normal for double precision")
    rank, ratio = _svd_ratio(P)
    normK = np.linalg.norm(mat, 2)
    D = (mat - center * I) @ P
    chain = []
    Dq = np.eye(dim, dtype=complex)
    for q in range(1, min(dim, max(2, rank + 1)) + 1):
        Dq = Dq @ D
        chain.append(np.linalg.norm(Dq, 2) / normK**q)
    pole = _pole_from_chain(chain)
    return RieszResult(P, S, complex(center), float(radius), n,
                       idem, annih, red, nil, pole, rank, ratio, "float64")


# -- exact-structure companion resolvent, escalated precision ---------------------


def _mp_contour(b, dvec, center, radius, n_nodes, dps):
    """Contour sums of the balanced companion resolvent in mpmath.

    The companion inverse has closed-form rows: a suffix Horner pass gives
    the top row, every other row follows by shift-and-divide, and the
    balancing similarity is an entrywise diagonal scale.  O(M^2) per node.
    Returns P, S (numpy complex), certified Frobenius defects, the pole
    order from the nilpotent chain, and the refined center.
    """
    from mpmath import mp, mpc, mpf

    M = len(b) - 1
    with mp.workdps(dps):
        bmp = [mpf(float(x)) for x in b]
        dmp = [mpf(float(x)) for x in dvec]
        c0 = mpc(center)
        # refine the center on Xi(w) through w = 1/lam (Newton, quadratic)
        w = 1 / c0
        for _ in range(8):
            val = mpc(0)
            dval = mpc(0)
            for m in range(M, 0, -1):
                val = val * w + bmp[m]
                dval = dval * w + m * bmp[m]
            val = val * w + bmp[0]
            dval_w = dval  # d/dw sum b_m w^m evaluated via Horner above
            if abs(dval_w) == 0:
                break
            step = val / dval_w
            w -= step
            if abs(step) < mpf(10) ** (-dps + 2) * abs(w):
                break
        cen = 1 / w

        P = [[mpc(0)] * M for _ in range(M)]
        S = [[mpc(0)] * M for _ in range(M)]
        r = mpf(radius)
        for k in range(n_nodes):
            th = 2 * mp.pi * (k + mpf("0.5")) / n_nodes
            eio = mp.expjpi(2 * (k + mpf("0.5")) / n_nodes)  # e^{i theta}
            lam = cen + r * eio
            # suffix pass h_j = (b_{j+1} + h_{j+1}) / lam
            h = [mpc(0)] * (M + 1)
            for j in range(M - 1, -1, -1):
                h[j] = (bmp[j + 1] + h[j + 1]) / lam
            q = lam * (1 + h[0])
            x0 = [mpc(0)] * M
            x0[0] = -1 / q
            for kk in range(1, M):
                x0[kk] = h[kk] / q
            wA = -r * eio / n_nodes
            wS = mpf(1) / n_nodes
            inv_lam = 1 / lam
            row = list(x0)  # X[0, :]
            for i in range(M):
                if i > 0:
                    # X[i, :] = (X[i-1, :] - e_i) / lam
                    prev = row
                    row = [v * inv_lam for v in prev]
                    row[i] -= inv_lam
                di = dmp[i]
                Pi, Si = P[i], S[i]
                for kcol in range(M):
                    scaled = row[kcol] * (dmp[kcol] / di)
                    Pi[kcol] += wA * scaled
                    Si[kcol] += wS * scaled

        # balanced companion A[r, c] = C[r, c] d_c / d_r
        A = [[mpc(0)] * M for _ in range(M)]
        for kcol in range(M):
            A[0][kcol] = -bmp[kcol + 1] * dmp[kcol] / dmp[0]
        for i in range(1, M):
            A[i][i - 1] = dmp[i - 1] / dmp[i]

        def matmul(X, Y):
            return [[sum(X[i][j] * Y[j][k] for j in range(M)) for k in range(M)]
                    for i in range(M)]

        def fro(X):
            return mp.sqrt(sum(abs(v) ** 2 for rw in X for v in rw))

        def sub(X, Y):
            return [[X[i][k] - Y[i][k] for k in range(M)] for i in range(M)]

        I = [[mpc(1 if i == k else 0) for k in range(M)] for i in range(M)]
        shifted = [[A[i][k] - (cen if i == k else 0) for k in range(M)]
                   for i in range(M)]
        nP, nS = fro(P), fro(S)
        idem = fro(sub(matmul(P, P), P)) / nP
        annih = max(fro(matmul(P, S)), fro(matmul(S, P))) / (nP * nS)
        ImP = sub(I, P)
        red = fro(sub(matmul(shifted, S), ImP)) / max(mpf(1), fro(ImP))
        # nilpotent chain in the same precision: the float64 cast of P is
        # far too coarse for (A - c)P once ||P|| passes 1/eps
        D = matmul(shifted, P)
        nA = fro(A)
        nil = fro(D) / nA
        chain = [nil]
        Dq = D
        for q in range(2, 4):
            Dq = matmul(Dq, D)
            chain.append(fro(Dq) / nA**q)
        pole = _pole_from_chain(chain)

        Pf = np.array([[complex(v) for v in rw] for rw in P])
        Sf = np.array([[complex(v) for v in rw] for rw in S])
        return (Pf, Sf, float(idem), float(annih), float(red), float(nil),
                pole, complex(cen))


def leading_projection(ks: KSMatrix, spec: Spectrum = None, radius=None,
                       rtol=1e-10) -> RieszResult:
    """Riesz projection onto the leading eigenvalue of the operator matrix.

    Tries the dense double-precision contour first and escalates to the
    exact-structure mpmath route when the algebra will not certify; the
    returned defects are the certified ones, computed at the precision
    that produced P and S.
    """
    if spec is None:
        spec = spectrum(ks)
    if not math.isfinite(spec.dist_gap) or spec.dist_gap <= 0:
        raise Degenerate("no spectral gap to draw a contour in")
    center = spec.lam_c * ks.scale
    if radius is None:
        radius = 0.5 * spec.dist_gap * ks.scale
    eigs_scaled = spec.eigenvalues * ks.scale
    try:
        return riesz_projection(ks.conditioned_matrix(), center, radius,
                                eigs=eigs_scaled, rtol=rtol)
    except ContourError:
        pass

    from scipy.linalg import matrix_balance

    b = ks.coeffs * ks.scale ** np.arange(ks.M + 1)
    _, T = matrix_balance(ks.scaled_matrix(), permute=False)
    dvec = np.diag(T)
    tol_mp = min(rtol, 1e-12)  # headroom below the certification target
    for n_nodes, dps in ((96, 40), (192, 60), (256, 90)):
        P, S, idem, annih, red, nil, pole, cen = _mp_contour(
            b, dvec, center, radius, n_nodes, dps)
        if max(idem, annih, red) <= tol_mp:
            rank, ratio = _svd_ratio(P)
            return RieszResult(P, S, cen, float(radius), n_nodes,
                               idem, annih, red, nil, pole, rank, ratio,
                               f"mp{dps}")
    raise ContourError(
        f"projection algebra failed to certify at {rtol} even at dps 90 "
        f"(defect {max(idem, annih, red)})")


@dataclass
class NilpotentResult:
    D: np.ndarray
    pole_order: int
    norms: list  # ||D^q|| for q = 1..pole_order
    threshold: float


def nilpotent_and_pole(mat, lam, P, rel_threshold=1e-8) -> NilpotentResult:
    """Nilpotent part D = (K - lam) P and the resolvent pole order at lam.

    The pole order is the first power q with ||D^q|| <= threshold * ||K||^q;
    a semisimple eigenvalue gives D below threshold immediately (order 1).

    Double precision only.  A projection returned by the escalated contour
    can have ||P|| past 1/eps, in which case the float64 product here is
    pure cast noise; the certified nilpotent_ratio and pole_order on the
    RieszResult are authoritative there.
    """
    mat = np.asarray(mat, dtype=complex)
    P = np.asarray(P, dtype=complex)
    D = (mat - lam * np.eye(mat.shape[0])) @ P
    base = np.linalg.norm(mat, 2)
    rank = max(1, int(round(float(np.trace(P).real))))
    norms = []
    power = np.eye(mat.shape[0], dtype=complex)
    for q in range(1, rank + 2):
        power = power @ D
        norms.append(float(np.linalg.norm(power, 2)))
        if norms[-1] <= rel_threshold * base**q:
            return NilpotentResult(D, q, norms, rel_threshold)
    return NilpotentResult(D, rank + 1, norms, rel_threshold)


@dataclass
class PowerReport:
    deltas: np.ndarray
    fitted_ratio: float
    median_ratio: float
    envelope: float
    expected_ratio: float
    n_used: int


def power_convergence(ks: KSMatrix, spec: Spectrum = None, P=None,
                      n_terms=60) -> PowerReport:
    """Decay of ||(K/lam_c)^n - P|| against the subleading ratio.

    Fits log-linear decay on the part of the tail still above the roundoff
    floor and reports both the least-squares rate and the median of
    successive ratios, next to |lam_2 / lam_c|.
    """
    if spec is None:
        spec = spectrum(ks)
    proj = P if P is not None else leading_projection(ks, spec).P
    A = ks.conditioned_matrix().astype(complex) / (spec.lam_c * ks.scale)
    deltas = np.empty(n_terms)
    term = np.eye(ks.M, dtype=complex)
    for n in range(1, n_terms + 1):
        term = term @ A
        deltas[n - 1] = np.linalg.norm(term - proj, 2)
    floor = max(1e-13 * deltas[0], 1e-15)
    mask = deltas > floor
    n_used = int(mask.sum())
    idx = np.arange(1, n_terms + 1)[mask]
    if n_used >= 4:
        half = idx >= idx[len(idx) // 2]  # fit the asymptotic half
        fit = np.polyfit(idx[half], np.log(deltas[mask][half]), 1)
        fitted = float(np.exp(fit[0]))
        envelope = float(np.exp(fit[1]))
        ratios = deltas[mask][1:] / deltas[mask][:-1]
        median = float(np.median(ratios))
    else:
        fitted = median = envelope = float("nan")
    expected = spec.lam2_mod / abs(spec.lam_c) if abs(spec.lam_c) > 0 else float("nan")
    return PowerReport(deltas, fitted, median, envelope, expected, n_used)


# -- leading coefficient of the near-singularity behavior -------------------------


def _neville(ts, vals):
    """Polynomial extrapolation of vals(t) to t = 0; returns (limit, change)."""
    ts = np.asarray(ts, dtype=float)
    n = len(ts)
    tab = list(map(complex, vals))
    last_diag = tab[0]
    change = math.inf
    for j in range(1, n):
        for i in range(n - j):
            tab[i] = (ts[i + j] * tab[i] - ts[i] * tab[i + 1]) / (ts[i + j] - ts[i])
        change = abs(tab[0] - last_diag)
        last_diag = tab[0]
    return last_diag, change


@dataclass
class RayLimit:
    angle: float
    value: complex
    change: float  # last Neville correction, an error proxy


_RAY_ANGLES = (math.pi, 3 * math.pi / 4, -3 * math.pi / 4,
               7 * math.pi / 8, -7 * math.pi / 8)


def ray_limit(fn, z_c, t0, angles=_RAY_ANGLES, n_points=20, ratio=0.65):
    """Directional limits of fn(z) as z -> z_c along sector rays.

    Rays are z = z_c (1 + t e^{i psi}); each is extrapolated to t = 0 by a
    Neville tableau over geometrically shrinking t.  Returns the mean
    limit, the cross-ray spread, and the per-ray records.
    """
    ts = t0 * ratio ** np.arange(n_points)
    rays = []
    for psi in angles:
        pts = z_c * (1.0 + ts * cmath.exp(1j * psi))
        vals = [fn(z) for z in pts]
        limit, change = _neville(ts, vals)
        rays.append(RayLimit(psi, limit, change))
    values = np.array([r.value for r in rays])
    mean = complex(values.mean())
    spread = float(np.max(np.abs(values[:, None] - values[None, :])))
    return mean, spread, rays


@dataclass
class AsymptoticsResult:
    anchors: np.ndarray
    n: int
    z_c: complex
    ray_value: complex
    ray_spread: float
    ray_error: float
    residue_value: complex
    residue_error: float
    agreement: float
    rays: list
    t0: float

    def to_json(self):
        return {
            "n": self.n,
            "z_c": [self.z_c.real, self.z_c.imag],
            "ray_value": [self.ray_value.real, self.ray_value.imag],
            "ray_spread": self.ray_spread,
            "ray_error": self.ray_error,
            "residue_value": [self.residue_value.real, self.residue_value.imag],
            "residue_error": self.residue_error,
            "agreement": self.agreement,
            "t0": self.t0,
            "rays": [{"angle": r.angle,
                      "value": [r.value.real, r.value.imag],
                      "change": r.change} for r in self.rays],
        }


def leading_asymptotics(poly: PartitionPolynomial, anchors, n_points=20,
                        ratio=0.65, angles=_RAY_ANGLES) -> AsymptoticsResult:
    """Limit of rho_n(z) (1 - z/z_c) / z^n at the dominant singularity, two ways.

    Route one extrapolates along rays that stay inside the sector away
    from the outward direction, starting at half the relative distance to
    the nearest competing zero.  Route two is the residue of the simple
    pole,

        -N(z_c) / (z_c^{n+1} Xi'(z_c)),

    with N the truncated numerator at these anchors.  Both routes consume
    the same anchored integrals, so their disagreement isolates
    extrapolation error rather than integral error.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    n = anchors.shape[0]
    sm = smallest_zero(zeros(poly))
    z_c = sm.z_c
    t0 = 0.5 * sm.min_gap
    if not math.isfinite(t0) or t0 <= 0:
        raise Degenerate("no isolated smallest zero to expand around")

    num, num_err = numerator_coefficients(poly, anchors, degree=poly.M)

    def g(z):
        N = sum(c * z ** (n + m) for m, c in enumerate(num))
        xi, _ = evaluate(poly, z)
        return N / xi * (1.0 - z / z_c) / z**n

    ray_value, spread, rays = ray_limit(g, z_c, t0, angles, n_points, ratio)
    ray_err = max(spread, max(r.change for r in rays))

    dxi = evaluate_derivative(poly, z_c)
    N_c = sum(c * z_c**m for m, c in enumerate(num))  # N(z_c) / z_c^n
    residue = -N_c / (z_c * dxi)
    err_num = sum(e * abs(z_c) ** m for m, e in enumerate(num_err))
    residue_err = abs(residue) * 1e-13 + err_num / abs(z_c * dxi)
    return AsymptoticsResult(anchors, n, z_c, ray_value, spread, ray_err,
                             residue, residue_err,
                             abs(ray_value - residue), rays, float(t0))


def matrix_leading(ks: KSMatrix, spec: Spectrum = None):
    """Coefficient-space analogue: limit of nu_c(phi(z)) (1 - z/z_c)/z.

    phi(z) = z (I - z K)^{-1} e_1 has a simple pole at z_c = 1/lam_c whose
    strength along the left eigenvector is exactly nu_c(e_1); in finite
    dimensions this is an identity, so it makes a sharp fixture.  Stated
    in the scaled frame, matching the vectors carried by Spectrum.
    """
    if spec is None:
        spec = spectrum(ks)
    if not spec.normalized:
        raise Degenerate("leading eigenpair is numerically defective")
    return complex(spec.left[0])


@dataclass
class CoeffAsymptotics:
    ratios: np.ndarray
    growth_estimate: complex  # limit of t_{k+1}/t_k
    subexp_exponent: float
    fit_rate: float
    n_used: int


def coefficient_asymptotics(coeffs, tail=None) -> CoeffAsymptotics:
    """Growth diagnostics of a coefficient sequence t_k.

    Successive ratios estimate the reciprocal singularity location; the
    three-parameter fit log|t_k| = A + p log k + k log r separates the
    subexponential power p (pole order minus one) from the rate r.
    """
    t = np.asarray(coeffs, dtype=complex)
    nz = np.abs(t) > 0
    if nz.sum() < 6:
        raise InsufficientData("need at least 6 nonzero coefficients")
    k_all = np.arange(len(t))
    k = k_all[nz]
    tv = t[nz]
    ratios = tv[1:] / tv[:-1]
    growth = complex(ratios[-1])
    # fit on the tail half: the model is asymptotic, and small k would
    # otherwise bias the power term
    m = max(6, len(k) // 2) if tail is None else min(tail, len(k))
    sel = k[-m:] >= 1
    kt = k[-m:][sel].astype(float)
    yt = np.log(np.abs(tv[-m:][sel]))
    X = np.column_stack([np.ones_like(kt), np.log(kt), kt])
    sol, *_ = np.linalg.lstsq(X, yt, rcond=None)
    return CoeffAsymptotics(ratios, growth, float(sol[1]), float(np.exp(sol[2])),
                            len(kt))


def spectral_radius_check(ks: KSMatrix, xi, spec: Spectrum = None):
    """Compare the spectral radius against 1/xi.  Reports, never asserts."""
    if spec is None:
        spec = spectrum(ks)
    r = spec.spectral_radius
    return {
        "spectral_radius": r,
        "xi": float(xi),
        "xi_inverse": 1.0 / float(xi),
        "radius_below_inverse_xi": bool(r <= 1.0 / float(xi)),
        "ratio": r * float(xi),
    }
