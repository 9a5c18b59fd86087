"""Slope-box concave envelope of the projected-determinant-root operator.

Let F(M) = det^{1/2n}(proj M), defined where proj(M) > 0, and fix a spectral
box [theta, 1/theta].  The extension computed here is

    Ftilde(M) = inf { tr(proj(N) M)-type pairings + c }

over affine majorants of F on the box whose slope matrix also has spectrum in
the box.  Both F and the constraint set depend on a matrix only through the
Hermitian eigenvalues mu of extract(proj(M)), and the optimizer slope may be
taken diagonal in that eigenbasis with descending slope eigenvalues paired
against ascending mu (rearrangement).  The working form is therefore

    Ftilde(M) = min_{p in [theta, 1/theta]^n}  sum_i p_i mu_i + g(p),
    g(p)      = max_{x in [theta, 1/theta]^n}  (prod_i x_i)^{1/n} - sum_i p_i x_i,

with p descending against mu ascending.  Ftilde is finite, concave and
uniformly elliptic on all of Sym(2n), and the minimizing (p, g(p)) doubles as
a Bellman policy for the PDE solver.

Evaluation is exact, not iterative.  The inner maximizer has the closed form
x_i = clamp(t / (n p_i)) with t = (prod x_i)^{1/n}, a monotone scalar fixed
point solved per clamp regime.  The outer minimum is found by enumerating the
finitely many rail/tangency structures of the saddle point: coordinates with
small mu rail at slope 1/theta, large mu at slope theta, and the middle block
is tangent (x_i = mu_i, p_i = t/(n mu_i)).  Each structure reduces to the same
scalar fixed point; every consistent structure is a saddle, so the minimum
over them is the envelope value.  A grid-discretized evaluator with no such
reduction is provided as an independent oracle.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import matrixcore as mc
from ._parallel import ordered_map
from .errors import NoConvergence, NotPSD, ResolutionTooCoarse

_KKT_TOL = 1e-11


@dataclass(frozen=True)
class ThetaBox:
    """The spectral box [theta, 1/theta] in complex dimension n.

    theta is normalized to min(theta, 1/theta) on construction so the box is
    always nonempty; theta = 1 collapses it to the single point {I}.
    """

    theta: float
    n: int

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        t = float(self.theta)
        if t <= 0.0 or not np.isfinite(t):
            raise ValueError(f"theta must be positive and finite, got {self.theta}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "theta", min(t, 1.0 / t))

    @property
    def hi(self) -> float:
        return 1.0 / self.theta


@dataclass(frozen=True)
class EnvelopeCertificate:
    """Envelope value together with the optimal affine majorant.

    The affine function X -> tr(slope_matrix @ X) + intercept majorizes F on
    the box and touches the envelope at the evaluated matrix, so

        value == tr(slope_matrix @ M) + intercept        (exact), and
        tr(slope_matrix @ X) + intercept >= F(X)         for all X in the box.

    slope_eigs are the slope eigenvalues p in [theta, 1/theta], descending,
    paired against mu ascending; slope_matrix is the corresponding pairing
    matrix built in the eigenbasis of proj(M).  Because the trace of an
    embedded Hermitian matrix counts each eigenvalue twice, slope_matrix is
    half the embedding of diag(p): its doubled matrix is the box member.
    inner_max is the box point where the intercept constraint is tight.
    """

    value: float
    slope_eigs: np.ndarray
    intercept: float
    slope_matrix: np.ndarray
    mu: np.ndarray
    inner_max: np.ndarray


def _geomean(vals) -> float:
    return mc.geometric_mean(vals)


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


def conjugate_maximizer(p, box: ThetaBox) -> tuple[float, np.ndarray]:
    """Minimal feasible intercept g(p) and the box point attaining it.

    g(p) = max over x in the box of (prod x)^{1/n} - p.x, the smallest c for
    which slope p with intercept c majorizes F.  The concave maximand is
    1-homogeneous minus linear, so the maximizer satisfies
    x_i = clamp(t/(n p_i)) with t = (prod x)^{1/n}; the scalar fixed point is
    solved exactly per clamp regime.
    """
    p = np.asarray(p, dtype=float)
    n = box.n
    th, hi = box.theta, box.hi
    if p.shape != (n,):
        raise ValueError(f"expected a slope vector of length {n}, got shape {p.shape}")
    tol = 1e-12 * hi
    if np.any(p < th - tol) or np.any(p > hi + tol):
        raise ValueError(f"slope {p} outside the box [{th:g}, {hi:g}]")
    p = np.clip(p, th, hi)
    if hi - th <= tol:
        # theta = 1: the box is the single point x = 1
        x = np.full(n, th)
        return th - float(p @ x), x

    brk = sorted({th, hi, *(float(b) for b in np.concatenate([n * p * th, n * p * hi])
                            if th <= b <= hi)})
    sol_t = None
    for a, b in zip(brk[:-1], brk[1:]):
        mid = 0.5 * (a + b)
        lo_set = mid <= n * p * th
        hi_set = mid >= n * p * hi
        free = ~lo_set & ~hi_set
        f = int(np.sum(free))
        logC = (np.log(th) * np.sum(lo_set) + np.log(hi) * np.sum(hi_set)
                - np.sum(np.log(n * p[free])))
        if f == n:
            if abs(logC) > 1e-12:
                continue
            t = mid
        else:
            t = float(np.exp(logC / (n - f)))
            if not (a - tol <= t <= b + tol):
                continue
        sol_t = _clamp(t, a, b)
        break
    if sol_t is None:
        # the monotone fixed point always exists; not reaching it is a bug
        raise NoConvergence(f"no conjugate fixed point for p={p}, theta={th}")
    x = np.clip(sol_t / (n * p), th, hi)
    t = _geomean(x)
    g = t - float(p @ x)
    # exact stationarity/rail check; concavity makes it sufficient
    grad = t / (n * x) - p
    kkt = max(
        float(np.max(np.abs(grad[(x > th + tol) & (x < hi - tol)]), initial=0.0)),
        float(np.max(grad[x <= th + tol], initial=0.0)),
        float(np.max(-grad[x >= hi - tol], initial=0.0)),
    )
    if kkt > _KKT_TOL * max(1.0, hi):
        raise NoConvergence(f"conjugate KKT residual {kkt:g} for p={p}")
    return g, x


def conjugate_intercept(p, box: ThetaBox) -> float:
    """g(p): the minimal intercept making slope p majorize F on the box."""
    return conjugate_maximizer(p, box)[0]


def _saddle(mu, box: ThetaBox) -> tuple[float, np.ndarray, np.ndarray, float]:
    """Exact envelope evaluation in eigenvalue coordinates.

    mu may be any real vector (sorted ascending internally).  Returns
    (value, p, x, t): slope eigenvalues p (descending, paired with mu
    ascending), the inner maximizer x, and t = (prod x)^{1/n}.

    Enumerates saddle structures (k_lo, k_hi): coordinates below k_lo rail at
    slope 1/theta with inner value x_B = clamp(t*theta/n), coordinates from
    k_hi on rail at slope theta with x_T = clamp(t/(n*theta)), and the middle
    block is tangent (x_i = mu_i, p_i = t/(n*mu_i)).  Consistency of
    t = (prod x)^{1/n} is a scalar equation solved per clamp regime; rail
    optimality and slope-ordering conditions select the valid structures.
    """
    mu_in = np.asarray(mu, dtype=float)
    n = box.n
    if mu_in.shape != (n,):
        raise ValueError(f"expected {n} eigenvalues, got shape {mu_in.shape}")
    order = np.argsort(mu_in, kind="stable")
    m = mu_in[order]
    th, hi = box.theta, box.hi
    # box-scaled slack for t/slope/feasibility tests; mu-scaled slack only
    # where eigenvalues enter (rail optimality), so huge-norm inputs do not
    # wash out the box conditions
    tol = 1e-12 * max(1.0, hi)
    tol_sign = 1e-12 * max(1.0, hi, float(np.max(np.abs(m))))
    best = None

    for k_lo in range(n + 1):
        for k_hi in range(k_lo, n + 1):
            mid = m[k_lo:k_hi]
            if mid.size and (mid[0] <= max(th - tol, 0.0) or mid[-1] > hi + tol):
                continue
            n_pre = k_lo
            n_suf = n - k_hi
            log_mid = float(np.sum(np.log(mid))) if mid.size else 0.0
            for b_state in ("lo", "free", "hi"):
                for t_state in ("lo", "free", "hi"):
                    lo_t, hi_t = th, hi
                    if b_state == "lo":
                        hi_t = min(hi_t, n)
                    elif b_state == "free":
                        lo_t, hi_t = max(lo_t, n), min(hi_t, n / th**2)
                    else:
                        lo_t = max(lo_t, n / th**2)
                    if t_state == "lo":
                        hi_t = min(hi_t, n * th**2)
                    elif t_state == "free":
                        lo_t, hi_t = max(lo_t, n * th**2), min(hi_t, n)
                    else:
                        lo_t = max(lo_t, n)
                    if lo_t > hi_t + tol:
                        continue
                    logC = log_mid
                    e = 0
                    if b_state == "lo":
                        logC += n_pre * np.log(th)
                    elif b_state == "hi":
                        logC += n_pre * np.log(hi)
                    else:
                        logC += n_pre * np.log(th / n)
                        e += n_pre
                    if t_state == "lo":
                        logC += n_suf * np.log(th)
                    elif t_state == "hi":
                        logC += n_suf * np.log(hi)
                    else:
                        logC -= n_suf * np.log(n * th)
                        e += n_suf
                    if e == n:
                        # t cancels: a ray of inner optima, value t-independent
                        if abs(logC) > 1e-12:
                            continue
                        t = 0.5 * (lo_t + hi_t)
                    else:
                        t = float(np.exp(logC / (n - e)))
                        if not (lo_t - tol <= t <= hi_t + tol):
                            continue
                        t = _clamp(t, lo_t, hi_t)
                    x_B = _clamp(t * th / n, th, hi)
                    x_T = _clamp(t / (n * th), th, hi)
                    if mid.size:
                        # middle slopes t/(n*mu) must stay inside the box
                        if t / (n * mid[-1]) < th - tol:
                            continue
                        if t / (n * mid[0]) > hi + tol:
                            continue
                    # rail optimality: railed slopes must not want to move
                    if n_pre and m[k_lo - 1] > x_B + tol_sign:
                        continue
                    if n_suf and m[k_hi] < x_T - tol_sign:
                        continue
                    val = (hi * float(np.sum(m[:k_lo] - x_B))
                           + th * float(np.sum(m[k_hi:] - x_T)) + t)
                    if best is None or val < best[0] - 1e-15:
                        p = np.concatenate([
                            np.full(n_pre, hi),
                            t / (n * mid) if mid.size else np.empty(0),
                            np.full(n_suf, th),
                        ])
                        x = np.concatenate([
                            np.full(n_pre, x_B),
                            mid,
                            np.full(n_suf, x_T),
                        ])
                        best = (val, np.clip(p, th, hi), x, t)
    if best is None:
        # every mu admits a consistent rail split; reaching here is a bug
        raise NoConvergence(f"no saddle structure for mu={mu_in}, theta={th}")
    return best


def envelope_value(M, box: ThetaBox) -> float:
    """Ftilde(M): the envelope value alone (no certificate assembly)."""
    mu = mc.hermitian_eigs_of(M)
    _require_box_dim(mu, box)
    return _saddle(mu, box)[0]


def envelope_eval(M, box: ThetaBox) -> EnvelopeCertificate:
    """Ftilde(M) with its optimality certificate.

    The slope matrix is assembled in the eigenbasis of proj(M): descending
    slope eigenvalues against ascending mu, halved so that the plain trace
    pairing reproduces the eigenvalue pairing exactly.
    """
    PM = mc.project(M)
    H = mc.extract(PM)
    mu, Ure, Uim = mc.herm_eigensystem(H)
    _require_box_dim(mu, box)
    value, p, x, t = _saddle(mu, box)
    # Q = U diag(p) U^dagger in real block arithmetic
    Pw = p[np.newaxis, :]
    Qre = (Ure * Pw) @ Ure.T + (Uim * Pw) @ Uim.T
    Qim = (Uim * Pw) @ Ure.T - (Ure * Pw) @ Uim.T
    slope = 0.5 * mc.embed(mc.HermitianMatrix((Qre + Qre.T) / 2, (Qim - Qim.T) / 2))
    intercept = t - float(p @ x)
    return EnvelopeCertificate(
        value=value,
        slope_eigs=p,
        intercept=intercept,
        slope_matrix=slope,
        mu=mu,
        inner_max=x,
    )


def _require_box_dim(mu: np.ndarray, box: ThetaBox) -> None:
    if mu.shape[0] != box.n:
        raise ValueError(f"matrix has n={mu.shape[0]} but the box has n={box.n}")


@functools.lru_cache(maxsize=8)
def _brute_grids(theta: float, n: int, resolution: int):
    """Slope grid and its exact discrete conjugate, cached per configuration."""
    axis = np.linspace(theta, 1.0 / theta, resolution)
    if n == 1:
        pts = axis[:, np.newaxis]
    else:
        a, b = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([a.ravel(), b.ravel()])
    fx = np.prod(pts, axis=1) ** (1.0 / n)
    g = np.empty(len(pts))
    step = max(1, (1 << 22) // len(pts))
    for lo in range(0, len(pts), step):
        hi = min(lo + step, len(pts))
        g[lo:hi] = np.max(fx[np.newaxis, :] - pts[lo:hi] @ pts.T, axis=1)
    return pts, g


def envelope_eval_bruteforce(M, box: ThetaBox, resolution: int) -> float:
    """Grid-discretized envelope: an independent oracle for envelope_eval.

    Discretizes both the slope box and the inner box on uniform grids with
    `resolution` points per axis and takes min over slopes of
    [pairing + discrete conjugate]; no eigen-ordering reduction is used (the
    grid covers all slope orderings).  Accurate to O(1/resolution).
    Supported for n <= 2 only (cost grows like resolution^{2n}).
    """
    if box.n > 2:
        raise ValueError(f"brute force supports n <= 2, got n={box.n}")
    if resolution < 8:
        raise ResolutionTooCoarse(f"resolution must be >= 8, got {resolution}")
    mu = mc.hermitian_eigs_of(M)
    _require_box_dim(mu, box)
    pts, g = _brute_grids(box.theta, box.n, int(resolution))
    return float(np.min(pts @ mu + g))


def ellipticity_gap(M, P, box: ThetaBox) -> tuple[float, float, float]:
    """(lower, gap, upper) for the increment gap = Ftilde(M+P) - Ftilde(M).

    For P >= 0 the increment obeys

        theta * lambda_max(proj P)  <=  gap  <=  (2n/theta) * ||P||,

    with ||.|| the spectral norm.  The lower bound follows from slope
    eigenvalues >= theta acting on the eigenvalue increments of proj(P); when
    P itself commutes with J it strengthens to theta * ||P||.
    """
    M = mc.as_symmetric(M)
    P = mc.as_symmetric(P)
    wP, _ = mc.jacobi_eigh(P)
    nrmP = float(np.max(np.abs(wP)))
    if wP[0] < -1e-12 * max(1.0, nrmP):
        raise NotPSD(f"perturbation has eigenvalue {wP[0]:g}")
    gap = envelope_value(M + P, box) - envelope_value(M, box)
    nu = mc.hermitian_eigs_of(P)
    lower = box.theta * max(float(nu[-1]), 0.0)
    upper = 2 * box.n * box.hi * nrmP
    return lower, gap, upper


# ---------------------------------------------------------------------------
# randomized property verification
# ---------------------------------------------------------------------------

PROPERTY_NAMES = (
    "concavity",
    "domination",
    "agreement",
    "ellipticity",
    "projection",
    "rotation",
)

_PSD_KINDS = ("gram", "embedded", "rank1", "scalar")


@dataclass
class PropertyReport:
    """Outcome of randomized envelope checks; failures recorded, not thrown."""

    box: ThetaBox
    samples: int
    seed: int
    passed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    gap_ratio_min: float | None = None
    gap_ratio_max: float | None = None
    first_failure: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(v == 0 for v in self.failed.values())

    def format(self) -> str:
        lines = [
            f"theta = {self.box.theta:.17g}",
            f"n = {self.box.n}",
            f"samples = {self.samples}",
            f"seed = {self.seed}",
        ]
        for name in PROPERTY_NAMES:
            lines.append(f"{name}_pass = {self.passed.get(name, 0)}")
            lines.append(f"{name}_fail = {self.failed.get(name, 0)}")
        if self.gap_ratio_min is not None:
            lines.append(f"gap_over_spectral_norm_min = {self.gap_ratio_min:.17g}")
            lines.append(f"gap_over_spectral_norm_max = {self.gap_ratio_max:.17g}")
        lines.append(f"all_pass = {'true' if self.all_pass else 'false'}")
        return "\n".join(lines) + "\n"


def sample_symmetric(rng, d: int, shift: float = 0.0) -> np.ndarray:
    """Symmetric matrix with iid uniform [-1, 1] entries, shifted by shift*I."""
    S = rng.uniform(-1.0, 1.0, size=(d, d))
    return (S + S.T) / 2.0 + shift * np.eye(d)


def sample_unitary_blocks(rng, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Haar-ish random unitary as real blocks (QR of a complex Gaussian)."""
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R).copy()
    ph = ph / np.abs(ph)
    Q = Q * ph[np.newaxis, :].conj()
    return np.ascontiguousarray(Q.real), np.ascontiguousarray(Q.imag)


def sample_in_box(rng, box: ThetaBox) -> np.ndarray:
    """Matrix whose projection has spectrum uniform in the box, plus a random
    J-anticommuting component (which the envelope must ignore)."""
    n = box.n
    mu = rng.uniform(box.theta, box.hi, size=n)
    Ure, Uim = sample_unitary_blocks(rng, n)
    Qre = (Ure * mu) @ Ure.T + (Uim * mu) @ Uim.T
    Qim = (Uim * mu) @ Ure.T - (Ure * mu) @ Uim.T
    core = mc.embed(mc.HermitianMatrix((Qre + Qre.T) / 2, (Qim - Qim.T) / 2))
    S = sample_symmetric(rng, 2 * n)
    return core + (S - mc.project(S))


def sample_psd(rng, d: int, kind: str) -> np.ndarray:
    """PSD perturbation of the requested kind."""
    if kind == "gram":
        G = rng.uniform(-1.0, 1.0, size=(d, d))
        return (G @ G.T) / d
    if kind == "embedded":
        n = d // 2
        Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        Hm = (Z @ Z.conj().T) / n
        return mc.embed(mc.HermitianMatrix(Hm.real, Hm.imag))
    if kind == "rank1":
        v = rng.normal(size=d)
        return np.outer(v, v) / float(v @ v)
    if kind == "scalar":
        return float(rng.uniform(0.1, 2.0)) * np.eye(d)
    raise ValueError(f"unknown psd kind {kind!r}")


def tangent_slope(mu) -> np.ndarray:
    """Gradient of (prod mu)^{1/n} at mu > 0: the slope of the supporting
    plane of F.  The envelope agrees with F exactly where this lies in the
    slope box."""
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    return _geomean(mu) / (n * mu)


def tangent_in_box(mu, box: ThetaBox, tol: float = 1e-12) -> bool:
    p = tangent_slope(mu)
    return bool(np.all(p >= box.theta - tol) and np.all(p <= box.hi + tol))


def draw_verify_sample(rng, box: ThetaBox, idx: int) -> dict:
    """One deterministic sample bundle for the property checks."""
    d = 2 * box.n
    shift = float(rng.uniform(0.0, 3.0)) if idx % 2 == 0 else 0.0
    m1 = sample_symmetric(rng, d, shift)
    m2 = sample_symmetric(rng, d, float(rng.uniform(0.0, 3.0)) if idx % 3 == 0 else 0.0)
    m_in = sample_in_box(rng, box)
    kind = _PSD_KINDS[idx % len(_PSD_KINDS)]
    P = sample_psd(rng, d, kind)
    Ure, Uim = sample_unitary_blocks(rng, box.n)
    R = unitary_rotation(Ure, Uim)
    return {"m1": m1, "m2": m2, "m_in": m_in, "P": P, "P_kind": kind, "R": R}


def unitary_rotation(Ure: np.ndarray, Uim: np.ndarray) -> np.ndarray:
    """The J-commuting orthogonal matrix [[X, -Y], [Y, X]] of a unitary X+iY."""
    n = Ure.shape[0]
    R = np.zeros((2 * n, 2 * n))
    R[:n, :n] = Ure
    R[n:, n:] = Ure
    R[:n, n:] = -Uim
    R[n:, :n] = Uim
    return R


def _check_sample(box: ThetaBox, sample: dict) -> dict:
    """Pure per-sample property evaluation; safe to run in any worker."""
    out = {}
    m1, m2 = sample["m1"], sample["m2"]
    f1 = envelope_value(m1, box)
    f2 = envelope_value(m2, box)
    fmid = envelope_value((m1 + m2) / 2.0, box)
    out["concavity"] = fmid >= (f1 + f2) / 2.0 - 1e-9

    m_in = sample["m_in"]
    mu = mc.hermitian_eigs_of(m_in)
    fval = _geomean(np.maximum(mu, 1e-300)) if mu[0] > 0 else None
    ften = envelope_value(m_in, box)
    out["domination"] = fval is None or ften >= fval - 1e-9
    if fval is not None and tangent_in_box(mu, box):
        out["agreement"] = abs(ften - fval) <= 1e-8 * max(1.0, abs(fval))
    else:
        out["agreement"] = None  # tangent slope leaves the box: no claim

    lower, gap, upper = ellipticity_gap(m1, sample["P"], box)
    ok = lower - 1e-9 <= gap <= upper + 1e-9
    nrm = mc.spectral_norm(sample["P"])
    out["gap_ratio"] = gap / nrm if nrm > 0 else None
    if sample["P_kind"] in ("embedded", "scalar"):
        # J-commuting perturbations enjoy the stronger theta*||P|| bound
        ok = ok and gap >= box.theta * nrm - 1e-9
    out["ellipticity"] = ok

    fp = envelope_value(mc.project(m1), box)
    out["projection"] = abs(f1 - fp) <= 1e-10 * max(1.0, abs(f1))

    R = sample["R"]
    fr = envelope_value(R @ m1 @ R.T, box)
    out["rotation"] = abs(f1 - fr) <= 1e-9 * max(1.0, abs(f1))
    return out


def verify_envelope(box: ThetaBox, samples: int, seed: int,
                    workers: int | None = None) -> PropertyReport:
    """Randomized verification of the envelope's structural properties.

    Draws `samples` deterministic sample bundles and checks midpoint
    concavity, domination/agreement on the box, the two-sided ellipticity
    bounds, projection factorization and rotation invariance.  Results are
    reduced in sample order, so the report is identical for any worker count.
    """
    report = PropertyReport(box=box, samples=samples, seed=seed)
    for name in PROPERTY_NAMES:
        report.passed[name] = 0
        report.failed[name] = 0
    if samples <= 0:
        return report
    rng = np.random.default_rng(seed)
    bundle = [draw_verify_sample(rng, box, i) for i in range(samples)]
    results = ordered_map(functools.partial(_check_sample, box), bundle, workers)
    ratios = []
    for idx, res in enumerate(results):
        for name in PROPERTY_NAMES:
            ok = res.get(name)
            if ok is None:
                continue
            if ok:
                report.passed[name] += 1
            else:
                report.failed[name] += 1
                report.first_failure.setdefault(name, (idx, bundle[idx]["m1"]))
        if res.get("gap_ratio") is not None:
            ratios.append(res["gap_ratio"])
    if ratios:
        report.gap_ratio_min = float(min(ratios))
        report.gap_ratio_max = float(max(ratios))
    return report
