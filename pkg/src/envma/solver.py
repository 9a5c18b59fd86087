"""Dirichlet solver for Ftilde(D^2 u) = g on rectangles in R^{2n}, n in {1, 2}.

The envelope is an infimum of affine functions of the Hessian, so the
equation has Bellman form and is solved by policy iteration (Howard's
algorithm): at each interior grid point the envelope certificate of the
current discrete Hessian supplies an affine policy (slope matrix, intercept);
freezing the policy leaves the linear uniformly elliptic equation

    tr(S(x) D^2 u(x)) + c(x) = g(x),

solved with Dirichlet data by a direct sparse factorization (or optionally
Gauss-Seidel); the two steps alternate until the max-norm residual of the
nonlinear equation meets the tolerance.  Second derivatives use centered
differences (cross terms by the standard 4-point stencil), exact for
quadratics.
"""

from __future__ import annotations

import functools
import itertools
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import matrixcore as mc
from ._parallel import ordered_map
from .envelope import ThetaBox, envelope_eval, envelope_value
from .errors import LinearSolveFailure


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on the rectangle [lo, hi] in R^{2n}."""

    n: int
    lo: tuple
    hi: tuple
    points_per_axis: int

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))
        d = 2 * self.n
        if len(lo) != d or len(hi) != d:
            raise ValueError(f"domain corners must have length {d}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("domain corners must satisfy lo < hi per axis")
        if self.points_per_axis < 5:
            raise ValueError("pointsPerAxis must be >= 5 (3 interior points per axis)")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def spacing(self) -> np.ndarray:
        P = self.points_per_axis
        return np.array([(h - l) / (P - 1) for l, h in zip(self.lo, self.hi)])

    def axis_coords(self, a: int) -> np.ndarray:
        return np.linspace(self.lo[a], self.hi[a], self.points_per_axis)

    def point(self, idx) -> np.ndarray:
        return np.array([self.axis_coords(a)[i] for a, i in enumerate(idx)])

    def mesh(self) -> list[np.ndarray]:
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class ScalarField:
    """Grid function; the boundary layer carries Dirichlet data."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        self.values = v

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        mesh = grid.mesh()
        return cls(grid, np.asarray(fn(*mesh), dtype=float) * np.ones(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def interior(self) -> tuple:
        return tuple(slice(1, -1) for _ in range(self.grid.dim))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class PolicyField:
    """Frozen Bellman policy: per interior point a slope matrix + intercept.

    Slope eigenvalues live in the box [theta, 1/theta]; the stored pairing
    matrices are their halved embeddings (see EnvelopeCertificate).
    """

    grid: GridSpec
    slope_matrices: np.ndarray   # (n_interior, 2n, 2n)
    intercepts: np.ndarray       # (n_interior,)
    slope_eigs: np.ndarray       # (n_interior, n)

    def eigs_in_box(self, box: ThetaBox, tol: float = 1e-9) -> bool:
        return bool(np.all(self.slope_eigs >= box.theta - tol)
                    and np.all(self.slope_eigs <= box.hi + tol))


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    final_residual: float = float("inf")
    residual_history: list = field(default_factory=list)
    wall_time_s: float = 0.0
    linear_solver: str = "direct"


def transfinite_interpolation(boundary: ScalarField) -> np.ndarray:
    """Multilinear blend of the boundary faces (inclusion-exclusion over
    axis subsets); used as the initial iterate."""
    grid = boundary.grid
    d = grid.dim
    P = grid.points_per_axis
    xi = np.linspace(0.0, 1.0, P)
    vals = np.zeros(grid.shape)
    data = boundary.values
    for r in range(1, d + 1):
        sign = (-1.0) ** (r + 1)
        for axes in itertools.combinations(range(d), r):
            for sides in itertools.product((0, -1), repeat=r):
                w = np.ones(grid.shape)
                index = [slice(None)] * d
                for a, s in zip(axes, sides):
                    shape = [1] * d
                    shape[a] = P
                    wa = xi if s == -1 else 1.0 - xi
                    w = w * wa.reshape(shape)
                    index[a] = s
                face = data[tuple(index)]
                expanded = np.expand_dims(face, axis=axes)
                vals = vals + sign * w * expanded
    return vals


def discrete_hessian(u: ScalarField, idx) -> np.ndarray:
    """Centered second differences at an interior point; exact for quadratics."""
    grid = u.grid
    d = grid.dim
    idx = tuple(int(i) for i in idx)
    if any(i < 1 or i > grid.points_per_axis - 2 for i in idx):
        raise ValueError(f"point {idx} is not interior")
    h = grid.spacing
    v = u.values
    H = np.zeros((d, d))

    def at(offset):
        return v[tuple(i + o for i, o in zip(idx, offset))]

    for a in range(d):
        ea = np.zeros(d, dtype=int)
        ea[a] = 1
        H[a, a] = (at(ea) - 2.0 * at(np.zeros(d, dtype=int)) + at(-ea)) / h[a] ** 2
        for b in range(a + 1, d):
            eb = np.zeros(d, dtype=int)
            eb[b] = 1
            H[a, b] = (at(ea + eb) - at(ea - eb) - at(-ea + eb) + at(-ea - eb)) \
                / (4.0 * h[a] * h[b])
            H[b, a] = H[a, b]
    return H


def hessian_stack(u: ScalarField) -> np.ndarray:
    """Discrete Hessians at all interior points, vectorized.

    Returns an array of shape interior_shape + (d, d) in lexicographic
    interior order.
    """
    grid = u.grid
    d = grid.dim
    h = grid.spacing
    v = u.values
    core = tuple(slice(1, -1) for _ in range(d))
    ishape = tuple(s - 2 for s in grid.shape)
    H = np.zeros(ishape + (d, d))

    def shifted(offset):
        sl = tuple(slice(1 + o, (s - 1) + o) for o, s in zip(offset, grid.shape))
        return v[sl]

    center = v[core]
    for a in range(d):
        ea = [0] * d
        ea[a] = 1
        ea = tuple(ea)
        nea = tuple(-x for x in ea)
        H[..., a, a] = (shifted(ea) - 2.0 * center + shifted(nea)) / h[a] ** 2
        for b in range(a + 1, d):
            eb = [0] * d
            eb[b] = 1
            pp = tuple(x + y for x, y in zip(ea, eb))
            pm = tuple(x - y for x, y in zip(ea, eb))
            mp = tuple(-x for x in pm)
            mm = tuple(-x for x in pp)
            cross = (shifted(pp) - shifted(pm) - shifted(mp) + shifted(mm)) \
                / (4.0 * h[a] * h[b])
            H[..., a, b] = cross
            H[..., b, a] = cross
    return H


def residual_field(u: ScalarField, g: ScalarField, box: ThetaBox) -> ScalarField:
    """Ftilde(D^2 u) - g at interior points; zero on the boundary layer."""
    if u.grid != g.grid:
        raise ValueError("u and g live on different grids")
    H = hessian_stack(u)
    d = u.grid.dim
    flat = H.reshape(-1, d, d)
    vals = np.array([envelope_value(Hi, box) for Hi in flat])
    out = np.zeros(u.grid.shape)
    out[u.interior()] = vals.reshape(H.shape[:-2]) - g.values[g.interior()]
    return ScalarField(u.grid, out)


def _certificate_parts(box: ThetaBox, H: np.ndarray):
    cert = envelope_eval(H, box)
    return cert.slope_matrix, cert.intercept, cert.slope_eigs, cert.value


def _improve_policy(box: ThetaBox, H_flat: np.ndarray,
                    workers: int | None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    parts = ordered_map(functools.partial(_certificate_parts, box), list(H_flat), workers)
    slopes = np.stack([p[0] for p in parts])
    cs = np.array([p[1] for p in parts])
    eigs = np.stack([p[2] for p in parts])
    vals = np.array([p[3] for p in parts])
    return slopes, cs, eigs, vals


def _stencil_offsets(d: int) -> list[tuple]:
    offs = [(0,) * d]
    for a in range(d):
        for s in (1, -1):
            o = [0] * d
            o[a] = s
            offs.append(tuple(o))
    for a in range(d):
        for b in range(a + 1, d):
            for sa, sb in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
                o = [0] * d
                o[a], o[b] = sa, sb
                offs.append(tuple(o))
    return offs


def _offset_coeff(offset: tuple, slopes: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Coefficient of u(x + offset*h) in tr(S D^2_h u) for every point."""
    nz = [a for a, o in enumerate(offset) if o != 0]
    if not nz:
        d = len(offset)
        return -2.0 * sum(slopes[:, a, a] / h[a] ** 2 for a in range(d))
    if len(nz) == 1:
        a = nz[0]
        return slopes[:, a, a] / h[a] ** 2
    a, b = nz
    sign = offset[a] * offset[b]
    # off-diagonal pair contributes 2*S_ab * u_ab with the 4-point stencil
    return sign * slopes[:, a, b] / (2.0 * h[a] * h[b])


def _assemble(grid: GridSpec, slopes: np.ndarray, rhs: np.ndarray,
              boundary_values: np.ndarray):
    """Sparse system for tr(S(x) D^2_h u) = rhs(x) with Dirichlet data."""
    d = grid.dim
    shape = grid.shape
    h = grid.spacing
    index = np.full(shape, -1, dtype=np.int64)
    core = tuple(slice(1, -1) for _ in range(d))
    n_int = int(np.prod([s - 2 for s in shape]))
    index[core] = np.arange(n_int).reshape(tuple(s - 2 for s in shape))
    int_idx = np.array(np.nonzero(index >= 0)).T  # (n_int, d) lexicographic

    rows, cols, vals = [], [], []
    b = rhs.copy()
    for off in _stencil_offsets(d):
        coef = _offset_coeff(off, slopes, h)
        nbr = int_idx + np.array(off)
        nbr_flat = index[tuple(nbr.T)]
        inside = nbr_flat >= 0
        rows.append(np.nonzero(inside)[0])
        cols.append(nbr_flat[inside])
        vals.append(coef[inside])
        out = ~inside
        if np.any(out):
            b[out] -= coef[out] * boundary_values[tuple(nbr[out].T)]
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_int, n_int),
    )
    return A, b, index


def _gauss_seidel(A: sp.csr_matrix, b: np.ndarray, x0: np.ndarray,
                  tol: float = 1e-12, max_sweeps: int = 100_000) -> np.ndarray:
    """Lexicographic Gauss-Seidel (relaxation 1.0) on the CSR system."""
    x = x0.copy()
    n = A.shape[0]
    indptr, indices, data = A.indptr, A.indices, A.data
    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise LinearSolveFailure("zero diagonal in the frozen-policy system")
    scale = max(1.0, float(np.max(np.abs(b))))
    for _ in range(max_sweeps):
        for i in range(n):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    s += data[k] * x[j]
            x[i] = (b[i] - s) / diag[i]
        r = float(np.max(np.abs(A @ x - b)))
        if r <= tol * scale:
            return x
    raise LinearSolveFailure(f"Gauss-Seidel did not reach {tol:g} in {max_sweeps} sweeps")


def solve_dirichlet(grid: GridSpec, boundary: ScalarField, g: ScalarField,
                    box: ThetaBox, max_iter: int = 100, tol: float = 1e-10,
                    linear_solver: str = "direct",
                    workers: int | None = None) -> tuple[ScalarField, PolicyField, SolveReport]:
    """Policy iteration for Ftilde(D^2 u) = g with Dirichlet data.

    Alternates policy improvement (envelope certificates at every interior
    point) with policy evaluation (one linear elliptic solve for the frozen
    affine policy) until the max-norm residual of the nonlinear equation is
    at most `tol`.  The frozen-policy coefficient matrices have spectrum in
    [theta/2, 1/(2 theta)], so each evaluation is well posed.  On hitting
    `max_iter` the best iterate is returned with report.converged = False.
    """
    if linear_solver not in ("direct", "gauss_seidel"):
        raise ValueError(f"unknown linear solver {linear_solver!r}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"maxIter must be >= 1, got {max_iter}")
    if not np.all(np.isfinite(boundary.values)) or not np.all(np.isfinite(g.values)):
        raise ValueError("boundary and right-hand side must be finite")
    start = time.perf_counter()
    u = ScalarField(grid, transfinite_interpolation(boundary))
    core = u.interior()
    d = grid.dim
    report = SolveReport(linear_solver=linear_solver)
    policy = None
    best = None

    H = hessian_stack(u)
    H_flat = H.reshape(-1, d, d)
    for it in range(1, max_iter + 1):
        slopes, cs, eigs, _ = _improve_policy(box, H_flat, workers)
        rhs = g.values[core].reshape(-1) - cs
        A, b, index = _assemble(grid, slopes, rhs, boundary.values)
        try:
            if linear_solver == "direct":
                x = spla.spsolve(A.tocsc(), b)
            else:
                x = _gauss_seidel(A, b, u.values[core].reshape(-1))
        except LinearSolveFailure:
            raise
        except Exception as exc:  # singular factorization and friends
            raise LinearSolveFailure(str(exc)) from exc
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("non-finite values in the policy evaluation solve")
        u.values[core] = x.reshape(tuple(s - 2 for s in grid.shape))
        policy = PolicyField(grid, slopes, cs, eigs)

        H = hessian_stack(u)
        H_flat = H.reshape(-1, d, d)
        vals = np.array([envelope_value(Hi, box) for Hi in H_flat])
        res = float(np.max(np.abs(vals - g.values[core].reshape(-1))))
        report.residual_history.append(res)
        report.iterations = it
        if best is None or res < best[0]:
            best = (res, u.values.copy(), policy)
        if res <= tol:
            report.converged = True
            break
    report.final_residual = best[0]
    report.wall_time_s = time.perf_counter() - start
    u_out = ScalarField(grid, best[1])
    return u_out, best[2], report


@dataclass(frozen=True)
class ConvergenceRow:
    points_per_axis: int
    h: float
    max_error: float
    observed_order: float | None


def convergence_study(make_problem, refinements,
                      workers: int | None = None) -> list[ConvergenceRow]:
    """Solve at each refinement and report max errors and observed orders.

    `make_problem(points_per_axis)` must return a tuple
    (grid, boundary, g, box, exact_field, solver_kwargs).
    """
    rows = []
    prev = None
    for P in refinements:
        grid, boundary, g, box, exact, kwargs = make_problem(int(P))
        u, _, report = solve_dirichlet(grid, boundary, g, box,
                                       workers=workers, **kwargs)
        err = float(np.max(np.abs(u.values - exact.values)))
        h = float(np.max(grid.spacing))
        order = None
        if prev is not None and err > 0.0 and prev[1] > 0.0:
            order = float(np.log2(prev[1] / err) / np.log2(prev[0] / h))
        rows.append(ConvergenceRow(int(P), h, err, order))
        prev = (h, err)
    return rows


@dataclass(frozen=True)
class MembershipReport:
    theta: float
    fraction_in_box: float
    min_eig: float
    max_eig: float


def check_premises(u: ScalarField, lam: float, Lam: float,
                   tol: float = 1e-9) -> MembershipReport:
    """Box membership of the discrete Hessian field.

    For theta = min(lambda, 1/Lambda), reports the fraction of interior
    points whose Hessian projection has spectrum in [theta, 1/theta], and
    the extremal projected eigenvalues over the grid.
    """
    theta = mc.admissible_theta(lam, Lam)
    H = hessian_stack(u)
    d = u.grid.dim
    flat = H.reshape(-1, d, d)
    lo = theta - tol
    hi = 1.0 / theta + tol
    inside = 0
    mn, mx = np.inf, -np.inf
    for Hi in flat:
        mu = mc.hermitian_eigs_of(Hi)
        mn = min(mn, float(mu[0]))
        mx = max(mx, float(mu[-1]))
        if mu[0] >= lo and mu[-1] <= hi:
            inside += 1
    return MembershipReport(theta, inside / len(flat), mn, mx)


# ---------------------------------------------------------------------------
# built-in manufactured problems
# ---------------------------------------------------------------------------

def builtin_solution(name: str, n: int):
    """Named manufactured solution: returns (u_exact, rhs) callables on the
    2n real coordinates.

    * quadratic:       u = sum x_i^2,     Ftilde(D^2 u) = 2
    * quartic_radial:  u = |x|^4 / 4,     Ftilde(D^2 u) = 2^{1/n} |x|^2
    """
    if name == "quadratic":
        def u_fn(*xs):
            return sum(x**2 for x in xs)

        def g_fn(*xs):
            return 2.0 + 0.0 * xs[0]

        return u_fn, g_fn
    if name == "quartic_radial":
        factor = 2.0 ** (1.0 / n)

        def u_fn(*xs):
            r2 = sum(x**2 for x in xs)
            return r2**2 / 4.0

        def g_fn(*xs):
            r2 = sum(x**2 for x in xs)
            return factor * r2

        return u_fn, g_fn
    raise ValueError(f"unknown built-in solution {name!r}")
