"""The curvature pipeline: spray, nonlinear connection, curvature tensors.

Everything is computed at a single phase point by seeding coordinate jets
(:func:`finslerkit.jets.seed_phase_point`) and pushing them through the
defining formulas.  With base order m, the energy function F^2 is a jet of
order m and each differentiation consumes one order, so the deepest
quantities dictate the seed order:

==============================  =========  ==========================
quantity                         depth      min seed order for values
==============================  =========  ==========================
g_ij, spray G^i                      2          2
connection N^i_j                     3          3
Jacobi/curvature R                   4          4
B, E, S-derived tensors, chi         5          5
covariant derivative of E            6          6
==============================  =========  ==========================

Conventions (indices are 0-based in code):

* ``g_ij = 1/2 d^2 F^2 / dy^i dy^j``, ``G^i = 1/4 g^{ij}(d^2 F^2/(dy^j dx^k) y^k - dF^2/dx^j)``
* ``N^i_j = dG^i/dy^j``; horizontal derivative ``delta/dx^i = d/dx^i - N^j_i d/dy^j``
* spray derivative of a scalar: ``D(f) = y^k df/dx^k - 2 G^k df/dy^k``
* Jacobi endomorphism ``R^i_j = 2 dG^i/dx^j - D(N^i_j) - N^i_k N^k_j``
* curvature ``R^i_jk = delta N^i_j / dx^k - delta N^i_k / dx^j``
* Berwald ``B^i_jkl = d^3 G^i / dy^j dy^k dy^l``; mean value ``E_ij = 1/2 B^k_ijk``
* distortion ``tau = 1/2 ln(det g / sigma)``, ``S = D(tau)``
* ``chi_i = 1/2 (D(dS/dy^i) - dS/dx^i)``
* mean Cartan ``I_k = dtau/dy^k``; mean Landsberg ``J_i = D(I_i) - I_k N^k_i``
* ``I_{j;i} = delta I_j/dx^i - I_l d^2 G^l/(dy^i dy^j)``; ``J_{i.j} = dJ_i/dy^j``
* covariant (0,2) rule: ``(nabla T)_ij = D(T_ij) - T_kj N^k_i - T_ik N^k_j``

The three mean-Berwald routes are exposed separately (``E`` from B,
``E_S = 1/2 d^2 S/dy^2``, ``E_CL = 1/2 (I_{j;i} + J_{i.j})``); they must
agree for a correct implementation and are never collapsed into one.

The pipeline is generic over the scalar type: seeding
:class:`~finslerkit.jets.DualLayer` coordinates instead of jets pushes one
extra directional derivative through every formula (used for Poisson
brackets of the derived first integrals).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr, metrics
from .errors import OrderError, SingularMetricError
from .jets import seed_phase_point

__all__ = [
    "PhasePoint",
    "FlagData",
    "CurvaturePacket",
    "PointEvaluation",
    "compute_packet",
    "metric_tensor",
    "spray",
    "spray_values",
    "connection",
    "flag_curvature",
    "berwald",
    "s_function",
    "chi",
    "cartan_landsberg",
    "nabla_covariant2",
    "hamel_check",
]

# g with condition number beyond this is treated as numerically singular.
COND_LIMIT = 1e10

# Scalar-flag classification threshold on the model residual.
SCALAR_FLAG_TOL = 1e-8


@dataclass(frozen=True)
class PhasePoint:
    """A point (x, y) of the slit tangent bundle, y != 0."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __init__(self, x, y):
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "y", tuple(float(v) for v in y))


@dataclass(frozen=True)
class FlagData:
    """Scalar-flag diagnosis of the Jacobi endomorphism.

    ``kappa`` is tr(R)/((n-1) F^2); ``residual`` the relative deviation of
    R from the scalar model kappa (F^2 id - y (.) g y); ``is_scalar`` is
    residual <= 1e-8.
    """

    is_scalar: bool
    kappa: float
    residual: float


@dataclass(frozen=True)
class CurvaturePacket:
    """Every pointwise tensor of the pipeline, as plain numpy values."""

    metric: str
    point: PhasePoint
    order: int
    F: float
    g: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    G: np.ndarray
    N: np.ndarray
    R_jac: np.ndarray
    R_curv: np.ndarray
    B: np.ndarray
    E: np.ndarray
    tau: float
    S: float
    chi: np.ndarray
    I: np.ndarray
    J: np.ndarray
    I_hcov: np.ndarray
    J_vder: np.ndarray
    alpha: tuple[np.ndarray, np.ndarray]
    flag: FlagData


def _align(*scalars):
    m = min(s.order for s in scalars)
    return tuple(s.truncated(m) for s in scalars)


def _mul(a, b):
    a, b = _align(a, b)
    return a * b


def _dot_scal(vec_a, vec_b):
    acc = None
    for a, b in zip(vec_a, vec_b):
        term = _mul(a, b)
        acc = term if acc is None else _add(acc, term)
    return acc


def _add(a, b):
    a, b = _align(a, b)
    return a + b


def _sub(a, b):
    a, b = _align(a, b)
    return a - b


def _values(obj) -> np.ndarray:
    """Recursive .num extraction of nested scalar lists into an ndarray."""
    if isinstance(obj, list):
        return np.array([_values(o) for o in obj])
    return obj.num


def mat_inv_det(mat):
    """Inverse and determinant of a small scalar matrix by Gauss-Jordan
    elimination with partial pivoting on the value parts."""
    k = len(mat)
    one = mat[0][0].const(1.0)
    zero = mat[0][0].const(0.0)
    aug = [list(_align(*row)) + [one if i == j else zero for j in range(k)] for i, row in enumerate(mat)]
    det = None
    sign = 1.0
    for col in range(k):
        pivot_row = max(range(col, k), key=lambda r: abs(aug[r][col].num))
        if aug[pivot_row][col].num == 0.0:
            raise SingularMetricError("matrix of scalars has an exactly singular value part")
        if pivot_row != col:
            aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
            sign = -sign
        pivot = aug[col][col]
        det = pivot if det is None else _mul(det, pivot)
        inv_pivot = pivot.recip()
        aug[col] = [_mul(entry, inv_pivot) for entry in aug[col]]
        for row in range(k):
            if row != col:
                factor = aug[row][col]
                if factor.num == 0.0 and factor is zero:
                    continue
                aug[row] = [_sub(e, _mul(factor, ce)) for e, ce in zip(aug[row], aug[col])]
    inv = [row[k:] for row in aug]
    det = _mul(det, det.const(sign)) if sign < 0 else det
    return inv, det


class PointEvaluation:
    """Lazy pipeline evaluation at one phase point.

    Properties are scalar-valued (jets by default); numpy views come from
    :meth:`packet` or the ``*_np`` helpers.  Pass ``seeds`` to run the same
    formulas over a different scalar type (e.g. duals).
    """

    def __init__(self, spec: metrics.MetricSpec, point, order: int = 5, sigma=None, seeds=None):
        if not isinstance(point, PhasePoint):
            point = PhasePoint(*point)
        metrics.check_domain(spec, point.x, point.y)
        self.spec = spec
        self.point = point
        self.n = spec.dimension
        if seeds is None:
            seeds = seed_phase_point(point, order)
        self.seeds = seeds
        self.order = seeds[0].order
        self.xs = list(seeds[: self.n])
        self.ys = list(seeds[self.n :])
        if sigma is not None and isinstance(sigma, str):
            sigma = expr.parse_expression(sigma)
        self._sigma_node = sigma if sigma is not None else spec.sigma

    # -- derivative helpers -------------------------------------------

    def dx(self, f, i: int):
        return f.d(i)

    def dy(self, f, i: int):
        return f.d(self.n + i)

    def spray_d(self, f):
        """D(f) = y^k df/dx^k - 2 G^k df/dy^k."""
        acc = None
        for k in range(self.n):
            term = _sub(_mul(self.ys[k], self.dx(f, k)), _mul(self.G[k], self.dy(f, k)) * 2.0)
            acc = term if acc is None else _add(acc, term)
        return acc

    def hder(self, f, i: int):
        """delta f / dx^i = df/dx^i - N^j_i df/dy^j."""
        acc = self.dx(f, i)
        for j in range(self.n):
            acc = _sub(acc, _mul(self.N[j][i], self.dy(f, j)))
        return acc

    # -- pipeline stages ------------------------------------------------

    @cached_property
    def F2(self):
        return metrics.eval_F2(self.spec, self.xs, self.ys)

    @cached_property
    def F(self):
        return self.F2.sqrt()

    @cached_property
    def g(self):
        if self.order < 2:
            raise OrderError("the fundamental tensor needs seed order >= 2")
        return [[self.dy(self.dy(self.F2, i), j) * 0.5 for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def _g_inv_det(self):
        g_vals = _values(self.g)
        cond = float(np.linalg.cond(g_vals))
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularMetricError(
                f"fundamental tensor is numerically singular at {self.point} "
                f"(condition number {cond:.3e} > {COND_LIMIT:.0e})"
            )
        return mat_inv_det(self.g)

    @property
    def g_inv(self):
        return self._g_inv_det[0]

    @property
    def det_g(self):
        return self._g_inv_det[1]

    @cached_property
    def h(self):
        fy = [self.dy(self.F, i) for i in range(self.n)]
        return [[_sub(self.g[i][j], _mul(fy[i], fy[j])) for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def G(self):
        """Spray coefficients G^i."""
        b = []
        for j in range(self.n):
            acc = None
            for k in range(self.n):
                term = _mul(self.dx(self.dy(self.F2, j), k), self.ys[k])
                acc = term if acc is None else _add(acc, term)
            b.append(_sub(acc, self.dx(self.F2, j)))
        return [_dot_scal(self.g_inv[i], b) * 0.25 for i in range(self.n)]

    @cached_property
    def N(self):
        if self.order < 3:
            raise OrderError("the nonlinear connection needs seed order >= 3")
        return [[self.dy(self.G[i], j) for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def R_jac(self):
        """Jacobi endomorphism R^i_j."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                term = _sub(self.dx(self.G[i], j) * 2.0, self.spray_d(self.N[i][j]))
                row.append(_sub(term, _dot_scal(self.N[i], [self.N[k][j] for k in range(self.n)])))
            out.append(row)
        return out

    @cached_property
    def R_curv(self):
        """Curvature tensor R^i_jk of the nonlinear connection."""
        hN = [[[self.hder(self.N[i][j], k) for k in range(self.n)] for j in range(self.n)] for i in range(self.n)]
        return [
            [[_sub(hN[i][j][k], hN[i][k][j]) for k in range(self.n)] for j in range(self.n)]
            for i in range(self.n)
        ]

    @cached_property
    def B(self):
        """Berwald curvature B^i_jkl."""
        if self.order < 5:
            raise OrderError("the Berwald tensor needs seed order >= 5")
        out = []
        for i in range(self.n):
            d1 = [self.dy(self.G[i], j) for j in range(self.n)]
            d2 = [[self.dy(d1[j], k) for k in range(j, self.n)] for j in range(self.n)]
            cube = []
            for j in range(self.n):
                plane = []
                for k in range(self.n):
                    jj, kk = min(j, k), max(j, k)
                    row = [self.dy(d2[jj][kk - jj], l) for l in range(self.n)]
                    plane.append(row)
                cube.append(plane)
            out.append(cube)
        return out

    @cached_property
    def E(self):
        """Mean Berwald tensor from the trace of B."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                acc = None
                for k in range(self.n):
                    term = self.B[k][i][j][k]
                    acc = term if acc is None else _add(acc, term)
                row.append(acc * 0.5)
            out.append(row)
        return out

    @cached_property
    def sigma(self):
        node = self._sigma_node
        if node is None:
            return self.xs[0].const(1.0)
        return expr.evaluate(node, self.xs, self.ys)

    @cached_property
    def tau(self):
        """Distortion 1/2 ln(det g / sigma)."""
        det, sig = _align(self.det_g, self.sigma)
        return (det / sig).ln() * 0.5

    @cached_property
    def S(self):
        return self.spray_d(self.tau)

    @cached_property
    def E_S(self):
        """Mean Berwald tensor from the fiber Hessian of S."""
        return [[self.dy(self.dy(self.S, i), j) * 0.5 for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def I(self):
        """Mean Cartan torsion I_k."""
        return [self.dy(self.tau, k) for k in range(self.n)]

    @cached_property
    def J(self):
        """Mean Landsberg torsion J_i = nabla I_i."""
        return [
            _sub(self.spray_d(self.I[i]), _dot_scal(self.I, [self.N[k][i] for k in range(self.n)]))
            for i in range(self.n)
        ]

    @cached_property
    def I_hcov(self):
        """Horizontal covariant derivative; element [i][j] is I_{j;i}."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                acc = self.hder(self.I[j], i)
                for l in range(self.n):
                    acc = _sub(acc, _mul(self.I[l], self.dy(self.dy(self.G[l], i), j)))
                row.append(acc)
            out.append(row)
        return out

    @cached_property
    def J_vder(self):
        """Fiber derivative; element [i][j] is dJ_i/dy^j."""
        return [[self.dy(self.J[i], j) for j in range(self.n)] for i in range(self.n)]

    @cached_property
    def E_CL(self):
        """Mean Berwald tensor from mean Cartan/Landsberg data."""
        return [
            [_add(self.I_hcov[i][j], self.J_vder[i][j]) * 0.5 for j in range(self.n)]
            for i in range(self.n)
        ]

    @cached_property
    def chi(self):
        """chi_i = 1/2 (D(dS/dy^i) - dS/dx^i)."""
        return [
            _sub(self.spray_d(self.dy(self.S, i)), self.dx(self.S, i)) * 0.5 for i in range(self.n)
        ]

    @cached_property
    def hamel(self):
        """H_ij = delta(dS/dy^j)/dx^i - delta(dS/dy^i)/dx^j."""
        sy = [self.dy(self.S, i) for i in range(self.n)]
        return [
            [_sub(self.hder(sy[j], i), self.hder(sy[i], j)) for j in range(self.n)]
            for i in range(self.n)
        ]

    def nabla2(self, T):
        """Covariant derivative of a (0,2) tensor of scalars along the spray."""
        out = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                acc = self.spray_d(T[i][j])
                acc = _sub(acc, _dot_scal([T[k][j] for k in range(self.n)], [self.N[k][i] for k in range(self.n)]))
                acc = _sub(acc, _dot_scal(T[i], [self.N[k][j] for k in range(self.n)]))
                row.append(acc)
            out.append(row)
        return out

    # -- numpy views ----------------------------------------------------

    @cached_property
    def flag(self) -> FlagData:
        r = _values(self.R_jac)
        g = _values(self.g)
        y = np.array(self.point.y)
        f2 = self.F2.num
        kappa = float(np.trace(r)) / ((self.n - 1) * f2) if self.n > 1 else 0.0
        model = kappa * (f2 * np.eye(self.n) - np.outer(y, g @ y))
        residual = float(np.linalg.norm(r - model)) / max(1.0, float(np.linalg.norm(r)))
        return FlagData(is_scalar=bool(residual <= SCALAR_FLAG_TOL), kappa=kappa, residual=residual)

    def packet(self) -> CurvaturePacket:
        if self.order < 5:
            raise OrderError("a full curvature packet needs seed order >= 5")
        return CurvaturePacket(
            metric=self.spec.name,
            point=self.point,
            order=self.order,
            F=self.F.num,
            g=_values(self.g),
            g_inv=_values(self.g_inv),
            h=_values(self.h),
            G=_values(self.G),
            N=_values(self.N),
            R_jac=_values(self.R_jac),
            R_curv=_values(self.R_curv),
            B=_values(self.B),
            E=_values(self.E),
            tau=self.tau.num,
            S=self.S.num,
            chi=_values(self.chi),
            I=_values(self.I),
            J=_values(self.J),
            I_hcov=_values(self.I_hcov),
            J_vder=_values(self.J_vder),
            alpha=(_values(self.J), -_values(self.I)),
            flag=self.flag,
        )


# -- module-level operations (thin wrappers) -------------------------------

def compute_packet(spec, p, order: int = 5, sigma=None) -> CurvaturePacket:
    """Full pointwise curvature packet; ``order`` >= 5."""
    return PointEvaluation(spec, p, order=order, sigma=sigma).packet()


def metric_tensor(spec, p):
    """(g, g_inv, h, F) values at p."""
    ev = PointEvaluation(spec, p, order=2)
    return _values(ev.g), _values(ev.g_inv), _values(ev.h), ev.F.num


def spray_values(spec, p) -> np.ndarray:
    """Spray coefficients G^i at p, by direct extraction at order 2.

    Same formula as the jet route, assembled from extracted second
    derivatives; this is the fast path for geodesic right-hand sides.
    """
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    metrics.check_domain(spec, p.x, p.y)
    n = spec.dimension
    seeds = seed_phase_point(p, 2)
    f2 = metrics.eval_F2(spec, seeds[:n], seeds[n:])
    dim = 2 * n

    def idx(*positions):
        out = [0] * dim
        for pos in positions:
            out[pos] += 1
        return tuple(out)

    g = np.array([[0.5 * f2.extract(idx(n + i, n + j)) for j in range(n)] for i in range(n)])
    cond = float(np.linalg.cond(g))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetricError(
            f"fundamental tensor is numerically singular at {p} (condition number {cond:.3e})"
        )
    b = np.array(
        [
            sum(f2.extract(idx(n + j, k)) * p.y[k] for k in range(n)) - f2.extract(idx(j))
            for j in range(n)
        ]
    )
    return 0.25 * np.linalg.solve(g, b)


def spray(spec, p) -> np.ndarray:
    """Spray coefficients G^i at p."""
    return spray_values(spec, p)


def connection(spec, p):
    """(N, R_jac, R_curv) values at p."""
    ev = PointEvaluation(spec, p, order=4)
    return _values(ev.N), _values(ev.R_jac), _values(ev.R_curv)


def flag_curvature(spec, p) -> FlagData:
    """Scalar-flag diagnosis of the Jacobi endomorphism at p."""
    return PointEvaluation(spec, p, order=4).flag


def berwald(spec, p):
    """(B, E) values at p."""
    ev = PointEvaluation(spec, p, order=5)
    return _values(ev.B), _values(ev.E)


def s_function(spec, p, sigma=None):
    """(tau, S, E_S) at p; ``sigma`` overrides the metric's density."""
    ev = PointEvaluation(spec, p, order=5, sigma=sigma)
    return ev.tau.num, ev.S.num, _values(ev.E_S)


def chi(spec, p, sigma=None) -> np.ndarray:
    """chi covector at p."""
    return _values(PointEvaluation(spec, p, order=5, sigma=sigma).chi)


def cartan_landsberg(spec, p):
    """(I, J, I_hcov, J_vder, E_CL, alpha) values at p."""
    ev = PointEvaluation(spec, p, order=5)
    I = _values(ev.I)
    J = _values(ev.J)
    return I, J, _values(ev.I_hcov), _values(ev.J_vder), _values(ev.E_CL), (J, -I)


def nabla_covariant2(spec, p, tensor: str = "E", order: int = 6) -> np.ndarray:
    """Covariant derivative values of a named (0,2) pipeline tensor.

    ``tensor`` is ``"E"`` or ``"g"``.  E sits at depth 5, so its covariant
    derivative needs seed order 6.
    """
    ev = PointEvaluation(spec, p, order=order)
    if tensor == "E":
        return _values(ev.nabla2(ev.E))
    if tensor == "g":
        return _values(ev.nabla2(ev.g))
    raise ValueError(f"unknown tensor {tensor!r}; expected 'E' or 'g'")


def hamel_check(spec, p, sigma=None) -> np.ndarray:
    """Antisymmetric H_ij matrix at p (zero iff chi vanishes)."""
    return _values(PointEvaluation(spec, p, order=5, sigma=sigma).hamel)
