"""First integrals of the geodesic flow built from the mean Berwald tensor.

The central object is the 0-homogeneous (1,1)-tensor

    EE^i_j = 2 F g^{ik} E_kj

whose matrix invariants are constant along geodesics whenever the
chi-curvature vanishes.  Two families are computed:

* power traces  f_a = tr(EE^a),  a = 1..n-1;
* coefficients  c_a of the characteristic polynomial
  det(Lambda I + EE) = Lambda^n + c_1 Lambda^{n-1} + ... + c_{n-1} Lambda
  (there is no free term because EE annihilates y).

The c_a come from the Faddeev-LeVerrier recurrence and are cross-checked
against Newton's identities applied to the f_a and against a brute-force
polynomial fit of det(EE + Lambda I).  A further independent route to
c_{n-1} is the bordered determinant det(2F E + F_y F_y^T) / det g.

Closed-form expressions for two first integrals of the ball metric
(n = 3) are evaluated verbatim as printed in their source; desk analysis
shows they do not coincide with c_1, c_2 (different normalization), so
callers must treat the pair (g1_paper, g2_paper) and the pair (c_1, c_2)
as separate claims and report the discrepancy rather than reconcile it.

Scalar fields (F, f_a, c_a, the closed forms) are registered under stable
string ids so the flow and CLI layers can address them.  All fields
evaluate through the generic pipeline, so seeding duals instead of jets
yields exact phase-space gradients; the Poisson bracket

    {u, v} = 1/2 g^{ij} (du/dy^j delta v/dx^i - dv/dy^j delta u/dx^i)

is computed from those exact derivatives precisely because it is a
difference of near-equal terms where finite differences would cancel
catastrophically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, FamilyError, UnknownFieldError
from .jets import seed_dual_phase_point
from .metrics import MetricSpec
from .tensors import CurvaturePacket, PhasePoint, PointEvaluation, _add, _dot_scal, _mul, _sub, _values, spray_values

__all__ = [
    "FirstIntegralSet",
    "build_EE",
    "traces_and_charpoly",
    "newton_from_traces",
    "charpoly_fit",
    "bordered_determinant",
    "first_integral_set",
    "paper_closed_forms",
    "field_ids",
    "field_order",
    "evaluate_fields",
    "field_gradient",
    "spray_derivative_of_field",
    "poisson_bracket",
    "poisson_bracket_scaled",
]


@dataclass(frozen=True)
class FirstIntegralSet:
    """EE with its invariants and the two independent cross-check values."""

    EE: np.ndarray
    f: np.ndarray
    c: np.ndarray
    newton_residual: float
    bordered_value: float


def build_EE(packet: CurvaturePacket) -> np.ndarray:
    """EE^i_j = 2 F g^{ik} E_kj from a computed packet."""
    return 2.0 * packet.F * (packet.g_inv @ packet.E)


def traces_and_charpoly(EE: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power traces f_1..f_{n-1} and char-poly coefficients c_1..c_{n-1}.

    The c_a are the Faddeev-LeVerrier coefficients of det(Lambda I + EE):
    M_1 = EE, c_1 = tr M_1, M_k = EE (c_{k-1} I - M_{k-1}), c_k = tr(M_k)/k.
    """
    n = EE.shape[0]
    f = np.empty(n - 1)
    power = EE
    f[0] = np.trace(power)
    for a in range(1, n - 1):
        power = power @ EE
        f[a] = np.trace(power)
    c = np.empty(n - 1)
    M = EE
    c[0] = np.trace(M)
    eye = np.eye(n)
    for k in range(1, n - 1):
        M = EE @ (c[k - 1] * eye - M)
        c[k] = np.trace(M) / (k + 1)
    return f, c


def newton_from_traces(f: np.ndarray) -> np.ndarray:
    """Elementary symmetric coefficients from power traces.

    Newton's identities: a e_a = sum_{i=1..a} (-1)^{i-1} e_{a-i} f_i,
    with e_0 = 1.  Returns e_1..e_{len(f)}.
    """
    e = [1.0]
    for a in range(1, len(f) + 1):
        total = sum((-1.0) ** (i - 1) * e[a - i] * f[i - 1] for i in range(1, a + 1))
        e.append(total / a)
    return np.array(e[1:])


def charpoly_fit(EE: np.ndarray) -> np.ndarray:
    """Brute-force oracle: fit det(EE + Lambda I) at Lambda = 1..n+1.

    Returns the fitted coefficients c_1..c_n of
    Lambda^n + c_1 Lambda^{n-1} + ... + c_n; c_n should come out ~0.
    """
    n = EE.shape[0]
    lam = np.arange(1.0, n + 2.0)
    rhs = np.array([np.linalg.det(EE + l * np.eye(n)) - l**n for l in lam])
    V = np.vander(lam, n + 1, increasing=False)[:, 1:]
    coeffs, *_ = np.linalg.lstsq(V, rhs, rcond=None)
    return coeffs


def bordered_determinant(packet: CurvaturePacket) -> float:
    """det(2F E_ij + F_{y^i} F_{y^j}) / det g, an independent route to c_{n-1}."""
    y = np.array(packet.point.y)
    f_y = packet.g @ y / packet.F
    bordered = 2.0 * packet.F * packet.E + np.outer(f_y, f_y)
    return float(np.linalg.det(bordered) / np.linalg.det(packet.g))


def first_integral_set(packet: CurvaturePacket) -> FirstIntegralSet:
    EE = build_EE(packet)
    f, c = traces_and_charpoly(EE)
    newton = newton_from_traces(f)
    residual = float(max(abs(newton[a] - c[a]) / max(1.0, abs(c[a])) for a in range(len(c))))
    return FirstIntegralSet(
        EE=EE, f=f, c=c, newton_residual=residual, bordered_value=bordered_determinant(packet)
    )


# -- closed forms for the n=3 ball metric -----------------------------------

def _closed_form_pieces(xs, ys):
    ny2 = _dot_scal(ys, ys)
    nx2 = _dot_scal(xs, xs)
    d = _dot_scal(xs, ys)
    # A = |y|^2 - |x|^2|y|^2 + <x,y>^2, positive on the unit ball
    A = _add(_sub(ny2, _mul(nx2, ny2)), _mul(d, d))
    return ny2, nx2, d, A


def _g1_closed(xs, ys):
    ny2, nx2, d, A = _closed_form_pieces(xs, ys)
    root = A.sqrt()
    one = ny2.const(1.0)
    num_factor = _sub(_sub(_mul(d, root) * (-2.0), _mul(d, d) * 2.0), _mul(ny2, _sub(one, nx2)))
    numerator = _mul(num_factor, _mul(A, A))
    den_core = _sub(_add(ny2 * 0.5, _mul(nx2, ny2)), _mul(d, d) * 2.0)
    denominator = _mul(_mul(den_core, ny2), _mul(_add(d, root), _add(d, root))) * 8.0
    return numerator / denominator


def _g2_closed(xs, ys):
    ny2, nx2, d, A = _closed_form_pieces(xs, ys)
    one = ny2.const(1.0)
    cross = _sub(_mul(nx2, ny2), _mul(d, d))
    numerator = _mul(_add(ny2 * 2.0, cross), cross)
    den_core = _sub(_add(ny2 * (-0.5), _mul(ny2, _add(one, nx2))), _mul(d, d))
    return _add(one, numerator / _mul(den_core, ny2) * 0.5)


def paper_closed_forms(p) -> tuple[float, float]:
    """The two printed closed-form first integrals of the n=3 ball metric.

    Evaluated exactly as displayed in their source, with no algebraic
    simplification; see the module docstring for the normalization caveat.
    """
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    if len(p.x) != 3:
        raise DimensionError("the closed-form first integrals are specific to n = 3")
    x = np.array(p.x)
    y = np.array(p.y)
    if x @ x >= 1.0:
        raise DomainError("closed forms are defined on the open unit ball |x| < 1")
    if not (y @ y > 0.0):
        raise DomainError("y must be nonzero")

    class _S(float):
        # tiny scalar shim so the generic formulas run on plain floats
        def const(self, v):
            return _S(v)

        def sqrt(self):
            return _S(math.sqrt(self))

        def truncated(self, order):
            return self

        @property
        def order(self):
            return 10**9

        def __add__(self, o):
            return _S(float(self) + float(o))

        def __sub__(self, o):
            return _S(float(self) - float(o))

        def __mul__(self, o):
            return _S(float(self) * float(o))

        def __truediv__(self, o):
            return _S(float(self) / float(o))

    xs = [_S(v) for v in p.x]
    ys = [_S(v) for v in p.y]
    return float(_g1_closed(xs, ys)), float(_g2_closed(xs, ys))


# -- scalar-field registry ---------------------------------------------------

@dataclass(frozen=True)
class _Field:
    name: str
    min_order: int
    description: str
    build: Callable[[PointEvaluation], object]


def _ee_scalars(ev: PointEvaluation):
    cached = getattr(ev, "_ee_cache", None)
    if cached is not None:
        return cached
    n = ev.n
    two_f = ev.F * 2.0
    EE = [
        [_mul(two_f, _dot_scal(ev.g_inv[i], [ev.E[k][j] for k in range(n)])) for j in range(n)]
        for i in range(n)
    ]
    ev._ee_cache = EE
    return EE


def _mat_mul_scalars(A, B):
    n = len(A)
    return [[_dot_scal(A[i], [B[k][j] for k in range(n)]) for j in range(n)] for i in range(n)]


def _trace_scalars(A):
    acc = A[0][0]
    for i in range(1, len(A)):
        acc = _add(acc, A[i][i])
    return acc


def _power_traces_scalars(ev: PointEvaluation):
    cached = getattr(ev, "_f_cache", None)
    if cached is not None:
        return cached
    EE = _ee_scalars(ev)
    out = [_trace_scalars(EE)]
    power = EE
    for _ in range(ev.n - 2):
        power = _mat_mul_scalars(power, EE)
        out.append(_trace_scalars(power))
    ev._f_cache = out
    return out


def _charpoly_scalars(ev: PointEvaluation):
    cached = getattr(ev, "_c_cache", None)
    if cached is not None:
        return cached
    EE = _ee_scalars(ev)
    n = ev.n
    M = EE
    coeffs = [_trace_scalars(M)]
    for k in range(2, n):
        shifted = [
            [_sub(coeffs[-1], M[i][j]) if i == j else -M[i][j] for j in range(n)] for i in range(n)
        ]
        M = _mat_mul_scalars(EE, shifted)
        coeffs.append(_trace_scalars(M) * (1.0 / k))
    ev._c_cache = coeffs
    return coeffs


def _s_cl_scalar(ev: PointEvaluation):
    # g^{ij} E_ij = 1/2 g^{ij} (I_{j;i} + J_{i.j}); flow-constant alongside
    # f_1 = 2F * s for the ball example, differing by the factor 2F
    n = ev.n
    acc = None
    for i in range(n):
        term = _dot_scal(ev.g_inv[i], [ev.E[i][j] for j in range(n)])
        acc = term if acc is None else _add(acc, term)
    return acc


def _field_table(spec: MetricSpec) -> dict[str, _Field]:
    n = spec.dimension
    fields = {
        "one": _Field("one", 1, "constant 1 (bracket sanity field)", lambda ev: ev.F2.const(1.0)),
        "F": _Field("F", 1, "Finsler norm F (flow-constant by construction)", lambda ev: ev.F),
        "F2": _Field("F2", 1, "energy F^2", lambda ev: ev.F2),
        "s_cl": _Field("s_cl", 5, "g^{ij} E_ij, the half-trace route to f_1/(2F)", _s_cl_scalar),
    }
    for a in range(1, n):
        fields[f"f{a}"] = _Field(
            f"f{a}", 5, f"power trace tr(EE^{a})", lambda ev, a=a: _power_traces_scalars(ev)[a - 1]
        )
        fields[f"c{a}"] = _Field(
            f"c{a}",
            5,
            f"char-poly coefficient of Lambda^{n - a}",
            lambda ev, a=a: _charpoly_scalars(ev)[a - 1],
        )
    if spec.family == "funk_ball_berwald" and n == 3:
        fields["g1_paper"] = _Field(
            "g1_paper", 1, "printed closed form for g_1 (verbatim)", lambda ev: _g1_closed(ev.xs, ev.ys)
        )
        fields["g2_paper"] = _Field(
            "g2_paper", 1, "printed closed form for g_2 (verbatim)", lambda ev: _g2_closed(ev.xs, ev.ys)
        )
    return fields


def field_ids(spec: MetricSpec) -> list[str]:
    """Registered scalar-field ids for this metric."""
    return sorted(_field_table(spec))


def _lookup(spec: MetricSpec, name: str) -> _Field:
    table = _field_table(spec)
    if name not in table:
        if name in ("g1_paper", "g2_paper"):
            raise FamilyError(f"field {name!r} exists only for family funk_ball_berwald with n = 3")
        known = ", ".join(sorted(table))
        raise UnknownFieldError(f"unknown scalar field {name!r}; registered: {known}")
    return table[name]


def field_order(spec: MetricSpec, names) -> int:
    """Minimum jet order needed to evaluate all named fields."""
    return max(_lookup(spec, name).min_order for name in names)


def evaluate_fields(spec: MetricSpec, names, p, ev: PointEvaluation | None = None) -> dict[str, float]:
    """Values of the named fields at one phase point (shared evaluation)."""
    names = list(names)
    if ev is None:
        ev = PointEvaluation(spec, p, order=field_order(spec, names))
    return {name: _lookup(spec, name).build(ev).num for name in names}


def field_gradient(spec: MetricSpec, name: str, p) -> tuple[float, np.ndarray, np.ndarray]:
    """(value, d/dx gradient, d/dy gradient) of a field by dual seeding."""
    field = _lookup(spec, name)
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    n = spec.dimension
    value = math.nan
    grad = np.empty(2 * n)
    for direction in range(2 * n):
        seeds = seed_dual_phase_point(p, field.min_order, direction)
        ev = PointEvaluation(spec, p, seeds=seeds)
        out = field.build(ev)
        value = out.num
        grad[direction] = out.tangent.num
    return value, grad[:n], grad[n:]


def spray_derivative_of_field(spec: MetricSpec, name: str, p) -> float:
    """G(u) = y^k du/dx^k - 2 G^k du/dy^k; ~0 iff u is a pointwise first integral."""
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    _, grad_x, grad_y = field_gradient(spec, name, p)
    G = spray_values(spec, p)
    return float(np.dot(p.y, grad_x) - 2.0 * np.dot(G, grad_y))


def _bracket_terms(spec: MetricSpec, fa: str, fb: str, p):
    if not isinstance(p, PhasePoint):
        p = PhasePoint(*p)
    n = spec.dimension
    order = max(field_order(spec, [fa, fb]), 3)
    field_a = _lookup(spec, fa)
    field_b = _lookup(spec, fb)
    grad_a = np.empty(2 * n)
    grad_b = np.empty(2 * n)
    for direction in range(2 * n):
        seeds = seed_dual_phase_point(p, order, direction)
        ev = PointEvaluation(spec, p, seeds=seeds)
        grad_a[direction] = field_a.build(ev).tangent.num
        grad_b[direction] = field_b.build(ev).tangent.num
    base = PointEvaluation(spec, p, order=3)
    N = _values(base.N)
    g_inv = _values(base.g_inv)
    # delta u / dx^i = du/dx^i - N^k_i du/dy^k
    delta_a = grad_a[:n] - N.T @ grad_a[n:]
    delta_b = grad_b[:n] - N.T @ grad_b[n:]
    term1 = float(grad_a[n:] @ g_inv @ delta_b)
    term2 = float(grad_b[n:] @ g_inv @ delta_a)
    return term1, term2


def poisson_bracket(spec: MetricSpec, fa: str, fb: str, p) -> float:
    """{fa, fb} = 1/2 g^{ij} (dfa/dy^j delta fb/dx^i - dfb/dy^j delta fa/dx^i)."""
    term1, term2 = _bracket_terms(spec, fa, fb, p)
    return 0.5 * (term1 - term2)


def poisson_bracket_scaled(spec: MetricSpec, fa: str, fb: str, p) -> tuple[float, float]:
    """(bracket value, scale), where scale bounds the magnitude of either term.

    A bracket is 'numerically zero' when |value| is small against the scale,
    which guards against calling a cancellation of two huge terms a zero.
    """
    term1, term2 = _bracket_terms(spec, fa, fb, p)
    scale = 1.0 + 0.5 * (abs(term1) + abs(term2))
    return 0.5 * (term1 - term2), scale
