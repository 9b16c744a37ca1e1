"""Metric descriptions: families, config parsing, domain guards, sampling.

A :class:`MetricSpec` declares the data defining one Finsler metric through
its energy function F^2(x, y):

``euclidean``
    F^2 = |y|^2.
``riemannian``
    F^2 = g_ij(x) y^i y^j with a symmetric component matrix of expressions
    in x only.
``funk_ball_berwald``
    The projectively flat metric on the open unit ball

        F = (sqrt(|y|^2 - (|x|^2 |y|^2 - <x,y>^2)) + <x,y>)^2
            / ((1 - |x|^2)^2 sqrt(|y|^2 - (|x|^2 |y|^2 - <x,y>^2)))

    whose geodesic coefficients collapse to a projective factor,
    G^i = P y^i.  Its domain guard is |x| <= 1 - 1e-6.
``custom``
    An arbitrary expression for F^2 in the grammar of
    :mod:`finslerkit.expr`; it must be positively 2-homogeneous in y
    (verified by a randomized Euler test at load time).

Config file format (UTF-8, line oriented)::

    # comment ('#' or ';' to end of line)
    [metric]
    name = ball3                  ; optional
    dimension = 3
    family = funk_ball_berwald
    sigma = exp(2*x1)             ; optional reference density, x only

    ; family = custom:
    ; expression = normy2 + x1*y2^3/y1

    ; family = riemannian: components g_i_j (1-based, x only); a missing
    ; g_j_i mirrors g_i_j; missing off-diagonal entries are 0.
    ; g_1_1 = 4/(1 + normx2)^2

Every evaluation path (floats, jets, duals) shares one implementation per
family, so the fast float path and all differentiation orders agree by
construction.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

import numpy as np

from . import expr
from .errors import (
    BranchError,
    ConfigError,
    DimensionError,
    DomainError,
    FamilyError,
    FinslerError,
    HomogeneityError,
)

__all__ = [
    "MetricSpec",
    "FAMILIES",
    "FUNK_GUARD_INSET",
    "parse_metric",
    "format_metric",
    "load_metric_file",
    "eval_F2",
    "eval_sigma",
    "eval_projective_factor",
    "f2_value",
    "check_domain",
    "guard_distance",
    "sample_phase_point",
    "catalog",
]

FAMILIES = ("euclidean", "riemannian", "funk_ball_berwald", "custom")

# The ball guard keeps a fixed inset from the true singular boundary |x| = 1.
FUNK_GUARD_INSET = 1e-6

# Load-time randomized checks use a fixed seed: loading is deterministic.
_LOAD_CHECK_SEED = 20260814


@dataclass(frozen=True)
class MetricSpec:
    """Immutable description of one metric; see the module docstring."""

    name: str
    dimension: int
    family: str
    expression: expr.Node | None = None
    components: tuple[tuple[expr.Node, ...], ...] | None = None
    sigma: expr.Node | None = None


# -- scalar helpers (floats, jets and duals share one code path) ---------

def _is_plain(v) -> bool:
    return isinstance(v, numbers.Real)


def _sqrt(v):
    if _is_plain(v):
        if v <= 0.0:
            raise BranchError(f"sqrt of non-positive value {v!r}")
        return math.sqrt(v)
    return v.sqrt()


def _dot(a, b):
    acc = a[0] * b[0]
    for u, v in zip(a[1:], b[1:]):
        acc = acc + u * v
    return acc


def _num(v) -> float:
    return float(v) if _is_plain(v) else v.num


# -- family evaluators ---------------------------------------------------

def _funk_pieces(xs, ys):
    """(A, w, 1 - |x|^2) with A = |y|^2 - (|x|^2 |y|^2 - <x,y>^2) and
    w = sqrt(A) + <x,y>."""
    nx2 = _dot(xs, xs)
    ny2 = _dot(ys, ys)
    d = _dot(xs, ys)
    a = ny2 - (nx2 * ny2 - d * d)
    w = _sqrt(a) + d
    return a, w, 1.0 - nx2


def eval_F2(spec: MetricSpec, xs, ys):
    """F^2 at scalar coordinates ``xs``, ``ys`` (one scalar per variable).

    The value part of the result must be strictly positive; otherwise the
    point is outside the metric's domain and :class:`DomainError` is raised.
    """
    if len(xs) != spec.dimension or len(ys) != spec.dimension:
        raise DimensionError(
            f"metric has dimension {spec.dimension}, got {len(xs)} position "
            f"and {len(ys)} fiber coordinates"
        )
    if spec.family == "euclidean":
        out = _dot(ys, ys)
    elif spec.family == "riemannian":
        acc = None
        for i in range(spec.dimension):
            for j in range(spec.dimension):
                gij = expr.evaluate(spec.components[i][j], xs, ys)
                term = gij * ys[i] * ys[j]
                acc = term if acc is None else acc + term
        out = acc
    elif spec.family == "funk_ball_berwald":
        a, w, one_minus = _funk_pieces(xs, ys)
        w2 = w * w
        out = (w2 * w2) / (one_minus * one_minus * one_minus * one_minus * a)
    elif spec.family == "custom":
        out = expr.evaluate(spec.expression, xs, ys)
    else:
        raise FamilyError(f"unknown family {spec.family!r}")
    if _num(out) <= 0.0:
        raise DomainError(
            f"F^2 is not positive at this point (value {_num(out)!r}); outside the domain"
        )
    return out


def eval_projective_factor(spec: MetricSpec, xs, ys):
    """P with G^i = P y^i; defined for the funk_ball_berwald family only."""
    if spec.family != "funk_ball_berwald":
        raise FamilyError(
            f"projective factor is defined for funk_ball_berwald, not {spec.family!r}"
        )
    a, w, one_minus = _funk_pieces(xs, ys)
    return w / one_minus


def eval_sigma(spec: MetricSpec, xs):
    """Reference volume density sigma(x); ``None`` expression means 1."""
    if spec.sigma is None:
        return 1.0 if _is_plain(xs[0]) else xs[0].const(1.0)
    return expr.evaluate(spec.sigma, xs, xs)


def f2_value(spec: MetricSpec, x, y) -> float:
    """Float fast path for F^2 (guards checked)."""
    check_domain(spec, x, y)
    return float(eval_F2(spec, [float(v) for v in x], [float(v) for v in y]))


# -- domain guards --------------------------------------------------------

def check_domain(spec: MetricSpec, x, y) -> None:
    """Raise :class:`DomainError` if (x, y) violates the metric's guard."""
    if len(x) != spec.dimension or len(y) != spec.dimension:
        raise DimensionError(
            f"point has lengths ({len(x)}, {len(y)}), metric dimension is {spec.dimension}"
        )
    if all(float(v) == 0.0 for v in y):
        raise DomainError("y must be a nonzero vector")
    if spec.family == "funk_ball_berwald":
        r = math.sqrt(sum(float(v) ** 2 for v in x))
        if r > 1.0 - FUNK_GUARD_INSET:
            raise DomainError(
                f"|x| = {r!r} outside the ball guard |x| <= 1 - {FUNK_GUARD_INSET}"
            )


def guard_distance(spec: MetricSpec, x) -> float:
    """Distance from x to the guard boundary (positive inside).

    Metrics without a position guard return +inf.
    """
    if spec.family == "funk_ball_berwald":
        r = math.sqrt(sum(float(v) ** 2 for v in x))
        return (1.0 - FUNK_GUARD_INSET) - r
    return math.inf


# -- random in-domain sampling -------------------------------------------

def sample_phase_point(spec: MetricSpec, rng: np.random.Generator):
    """One random phase point: x uniform in the guard region, y uniform on
    the unit sphere scaled by a uniform [0.5, 2] factor.

    Metrics without a position guard sample x uniformly from [-1, 1]^n.
    Custom metrics retry until F^2 evaluates (their expressions may have
    fiber poles).
    """
    n = spec.dimension
    for _ in range(200):
        if spec.family == "funk_ball_berwald":
            direction = rng.standard_normal(n)
            direction /= np.linalg.norm(direction)
            # cap the radius: closer to the boundary cond(g) ~ dist^-2
            # drowns the verified identities in roundoff
            radius = 0.95 * (1.0 - FUNK_GUARD_INSET) * rng.uniform() ** (1.0 / n)
            x = radius * direction
        else:
            x = rng.uniform(-1.0, 1.0, n)
        y = rng.standard_normal(n)
        y /= np.linalg.norm(y)
        y *= rng.uniform(0.5, 2.0)
        try:
            f2_value(spec, x, y)
        except FinslerError:
            continue
        return x, y
    raise DomainError(f"could not sample an in-domain point for metric {spec.name!r}")


# -- config text ----------------------------------------------------------

def _strip_comment(line: str) -> str:
    for mark in "#;":
        pos = line.find(mark)
        if pos >= 0:
            line = line[:pos]
    return line


def _read_sections(text: str):
    """Parse sectioned key/value text, tracking line numbers for errors."""
    sections: dict[str, dict[str, tuple[str, int, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {stripped!r}")
            current = stripped[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside of any section")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        column = len(line) - len(line.partition("=")[2].lstrip()) + 1
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        sections[current][key] = (value.strip(), lineno, column)
    return sections


_SCALAR_KEYS = {"name", "dimension", "family", "sigma", "expression"}


def parse_metric(text: str) -> MetricSpec:
    """Parse and validate a metric description; see the module docstring.

    Validation is strict: unknown keys, missing required keys, asymmetric
    or non-positive-definite riemannian components, inhomogeneous custom
    expressions and non-positive densities all raise.
    """
    sections = _read_sections(text)
    unknown = set(sections) - {"metric"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)!r}; expected [metric]")
    if "metric" not in sections:
        raise ConfigError("missing [metric] section")
    body = sections["metric"]

    def take(key: str):
        return body.pop(key, None)

    name_item = take("name")
    dim_item = take("dimension")
    family_item = take("family")
    sigma_item = take("sigma")
    expression_item = take("expression")

    if dim_item is None:
        raise ConfigError("missing required key 'dimension'")
    try:
        dimension = int(dim_item[0])
    except ValueError:
        raise ConfigError(f"line {dim_item[1]}: dimension must be an integer") from None
    if dimension < 2:
        raise ConfigError(f"line {dim_item[1]}: dimension must be >= 2")
    if family_item is None:
        raise ConfigError("missing required key 'family'")
    family = family_item[0]
    if family not in FAMILIES:
        raise FamilyError(f"unknown family {family!r}; expected one of {FAMILIES}")
    name = name_item[0] if name_item else "metric"

    sigma = None
    if sigma_item is not None:
        sigma = expr.parse_expression(sigma_item[0], base_line=sigma_item[1], base_column=sigma_item[2])
        expr.check_variables(sigma, dimension, allow_y=False, context="sigma")

    expression = None
    components = None
    if family == "custom":
        if expression_item is None:
            raise ConfigError("family 'custom' requires key 'expression'")
        expression = expr.parse_expression(
            expression_item[0], base_line=expression_item[1], base_column=expression_item[2]
        )
        expr.check_variables(expression, dimension, context="expression")
    elif expression_item is not None:
        raise ConfigError(f"key 'expression' is only valid for family 'custom', not {family!r}")

    if family == "riemannian":
        grid: list[list[expr.Node | None]] = [[None] * dimension for _ in range(dimension)]
        for key, (value, lineno, column) in list(body.items()):
            parts = key.split("_")
            if len(parts) != 3 or parts[0] != "g":
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                i, j = int(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigError(f"line {lineno}: malformed component key {key!r}") from None
            if not (1 <= i <= dimension and 1 <= j <= dimension):
                raise DimensionError(
                    f"line {lineno}: component {key} out of range for dimension {dimension}"
                )
            node = expr.parse_expression(value, base_line=lineno, base_column=column)
            expr.check_variables(node, dimension, allow_y=False, context=key)
            grid[i - 1][j - 1] = node
            del body[key]
        zero = expr.Num(0.0)
        for i in range(dimension):
            if grid[i][i] is None:
                raise ConfigError(f"missing diagonal component g_{i + 1}_{i + 1}")
            for j in range(dimension):
                if grid[i][j] is None:
                    grid[i][j] = grid[j][i] if grid[j][i] is not None else zero
        components = tuple(tuple(row) for row in grid)
    if body:
        raise ConfigError(f"unknown key(s) {sorted(body)!r} for family {family!r}")
    if family == "funk_ball_berwald" and dimension < 2:
        raise ConfigError("funk_ball_berwald requires dimension >= 2")

    spec = MetricSpec(
        name=name,
        dimension=dimension,
        family=family,
        expression=expression,
        components=components,
        sigma=sigma,
    )
    _validate_loaded(spec)
    return spec


def format_metric(spec: MetricSpec) -> str:
    """Canonical config text; parse_metric(format_metric(s)) equals s."""
    lines = ["[metric]", f"name = {spec.name}", f"dimension = {spec.dimension}", f"family = {spec.family}"]
    if spec.sigma is not None:
        lines.append(f"sigma = {expr.to_text(spec.sigma)}")
    if spec.expression is not None:
        lines.append(f"expression = {expr.to_text(spec.expression)}")
    if spec.components is not None:
        for i in range(spec.dimension):
            for j in range(spec.dimension):
                lines.append(f"g_{i + 1}_{j + 1} = {expr.to_text(spec.components[i][j])}")
    return "\n".join(lines) + "\n"


def load_metric_file(path) -> MetricSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_metric(handle.read())


# -- load-time validation --------------------------------------------------

def _validate_loaded(spec: MetricSpec) -> None:
    rng = np.random.default_rng(_LOAD_CHECK_SEED)
    points = []
    for _ in range(8):
        try:
            points.append(sample_phase_point(spec, rng))
        except DomainError:
            raise
        except FinslerError as err:
            raise ConfigError(f"metric cannot be evaluated on its domain: {err}") from err

    if spec.family == "riemannian":
        for x, _ in points[:5]:
            mat = np.empty((spec.dimension, spec.dimension))
            xs = [float(v) for v in x]
            for i in range(spec.dimension):
                for j in range(spec.dimension):
                    mat[i, j] = expr.evaluate(spec.components[i][j], xs, xs)
            scale = 1.0 + float(np.abs(mat).max())
            if float(np.abs(mat - mat.T).max()) > 1e-10 * scale:
                raise ConfigError(f"component matrix is not symmetric at x = {xs}")
            eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
            if float(eigs.min()) <= 0.0:
                raise ConfigError(
                    f"component matrix is not positive definite at x = {xs} "
                    f"(eigenvalues {eigs.tolist()})"
                )

    if spec.family == "custom":
        checked = 0
        for x, y in points:
            xs = [float(v) for v in x]
            try:
                base = float(eval_F2(spec, xs, [float(v) for v in y]))
                scaled = [float(eval_F2(spec, xs, [lam * float(v) for v in y])) for lam in (2.0, 3.0)]
            except FinslerError:
                continue  # scaling may step on a fiber pole; try other samples
            for lam, got in zip((2.0, 3.0), scaled):
                want = lam * lam * base
                if abs(got - want) > 1e-10 * max(1.0, abs(want)):
                    raise HomogeneityError(
                        f"F^2 is not 2-homogeneous in y: F^2(x, {lam} y) = {got!r} "
                        f"but {lam}^2 F^2(x, y) = {want!r}"
                    )
            checked += 1
        if checked < 4:
            raise ConfigError("could not evaluate the expression at enough sample points")

    if spec.sigma is not None:
        for x, _ in points:
            value = float(expr.evaluate(spec.sigma, [float(v) for v in x], []))
            if value <= 0.0:
                raise ConfigError(f"sigma is not positive at x = {list(map(float, x))}")


# -- built-in catalog -------------------------------------------------------

_CATALOG_TEXTS = {
    "euclidean": """
        [metric]
        name = euclidean
        dimension = {n}
        family = euclidean
    """,
    "funk_ball_berwald": """
        [metric]
        name = funk_ball_berwald
        dimension = {n}
        family = funk_ball_berwald
    """,
    "riemannian_flat_skew": """
        [metric]
        name = riemannian_flat_skew
        dimension = {n}
        family = riemannian
        {components}
    """,
    "riemannian_round_sphere": """
        [metric]
        name = riemannian_round_sphere
        dimension = {n}
        family = riemannian
        {components}
    """,
}


def _flat_skew_components(n: int) -> str:
    lines = []
    for i in range(1, n + 1):
        lines.append(f"g_{i}_{i} = {1.0 + 0.5 * i}")
        if i < n:
            lines.append(f"g_{i}_{i + 1} = 0.3")
    return "\n".join(lines)


def _sphere_components(n: int) -> str:
    return "\n".join(f"g_{i}_{i} = 4/(1 + normx2)^2" for i in range(1, n + 1))


def catalog(n: int = 3) -> dict[str, MetricSpec]:
    """Built-in metric specs used by the verification suites and tests.

    Contains a flat metric in two guises (euclidean and a constant
    anisotropic riemannian one), the round sphere in stereographic-style
    coordinates (constant positive curvature), and the projectively flat
    ball metric.
    """
    out = {}
    for key, template in _CATALOG_TEXTS.items():
        if key == "riemannian_flat_skew":
            text = template.format(n=n, components=_flat_skew_components(n))
        elif key == "riemannian_round_sphere":
            text = template.format(n=n, components=_sphere_components(n))
        else:
            text = template.format(n=n)
        out[key] = parse_metric("\n".join(line.strip() for line in text.strip().splitlines()))
    return out
