"""Config parsing, expression language, domain guards, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finslerkit import expr, metrics
from finslerkit.errors import (
    ConfigError,
    DimensionError,
    DomainError,
    ExpressionSyntaxError,
    FamilyError,
    HomogeneityError,
    PoleError,
)

QUARTIC = """
[metric]
name = quartic
dimension = 3
family = custom
expression = (y1^4 + y2^4 + y3^4)^(1/2)
"""

SCALED = """
[metric]
dimension = 2
family = custom
expression = (2 + x1)*normy2
sigma = exp(x1 - x2)
"""


# -- expression language --------------------------------------------------

def test_expression_evaluates_like_python():
    cases = {
        "2*x1 - x2^2/4 + 1": 2 * 0.3 - 0.7**2 / 4 + 1,
        "sqrt(normx2 + 1)": math.sqrt(0.3**2 + 0.7**2 + 1),
        "exp(ln(dotxy))": 0.3 * 1.1 + 0.7 * -0.2,
        "-x1^2": -(0.3**2),
        "normy2^(3/2)": (1.1**2 + 0.2**2) ** 1.5,
        "x1^-2": 0.3**-2.0,
        "(x1 + x2)^3/x1": (0.3 + 0.7) ** 3 / 0.3,  # ^ binds before /
    }
    xs, ys = [0.3, 0.7], [1.1, -0.2]
    for text, want in cases.items():
        node = expr.parse_expression(text)
        assert expr.evaluate(node, xs, ys) == pytest.approx(want, rel=1e-14), text


def test_expression_round_trips_through_text():
    for text in (
        "2*x1 - x2^2/4 + 1",
        "sqrt(normx2 + 1)*exp(-x1)",
        "(y1^4 + y2^4)^(1/2)",
        "x1/(x2*x3)",
        "-(x1 + x2)^2",
        "1.5e-3*y1^2",
    ):
        node = expr.parse_expression(text)
        again = expr.parse_expression(expr.to_text(node))
        assert node == again, text


def test_syntax_errors_carry_position():
    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("x1 + ", base_line=7, base_column=3)
    assert err.value.line == 7
    assert err.value.column == 3 + 5
    with pytest.raises(ExpressionSyntaxError) as err:
        expr.parse_expression("x1 ? 2")
    assert "'?'" in str(err.value)
    with pytest.raises(ExpressionSyntaxError):
        expr.parse_expression("x1^x2")  # exponents are literals only
    with pytest.raises(ExpressionSyntaxError):
        expr.parse_expression("frob(x1)")
    with pytest.raises(ExpressionSyntaxError):
        expr.parse_expression("x1 x2")


def test_evaluation_errors():
    with pytest.raises(PoleError):
        expr.evaluate(expr.parse_expression("1/x1"), [0.0], [1.0])
    with pytest.raises(DimensionError):
        expr.evaluate(expr.parse_expression("x5"), [0.0], [1.0])
    with pytest.raises(DimensionError):
        expr.check_variables(expr.parse_expression("y1"), 3, allow_y=False, context="sigma")
    with pytest.raises(DimensionError):
        expr.check_variables(expr.parse_expression("x4"), 3)


@given(st.integers(min_value=-6, max_value=6), st.floats(min_value=0.2, max_value=3.0))
def test_integer_powers_match_float_pow(n, base):
    node = expr.parse_expression(f"x1^{'(' + str(n) + ')' if n < 0 else n}")
    assert expr.evaluate(node, [base], [1.0]) == pytest.approx(base**n, rel=1e-13)


# -- config parsing ---------------------------------------------------------

def test_parse_and_format_round_trip():
    spec = metrics.parse_metric(QUARTIC)
    assert spec.name == "quartic"
    assert spec.dimension == 3
    assert spec.family == "custom"
    again = metrics.parse_metric(metrics.format_metric(spec))
    assert again == spec


def test_catalog_round_trips(catalog3):
    for name, spec in catalog3.items():
        assert metrics.parse_metric(metrics.format_metric(spec)) == spec, name


def test_sigma_and_comments_parse():
    spec = metrics.parse_metric(SCALED + "; trailing comment\n# another\n")
    assert spec.name == "metric"  # defaulted
    assert spec.sigma is not None
    assert metrics.eval_sigma(spec, [0.5, 0.25]) == pytest.approx(math.exp(0.25))


@pytest.mark.parametrize(
    "text, exc, fragment",
    [
        ("dimension = 3", ConfigError, "outside of any section"),
        ("[metric]\nfamily = euclidean", ConfigError, "dimension"),
        ("[metric]\ndimension = 3", ConfigError, "family"),
        ("[metric]\ndimension = x\nfamily = euclidean", ConfigError, "line 2"),
        ("[metric]\ndimension = 0\nfamily = euclidean", ConfigError, "line 2"),
        ("[metric]\ndimension = 1\nfamily = euclidean", ConfigError, ">= 2"),
        ("[metric]\ndimension = 3\nfamily = weird", FamilyError, "weird"),
        ("[metric]\ndimension = 3\nfamily = custom", ConfigError, "expression"),
        ("[metric]\ndimension = 3\nfamily = euclidean\nexpression = normy2", ConfigError, "custom"),
        ("[metric]\ndimension = 3\nfamily = euclidean\nbogus = 1", ConfigError, "bogus"),
        ("[metric]\ndimension = 3\nfamily = euclidean\n[extra]", ConfigError, "extra"),
        ("[metric\ndimension = 3", ConfigError, "line 1"),
        ("[metric]\ndimension = 3\ndimension = 4\nfamily = euclidean", ConfigError, "duplicate"),
        ("[metric]\ndimension = 3\nfamily = riemannian\ng_1_1 = 1\ng_2_2 = 1", ConfigError, "g_3_3"),
        (
            "[metric]\ndimension = 2\nfamily = riemannian\ng_1_1 = 1\ng_2_2 = 1\ng_1_5 = 1",
            DimensionError,
            "g_1_5",
        ),
        (
            "[metric]\ndimension = 2\nfamily = riemannian\ng_1_1 = 1\ng_2_2 = -1",
            ConfigError,
            "positive definite",
        ),
        (
            "[metric]\ndimension = 2\nfamily = custom\nexpression = normy2 + y1^4",
            HomogeneityError,
            "2-homogeneous",
        ),
        (
            "[metric]\ndimension = 2\nfamily = custom\nexpression = normy2\nsigma = x1 - 10",
            ConfigError,
            "sigma",
        ),
        (
            "[metric]\ndimension = 2\nfamily = custom\nexpression = normy2\nsigma = y1 + 1",
            DimensionError,
            "sigma",
        ),
    ],
)
def test_rejected_configs(text, exc, fragment):
    with pytest.raises(exc) as err:
        metrics.parse_metric(text)
    assert fragment in str(err.value)


def test_fractional_terms_can_still_be_2_homogeneous():
    # y2^3/y1 has net degree 2, so the homogeneity screen must accept it
    text = "[metric]\ndimension = 2\nfamily = custom\nexpression = normy2 + x1*y2^3/y1"
    spec = metrics.parse_metric(text)
    v = metrics.f2_value(spec, [0.2, 0.1], [0.5, 0.4])
    assert v == pytest.approx(0.25 + 0.16 + 0.2 * 0.4**3 / 0.5)


def test_expression_error_position_is_file_relative():
    text = "[metric]\ndimension = 2\nfamily = custom\nexpression = normy2 + )"
    with pytest.raises(ExpressionSyntaxError) as err:
        metrics.parse_metric(text)
    assert err.value.line == 4


def test_riemannian_components_mirror():
    text = (
        "[metric]\ndimension = 2\nfamily = riemannian\n"
        "g_1_1 = 2\ng_2_2 = 3\ng_1_2 = x1/2\n"
    )
    spec = metrics.parse_metric(text)
    assert spec.components[1][0] == spec.components[0][1]
    xs = [0.4, -0.1]
    ys = [1.0, 2.0]
    want = 2 * 1 + 3 * 4 + 2 * (0.4 / 2) * 1 * 2
    assert metrics.eval_F2(spec, xs, ys) == pytest.approx(want)


# -- family evaluation -------------------------------------------------------

def test_euclidean_energy(euclid):
    assert metrics.f2_value(euclid, [0.2, 0.3, -0.1], [1.0, 2.0, 2.0]) == pytest.approx(9.0)


def test_skew_energy_by_hand(skew):
    # diagonal 1.5, 2.0, 2.5 with 0.3 on the first two off-diagonals
    y = [1.0, -1.0, 2.0]
    want = 1.5 * 1 + 2.0 * 1 + 2.5 * 4 + 2 * 0.3 * (1 * -1) + 2 * 0.3 * (-1 * 2)
    assert metrics.f2_value(skew, [0.0, 0.0, 0.0], y) == pytest.approx(want)


def test_funk_energy_matches_direct_formula(funk):
    x = np.array([0.2, -0.3, 0.1])
    y = np.array([0.7, 0.4, -0.9])
    nx2, ny2, d = x @ x, y @ y, x @ y
    a = ny2 - (nx2 * ny2 - d * d)
    w = math.sqrt(a) + d
    want = w**4 / ((1 - nx2) ** 4 * a)
    assert metrics.f2_value(funk, x, y) == pytest.approx(want, rel=1e-14)
    assert metrics.eval_projective_factor(funk, list(x), list(y)) == pytest.approx(
        w / (1 - nx2), rel=1e-14
    )


def test_funk_origin_is_euclidean(funk):
    for y in ([1.0, 0.0, 0.0], [0.3, -0.4, 1.2]):
        assert metrics.f2_value(funk, [0.0, 0.0, 0.0], y) == pytest.approx(
            sum(v * v for v in y), rel=1e-14
        )


def test_projective_factor_restricted_to_funk(euclid):
    with pytest.raises(FamilyError):
        metrics.eval_projective_factor(euclid, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_quartic_custom_loads_and_is_positive():
    spec = metrics.parse_metric(QUARTIC)
    val = metrics.f2_value(spec, [0.0, 0.0, 0.0], [1.0, 2.0, 2.0])
    assert val == pytest.approx(math.sqrt(1 + 16 + 16))


# -- guards and sampling ------------------------------------------------------

def test_domain_guard_on_the_ball(funk):
    metrics.check_domain(funk, [0.5, 0.5, 0.5], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        metrics.check_domain(funk, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        metrics.check_domain(funk, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(DimensionError):
        metrics.check_domain(funk, [0.0, 0.0], [1.0, 0.0])
    inside = 1.0 - 2 * metrics.FUNK_GUARD_INSET
    assert metrics.guard_distance(funk, [inside, 0.0, 0.0]) == pytest.approx(
        metrics.FUNK_GUARD_INSET, rel=1e-6
    )


def test_guard_distance_unbounded_without_guard(euclid):
    assert metrics.guard_distance(euclid, [100.0, 0.0, 0.0]) == math.inf


def test_sampling_stays_in_domain(catalog3):
    rng = np.random.default_rng(11)
    for spec in catalog3.values():
        for _ in range(50):
            x, y = metrics.sample_phase_point(spec, rng)
            metrics.check_domain(spec, x, y)
            speed = float(np.linalg.norm(y))
            assert 0.5 - 1e-12 <= speed <= 2.0 + 1e-12
            assert metrics.f2_value(spec, x, y) > 0.0


def test_catalog_contents(catalog3):
    assert sorted(catalog3) == [
        "euclidean",
        "funk_ball_berwald",
        "riemannian_flat_skew",
        "riemannian_round_sphere",
    ]
    assert all(s.dimension == 3 for s in catalog3.values())
    four = metrics.catalog(4)
    assert all(s.dimension == 4 for s in four.values())


def test_load_metric_file(tmp_path):
    path = tmp_path / "quartic.cfg"
    path.write_text(QUARTIC)
    spec = metrics.load_metric_file(path)
    assert spec.name == "quartic"
