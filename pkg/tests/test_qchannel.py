import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import SimpsonLambda, color_weight_literal, gamma_series, rtn_kernel_complex, rtn_kernel_mp, simpson as simpson_rule
from qdeph.qchannel import (
    ColoredNoiseParams,
    DensityMatrix,
    LambdaCache,
    OhmicBathParams,
    PoleError,
    QuadratureError,
    color_weight,
    dephase,
    gamma_function,
    lambda_classical,
    lambda_quantum,
    ohmic_exponent,
    rtn_kernel,
)

ALPHAS = np.linspace(0.5, 2.0, 10)
TIMES = np.linspace(0.2, 3.14, 10)


@pytest.fixture(scope="module")
def simpson():
    return SimpsonLambda(n=10**6)


# ---- density matrices and the channel ----

def test_density_matrix_rejects_bad_trace():
    with pytest.raises(ValueError):
        DensityMatrix(0.6, 0.6, 0.0)


def test_density_matrix_rejects_negative():
    with pytest.raises(ValueError):
        DensityMatrix(0.5, 0.5, 0.6)


def test_dephase_identity_and_full():
    rho = DensityMatrix(0.5, 0.5, 0.5)
    assert dephase(rho, 1.0) == rho
    out = dephase(rho, 0.0)
    assert (out.a00, out.a11, out.a01) == (0.5, 0.5, 0)


def test_dephase_plus_state_half():
    out = dephase(DensityMatrix(0.5, 0.5, 0.5), 0.5)
    assert out.a01 == pytest.approx(0.25, abs=1e-15)
    assert out.a00 == 0.5 and out.a11 == 0.5


def test_dephase_rejects_large_lambda():
    with pytest.raises(ValueError):
        dephase(DensityMatrix(0.5, 0.5, 0.5), 1.5)


bloch_vectors = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda b: sum(v * v for v in b) <= 1)


@given(bloch_vectors, st.floats(-1, 1))
def test_dephase_keeps_trace_and_populations(b, lam):
    rho = DensityMatrix.from_bloch(b)
    out = dephase(rho, lam)
    assert out.a00 == rho.a00 and out.a11 == rho.a11
    assert out.a00 + out.a11 == pytest.approx(1.0, abs=1e-15)
    assert out.a00 * out.a11 - abs(out.a01) ** 2 >= rho.a00 * rho.a11 - abs(rho.a01) ** 2 - 1e-15


@given(bloch_vectors)
def test_bloch_round_trip(b):
    rho = DensityMatrix.from_bloch(b)
    assert np.allclose(rho.bloch, b, atol=1e-15)
    assert DensityMatrix.from_array(rho.to_array()) == rho
    assert rho.purity == pytest.approx(0.5 * (1 + sum(v * v for v in b)), abs=1e-14)


# ---- telegraph kernel ----

@pytest.mark.parametrize("gamma", [1e-4, 0.5, 2.0, 3.0, 1e4])
def test_kernel_at_zero_time(gamma):
    assert rtn_kernel(0.0, gamma) == 1.0


def test_kernel_critical_value():
    assert rtn_kernel(1.0, 2.0) == pytest.approx(3 * math.exp(-2), abs=1e-12)


def test_kernel_underdamped_matches_root_form():
    # the root form is exact enough here; at gamma >> 2 it cancels to ~1e-12
    assert rtn_kernel(1.0, 1.0) == pytest.approx(rtn_kernel_complex(1.0, 1.0), abs=1e-12)


@pytest.mark.parametrize("gamma", [2 - 1e-6, 2 + 1e-6, 2 - 1e-9, 2 + 1e-9])
@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_kernel_near_critical_matches_multiprecision(gamma, t):
    assert rtn_kernel(t, gamma) == pytest.approx(rtn_kernel_mp(t, gamma), abs=1e-12)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_kernel_continuous_across_critical(t):
    eps = 1e-7
    assert abs(rtn_kernel(t, 2 + eps) - rtn_kernel(t, 2 - eps)) <= 1e-6


def test_kernel_matches_oracle_on_grid():
    gammas = np.logspace(-4, 4, 161)
    for t in (0.05, 0.7, 3.14, 7.0):
        worst = max(abs(rtn_kernel(t, g) - rtn_kernel_mp(t, g)) for g in gammas)
        assert worst <= 1e-13


@given(st.floats(0, 10), st.floats(-4, 4))
def test_kernel_bounded(t, log_gamma):
    assert abs(rtn_kernel(t, 10**log_gamma)) <= 1 + 1e-9


def test_kernel_rejects_negative_inputs():
    with pytest.raises(ValueError):
        rtn_kernel(-1.0, 1.0)
    with pytest.raises(ValueError):
        rtn_kernel(1.0, 0.0)


# ---- rate weights ----

def test_weight_pink_value():
    p = ColoredNoiseParams(1.0)
    assert color_weight(1.0, p) == pytest.approx(1 / math.log(1e8), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.3, 1.5, 2.0])
def test_weight_matches_literal_form(alpha):
    p = ColoredNoiseParams(alpha)
    for g in (1e-4, 1e-2, 1.0, 37.0, 1e4):
        assert color_weight(g, p) == pytest.approx(color_weight_literal(g, alpha, 1e-4, 1e4), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0, 1.5, 2.0])
def test_weight_normalised(alpha):
    sl = SimpsonLambda(n=200_000)
    p = ColoredNoiseParams(alpha)
    w = np.array([color_weight(g, p) for g in np.clip(sl.gamma, 1e-4, 1e4)]) * sl.gamma
    assert simpson_rule(w, sl.h) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("gamma", np.logspace(-1, 4, 11))
def test_weight_continuous_at_pink(gamma):
    at_one = color_weight(gamma, ColoredNoiseParams(1.0))
    for a in (1 - 1e-7, 1 + 1e-7):
        assert abs(color_weight(gamma, ColoredNoiseParams(a)) - at_one) <= 1e-6


def test_weight_outside_band():
    with pytest.raises(ValueError):
        color_weight(1e5, ColoredNoiseParams(1.0))


# ---- classical coefficient ----

def test_lambda_classical_time_zero():
    for a in (0.5, 1.0, 2.0):
        assert lambda_classical(0.0, ColoredNoiseParams(a)) == 1.0


@pytest.mark.parametrize(
    "t,alpha,expected",
    [(1.0, 1.0, 0.2616505708790932), (3.14, 2.0, 0.997336975669439), (0.2, 2.0, 0.9210729425103881)],
)
def test_lambda_classical_frozen_values(t, alpha, expected):
    assert lambda_classical(t, ColoredNoiseParams(alpha)) == pytest.approx(expected, abs=1e-10)


def test_lambda_classical_matches_simpson_grid(simpson):
    worst = 0.0
    for a in ALPHAS:
        p = ColoredNoiseParams(float(a))
        for t in TIMES:
            worst = max(worst, abs(lambda_classical(float(t), p) - simpson(float(t), float(a))))
    assert worst <= 1e-8


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_lambda_classical_raises_when_tolerance_unreachable():
    with pytest.raises(QuadratureError) as info:
        lambda_classical(1.0, ColoredNoiseParams(1.3, quad_tol=1e-300))
    assert info.value.abserr > 1e-300


def test_lambda_classical_rejects_negative_time():
    with pytest.raises(ValueError):
        lambda_classical(-0.1, ColoredNoiseParams(1.0))


@given(st.floats(0, 10), st.floats(0.5, 2.0))
@settings(max_examples=40, deadline=None)
def test_lambda_classical_bounded(t, alpha):
    assert abs(lambda_classical(t, ColoredNoiseParams(alpha))) <= 1 + 1e-9


# ---- gamma function ----

@pytest.mark.parametrize(
    "x,expected", [(1.0, 1.0), (2.0, 1.0), (0.5, math.sqrt(math.pi)), (-0.5, -2 * math.sqrt(math.pi))]
)
def test_gamma_values(x, expected):
    assert gamma_function(x) == pytest.approx(expected, rel=1e-12)
    assert gamma_function(x) == pytest.approx(gamma_series(x), rel=1e-10)


@pytest.mark.parametrize("x", [1.0, 2.0, 0.5, -0.5])
def test_gamma_recurrence(x):
    assert gamma_function(x + 1) == pytest.approx(x * gamma_function(x), abs=1e-10)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -7.0])
def test_gamma_poles(x):
    with pytest.raises(PoleError):
        gamma_function(x)


def test_gamma_against_stdlib_grid():
    xs = np.linspace(-5, 10, 3001)
    xs = xs[np.abs(xs - np.round(xs)) > 1e-6]
    rel = max(abs(gamma_function(x) / math.gamma(x) - 1) for x in xs)
    assert rel <= 1e-12


# ---- Ohmic coefficient ----

@pytest.mark.parametrize("s", [0.1, 1.0, 2.5])
def test_lambda_quantum_time_zero(s):
    assert lambda_quantum(0.0, OhmicBathParams(s)) == 1.0


def test_lambda_quantum_spot_values():
    assert lambda_quantum(1.0, OhmicBathParams(1.0)) == pytest.approx(2**-0.5, abs=1e-12)
    assert lambda_quantum(1.0, OhmicBathParams(2.0)) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert lambda_quantum(1e6, OhmicBathParams(3.0)) == pytest.approx(math.exp(-1), abs=1e-5)


@pytest.mark.parametrize("t", [0.2, 1.0, 7.0])
def test_lambda_quantum_continuous_at_ohmic(t):
    ref = lambda_quantum(t, OhmicBathParams(1.0))
    for s in (1 - 1e-7, 1 + 1e-7):
        assert abs(lambda_quantum(t, OhmicBathParams(s)) - ref) <= 1e-5


def test_ohmic_exponent_literal_form():
    # cancellation-free form must agree with the textbook expression away from s = 1
    for s in (0.1, 0.5, 1.7, 3.0):
        for t in (0.2, 1.0, 7.0):
            e = s - 1
            lit = math.gamma(e) * (1 - math.cos(e * math.atan(t)) / (1 + t * t) ** (e / 2))
            assert ohmic_exponent(t, OhmicBathParams(s)) == pytest.approx(lit, rel=1e-10, abs=1e-14)


@given(st.floats(0, 50), st.floats(0.1, 3.0))
def test_ohmic_exponent_nonnegative(t, s):
    g = ohmic_exponent(t, OhmicBathParams(s))
    assert g >= -1e-15
    assert 0 < lambda_quantum(t, OhmicBathParams(s)) <= 1


# ---- cache ----

def test_cache_matches_direct_and_is_thread_safe():
    cache = LambdaCache()
    times = [0.2, 0.9, 2.0]
    results = []

    def work():
        results.append(cache.table("classical", [0.5, 1.5], times))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    direct = np.array([[lambda_classical(t, ColoredNoiseParams(a)) for t in times] for a in (0.5, 1.5)])
    for r in results:
        assert np.array_equal(r, direct)
    assert len(cache) == 6


def test_cache_unknown_kind():
    with pytest.raises(ValueError):
        LambdaCache()("thermal", 1.0, 1.0)
