import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvtbc.ztbc import (
    KernelAccuracyError,
    SignPatternViolation,
    characteristic_roots,
    compute_kernels,
    decaying_root,
    forward_ztransform,
    history_convolution,
    load_kernels,
    save_kernels,
)


def _cubic_c(tau, z):
    return (2.0 / tau) * (1.0 - 1.0 / z) / (1.0 + 1.0 / z)


def _assert_same_root_set(got, expected, tol=1e-12):
    got = list(np.asarray(got, dtype=complex))
    for e in expected:
        dist = [abs(r - e) for r in got]
        i = int(np.argmin(dist))
        assert dist[i] < tol, f"no root near {e}"
        got.pop(i)
    assert not got


def test_cube_roots_of_minus_eight():
    roots = characteristic_roots(0.0, 8.0)
    _assert_same_root_set(roots, [-2.0, 1 + 1j * np.sqrt(3), 1 - 1j * np.sqrt(3)])


def test_zero_constant_term_factorization():
    for g in (4.0, 9.0):
        roots = characteristic_roots(g, 0.0)
        _assert_same_root_set(roots, [0.0, 1j * np.sqrt(g), -1j * np.sqrt(g)])


def test_vieta_identities_on_contour():
    rng = np.random.default_rng(7)
    z = 1.05 * np.exp(2j * np.pi * rng.random(64))
    for g, tau in ((0.0, 2.0**-5), (6.0, 2.0**-12)):
        c = _cubic_c(tau, z)
        roots = characteristic_roots(g, c)
        scale = np.maximum(1.0, np.abs(c))
        assert np.max(np.abs(roots.sum(axis=-1)) / scale) < 1e-9
        pair = (roots[..., 0] * roots[..., 1] + roots[..., 0] * roots[..., 2]
                + roots[..., 1] * roots[..., 2])
        assert np.max(np.abs(pair - g) / scale) < 1e-9
        prod = roots[..., 0] * roots[..., 1] * roots[..., 2]
        assert np.max(np.abs(prod + c) / scale) < 1e-9


def test_decaying_root_selection():
    roots = np.array([-2.0 + 0j, 1 + 1j * np.sqrt(3), 1 - 1j * np.sqrt(3)])
    assert decaying_root(roots) == pytest.approx(-2.0)


def test_decaying_root_example_parameters():
    # g_a = 6, tau = 1/2, z = 2 gives c = 4/3; companion-matrix oracle
    c = _cubic_c(0.5, 2.0)
    assert c == pytest.approx(4.0 / 3.0)
    roots = characteristic_roots(6.0, np.array([c]))[0]
    assert np.prod(roots) == pytest.approx(-4.0 / 3.0, rel=1e-12)
    assert np.sum(roots.real < -1e-10) == 1
    lam = decaying_root(roots)
    assert lam.real < 0


def test_sign_pattern_sweep():
    theta = 2 * np.pi * (np.arange(128) + 0.3) / 128
    z = 1.05 * np.exp(1j * theta)
    for g in (0.0, 6.0):
        for tau in (2.0**-5, 2.0**-12):
            decaying_root(characteristic_roots(g, _cubic_c(tau, z)))


def test_sign_pattern_violation_inside_unit_circle():
    z = 0.9 * np.exp(1j * 2 * np.pi * np.arange(16) / 16)
    with pytest.raises(SignPatternViolation):
        decaying_root(characteristic_roots(6.0, _cubic_c(2.0**-5, z)))


def test_kernel_convolution_identity():
    kb = compute_kernels(6.0, 6.0, 2.0**-5, 32)
    conv = np.convolve(kb.y1, kb.y1)[:33]
    scale = np.abs(kb.y2).max()
    assert np.max(np.abs(conv - kb.y2)) < 1e-8 * scale
    conv34 = np.convolve(kb.y3, kb.y3)[:33]
    assert np.max(np.abs(conv34 - kb.y4)) < 1e-8 * np.abs(kb.y4).max()


def test_forward_transform_matches_root_function():
    # truncated series at |z| = 1.1 converges geometrically; M = 512 terms
    tau = 2.0**-5
    kb = compute_kernels(6.0, 6.0, tau, 512)
    z = 1.1 * np.exp(1j * np.pi / 3)
    lam = decaying_root(characteristic_roots(6.0, np.array([_cubic_c(tau, z)])))[0]
    assert abs(forward_ztransform(kb.y1, z) - lam) < 1e-7 * abs(lam)
    assert abs(forward_ztransform(kb.y2, z) - lam**2) < 1e-7 * abs(lam**2)


def test_equal_exterior_constants_share_kernels():
    kb = compute_kernels(3.0, 3.0, 2.0**-6, 16)
    assert np.array_equal(kb.y1, kb.y3)
    assert np.array_equal(kb.y2, kb.y4)


def test_kernel_contour_refinement_stable():
    kb1 = compute_kernels(6.0, 6.0, 2.0**-5, 64)
    kb2 = compute_kernels(6.0, 6.0, 2.0**-5, 64, samples=2 * kb1.sample_count)
    for a, b in ((kb1.y1, kb2.y1), (kb1.y2, kb2.y2)):
        assert np.max(np.abs(a - b)) < 1e-9 * np.abs(a).max()


@pytest.mark.parametrize("g_a,g_b,tau,M", [
    (6.0, 6.0, 2.0**-12, 4096),                       # constant advection
    (1.0, 5.0, 2.0**-12, 4096),                       # cubic advection endpoints
    (0.5000000000000002, 0.5000000000000002, 2.0**-12, 4096),  # bump endpoints
])
def test_kernel_boundedness_experiment_configs(g_a, g_b, tau, M):
    kb = compute_kernels(g_a, g_b, tau, M)
    for y in (kb.y1, kb.y2, kb.y3, kb.y4):
        head = np.abs(y[: M // 2]).max()
        tail = np.abs(y[M // 2 :]).max()
        assert np.all(np.isfinite(y))
        assert tail <= head  # decaying, no exponential growth


def test_history_convolution_single_term():
    kernel = np.array([9.0, 2.5, -1.0])
    assert history_convolution(kernel, np.array([3.0]), 0) == pytest.approx(7.5)


def test_history_convolution_zero_trace():
    kernel = np.arange(8.0)
    assert history_convolution(kernel, np.zeros(5), 4) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 9))
def test_history_convolution_against_double_loop(m):
    rng = np.random.default_rng(m)
    kernel = rng.standard_normal(m + 2)
    trace = rng.standard_normal(m + 1)
    expected = sum(kernel[k] * trace[m + 1 - k] for k in range(1, m + 2))
    assert history_convolution(kernel, trace, m) == pytest.approx(expected)


def test_history_convolution_length_checks():
    with pytest.raises(ValueError):
        history_convolution(np.ones(3), np.ones(1), 2)
    with pytest.raises(ValueError):
        history_convolution(np.ones(2), np.ones(3), 2)


def test_kernel_cache_roundtrip(tmp_path):
    kb = compute_kernels(1.0, 5.0, 2.0**-6, 24)
    path = tmp_path / "kernels.csv"
    save_kernels(kb, path)
    back = load_kernels(path)
    assert back.tau == kb.tau
    assert back.g_a == kb.g_a and back.g_b == kb.g_b
    assert back.sample_count == kb.sample_count
    assert back.contour_radius == pytest.approx(kb.contour_radius)
    for name in ("y1", "y2", "y3", "y4"):
        assert np.max(np.abs(getattr(back, name) - getattr(kb, name))) < 1e-15

    with pytest.raises(ValueError):
        other = tmp_path / "other.csv"
        other.write_text("not,a,kernel,file\n")
        load_kernels(other)
