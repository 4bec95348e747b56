import numpy as np
import pytest

from sparsesep.dictionaries import concatenate, fourier1d, haar2d, identity, sinusoid2d
from sparsesep.grid import ZERO_TOL, l0_norm
from sparsesep.omp import (
    OmpConfig,
    StackedSystem,
    l0_oracle,
    omp_block,
    omp_block_penalized,
    omp_single,
)


def support(x):
    return set(np.flatnonzero(np.abs(x) > ZERO_TOL))


# ---------------------------------------------------------------------------
# omp_single

def test_single_exact_atom():
    D = haar2d(3)
    coeffs, hist = omp_single(D, D.atom(5), OmpConfig(10, residual_target=1e-12))
    assert support(coeffs) == {5}
    assert coeffs[5] == pytest.approx(1.0)
    assert len(hist) == 2 and hist[-1] < 1e-12


def test_single_two_atoms_exact():
    D = haar2d(3)
    f = 2.0 * D.atom(3) + 1.0 * D.atom(7)
    coeffs, hist = omp_single(D, f, OmpConfig(10, residual_target=1e-12))
    assert support(coeffs) == {3, 7}
    assert coeffs[3] == pytest.approx(2.0) and coeffs[7] == pytest.approx(1.0)
    assert len(hist) == 3


def test_single_orthobasis_k_sparse_recovery():
    # with an orthobasis and no noise, any k-sparse signal comes back in k steps
    rng = np.random.default_rng(0)
    D = fourier1d(64)
    for _ in range(10):
        k = int(rng.integers(1, 6))
        y = np.zeros(64)
        y[rng.choice(64, size=k, replace=False)] = rng.standard_normal(k) + np.sign(rng.standard_normal(k)) * 0.5
        coeffs, hist = omp_single(D, D.synthesize(y), OmpConfig(10, residual_target=1e-10))
        assert support(coeffs) == support(y)
        assert len(hist) == k + 1


def test_single_residual_monotone_and_no_reselection():
    rng = np.random.default_rng(1)
    D = concatenate(identity(16), fourier1d(16))
    f = rng.standard_normal(16)
    coeffs, hist = omp_single(D, f, OmpConfig(12))
    assert np.all(np.diff(hist) <= 1e-12)
    # exact refit keeps active-atom correlations at zero, so supports never shrink
    assert len(support(coeffs)) == len(hist) - 1


def test_single_tie_breaks_to_lowest_index():
    # two identical-correlation atoms: the duplicate column comes after
    base = np.eye(4)
    D = concatenate(identity(4), identity(4))
    f = np.array([1.0, 0.0, 0.0, 0.0])
    coeffs, _ = omp_single(D, f, OmpConfig(1))
    assert support(coeffs) == {0}


# ---------------------------------------------------------------------------
# oracle

def test_oracle_finds_planted_support():
    rng = np.random.default_rng(2)
    C = concatenate(identity(16), fourier1d(16))
    M = C.to_matrix()
    truth = np.zeros(32)
    truth[[3, 20]] = [2.0, -1.5]
    res = l0_oracle(M, M @ truth, 1e-9, max_support=3)
    assert res is not None
    coeffs, supp = res
    assert supp == (3, 20)
    assert np.allclose(coeffs[[3, 20]], [2.0, -1.5])


def test_oracle_zero_signal():
    M = np.eye(6)
    coeffs, supp = l0_oracle(M, np.zeros(6), 1e-12)
    assert supp == () and not coeffs.any()


def test_oracle_returns_none_when_too_dense():
    M = np.eye(8)
    f = np.ones(8)
    assert l0_oracle(M, f, 1e-9, max_support=3) is None


def test_omp_matches_oracle_on_small_instances():
    # planted spike+flat mixtures at n=16: greedy pursuit finds the l0-optimal
    # support in at least 45 of 50 seeded draws; every run meets the residual
    rng = np.random.default_rng(7)
    C = concatenate(identity(16), fourier1d(16))
    M = C.to_matrix()
    eps = 1e-8
    hits = 0
    for _ in range(50):
        k = int(rng.integers(1, 4))
        supp = rng.choice(32, size=k, replace=False)
        truth = np.zeros(32)
        truth[supp] = rng.standard_normal(k) + np.sign(rng.standard_normal(k))
        f = M @ truth
        best = l0_oracle(M, f, eps, max_support=3)
        assert best is not None
        coeffs, hist = omp_single(C, f, OmpConfig(3, residual_target=eps))
        assert hist[-1] <= eps or len(hist) == 4
        if support(coeffs) == set(best[1]):
            hits += 1
        assert hist[-1] <= eps
    assert hits >= 45


# ---------------------------------------------------------------------------
# omp_block

def _random_system(rng, d=8, L=3, N=3):
    A_f, A_g = haar2d(3), sinusoid2d(d, L, True)
    h = tuple(rng.standard_normal(d * d) for _ in range(N))
    return StackedSystem(A_f, A_g, h)


def test_block_recovers_distinct_atoms():
    A_f, A_g = haar2d(3), sinusoid2d(8, 3, False)
    targets = (5, 11, 2)
    sys = StackedSystem(A_f, A_g, tuple(A_g.atom(t) for t in targets))
    block, report = omp_block(sys, OmpConfig(10, residual_target=1e-10))
    assert support(block.y_f) == set()
    for y, t in zip(block.y_g, targets):
        assert support(y) == {t}
    assert report.stop_reason == "residual"
    assert report.iterations == 3


def test_block_n1_equals_single_on_concatenation():
    rng = np.random.default_rng(3)
    A_f, A_g = haar2d(3), sinusoid2d(8, 3, True)
    C = concatenate(A_f, A_g)
    for _ in range(5):
        h = rng.standard_normal(64)
        block, _ = omp_block(StackedSystem(A_f, A_g, (h,)), OmpConfig(12))
        single, _ = omp_single(C, h, OmpConfig(12))
        assert support(block.stacked()) == support(single)
        assert np.abs(block.stacked() - single).max() < 1e-8


def test_block_residual_monotone_no_duplicates():
    rng = np.random.default_rng(4)
    sys = _random_system(rng)
    block, report = omp_block(sys, OmpConfig(30))
    assert np.all(np.diff(report.residuals) <= 1e-12)
    assert len(set(report.selected.tolist())) == report.iterations


def test_block_aggregate_constraint_on_residual_stop():
    rng = np.random.default_rng(5)
    A_f, A_g = haar2d(3), sinusoid2d(8, 3, True)
    # data built from few atoms so the target is reachable
    yf = np.zeros(A_f.m); yf[[2, 9]] = [1.0, -0.7]
    shared = A_f.synthesize(yf)
    h = tuple(shared + 0.8 * A_g.atom(4 + i) for i in range(3))
    sys = StackedSystem(A_f, A_g, h)
    eps = 1e-8
    block, report = omp_block(sys, OmpConfig(50, residual_target=np.sqrt(3) * eps))
    assert report.stop_reason == "residual"
    assert report.residuals[-1] <= np.sqrt(3) * eps
    assert float(np.sqrt(np.sum(report.per_row_residuals ** 2))) <= np.sqrt(3) * eps


def test_block_column_index_partition():
    # selected indices land in the documented global index ranges
    rng = np.random.default_rng(6)
    sys = _random_system(rng, N=2)
    m_f, m_g = sys.A_f.m, sys.A_g.m
    block, report = omp_block(sys, OmpConfig(20))
    for gidx in report.selected:
        if gidx >= m_f:
            b, beta = divmod(gidx - m_f, m_g)
            assert 0 <= b < 2 and 0 <= beta < m_g
    assert l0_norm(block) == report.iterations


# ---------------------------------------------------------------------------
# omp_block_penalized

def test_penalized_zero_weight_degenerates_to_block():
    rng = np.random.default_rng(8)
    sys = _random_system(rng, N=2)
    base, _ = omp_block(sys, OmpConfig(15))
    pen, _ = omp_block_penalized(sys, OmpConfig(15), [(0.0, sys.h[0])], base_weight=0.7)
    assert support(pen.y_f) == support(base.y_f)
    for yb, yp in zip(base.y_g, pen.y_g[:-1]):
        assert support(yb) == support(yp)
    assert support(pen.y_g[-1]) == set()


def test_penalized_symmetric_weights_tie_break():
    # equal weights and identical data: the shared block column for a given
    # atom has the same correlation as the per-measurement column, and the
    # per-measurement block wins by index order
    A_f, A_g = haar2d(3), sinusoid2d(8, 3, False)
    h = A_g.atom(7)
    sys = StackedSystem(A_f, A_g, (h,))
    pen, report = omp_block_penalized(sys, OmpConfig(3), [(1.0, h)], base_weight=1.0)
    first = report.selected[0]
    assert first == A_f.m + 7      # block 0 (the measurement), not the shared block


def test_penalized_recovers_shared_ratio_block():
    # per-measurement data share one wavelet part; the extra rows all equal a
    # single sinusoid atom, which must land in the shared block exactly
    A_f, A_g = haar2d(3), sinusoid2d(8, 3, False)
    yf = np.zeros(A_f.m); yf[[3, 17]] = [1.2, -0.5]
    shared_img = A_f.synthesize(yf)
    N = 3
    h = tuple(shared_img + A_g.atom(2 + i) for i in range(N))
    h0 = tuple(shared_img + 0.9 * A_g.atom(10) for _ in range(N))
    sys = StackedSystem(A_f, A_g, h)
    pen, report = omp_block_penalized(
        sys, OmpConfig(40, residual_target=1e-9), [(10.0, r) for r in h0], base_weight=1.0)
    assert support(pen.y_g[-1]) == {10}
    assert pen.y_g[-1][10] == pytest.approx(0.9, abs=1e-8)
    for i in range(N):
        assert 2 + i in support(pen.y_g[i])
    assert support(pen.y_f) == {3, 17}


def test_config_validation():
    with pytest.raises(Exception):
        OmpConfig(0)
    with pytest.raises(Exception):
        OmpConfig(5, residual_target=-1.0)
