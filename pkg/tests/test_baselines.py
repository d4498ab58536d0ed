import numpy as np
import pytest
from scipy import stats

from hdloc.baselines import _cq_within, bs1996, cq2010, hotelling_t2
from hdloc.errors import DegenerateSpectrum, InputError, SingularCovariance
from hdloc.model import TestMethod, validate_sample
from hdloc.simulation import ModelKind, ModelSpec, ShiftSpec, SimulationConfig, draw_replicate, estimate_size_power

from .conftest import make_sample


class TestHotelling:
    def test_univariate_reduces_to_t_test(self):
        sample = make_sample([9, 13], 1, shifts=[0.0, 0.7])
        outcome = hotelling_t2(sample)
        t, p = stats.ttest_ind(sample.group(0)[:, 0], sample.group(1)[:, 0], equal_var=True)
        assert outcome.method is TestMethod.F_EXACT
        assert outcome.statistic == pytest.approx(t**2, rel=1e-10)
        assert outcome.pvalue == pytest.approx(p, rel=1e-10)

    def test_affine_invariance(self, rng):
        sample = make_sample([10, 12], 2, shifts=[0.0, 0.4])
        transform = np.array([[2.0, 0.5], [-1.0, 3.0]])
        moved = sample.with_data(sample.data @ transform.T + np.array([5.0, -7.0]))
        assert hotelling_t2(moved).statistic == pytest.approx(hotelling_t2(sample).statistic, rel=1e-8)

    def test_singular_when_dimension_too_large(self):
        with pytest.raises(SingularCovariance):
            hotelling_t2(make_sample([3, 3], 5))

    def test_rank_deficient_covariance(self):
        sample = make_sample([10, 10], 3)
        data = sample.data.copy()
        data[:, 2] = data[:, 0] + data[:, 1]
        with pytest.raises(SingularCovariance):
            hotelling_t2(sample.with_data(data))

    def test_requires_two_groups(self, three_groups):
        with pytest.raises(InputError):
            hotelling_t2(three_groups)


class TestBaiSaranadasa:
    def test_all_zero_data(self):
        with pytest.raises(DegenerateSpectrum):
            bs1996(validate_sample(np.zeros((10, 4)), np.repeat([0, 1], 5)))

    def test_large_shift(self):
        assert bs1996(make_sample([20, 20], 30, shifts=[0.0, 3.0])).pvalue < 1e-4

    def test_rotation_invariance(self, rng):
        sample = make_sample([12, 14], 6, shifts=[0.0, 0.5])
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        rotated = sample.with_data(sample.data @ q.T)
        assert bs1996(rotated).statistic == pytest.approx(bs1996(sample).statistic, rel=1e-8)


class TestChenQin:
    def test_leave_out_trace_estimator(self, rng):
        x = rng.standard_normal((6, 3))
        m = x.shape[0]
        total = 0.0
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                rest = np.delete(x, [i, j], axis=0).mean(axis=0)
                total += ((x[i] - rest) @ x[j]) * ((x[j] - rest) @ x[i])
        cross, trace = _cq_within(x)
        gram = x @ x.T
        assert trace == pytest.approx(total / (m * (m - 1)), rel=1e-10)
        assert cross == pytest.approx((gram.sum() - np.trace(gram)) / (m * (m - 1)), rel=1e-10)

    def test_statistic_definition(self):
        sample = make_sample([5, 7], 4, shifts=[0.0, 0.3])
        x1, x2 = sample.group(0), sample.group(1)
        g1, g2 = x1 @ x1.T, x2 @ x2.T
        expected = (
            (g1.sum() - np.trace(g1)) / 20
            + (g2.sum() - np.trace(g2)) / 42
            - 2 * np.sum(x1 @ x2.T) / 35
        )
        assert cq2010(sample).diagnostics["T"] == pytest.approx(expected, rel=1e-10)

    def test_unbiased_under_null(self):
        config = SimulationConfig(ModelSpec(ModelKind.GAUSSIAN, 10), n1=15, n2=20, reps=1)
        values = np.array([cq2010(draw_replicate(config, r)).diagnostics["T"] for r in range(600)])
        assert abs(values.mean()) <= 3 * values.std(ddof=1) / np.sqrt(values.size)

    def test_rotation_invariance(self, rng):
        sample = make_sample([12, 14], 6, shifts=[0.0, 0.5])
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        rotated = sample.with_data(sample.data @ q.T)
        assert cq2010(rotated).statistic == pytest.approx(cq2010(sample).statistic, rel=1e-8)

    def test_large_shift(self):
        assert cq2010(make_sample([20, 20], 30, shifts=[0.0, 3.0])).pvalue < 1e-4

    def test_pooled_variance_uses_common_trace(self):
        sample = make_sample([8, 11], 5, shifts=[0.0, 0.4])
        x1, x2 = sample.group(0), sample.group(1)
        n1, n2, dof = 8, 11, 17
        c1, c2 = x1 - x1.mean(axis=0), x2 - x2.mean(axis=0)
        pooled = (c1.T @ c1 + c2.T @ c2) / dof
        b2 = dof**2 / ((dof + 2) * (dof - 1)) * (np.sum(pooled**2) - np.trace(pooled) ** 2 / dof)
        var = (2 / (n1 * (n1 - 1)) + 2 / (n2 * (n2 - 1)) + 4 / (n1 * n2)) * b2
        outcome = cq2010(sample)
        assert outcome.diagnostics["covariance"] == "pooled"
        assert outcome.statistic == pytest.approx(outcome.diagnostics["T"] / np.sqrt(var), rel=1e-10)

    def test_separate_variance_keeps_statistic(self):
        sample = make_sample([8, 11], 5, shifts=[0.0, 0.4])
        pooled, separate = cq2010(sample), cq2010(sample, covariance="separate")
        assert separate.diagnostics["T"] == pooled.diagnostics["T"]
        assert separate.diagnostics["covariance"] == "separate"
        with pytest.raises(InputError):
            cq2010(sample, covariance="diagonal")

    def test_extreme_row_does_not_inflate_pooled_statistic(self):
        sample = make_sample([15, 15], 20, seed=4)
        data = sample.data.copy()
        data[0] *= 1e4
        heavy = sample.with_data(data)
        assert cq2010(heavy).pvalue > 0.05

    def test_needs_three_per_group(self):
        with pytest.raises(InputError):
            cq2010(make_sample([2, 5], 3))


@pytest.mark.slow
@pytest.mark.parametrize(
    "test, model, p, low, high",
    [
        ("bs1996", ModelKind.GAUSSIAN, 30, 0.04, 0.10),
        ("cq2010", ModelKind.GAUSSIAN, 30, 0.04, 0.10),
        ("cq2010", ModelKind.CAUCHY, 30, 0.0, 0.04),
        ("cq2010", ModelKind.CAUCHY, 100, 0.0, 0.04),
        ("bs1996", ModelKind.CAUCHY, 30, 0.0, 0.04),
        ("ht2", ModelKind.GAUSSIAN, 2, 0.025, 0.075),
    ],
)
def test_baseline_sizes(test, model, p, low, high):
    shift = ShiftSpec(0.0) if p > 2 else ShiftSpec(0.0, direction="ones2d")
    config = SimulationConfig(ModelSpec(model, p), shift, reps=1000, seed=2, tests=(test,))
    assert low <= estimate_size_power(config).rate(test) <= high
