import numpy as np
import pytest
from numpy.testing import assert_array_equal

from hdloc.errors import DimensionMismatch, GroupTooSmall, NonFiniteEntry, NumericalError, SingleGroup
from hdloc.model import (
    SPATIAL_SIGN,
    GroupedSample,
    KernelKind,
    KernelSpec,
    SpectrumEstimate,
    TestMethod,
    TestOutcome,
    WeightedChiSquare,
    validate_sample,
)


class TestValidateSample:
    def test_two_by_two_groups(self):
        sample = validate_sample(np.arange(8.0).reshape(4, 2), [0, 0, 1, 1])
        assert (sample.n, sample.p, sample.n_groups) == (4, 2, 2)
        assert_array_equal(sample.group_sizes, [2, 2])

    def test_labels_are_reindexed_densely(self):
        sample = validate_sample(np.arange(8.0).reshape(4, 2), [5, 5, 9, 9])
        assert_array_equal(sample.labels, [0, 0, 1, 1])
        assert sample.group_names == (5, 9)

    def test_string_labels_keep_membership(self):
        sample = validate_sample(np.arange(10.0).reshape(5, 2), ["b", "a", "b", "a", "b"])
        assert sample.group_names == ("a", "b")
        assert_array_equal(sample.group(0), [[2.0, 3.0], [6.0, 7.0]])

    def test_nan_reports_location(self):
        matrix = np.ones((4, 3))
        matrix[2, 1] = np.nan
        with pytest.raises(NonFiniteEntry) as info:
            validate_sample(matrix, [0, 0, 1, 1])
        assert (info.value.row, info.value.col) == (2, 1)

    def test_single_group(self):
        with pytest.raises(SingleGroup):
            validate_sample(np.ones((3, 2)), [1, 1, 1])

    def test_group_too_small(self):
        with pytest.raises(GroupTooSmall) as info:
            validate_sample(np.ones((3, 2)), [0, 0, 1])
        assert info.value.group == 1

    def test_min_group_size_can_be_relaxed(self):
        sample = validate_sample(np.ones((3, 2)), [0, 0, 1], min_group_size=1)
        assert_array_equal(sample.group_sizes, [2, 1])

    def test_label_count_must_match(self):
        with pytest.raises(DimensionMismatch):
            validate_sample(np.ones((3, 2)), [0, 1])

    def test_arrays_are_read_only(self):
        sample = validate_sample(np.ones((4, 2)), [0, 0, 1, 1])
        with pytest.raises(ValueError):
            sample.data[0, 0] = 2.0

    def test_input_is_copied(self):
        matrix = np.zeros((4, 2))
        sample = validate_sample(matrix, [0, 0, 1, 1])
        matrix[0, 0] = 5.0
        assert sample.data[0, 0] == 0.0


def test_with_data_keeps_labels():
    sample = GroupedSample(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
    moved = sample.with_data(np.ones((4, 2)))
    assert_array_equal(moved.labels, sample.labels)
    assert moved.group_names == (0, 1)


def test_kernel_spec_parse():
    assert KernelSpec.parse(" SS ") == SPATIAL_SIGN
    assert KernelSpec.parse("diff").kind is KernelKind.DIFFERENCE
    with pytest.raises(ValueError):
        KernelSpec.parse("gaussian")


@pytest.mark.parametrize(
    "name, method",
    [
        ("hbe", TestMethod.HALL_BUCKLEY_EAGLESON_3M),
        ("WS", TestMethod.WELCH_SATTERTHWAITE_2M),
        ("imhof", TestMethod.IMHOF_EXACT),
        ("perm", TestMethod.PERMUTATION),
        ("FExact", TestMethod.F_EXACT),
    ],
)
def test_method_parse(name, method):
    assert TestMethod.parse(name) is method


class TestOutcomeInvariants:
    def test_pvalue_is_clamped(self):
        assert TestOutcome(1.0, 1.0 + 1e-12, TestMethod.F_EXACT).pvalue == 1.0
        assert TestOutcome(1.0, -1e-15, TestMethod.F_EXACT).pvalue == 0.0

    def test_non_finite_statistic(self):
        with pytest.raises(NumericalError):
            TestOutcome(np.inf, 0.5, TestMethod.NORMAL_APPROX)

    def test_rejects_at_level(self):
        outcome = TestOutcome(3.0, 0.03, TestMethod.NORMAL_APPROX)
        assert outcome.rejects(0.05)
        assert not outcome.rejects(0.01)


def test_spectrum_from_weights_is_consistent():
    spec = SpectrumEstimate.from_weights([3.0, 1.0, 0.5])
    assert spec.t1 == pytest.approx(4.5)
    assert spec.t2 == pytest.approx(10.25)
    assert spec.t3 == pytest.approx(28.125)
    assert spec.consistent()
    assert not SpectrumEstimate(4.0, 10.25, 28.125, spec.weights).consistent()


class TestWeightedChiSquare:
    @pytest.mark.parametrize("weights", [[0.0, 0.0], [1.0, -0.5], [np.nan], []])
    def test_invalid_weights(self, weights):
        with pytest.raises(ValueError):
            WeightedChiSquare(np.array(weights))

    def test_cumulants(self):
        assert WeightedChiSquare(np.array([1.0, 1.0])).cumulants() == (2.0, 4.0, 16.0)

    def test_sample_mean_and_variance(self, rng):
        law = WeightedChiSquare(np.array([3.0, 1.0, 0.5]))
        draws = law.sample(200_000, rng)
        mean, var, _ = law.cumulants()
        assert draws.mean() == pytest.approx(mean, abs=0.05)
        assert draws.var() == pytest.approx(var, rel=0.03)
