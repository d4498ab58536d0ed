import numpy as np
import pytest
from numpy.testing import assert_allclose
from pandas.testing import assert_frame_equal

from hdloc.errors import ConfigError, InputError
from hdloc.simulation import (
    TABLE_COLUMNS,
    ModelKind,
    ModelSpec,
    ShiftDirection,
    ShiftSpec,
    SimulationConfig,
    convergence_diagnostic,
    default_delta_grid,
    equicorr_factor,
    estimate_size_power,
    isotonic_violation,
    kolmogorov_distance,
    power_curve,
    preset_configs,
    run_size_study,
    sample_group,
    sample_groups,
)


def equicorr(p: int) -> np.ndarray:
    return 0.5 * np.eye(p) + 0.5 * np.ones((p, p))


class TestEquicorrFactor:
    def test_scalar_case(self):
        assert_allclose(equicorr_factor(1), [[1.0]])

    def test_bivariate(self):
        factor = equicorr_factor(2)
        assert_allclose(factor @ factor.T, [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)

    @pytest.mark.parametrize("p", [100, 2000])
    def test_reconstruction(self, p):
        factor = equicorr_factor(p)
        assert np.max(np.abs(factor @ factor.T - equicorr(p))) < 1e-10


class TestSampler:
    def test_gaussian_covariance(self, rng):
        draws = sample_group(ModelSpec(ModelKind.GAUSSIAN, 2), np.zeros(2), 100_000, rng)
        assert_allclose(np.cov(draws, rowvar=False), equicorr(2), atol=0.02)

    def test_gaussian_mean_follows_shift(self, rng):
        shift = np.array([0.3, -1.2, 2.0])
        draws = sample_group(ModelSpec(ModelKind.GAUSSIAN, 3), shift, 100_000, rng)
        assert np.all(np.abs(draws.mean(axis=0) - shift) < 5 * np.sqrt(1.0 / 100_000))

    def test_t4_median(self, rng):
        draws = sample_group(ModelSpec(ModelKind.STUDENT_T4, 1), np.array([1.5]), 100_000, rng)
        assert np.median(draws) == pytest.approx(1.5, abs=0.02)

    def test_cauchy_median(self, rng):
        draws = sample_group(ModelSpec(ModelKind.CAUCHY, 1), np.array([-2.0]), 100_000, rng)
        assert np.median(draws) == pytest.approx(-2.0, abs=0.05)

    def test_model_aliases(self):
        assert ModelKind.parse("Model3") is ModelKind.CAUCHY
        assert ModelSpec("t4", 5).model is ModelKind.STUDENT_T4
        with pytest.raises(ConfigError):
            ModelSpec(ModelKind.GAUSSIAN, 0)


def test_k_group_sampler():
    model = ModelSpec(ModelKind.GAUSSIAN, 3)
    shifts = [np.zeros(3), np.full(3, 5.0), np.full(3, -5.0)]
    sample = sample_groups(model, shifts, [20, 25, 30], seed=2)
    assert list(sample.group_sizes) == [20, 25, 30]
    assert sample.group(1).mean() > 3.0 > -3.0 > sample.group(2).mean()
    again = sample_groups(model, shifts, [20, 25, 30], seed=2)
    np.testing.assert_array_equal(sample.data, again.data)
    with pytest.raises(ConfigError):
        sample_groups(model, shifts[:2], [20, 25, 30], seed=2)


class TestShift:
    def test_ramp_has_unit_norm(self):
        assert np.linalg.norm(ShiftSpec(2.0).unit(30)) == pytest.approx(1.0)
        assert_allclose(ShiftSpec(2.0).vector(3), 2.0 * np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0))

    def test_bivariate_directions(self):
        assert_allclose(ShiftSpec(1.0, ShiftDirection.ONES_2D).vector(2), [1.0, 1.0])
        assert_allclose(ShiftSpec(1.0, "e2").vector(2), [0.0, 1.0])
        with pytest.raises(ConfigError):
            ShiftSpec(1.0, ShiftDirection.E2_2D).unit(3)

    def test_negative_delta(self):
        with pytest.raises(ConfigError):
            ShiftSpec(-0.1)


def small_config(**overrides) -> SimulationConfig:
    options = dict(model=ModelSpec(ModelKind.GAUSSIAN, 10), n1=12, n2=15, reps=60, seed=3, tests=("ss", "zgzc"))
    options.update(overrides)
    return SimulationConfig(**options)


class TestSizePower:
    def test_table_shape_and_standard_errors(self):
        table = estimate_size_power(small_config())
        assert list(table.frame.columns) == TABLE_COLUMNS
        assert list(table.frame["test"]) == ["ss", "zgzc"]
        rates, reps = table.frame["rate"], table.frame["reps"]
        assert ((0.0 <= rates) & (rates <= 1.0)).all()
        assert_allclose(table.frame["se"], np.sqrt(rates * (1 - rates) / reps))

    def test_deterministic_and_thread_independent(self):
        first = estimate_size_power(small_config(workers=1))
        second = estimate_size_power(small_config(workers=4))
        assert_frame_equal(first.frame, second.frame)

    def test_delta_zero_row_equals_size_row(self):
        config = small_config(reps=40)
        size = estimate_size_power(config)
        curve = power_curve(config, [0.0, 1.0, 2.0])
        for test in config.tests:
            assert curve.rate(test, 0.0) == size.rate(test, 0.0)

    def test_power_grows_with_delta(self):
        curve = power_curve(small_config(reps=80, tests=("ss",)), [0.0, 1.0, 3.0])
        rates = curve.rates("ss").to_numpy()
        assert rates[-1] > 0.9
        assert isotonic_violation(rates) <= 0.05

    def test_grid_must_start_at_zero(self):
        with pytest.raises(InputError):
            power_curve(small_config(), [0.5, 1.0])
        with pytest.raises(InputError):
            power_curve(small_config(), [0.0, 2.0, 1.0])

    def test_failing_test_column_is_aborted(self):
        table = estimate_size_power(small_config(reps=10, tests=("ss", "ht2"), n1=5, n2=5))
        assert "ht2@0" in table.aborted
        assert set(table.frame["test"]) == {"ss"}

    def test_size_study_keeps_aborted_cells(self):
        configs = [small_config(reps=10, tests=("ss", "ht2"), n1=5, n2=5), small_config(reps=10, tests=("ss",))]
        study = run_size_study(configs)
        assert list(study.frame.columns[:2]) == ["model", "p"]
        assert list(study.frame["test"]) == ["ss", "ss"]
        assert set(study.aborted) == {"gaussian/p=10/ht2@0"}

    def test_unknown_test(self):
        with pytest.raises(ConfigError):
            small_config(tests=("nope",))

    def test_presets(self):
        highdim = preset_configs("highdim", reps=10)
        assert len(highdim) == 9
        assert {c.model.p for c in highdim} == {30, 50, 100}
        bivariate = preset_configs("bivariate", reps=10, level=0.1, permutations=199)
        assert [c.model.p for c in bivariate] == [2, 2, 2]
        assert all(c.tests == ("ht2", "ss", "zgzc") for c in bivariate)
        assert {(c.level, c.permutations) for c in bivariate} == {(0.1, 199)}
        with pytest.raises(ConfigError):
            preset_configs("everything")


def test_default_grid():
    grid = default_delta_grid(ModelKind.GAUSSIAN)
    assert grid[0] == 0.0 and grid.size == 9
    assert np.all(np.diff(grid) > 0)


def test_isotonic_violation():
    assert isotonic_violation([0.1, 0.2, 0.15, 0.3]) == pytest.approx(0.025)
    assert isotonic_violation([0.0, 0.5, 1.0]) == 0.0


def test_kolmogorov_distance_against_exact_cdf():
    draws = np.array([0.1, 0.4, 0.6, 0.9])
    nodes = np.linspace(0.0, 1.0, 11)
    assert kolmogorov_distance(draws, nodes, nodes) == pytest.approx(0.15)


class TestConvergence:
    def test_single_eigenvalue_gaussian_is_exact(self):
        report = convergence_diagnostic(lambda p: np.ones(p), n_grid=(5, 50), p_grid=(3,), reps=2000,
                                        innovation="gaussian", seed=4)
        assert report.cells.shape == (2, 3)
        assert report.sup_distance.max() < 0.04

    def test_sparse_innovations_converge(self):
        report = convergence_diagnostic(n_grid=(20, 200), p_grid=(5, 20, 80), reps=2000, innovation="sparse", seed=1)
        d = report.sup_distance
        assert d.loc[200] < d.loc[20]
        assert report.monotone

    def test_distance_shrinks_with_reps(self):
        small = convergence_diagnostic(lambda p: np.ones(p), (10,), (3,), 200, innovation="gaussian", seed=8)
        large = convergence_diagnostic(lambda p: np.ones(p), (10,), (3,), 5000, innovation="gaussian", seed=8)
        assert large.sup_distance.iloc[0] < small.sup_distance.iloc[0]

    def test_rejects_bad_profile(self):
        with pytest.raises(ConfigError):
            convergence_diagnostic(lambda p: np.ones(p + 1), (10,), (3,), 100)
        with pytest.raises(ConfigError):
            convergence_diagnostic(n_grid=(10,), p_grid=(3,), reps=100, innovation="laplace")


@pytest.fixture(scope="module")
def highdim_sizes():
    return run_size_study(preset_configs("highdim", reps=1000, seed=0)).frame


@pytest.fixture(scope="module")
def bivariate_sizes():
    return run_size_study(preset_configs("bivariate", reps=1000, seed=0)).frame


def cell_rate(frame, model, p, test):
    rows = frame[(frame["model"] == model) & (frame["p"] == p) & (frame["test"] == test)]
    assert len(rows) == 1, f"missing size cell {model}/p={p}/{test}"
    return float(rows["rate"].iloc[0])


HIGHDIM_CELLS = [(m, p) for m in ("gaussian", "t4", "cauchy") for p in (30, 50, 100)]

# (test, model) -> accepted size interval at the 5% level
HIGHDIM_BOUNDS = {
    ("ss", "gaussian"): (0.019, 0.084),
    ("ss", "t4"): (0.019, 0.084),
    ("ss", "cauchy"): (0.019, 0.084),
    ("zgzc", "gaussian"): (0.021, 0.088),
    ("zgzc", "t4"): (0.021, 0.088),
    ("zgzc", "cauchy"): (0.0, 0.04),
    ("bs1996", "gaussian"): (0.031, 0.104),
    ("bs1996", "t4"): (0.031, 0.104),
    ("bs1996", "cauchy"): (0.0, 0.04),
    ("cq2010", "gaussian"): (0.031, 0.104),
    ("cq2010", "t4"): (0.031, 0.104),
    ("cq2010", "cauchy"): (0.0, 0.04),
}

BIVARIATE_BOUNDS = {
    ("ht2", "gaussian"): (0.029, 0.069),
    ("ht2", "t4"): (0.030, 0.070),
    ("ht2", "cauchy"): (0.0, 0.032),
    ("ss", "gaussian"): (0.032, 0.082),
    ("ss", "t4"): (0.035, 0.085),
    ("ss", "cauchy"): (0.029, 0.079),
    ("zgzc", "gaussian"): (0.035, 0.085),
    ("zgzc", "t4"): (0.029, 0.079),
    ("zgzc", "cauchy"): (0.0, 0.04),
}


@pytest.mark.slow
@pytest.mark.parametrize("test", ["ss", "zgzc", "bs1996", "cq2010"])
@pytest.mark.parametrize("model, p", HIGHDIM_CELLS)
def test_highdim_size_table(highdim_sizes, test, model, p):
    low, high = HIGHDIM_BOUNDS[(test, model)]
    assert low <= cell_rate(highdim_sizes, model, p, test) <= high


@pytest.mark.slow
@pytest.mark.parametrize("test, model", sorted(BIVARIATE_BOUNDS))
def test_bivariate_size_table(bivariate_sizes, test, model):
    low, high = BIVARIATE_BOUNDS[(test, model)]
    assert low <= cell_rate(bivariate_sizes, model, 2, test) <= high


@pytest.mark.slow
class TestPowerCurves:
    def test_power_curve_model1(self):
        config = SimulationConfig(ModelSpec(ModelKind.GAUSSIAN, 30), reps=1000, seed=0, tests=("ss",))
        curve = power_curve(config, default_delta_grid(ModelKind.GAUSSIAN))
        rates = curve.rates("ss").to_numpy()
        assert isotonic_violation(rates) <= 0.03
        assert rates[-1] >= 0.9
        assert curve.rate("ss", 0.0) == estimate_size_power(config).rate("ss")
