"""Two-sample tests on the colon tumour/normal expression matrix.

``full`` runs every test once on all 2000 genes; ``blocks`` cuts the genes
into 50 consecutive blocks of 40 and tests each block separately.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, NumericalError, ShapeMismatch
from .model import GroupedSample
from .simulation import TEST_REGISTRY

logger = logging.getLogger(__name__)

FULL_SHAPE = (62, 2000)
BLOCK_WIDTH = 40
BLOCK_COUNT = 50
HIST_BINS = 20
MODES = ("full", "blocks")
DEFAULT_TESTS = ("ss", "zgzc", "bs1996", "cq2010")
FRAME_COLUMNS = ["section", "test", "block", "bin_low", "bin_high", "value"]


@dataclass(frozen=True, eq=False)
class ColonReport:
    """``pvalues`` has one row per block (a single row in full mode) and one column per test."""

    mode: str
    pvalues: pd.DataFrame

    @property
    def averages(self) -> pd.Series:
        return self.pvalues.mean(axis=0, skipna=True)

    def histogram(self, bins: int = HIST_BINS) -> pd.DataFrame:
        edges = np.linspace(0.0, 1.0, bins + 1)
        frame = pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:]})
        for test in self.pvalues.columns:
            values = self.pvalues[test].dropna().to_numpy()
            frame[test] = np.histogram(values, bins=edges)[0]
        return frame

    def best_test(self) -> Optional[str]:
        """Test with the smallest average p-value; None when every test failed."""
        averages = self.averages.dropna()
        return None if averages.empty else str(averages.idxmin())

    def block_frame(self) -> pd.DataFrame:
        """Long per-block rows (block, test, pvalue)."""
        long = self.pvalues.rename_axis("block").reset_index().melt(
            id_vars="block", var_name="test", value_name="pvalue"
        )
        return long.sort_values(["test", "block"], kind="stable").reset_index(drop=True)

    def to_frame(self) -> pd.DataFrame:
        """One long table: ``section`` is pvalue, average or histogram; ``value`` holds the number."""
        blocks = self.block_frame().rename(columns={"pvalue": "value"}).assign(section="pvalue")
        averages = self.averages.rename("value").rename_axis("test").reset_index().assign(section="average")
        frames = [blocks, averages]
        if self.mode == "blocks":
            histogram = self.histogram().melt(id_vars=["bin_low", "bin_high"], var_name="test", value_name="value")
            frames.append(histogram.assign(section="histogram"))
        return pd.concat(frames, ignore_index=True).reindex(columns=FRAME_COLUMNS)

    def to_document(self) -> dict:
        document = {
            "mode": self.mode,
            "pvalues": self.block_frame().to_dict("records"),
            "averages": self.averages.to_dict(),
            "best_test": self.best_test(),
        }
        if self.mode == "blocks":
            document["histogram"] = self.histogram().to_dict("records")
        return document


def partition_blocks(sample: GroupedSample, width: int = BLOCK_WIDTH, count: int = BLOCK_COUNT) -> List[GroupedSample]:
    if sample.p != width * count:
        raise ShapeMismatch(f"{sample.p} genes cannot be split into {count} blocks of {width}")
    return [sample.with_data(sample.data[:, b * width:(b + 1) * width]) for b in range(count)]


def _run_tests(sample: GroupedSample, tests: Sequence[str], seed: int, permutations: int, where: str) -> dict:
    row = {}
    for name in tests:
        try:
            row[name] = TEST_REGISTRY[name](sample, seed, permutations).pvalue
        except NumericalError as exc:
            logger.warning("%s failed on %s: %s", name, where, exc)
            row[name] = np.nan
    return row


def colon_pipeline(
    sample: GroupedSample,
    mode: str = "full",
    tests: Sequence[str] = DEFAULT_TESTS,
    *,
    block_width: int = BLOCK_WIDTH,
    block_count: int = BLOCK_COUNT,
    seed: int = 0,
    permutations: int = 999,
) -> ColonReport:
    unknown = [t for t in tests if t not in TEST_REGISTRY]
    if unknown:
        raise ConfigError(f"unknown tests {unknown}")
    if mode == "full":
        if sample.data.shape != FULL_SHAPE:
            raise ShapeMismatch(f"full mode expects a {FULL_SHAPE[0]}x{FULL_SHAPE[1]} matrix, got "
                                f"{sample.n}x{sample.p}")
        rows = [_run_tests(sample, tests, seed, permutations, "all genes")]
    elif mode == "blocks":
        blocks = partition_blocks(sample, block_width, block_count)
        rows = []
        for b, block in enumerate(blocks):
            rows.append(_run_tests(block, tests, seed, permutations, f"block {b}"))
        logger.info("tested %d blocks of %d genes", len(blocks), block_width)
    else:
        raise ConfigError(f"unknown mode {mode!r}; choose from {MODES}")

    return ColonReport(mode, pd.DataFrame(rows, columns=list(tests)))


__all__ = ["ColonReport", "colon_pipeline", "partition_blocks", "BLOCK_WIDTH", "BLOCK_COUNT", "HIST_BINS"]
