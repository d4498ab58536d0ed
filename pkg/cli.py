#!/usr/bin/env python3
"""
高維度多樣本位置檢定 CLI
test / perm：對 CSV 樣本做核檢定；simulate / powercurve：Monte Carlo 型一誤差與檢定力；
realdata：結腸癌基因表現資料；converge：維度一致收斂診斷。
不帶參數執行時進入互動式選單。
"""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, List, Optional, Sequence

from hdloc.colon import colon_pipeline
from hdloc.config import RunConfig, build_config
from hdloc.dataio import as_frame, emit_results, load_colon, load_csv
from hdloc.errors import InputError, NumericalError
from hdloc.nulldist import run_test
from hdloc.permutation import permutation_pvalue
from hdloc.report_style import (
    BLOCK_TABLE_STYLE,
    PVALUE_TABLE_STYLE,
    RESULT_TABLE_STYLE,
    apply_common_style,
    render_frame,
)
from hdloc.rng import resolve_workers
from hdloc.simulation import (
    ModelKind,
    ShiftDirection,
    convergence_diagnostic,
    default_delta_grid,
    estimate_size_power,
    geometric_profile,
    isotonic_violation,
    power_curve,
    preset_configs,
    run_size_study,
)

logger = logging.getLogger("hdloc.cli")

# 專案根目錄
PROJECT_ROOT = Path(__file__).resolve().parent
PYTHON_BIN = PROJECT_ROOT / "venv" / "bin" / "python"
if not PYTHON_BIN.exists():
    PYTHON_BIN = Path(sys.executable)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    # every default is None so TOML values are not masked by unset flags
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with default settings")
    common.add_argument("--seed", type=int, help="Base random seed (default 0)")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates (default 1000)")
    common.add_argument("--level", type=float, help="Nominal test level (default 0.05)")
    common.add_argument("--out", type=Path, help="Write results here instead of stdout")
    common.add_argument("--format", dest="fmt", choices=["json", "csv"], help="Result format (default json)")
    common.add_argument("--threads", type=int, help="Worker threads (overrides $HDLOC_THREADS)")
    common.add_argument("--no-timestamp", dest="timestamp", action="store_const", const=False,
                        help="Omit generated_at so identical runs give identical files")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    return common


def _sample_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", type=Path, help="Comma-separated sample file")
    parser.add_argument("--label-column", dest="label_column", type=int, help="1-based column holding group labels")
    parser.add_argument("--sidecar", type=Path, help="File with one group label per line")
    parser.add_argument("--header", action="store_const", const=True, help="First line is a header row")
    parser.add_argument("--min-group-size", dest="min_group_size", type=int, help="Smallest allowed group")
    parser.add_argument("--kernel", choices=["diff", "ss"], help="Kernel (default ss)")
    parser.add_argument("--permutations", type=int, help="Permutation replicates B (default 999)")


def _model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="gaussian | t4 | cauchy (or model1..model3)")
    parser.add_argument("--p", type=int, help="Dimension (default 30)")
    parser.add_argument("--n1", type=int, help="Size of group 1 (default 40)")
    parser.add_argument("--n2", type=int, help="Size of group 2 (default 50)")
    parser.add_argument("--direction", choices=[d.value for d in ShiftDirection], help="Shift direction")
    parser.add_argument("--tests", help="Comma-separated test ids: ss,zgzc,ss-perm,bs1996,cq2010,ht2")
    parser.add_argument("--permutations", type=int, help="Permutations per replicate for ss-perm")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(description="Kernel-based location tests for high-dimensional data.")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", parents=[common], help="Asymptotic kernel test on a CSV sample")
    _sample_options(test)
    test.add_argument("--method", choices=["hbe", "ws", "imhof", "perm"], help="Null calibration (default hbe)")

    perm = sub.add_parser("perm", parents=[common], help="Permutation test on a CSV sample")
    _sample_options(perm)
    perm.add_argument("--perm-mode", dest="perm_mode", choices=["auto", "exhaustive", "sampled"])

    simulate = sub.add_parser("simulate", parents=[common], help="Estimate size or power at one delta")
    _model_options(simulate)
    simulate.add_argument("--delta", type=float, help="Shift size (default 0: size)")
    simulate.add_argument("--preset", choices=["highdim", "bivariate"], help="Run a whole size table")

    curve = sub.add_parser("powercurve", parents=[common], help="Power over a delta grid")
    _model_options(curve)
    curve.add_argument("--deltas", help="Comma-separated ascending grid starting at 0")
    curve.add_argument("--points", type=int, help="Points of the default grid (default 9)")

    real = sub.add_parser("realdata", parents=[common], help="Colon tumour vs normal expression data")
    real.add_argument("--matrix", type=Path, help="Genes x samples whitespace matrix")
    real.add_argument("--tissues", type=Path, help="Signed tissue ids, negative = tumor")
    real.add_argument("--mode", choices=["full", "blocks"], help="All genes or 50 blocks of 40")
    real.add_argument("--tests", help="Comma-separated test ids (default ss,zgzc,bs1996,cq2010)")
    real.add_argument("--log2", action="store_const", const=True, help="log2-transform expression values")
    real.add_argument("--permutations", type=int, help="Permutations for ss-perm")

    conv = sub.add_parser("converge", parents=[common], help="Uniform-over-p convergence diagnostic")
    conv.add_argument("--n-grid", dest="n_grid", help="Comma-separated sample sizes (default 20,200)")
    conv.add_argument("--p-grid", dest="p_grid", help="Comma-separated dimensions (default 5,20,80)")
    conv.add_argument("--innovation", choices=["gaussian", "exponential", "sparse"])
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_test(config: RunConfig) -> Any:
    sample = load_csv(config.input, config.label_column, config.sidecar,
                      header=config.header, min_group_size=config.min_group_size)
    outcome = run_test(sample, config.kernel_spec, config.test_method,
                       permutations=config.permutations, seed=config.seed)
    render_frame(as_frame(outcome), "Kernel location test", PVALUE_TABLE_STYLE)
    return outcome


def cmd_perm(config: RunConfig) -> Any:
    sample = load_csv(config.input, config.label_column, config.sidecar,
                      header=config.header, min_group_size=config.min_group_size)
    outcome = permutation_pvalue(sample, config.kernel_spec, config.permutations, config.seed,
                                 mode=config.perm_mode, workers=resolve_workers(config.threads))
    render_frame(as_frame(outcome), f"Permutation test ({outcome.n_permutations} relabellings)", PVALUE_TABLE_STYLE)
    return outcome


def cmd_simulate(config: RunConfig) -> Any:
    if config.preset is not None:
        configs = preset_configs(config.preset, reps=config.reps, seed=config.seed, level=config.level,
                                 permutations=config.permutations, workers=config.threads)
        if config.tests:
            configs = [replace(c, tests=config.tests) for c in configs]
        study = run_size_study(configs)
        render_frame(study.frame, f"Estimated sizes at level {config.level:g}", RESULT_TABLE_STYLE)
        return study
    table = estimate_size_power(config.simulation_config())
    render_frame(table.frame, "Estimated rejection rates", RESULT_TABLE_STYLE)
    return table


def cmd_powercurve(config: RunConfig) -> Any:
    sim = config.simulation_config()
    if config.deltas is not None:
        grid = list(config.deltas)
    else:
        grid = list(default_delta_grid(ModelKind.parse(config.model), ShiftDirection(config.direction), config.points))
    table = power_curve(sim, grid)
    for test in sim.tests:
        if test in set(table.frame["test"]):
            logger.info("%s isotonic violation: %.4f", test, isotonic_violation(table.rates(test).to_numpy()))
    render_frame(table.frame, "Estimated powers", RESULT_TABLE_STYLE)
    return table


def cmd_realdata(config: RunConfig) -> Any:
    sample = load_colon(config.matrix, config.tissues, log2=config.log2)
    report = colon_pipeline(sample, config.mode, config.colon_tests(), seed=config.seed,
                            permutations=config.permutations)
    averages = report.averages.rename("pvalue").rename_axis("test").reset_index()
    render_frame(averages, "Average p-values" if config.mode == "blocks" else "p-values", PVALUE_TABLE_STYLE)
    if config.mode == "blocks":
        render_frame(report.histogram(), "p-value histogram (20 bins)", BLOCK_TABLE_STYLE)
    return report


def cmd_converge(config: RunConfig) -> Any:
    report = convergence_diagnostic(geometric_profile, config.n_grid, config.p_grid, config.reps,
                                    innovation=config.innovation, seed=config.seed, workers=config.threads)
    sup = report.sup_distance.rename("d").rename_axis("n").reset_index()
    render_frame(sup, f"sup over p of Kolmogorov distance ({config.innovation})", RESULT_TABLE_STYLE)
    logger.info("nonincreasing in n within %.3f: %s", report.tolerance, report.monotone)
    return report


COMMAND_HANDLERS = {
    "test": cmd_test,
    "perm": cmd_perm,
    "simulate": cmd_simulate,
    "powercurve": cmd_powercurve,
    "realdata": cmd_realdata,
    "converge": cmd_converge,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    apply_common_style(level)
    try:
        config = build_config(args)
        results = COMMAND_HANDLERS[config.command](config)
        emit_results(results, config.fmt, config.out, config_echo=config.echo(), timestamp=config.timestamp)
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# Interactive menu
# ---------------------------------------------------------------------------


class HdlocCLI:
    """互動式選單：組合子命令後以子行程執行"""

    def __init__(self) -> None:
        self.running = True
        self.script = PROJECT_ROOT / "cli.py"

    # ------------------------------------------------------------------ 主選單
    def main_menu(self) -> None:
        """顯示主選單並處理使用者選擇"""
        actions = {
            "1": self.run_test,
            "2": self.run_perm,
            "3": self.run_simulate,
            "4": self.run_powercurve,
            "5": self.run_realdata,
            "6": self.run_converge,
        }
        while self.running:
            print("\n" + "=" * 60)
            print("  高維度位置檢定工具 - 統一介面")
            print("=" * 60)
            print("\n請選擇功能：")
            print("  1) 核檢定 (CSV 樣本)")
            print("  2) 置換檢定 (CSV 樣本)")
            print("  3) 型一誤差 / 檢定力模擬")
            print("  4) 檢定力曲線")
            print("  5) 結腸癌資料分析")
            print("  6) 收斂診斷")
            print("  q) 離開")
            print("-" * 60)

            choice = input("輸入選項: ").strip().lower()
            if choice in actions:
                actions[choice]()
            elif choice == "q":
                print("再見！")
                self.running = False
            else:
                print("⚠️  無效的選項，請重新輸入。")

    # ------------------------------------------------------------------ 樣本檢定
    def _sample_args(self) -> List[str]:
        path = input("CSV 檔案路徑: ").strip()
        label = input("標籤欄位 (1 起算，Enter 使用最後一欄): ").strip()
        kernel = input("核函數 ss / diff (預設 ss): ").strip() or "ss"
        args = ["--input", path, "--kernel", kernel]
        if label:
            args.extend(["--label-column", label])
        else:
            args.extend(["--label-column", str(_count_columns(path))])
        if (input("第一列為標題？(y/n，預設 n): ").strip().lower() or "n") == "y":
            args.append("--header")
        return args

    def run_test(self) -> None:
        """執行核檢定"""
        print("\n核檢定設定：")
        args = self._sample_args()
        method = input("零分佈近似 hbe / ws / imhof / perm (預設 hbe): ").strip() or "hbe"
        self._run_command(["test", *args, "--method", method, *self._output_args()])

    def run_perm(self) -> None:
        """執行置換檢定"""
        print("\n置換檢定設定：")
        args = self._sample_args()
        b = input("置換次數 B (預設 999): ").strip() or "999"
        self._run_command(["perm", *args, "--permutations", b, *self._output_args()])

    # ------------------------------------------------------------------ 模擬
    def _model_args(self) -> List[str]:
        model = input("模型 gaussian / t4 / cauchy (預設 gaussian): ").strip() or "gaussian"
        p = input("維度 p (預設 30): ").strip() or "30"
        reps = input("重複次數 (預設 1000): ").strip() or "1000"
        tests = input("檢定 (逗號分隔，預設 ss): ").strip() or "ss"
        return ["--model", model, "--p", p, "--reps", reps, "--tests", tests]

    def run_simulate(self) -> None:
        """執行型一誤差 / 檢定力模擬"""
        print("\n模擬設定：")
        preset = input("預設表格 highdim / bivariate (Enter 跳過): ").strip()
        if preset:
            reps = input("重複次數 (預設 1000): ").strip() or "1000"
            self._run_command(["simulate", "--preset", preset, "--reps", reps, *self._output_args()])
            return
        args = self._model_args()
        delta = input("位移 delta (預設 0): ").strip() or "0"
        self._run_command(["simulate", *args, "--delta", delta, *self._output_args()])

    def run_powercurve(self) -> None:
        """執行檢定力曲線"""
        print("\n檢定力曲線設定：")
        args = self._model_args()
        deltas = input("delta 網格 (逗號分隔，Enter 使用預設): ").strip()
        if deltas:
            args.extend(["--deltas", deltas])
        self._run_command(["powercurve", *args, *self._output_args()])

    # ------------------------------------------------------------------ 實際資料
    def run_realdata(self) -> None:
        """執行結腸癌資料分析"""
        print("\n結腸癌資料設定：")
        matrix = input("基因表現矩陣檔 (genes x samples): ").strip()
        tissues = input("組織標籤檔 (負值為腫瘤): ").strip()
        mode = input("模式 full / blocks (預設 full): ").strip() or "full"
        args = ["realdata", "--matrix", matrix, "--tissues", tissues, "--mode", mode]
        if (input("取 log2？(y/n，預設 n): ").strip().lower() or "n") == "y":
            args.append("--log2")
        self._run_command([*args, *self._output_args()])

    def run_converge(self) -> None:
        """執行收斂診斷"""
        print("\n收斂診斷設定：")
        innovation = input("創新分佈 gaussian / exponential / sparse (預設 sparse): ").strip() or "sparse"
        reps = input("重複次數 (預設 2000): ").strip() or "2000"
        self._run_command(["converge", "--innovation", innovation, "--reps", reps, *self._output_args()])

    # ------------------------------------------------------------------ 工具函數
    def _output_args(self) -> List[str]:
        output = input("輸出路徑 (Enter 輸出至終端): ").strip()
        return ["--out", output] if output else []

    def _run_command(self, args: list[str]) -> None:
        """執行指令並處理錯誤"""
        cmd = [str(PYTHON_BIN), str(self.script), *args]
        print("\n" + "-" * 60)
        print("執行指令：")
        print(" ".join(cmd))
        print("-" * 60)

        try:
            subprocess.run(cmd, check=True)
            print("\n✅ 執行完成")
        except subprocess.CalledProcessError as e:
            print(f"\n⚠️  執行失敗：{e}")
        except KeyboardInterrupt:
            print("\n已中斷")

        input("\n按 Enter 繼續...")


def _count_columns(path: str) -> int:
    try:
        with open(path, encoding="utf-8") as handle:
            return len(handle.readline().split(","))
    except OSError:
        return 1


def interactive() -> None:
    """主程式入口 (互動模式)"""
    cli = HdlocCLI()
    try:
        cli.main_menu()
    except KeyboardInterrupt:
        print("\n\n再見！")


if __name__ == "__main__":
    if len(sys.argv) == 1:
        interactive()
    else:
        raise SystemExit(main())
