"""Acceptance criteria 1-11, each at its stated tolerance and runtime limit.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see one
PASS/FAIL line per criterion as it completes; the lines are also repeated
in the terminal summary.
"""

import filecmp
import os
import subprocess
import sys

import pytest

from exitlaw.experiments.acceptance import CHECK_SCENARIOS, AcceptanceRun, CriterionResult

SEED = 42
LINES = []


@pytest.fixture(scope="module")
def results(tmp_path_factory):
    out = tmp_path_factory.mktemp("check")
    return {r.number: r for r in AcceptanceRun(SEED).run(out)}


def record(result: CriterionResult):
    line = result.line()
    LINES.append(line)
    print(line)


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(results, number):
    result = results[number]
    record(result)
    assert result.passed, result.line()


def _check_cli(out_dir):
    env = dict(os.environ, PYTHONHASHSEED="0")
    return subprocess.run(
        [sys.executable, "-m", "exitlaw", "check", "--seed", str(SEED), "--out", str(out_dir)],
        capture_output=True, text=True, env=env, timeout=300,
    )


def test_criterion_11_check_twice_byte_identical(results, tmp_path):
    in_process = results[11]
    runs = [_check_cli(tmp_path / name) for name in ("first", "second")]
    for run in runs:
        assert run.returncode == 0, run.stdout + run.stderr
        assert "11/11 criteria passed" in run.stdout
    tables = [f"{name}_table.csv" for name in CHECK_SCENARIOS]
    same, diff, missing = filecmp.cmpfiles(tmp_path / "first", tmp_path / "second", tables,
                                           shallow=False)
    passed = in_process.passed and len(same) == len(tables)
    record(CriterionResult(
        11, "determinism (check --seed 42 run twice)", passed,
        f"{len(same)}/{len(tables)} tables byte-identical across two CLI runs; "
        f"in-process rerun: {in_process.detail}",
        in_process.elapsed, in_process.limit,
    ))
    assert not diff and not missing
    assert passed
