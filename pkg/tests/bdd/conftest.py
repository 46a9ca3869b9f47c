"""Shared fixtures for behaviour-driven CLI tests."""

from __future__ import annotations

import dataclasses
import io
import typing as typ
from contextlib import redirect_stderr, redirect_stdout

import pytest
from pytest_bdd import parsers, then

from semnav import cli
from semnav.config import dump_run_config, run_config_from_mapping
from tests.unit.nav_test_support import TINY_RUN

if typ.TYPE_CHECKING:
    import pathlib


@dataclasses.dataclass
class RunResult:
    """Record CLI invocation results."""

    stdout: str
    stderr: str
    returncode: int


def invoke(argv: list[str]) -> RunResult:
    """Run ``semnav`` in-process and capture both streams."""
    out = io.StringIO()
    err = io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        try:
            code = cli.main(argv)
        except SystemExit as exc:
            code = 0 if exc.code is None else int(exc.code)
    return RunResult(stdout=out.getvalue(), stderr=err.getvalue(), returncode=code)


@pytest.fixture
def cli_invocation() -> dict[str, RunResult]:
    """Collect the result of running the CLI within a scenario."""
    return {}


@pytest.fixture
def tiny_config(
    tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch
) -> pathlib.Path:
    """Write the tiny run configuration and keep outputs in *tmp_path*."""
    monkeypatch.setenv("SEMNAV_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.delenv("SEMNAV_LOG_LEVEL", raising=False)
    return dump_run_config(run_config_from_mapping(TINY_RUN), tmp_path / "tiny.yaml")


@then("the command succeeds")
def then_command_succeeds(cli_invocation: dict[str, RunResult]) -> None:
    """The last command exited cleanly."""
    result = cli_invocation["result"]
    assert result.returncode == 0, result.stdout + result.stderr


@then(parsers.cfparse("the command fails with exit code {code:d}"))
def then_command_fails(code: int, cli_invocation: dict[str, RunResult]) -> None:
    """The last command exited with *code*."""
    assert cli_invocation["result"].returncode == code


@then(parsers.cfparse('the output contains "{text}"'))
def then_output_contains(text: str, cli_invocation: dict[str, RunResult]) -> None:
    """Standard output mentions *text*."""
    assert text in cli_invocation["result"].stdout
