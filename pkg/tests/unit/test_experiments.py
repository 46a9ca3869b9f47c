"""Unit tests for the pilot experiment driver."""

from __future__ import annotations

import csv
import typing as typ

import pytest

from semnav.experiments import (
    BASELINE,
    PILOT_HEADER,
    PilotResult,
    PilotRow,
    run_pilot,
)

if typ.TYPE_CHECKING:
    import pathlib

    from tests.unit.nav_test_support import TinyWorld


@pytest.fixture(scope="module")
def pilot(
    tiny_world: TinyWorld, tmp_path_factory: pytest.TempPathFactory
) -> PilotResult:
    """Run one variant for one seed under image and text goals."""
    return run_pilot(
        tiny_world.config,
        tiny_world.scenes,
        tiny_world.codebook,
        tiny_world.episodes,
        tiny_world.episodes[:4],
        tmp_path_factory.mktemp("pilot"),
        variants=("so",),
        seeds=(0,),
        modes=("image", "text"),
    )


class TestRunPilot:
    """Training, evaluation and the summary table."""

    def test_rows_cover_the_variant_and_the_baseline(self, pilot: PilotResult) -> None:
        """Each policy is evaluated under each requested mode."""
        keys = [(row.policy, row.goal_mode) for row in pilot.rows]
        assert keys == [
            ("so", "image"),
            ("so", "text"),
            (BASELINE, "image"),
            (BASELINE, "text"),
        ]
        assert all(row.episodes == 4 for row in pilot.rows)
        assert all(0.0 <= row.spl <= row.success_rate <= 1.0 for row in pilot.rows)

    def test_summary_and_run_files_are_written(self, pilot: PilotResult) -> None:
        """The pilot leaves a summary, a support set and per-run reports."""
        out_dir = pilot.summary.parent
        assert (out_dir / "support.json").is_file()
        assert (out_dir / "so" / "seed-0" / "final.json").is_file()
        assert (out_dir / "so" / "seed-0" / "eval-text.csv").is_file()
        with pilot.summary.open(encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == PILOT_HEADER
        assert len(rows) == 5

    def test_table_averages_over_seeds(self, pilot: PilotResult) -> None:
        """The printed table has one line per policy."""
        lines = pilot.table().splitlines()
        assert lines[0].startswith("policy")
        assert [line.split()[0] for line in lines[1:]] == ["so", BASELINE]


class TestPilotResult:
    """Seed averaging without training."""

    def test_mean_success_averages_matching_rows(self, tmp_path: pathlib.Path) -> None:
        """Rows of other policies or modes are ignored."""
        rows = (
            PilotRow("psl", 0, "image", 10, 0.5, 0.25),
            PilotRow("psl", 1, "image", 10, 0.7, 0.5),
            PilotRow("psl", 0, "text", 10, 0.1, 0.1),
        )
        result = PilotResult(rows, tmp_path / "pilot.csv")
        assert result.mean_success("psl", "image") == pytest.approx(0.6)
        assert result.mean_success("zson", "image") == 0.0

    def test_rows_format_rates_with_six_decimals(self) -> None:
        """CSV rates share the codec's float format."""
        row = PilotRow("lo", 2, "text", 3, 1 / 3, 0.0)
        assert row.row() == ("lo", 2, "text", 3, "0.333333", "0.000000")
