"""Integration tests for the semnav command line.

Each test drives :func:`semnav.cli.main` with an argument vector, the way a
shell would, over a scene set generated once per module from the tiny run
configuration.
"""

from __future__ import annotations

import csv
import json
import typing as typ

import pytest

from semnav import agent, cli, paths
from semnav.config import dump_run_config, run_config_from_mapping
from tests.unit.nav_test_support import TINY_RUN

if typ.TYPE_CHECKING:
    import pathlib

Capture = pytest.CaptureFixture[str]


def _invoke_cli(argv: list[str]) -> int:
    """Run the CLI, normalising Cyclopts' `SystemExit` into a return code."""
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return 0 if exc.code is None else int(exc.code)


def _config(root: pathlib.Path) -> list[str]:
    return ["--config", str(root / "tiny.yaml")]


def _inputs(root: pathlib.Path) -> list[str]:
    """Return the episode, scene and config options every command shares."""
    return [
        "--episodes",
        str(root / "episodes.json"),
        "--scenes",
        str(root / "scenes"),
        *_config(root),
    ]


def _oracle(tmp_path: pathlib.Path) -> str:
    path = tmp_path / "oracle.json"
    return str(agent.write_sentinel_checkpoint(path, agent.ORACLE_SENTINEL))


@pytest.fixture(autouse=True)
def output_dir(
    tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch
) -> pathlib.Path:
    """Send default outputs into the test's temporary directory."""
    target = tmp_path / "runs"
    monkeypatch.setenv(paths.ENV_OUTPUT_DIR, str(target))
    monkeypatch.delenv(cli.ENV_LOG_LEVEL, raising=False)
    return target


@pytest.fixture(scope="module")
def workspace(tmp_path_factory: pytest.TempPathFactory) -> pathlib.Path:
    """Return a directory holding a tiny config, scene set and episode file."""
    root = tmp_path_factory.mktemp("cli")
    dump_run_config(run_config_from_mapping(TINY_RUN), root / "tiny.yaml")
    scenes = ["scene", "gen", "--seed", "3", "--out", str(root / "scenes")]
    assert cli.main([*scenes, *_config(root)]) == 0
    episodes = [
        "episodes",
        "--scenes",
        str(root / "scenes"),
        "--out",
        str(root / "episodes.json"),
        "--count",
        "6",
    ]
    assert cli.main([*episodes, *_config(root)]) == 0
    return root


class TestVersionAndErrors:
    """Exit codes and the version banner."""

    def test_version_names_the_numeric_stack(self, capsys: Capture) -> None:
        """The banner reports Python, NumPy and Torch versions."""
        assert _invoke_cli(["--version"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("semnav ")
        assert "numpy" in out
        assert "torch" in out

    def test_unparseable_config_exits_two(
        self, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """Operational failures go to stderr with exit code 2."""
        broken = tmp_path / "broken.yaml"
        broken.write_text("world: [unclosed\n", encoding="utf-8")
        argv = ["codebook", "export", "--out", str(tmp_path / "cb.json")]
        assert _invoke_cli([*argv, "--config", str(broken)]) == 2
        captured = capsys.readouterr()
        assert "cannot parse run configuration" in captured.err
        assert captured.out == ""

    def test_invalid_config_exits_one(
        self, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """Rejected settings print their dotted key and exit 1."""
        bad = tmp_path / "bad.yaml"
        bad.write_text("world:\n  roms: 3\n", encoding="utf-8")
        argv = ["codebook", "export", "--out", str(tmp_path / "cb.json")]
        assert _invoke_cli([*argv, "--config", str(bad)]) == 1
        assert "'world.roms': unknown key" in capsys.readouterr().out

    def test_unknown_log_level_is_a_config_error(
        self,
        tmp_path: pathlib.Path,
        monkeypatch: pytest.MonkeyPatch,
        capsys: Capture,
    ) -> None:
        """``SEMNAV_LOG_LEVEL`` must name a logging level."""
        monkeypatch.setenv(cli.ENV_LOG_LEVEL, "chatty")
        argv = ["codebook", "export", "--out", str(tmp_path / "cb.json")]
        assert _invoke_cli(argv) == 1
        assert "SEMNAV_LOG_LEVEL" in capsys.readouterr().out

    def test_codebook_export_prints_its_digest(
        self, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """The exported codebook is identified by its SHA-256."""
        target = tmp_path / "cb.json"
        assert _invoke_cli(["codebook", "export", "--out", str(target)]) == 0
        assert "codebook sha256=" in capsys.readouterr().out
        assert target.is_file()


class TestSceneCommands:
    """Scene generation and display."""

    def test_gen_defaults_to_the_output_directory(
        self, workspace: pathlib.Path, output_dir: pathlib.Path, capsys: Capture
    ) -> None:
        """Without ``--out`` scenes land under ``$SEMNAV_OUTPUT_DIR/scenes``."""
        code = _invoke_cli(["scene", "gen", "--count", "1", *_config(workspace)])
        assert code == 0
        assert "wrote 1 scenes" in capsys.readouterr().out
        assert (output_dir / "scenes" / "manifest.json").is_file()

    def test_gen_is_reproducible(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path
    ) -> None:
        """The same seed writes the same scene files."""
        again = tmp_path / "again"
        argv = ["scene", "gen", "--seed", "3", "--out", str(again)]
        assert _invoke_cli([*argv, *_config(workspace)]) == 0
        original = workspace / "scenes"
        names = sorted(path.name for path in original.glob("scene-*.json"))
        assert names == sorted(path.name for path in again.glob("scene-*.json"))
        for name in names:
            assert (original / name).read_bytes() == (again / name).read_bytes()

    def test_negative_count_is_rejected(self, capsys: Capture) -> None:
        """Counts are checked before anything is written."""
        assert _invoke_cli(["scene", "gen", "--count=-1"]) == 1
        assert "--count" in capsys.readouterr().out

    def test_show_draws_the_floor_plan(
        self, workspace: pathlib.Path, capsys: Capture
    ) -> None:
        """Scene files print as ASCII maps."""
        scene_file = next((workspace / "scenes").glob("scene-*.json"))
        assert _invoke_cli(["scene", "show", str(scene_file)]) == 0
        picture = capsys.readouterr().out
        assert "#" in picture
        assert "." in picture


class TestEpisodeCommands:
    """Episode generation and goal diagnostics."""

    def test_episodes_write_the_goal_distribution(
        self, workspace: pathlib.Path
    ) -> None:
        """The goal-distribution CSV is written beside the episodes file."""
        text = (workspace / "episodes.json").read_text(encoding="utf-8")
        assert len(json.loads(text)["episodes"]) == 6
        csv_path = workspace / "episodes.goal-dist.csv"
        with csv_path.open(encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["category", "count"]
        assert any(row[0] == "ambiguous" for row in rows[1:])

    def test_goal_dist_prints_a_bar_chart(
        self, workspace: pathlib.Path, capsys: Capture
    ) -> None:
        """The diagnostic prints the ambiguous share and mean entropy."""
        assert _invoke_cli(["diagnose", "goal-dist", *_inputs(workspace)]) == 0
        out = capsys.readouterr().out
        assert "ambiguous=" in out
        assert "mean_entropy=" in out

    def test_codebook_dimension_mismatch_is_reported(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """Scene sets and configurations must agree on the embedding width."""
        narrow = tmp_path / "narrow.yaml"
        narrow.write_text(
            "semspace:\n  dim: 32\nagent:\n  spm_dim: 16\n", encoding="utf-8"
        )
        argv = [
            "episodes",
            "--scenes",
            str(workspace / "scenes"),
            "--out",
            str(tmp_path / "eps.json"),
            "--config",
            str(narrow),
        ]
        assert _invoke_cli(argv) == 1
        assert "semspace.dim" in capsys.readouterr().out

    @pytest.mark.parametrize(
        ("section", "key"),
        [
            ({"gap_magnitude": 0.0}, "semspace.gap_magnitude"),
            ({"temperature": 50.0}, "semspace.temperature"),
            ({"seed": 11}, "semspace.seed"),
            ({"categories": ["bed", "chair", "sofa"]}, "semspace.categories"),
        ],
    )
    def test_other_codebook_settings_must_match_the_scene_set(
        self,
        workspace: pathlib.Path,
        tmp_path: pathlib.Path,
        capsys: Capture,
        section: dict[str, object],
        key: str,
    ) -> None:
        """A changed setting is refused instead of silently replaced."""
        document = {**TINY_RUN, "semspace": section}
        changed = dump_run_config(
            run_config_from_mapping(document), tmp_path / "changed.yaml"
        )
        argv = [
            "eval",
            "--ckpt",
            _oracle(tmp_path),
            "--episodes",
            str(workspace / "episodes.json"),
            "--scenes",
            str(workspace / "scenes"),
            "--config",
            str(changed),
        ]
        assert _invoke_cli(argv) == 1
        assert key in capsys.readouterr().out


class TestSupportAndEvaluation:
    """Support sets, expanded goals and scripted-policy evaluation."""

    def test_expanded_goals_without_support_set_explain_the_fix(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """The error names the command that builds a support set."""
        argv = ["eval", "--ckpt", _oracle(tmp_path), *_inputs(workspace)]
        assert _invoke_cli([*argv, "--goal-mode", "text-expanded"]) == 1
        out = capsys.readouterr().out
        assert "semnav support" in out
        assert "--support-set" in out

    def test_oracle_evaluation_succeeds_everywhere(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """The shortest-path oracle scores SR = SPL = 1 and writes the report."""
        report = tmp_path / "eval.csv"
        argv = ["eval", "--ckpt", _oracle(tmp_path), *_inputs(workspace)]
        assert _invoke_cli([*argv, "--out", str(report)]) == 0
        assert "episodes=6 SR=1.0000 SPL=1.0000" in capsys.readouterr().out
        with report.open(encoding="utf-8") as handle:
            assert len(list(csv.DictReader(handle))) == 6

    def test_support_then_expanded_evaluation_and_gap_closure(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """A built support set unlocks expanded goals and the gap diagnostic."""
        support = tmp_path / "support.json"
        inputs = _inputs(workspace)
        assert _invoke_cli(["support", *inputs, "--out", str(support)]) == 0
        assert "lambda=0.8" in capsys.readouterr().out

        argv = [
            "eval",
            "--ckpt",
            _oracle(tmp_path),
            *inputs,
            "--goal-mode",
            "text-expanded",
            "--support-set",
            str(support),
            "--out",
            str(tmp_path / "expanded.csv"),
        ]
        assert _invoke_cli(argv) == 0
        assert "mode=text_expanded" in capsys.readouterr().out

        dump = tmp_path / "embeddings.jsonl"
        argv = ["diagnose", "gap-closure", *inputs, "--support-set", str(support)]
        assert _invoke_cli([*argv, "--dump", str(dump)]) == 0
        assert "closure=" in capsys.readouterr().out
        assert dump.is_file()

    def test_lambda_outside_the_unit_interval_is_rejected(
        self, workspace: pathlib.Path, tmp_path: pathlib.Path, capsys: Capture
    ) -> None:
        """The deduplication threshold is a cosine in (0, 1]."""
        argv = ["support", *_inputs(workspace), "--out", str(tmp_path / "s.json")]
        assert _invoke_cli([*argv, "--lambda", "1.5"]) == 1
        assert "--lambda" in capsys.readouterr().out


class TestTrainCommand:
    """Training through the command line."""

    def test_train_writes_checkpoints_and_config(
        self, workspace: pathlib.Path, output_dir: pathlib.Path, capsys: Capture
    ) -> None:
        """A tiny run records its configuration and final weights."""
        argv = ["train", *_inputs(workspace), "--variant", "lo"]
        assert _invoke_cli(argv) == 0
        assert "rounds=2" in capsys.readouterr().out
        run_dir = output_dir / "train"
        assert (run_dir / "final.json").is_file()
        recorded = (run_dir / "config.yaml").read_text(encoding="utf-8")
        assert "variant: lo" in recorded

    def test_unknown_variant_is_rejected(
        self, workspace: pathlib.Path, capsys: Capture
    ) -> None:
        """Variant names are validated before training starts."""
        argv = ["train", *_inputs(workspace), "--variant", "rl"]
        assert _invoke_cli(argv) == 1
        assert "agent.variant" in capsys.readouterr().out
