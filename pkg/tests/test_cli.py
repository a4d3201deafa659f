"""Command-line surface: wiring, exit codes, reproducibility."""

import json

import pytest

from crowdtest.cli import main


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def synth_dir(tmp_path, capsys):
    out = tmp_path / "data"
    code, _, _ = run(
        [
            "synth", "--participants", "8", "--questions", "6", "--options", "3",
            "--seed", "5", "--out-dir", str(out),
            "--discrimination", "fixed:1.0",
        ],
        capsys,
    )
    assert code == 0
    return out


class TestSynthCommand:
    def test_writes_all_files(self, synth_dir):
        for name in ("responses.csv", "questions.csv", "gold.csv", "truth.json"):
            assert (synth_dir / name).exists()
        truth = json.loads((synth_dir / "truth.json").read_text())
        assert len(truth["abilities"]) == 8
        assert len(truth["difficulties"]) == 6

    def test_byte_reproducible(self, tmp_path, capsys):
        args = [
            "synth", "--participants", "5", "--questions", "4", "--options", "2",
            "--seed", "7", "--discrimination", "fixed:1.0",
        ]
        code1, _, _ = run(args + ["--out-dir", str(tmp_path / "a")], capsys)
        code2, _, _ = run(args + ["--out-dir", str(tmp_path / "b")], capsys)
        assert code1 == code2 == 0
        for name in ("responses.csv", "questions.csv", "gold.csv", "truth.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()


class TestInferCommand:
    def test_writes_posteriors(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "post.json"
        code, _, err = run(
            [
                "infer",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--gold", str(synth_dir / "gold.csv"),
                "--out", str(out),
                "--discrimination", "fixed:1.0",
            ],
            capsys,
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["questions"]) == 6
        assert len(doc["participants"]) == 8
        for q in doc["questions"].values():
            assert sum(q["answer_dist"]) == pytest.approx(1.0, abs=1e-9)
        assert "config:" in err

    def test_validation_error_exits_one(self, synth_dir, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("participant_id,question_id,response\na,zzz,0\n")
        code, _, err = run(
            [
                "infer", "--responses", str(bad),
                "--questions", str(synth_dir / "questions.csv"),
                "--out", str(tmp_path / "p.json"),
            ],
            capsys,
        )
        assert code == 1
        assert "zzz" in err

    def test_unknown_flag_exits_one(self, capsys):
        code, _, _ = run(["infer", "--bogus"], capsys)
        assert code == 1


class TestStaticSetCommand:
    def test_prints_ordered_ids(self, synth_dir, capsys):
        code, out, _ = run(
            [
                "static-set",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--gold", str(synth_dir / "gold.csv"),
                "--budget", "3",
            ],
            capsys,
        )
        assert code == 0
        ids = out.strip().splitlines()
        assert len(ids) == 3
        assert len(set(ids)) == 3


class TestEvalCommand:
    def test_scatter_on_files(self, synth_dir, tmp_path, capsys):
        code, out, _ = run(
            [
                "eval", "scatter-skill",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--gold", str(synth_dir / "gold.csv"),
                "--discrimination", "fixed:1.0",
                "--out", str(tmp_path / "scatter"),
            ],
            capsys,
        )
        assert code == 0
        assert out.startswith("metric\tvalue")
        assert (tmp_path / "scatter.summary.tsv").exists()
        rows = (tmp_path / "scatter.rows.tsv").read_text().splitlines()
        assert rows[0] == "participant\traw_score\tmodel_raw_score"
        assert len(rows) == 1 + 8

    def test_eval_deterministic(self, synth_dir, tmp_path, capsys):
        args = [
            "eval", "crowd-curve",
            "--responses", str(synth_dir / "responses.csv"),
            "--questions", str(synth_dir / "questions.csv"),
            "--gold", str(synth_dir / "gold.csv"),
            "--discrimination", "fixed:1.0",
            "--sizes", "2,4", "--reps", "3", "--seed", "11",
        ]
        code1, out1, _ = run(args, capsys)
        code2, out2, _ = run(args, capsys)
        assert code1 == code2 == 0
        assert out1 == out2


class TestPriorsResolution:
    def test_env_override(self, synth_dir, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CROWDTEST_ABILITY_PRIOR", "0.5,2.0")
        code, _, err = run(
            [
                "infer",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--out", str(tmp_path / "p.json"),
            ],
            capsys,
        )
        assert code == 0
        assert '"ability": [0.5, 2.0]' in err

    def test_flag_beats_env(self, synth_dir, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CROWDTEST_ABILITY_PRIOR", "0.5,2.0")
        code, _, err = run(
            [
                "infer",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--out", str(tmp_path / "p.json"),
                "--ability-prior=-1.0,3.0",
            ],
            capsys,
        )
        assert code == 0
        assert '"ability": [-1.0, 3.0]' in err

    def test_priors_file(self, synth_dir, tmp_path, capsys):
        priors = tmp_path / "priors.json"
        priors.write_text(json.dumps({"precision": [3.0, 0.25]}))
        code, _, err = run(
            [
                "infer",
                "--responses", str(synth_dir / "responses.csv"),
                "--questions", str(synth_dir / "questions.csv"),
                "--out", str(tmp_path / "p.json"),
                "--priors", str(priors),
            ],
            capsys,
        )
        assert code == 0
        assert '"precision": [3.0, 0.25]' in err
