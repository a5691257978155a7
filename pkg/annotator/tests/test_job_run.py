import json
import os

import pytest

from udannot import cli, conllu
from udannot.job import AnnotationJob, JobError, load_job, run_job


def _write_job(tmp_path, text):
    path = tmp_path / "job.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadJob:
    def test_full_job(self, tmp_path):
        path = _write_job(
            tmp_path,
            "lpair: deen\n"
            "mode: written\n"
            "source_lm:\n  de: hashed:3\n"
            "translation:\n  deen: copy\n"
            "encoder: ngram:32\n"
            "batch_size: 4\n"
            "device: cpu\n"
            "max_len: 128\n",
        )
        job = load_job(path)
        assert job.lpair == "deen"
        assert job.source_lm == {"de": "hashed:3"}
        assert job.translation == {"deen": "copy"}
        assert job.batch_size == 4
        assert job.max_len == 128

    def test_defaults(self, tmp_path):
        job = load_job(_write_job(tmp_path, "lpair: deen\n"))
        assert job.mode == "written"
        assert job.encoder == "ngram:64"
        assert job.device == "cpu"

    def test_unknown_key_rejected(self, tmp_path):
        path = _write_job(tmp_path, "lpair: deen\nmodle: x\n")
        with pytest.raises(JobError) as err:
            load_job(path)
        assert "modle" in str(err.value)

    def test_missing_lpair_rejected(self, tmp_path):
        with pytest.raises(JobError) as err:
            load_job(_write_job(tmp_path, "mode: written\n"))
        assert "lpair" in str(err.value)

    def test_scalar_source_lm_rejected(self, tmp_path):
        with pytest.raises(JobError):
            load_job(_write_job(tmp_path, "lpair: deen\nsource_lm: hashed:0\n"))

    def test_non_mapping_file_rejected(self, tmp_path):
        with pytest.raises(JobError):
            load_job(_write_job(tmp_path, "- a\n- b\n"))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(JobError):
            load_job(str(tmp_path / "absent.yaml"))

    def test_bad_lpair_rejected(self):
        with pytest.raises(JobError):
            AnnotationJob(lpair="de")

    def test_bad_batch_size_rejected(self):
        with pytest.raises(JobError):
            AnnotationJob(lpair="deen", batch_size=0)


class TestRunJob:
    def test_writes_complete_corpus_dir(self, corpus_dir, lexicon_path, tmp_path):
        out_dir = tmp_path / "out"
        job = AnnotationJob(
            lpair="deen",
            source_lm={"de": "hashed:0"},
            translation={"deen": f"lexicon:{lexicon_path}"},
        )
        report = run_job(job, str(corpus_dir), str(out_dir))
        paths = conllu.corpus_paths(str(out_dir), "written", "deen")
        for name in ("src", "tgt", "manifest", "links", "subtrees"):
            assert os.path.exists(paths[name]), name
        assert report["flags"] == []
        assert report["counts"]["pairs"] == 10
        assert report["counts"]["tokens_with_surprisal"] == 40
        assert report["counts"]["target_tokens_scored"] == 40
        assert report["counts"]["segments_force_decoded"] == 10
        assert report["counts"]["word_links"] > 0
        on_disk = json.load(open(out_dir / "report.json", encoding="utf-8"))
        assert on_disk == report

    def test_reruns_are_byte_identical(self, corpus_dir, lexicon_path, tmp_path):
        job = AnnotationJob(lpair="deen", translation={"deen": f"lexicon:{lexicon_path}"})
        first, second = tmp_path / "a", tmp_path / "b"
        run_job(job, str(corpus_dir), str(first))
        run_job(job, str(corpus_dir), str(second))
        names = sorted(os.listdir(first))
        assert names == sorted(os.listdir(second))
        for name in names:
            if name == "report.json":
                # paths inside differ by design; compare the rest
                a = json.load(open(first / name, encoding="utf-8"))
                b = json.load(open(second / name, encoding="utf-8"))
                a.pop("outputs"), b.pop("outputs")
                assert a == b
            else:
                assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_missing_required_input_rejected(self, tmp_path):
        job = AnnotationJob(lpair="deen")
        with pytest.raises(JobError) as err:
            run_job(job, str(tmp_path), str(tmp_path / "out"))
        assert "required input missing" in str(err.value)

    def test_bad_model_identifier_becomes_job_error(self, corpus_dir, tmp_path):
        job = AnnotationJob(lpair="deen", source_lm={"de": "hf:gpt2"})
        with pytest.raises(JobError) as err:
            run_job(job, str(corpus_dir), str(tmp_path / "out"))
        assert "checkpoint" in str(err.value)

    def test_unresolvable_manifest_row_flagged(self, corpus_dir, tmp_path):
        manifest_path = conllu.corpus_paths(str(corpus_dir), "written", "deen")["manifest"]
        rows = conllu.read_manifest(manifest_path)
        conllu.write_manifest(rows + [("d1", "s9", "s9")], manifest_path)
        report = run_job(AnnotationJob(lpair="deen"), str(corpus_dir), str(tmp_path / "out"))
        assert report["counts"]["pairs"] == 10
        assert any(flag.startswith("manifest d1/s9->s9") for flag in report["flags"])

    def test_org_side_copied_through(self, corpus_dir, tmp_path):
        paths = conllu.corpus_paths(str(corpus_dir), "written", "deen")
        org_text = "# newdoc id = e1\n# seg_id = s1\n1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n\n"
        with open(paths["org"], "w", encoding="utf-8") as fh:
            fh.write(org_text)
        out_dir = tmp_path / "out"
        report = run_job(AnnotationJob(lpair="deen"), str(corpus_dir), str(out_dir))
        out_org = conllu.corpus_paths(str(out_dir), "written", "deen")["org"]
        assert open(out_org, encoding="utf-8").read() == org_text
        assert "org" in report["outputs"]


class TestCli:
    def test_run_succeeds(self, corpus_dir, lexicon_path, tmp_path, capsys):
        config = tmp_path / "job.yaml"
        config.write_text(
            f"lpair: deen\ntranslation:\n  deen: lexicon:{lexicon_path}\n",
            encoding="utf-8",
        )
        out_dir = tmp_path / "out"
        rc = cli.main(["run", "--config", str(config), "--in", str(corpus_dir), "--out", str(out_dir)])
        captured = capsys.readouterr()
        assert rc == 0
        assert captured.out.startswith("annotated 10 pairs:")
        assert os.path.exists(out_dir / "report.json")

    def test_bad_config_exits_2(self, corpus_dir, tmp_path, capsys):
        config = tmp_path / "job.yaml"
        config.write_text("mode: written\n", encoding="utf-8")
        rc = cli.main(["run", "--config", str(config), "--in", str(corpus_dir), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_corpus_exits_2(self, tmp_path, capsys):
        config = tmp_path / "job.yaml"
        config.write_text("lpair: deen\n", encoding="utf-8")
        rc = cli.main(["run", "--config", str(config), "--in", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "required input missing" in capsys.readouterr().err

    def test_flags_reported_on_stderr(self, corpus_dir, tmp_path, capsys):
        manifest_path = conllu.corpus_paths(str(corpus_dir), "written", "deen")["manifest"]
        rows = conllu.read_manifest(manifest_path)
        conllu.write_manifest(rows + [("d2", "s8", "s8")], manifest_path)
        config = tmp_path / "job.yaml"
        config.write_text("lpair: deen\n", encoding="utf-8")
        rc = cli.main(["run", "--config", str(config), "--in", str(corpus_dir), "--out", str(tmp_path / "o")])
        assert rc == 0
        assert "flagged: manifest d2/s8->s8" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            cli.main(["--version"])
        assert exit_info.value.code == 0
        assert "udannot" in capsys.readouterr().out

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exit_info:
            cli.main([])
        assert exit_info.value.code == 2
