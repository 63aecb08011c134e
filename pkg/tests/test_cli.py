import csv
import math

import numpy as np
import pytest
from PIL import Image as PilImage

from cfv import cli, io
from cfv.descriptors import DescriptorSet


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def images(tmp_path):
    src = tmp_path / "img"
    src.mkdir()
    r = np.random.default_rng(0)
    for i in range(3):
        arr = (r.random((40, 48, 3)) * 255).astype(np.uint8)
        PilImage.fromarray(arr).save(src / f"im{i}.png")
    with open(tmp_path / "labels.csv", "w") as fh:
        fh.write("path,label\n")
        for i in range(3):
            fh.write(f"img/im{i}.png,{'ab'[i % 2]}\n")
    return src


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    """Small emitted benchmark: manifest with a split column."""
    out = tmp_path_factory.mktemp("synth")
    code = cli.main(["synth-bench", "--output", str(out), "--ks", "2", "--images-per-class", "12",
                     "--descriptors-per-image", "60", "--emit-descriptors", "--no-figures"])
    assert code == 0
    return out / "descriptors" / "manifest.csv"


@pytest.fixture(scope="module")
def cfv_container(synth, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "cfv.json"
    assert cli.main(["train-models", "--manifest", str(synth), "--output", str(path),
                     "--pca-dim", "3", "-K", "2"]) == 0
    return path


class TestExtract:
    def test_three_images(self, tmp_path, images):
        out = tmp_path / "desc"
        code = cli.main(["extract", "--input", str(images), "--labels",
                         str(tmp_path / "labels.csv"), "--output", str(out), "--scales", "2"])
        assert code == 0
        rows = read_csv(out / "manifest.csv")
        assert len(rows) == 3 and len(list(out.glob("*.cfvd"))) == 3
        assert [r["label"] for r in rows] == ["a", "b", "a"]
        assert io.load_descriptors(out / "im0.cfvd").dim == 128

    def test_idempotent(self, tmp_path, images):
        for name in ("a", "b"):
            assert cli.main(["extract", "--input", str(images), "--output",
                             str(tmp_path / name), "--descriptor", "lbp", "--scales", "2"]) == 0
        for f in sorted((tmp_path / "a").glob("*.cfvd")):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        assert io.load_descriptors(tmp_path / "a" / "im0.cfvd").dim == 177

    def test_empty_dir(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        code = cli.main(["extract", "--input", str(tmp_path / "empty"), "--output",
                         str(tmp_path / "o")])
        assert code == 2
        assert "0 images" in capsys.readouterr().err

    def test_missing_label(self, tmp_path, images):
        (tmp_path / "few.csv").write_text("path,label\nimg/im0.png,a\n")
        code = cli.main(["extract", "--input", str(images), "--labels", str(tmp_path / "few.csv"),
                         "--output", str(tmp_path / "o")])
        assert code == 3

    def test_unreadable_image(self, tmp_path):
        (tmp_path / "bad").mkdir()
        (tmp_path / "bad" / "x.png").write_bytes(b"junk")
        assert cli.main(["extract", "--input", str(tmp_path / "bad"), "--output",
                         str(tmp_path / "o")]) == 3


class TestTrainModels:
    def test_container_round_trip(self, cfv_container):
        buf = cfv_container.read_bytes()
        sections, meta = io.container_from_bytes(buf)
        assert io.container_to_bytes(sections, meta) == buf
        assert sections["gmm"].kind == "full" and sections["gmm"].K == 2

    def test_pca_dim_too_large(self, synth, tmp_path, capsys):
        code = cli.main(["train-models", "--manifest", str(synth), "--output",
                         str(tmp_path / "m.json"), "--pca-dim", "5", "-K", "2"])
        assert code == 2
        assert "exceeds descriptor dimension 3" in capsys.readouterr().err
        assert not (tmp_path / "m.json").exists()

    def test_fv_with_full_rejected(self, synth, tmp_path):
        assert cli.main(["train-models", "--manifest", str(synth), "--output",
                         str(tmp_path / "m.json"), "--pca-dim", "3", "-K", "2",
                         "--encoder", "fv", "--covariance", "full"]) == 2

    def test_k1_encodes_near_zero_on_pool(self, tmp_path):
        r = np.random.default_rng(1)
        x = r.standard_normal((2000, 3)) @ [[1, 0.5, 0], [0, 1, 0.5], [0, 0, 1]]
        rows = []
        for i in range(4):
            p = tmp_path / f"s{i}.cfvd"
            io.save_descriptors(DescriptorSet(x[i * 500:(i + 1) * 500]), p)
            rows.append({"path": str(p), "label": "x"})
        io.write_manifest(rows, tmp_path / "m.csv")
        pooled = tmp_path / "pool.cfvd"
        io.save_descriptors(DescriptorSet(x), pooled)
        io.write_manifest([{"path": str(pooled), "label": "x"}], tmp_path / "pool.csv")
        assert cli.main(["train-models", "--manifest", str(tmp_path / "m.csv"), "--output",
                         str(tmp_path / "k1.json"), "--pca-dim", "3", "-K", "1"]) == 0
        assert cli.main(["encode", "--container", str(tmp_path / "k1.json"), "--manifest",
                         str(tmp_path / "pool.csv"), "--output", str(tmp_path / "enc"),
                         "--no-power-norm", "--no-l2-norm"]) == 0
        v = io.load_encoded(tmp_path / "enc" / "pool.cfve").values
        # float32 storage of the descriptors limits the fixpoint
        assert np.max(np.abs(v)) < 1e-5

    def test_config_file(self, synth, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# model settings\npca-dim = 2\ncomponents = 3\ncovariance = diagonal\n")
        assert cli.main(["train-models", "--config", str(cfg), "--manifest", str(synth),
                         "--output", str(tmp_path / "m.json"), "--encoder", "fv"]) == 0
        sections, _ = io.load_container(tmp_path / "m.json")
        assert sections["gmm"].K == 3 and sections["pca"].output_dim == 2
        assert sections["gmm"].kind == "diagonal"

    def test_flags_override_config(self, synth, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("pca-dim = 2\ncomponents = 3\n")
        assert cli.main(["train-models", "--config", str(cfg), "--manifest", str(synth),
                         "--output", str(tmp_path / "m.json"), "-K", "2"]) == 0
        sections, _ = io.load_container(tmp_path / "m.json")
        assert sections["gmm"].K == 2

    def test_unknown_config_key(self, synth, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("pca-dim = 2\nbogus = 1\n")
        assert cli.main(["train-models", "--config", str(cfg), "--manifest", str(synth),
                         "--output", str(tmp_path / "m.json"), "-K", "2"]) == 2

    def test_bad_range(self, synth, tmp_path):
        assert cli.main(["train-models", "--manifest", str(synth), "--output",
                         str(tmp_path / "m.json"), "--pca-dim", "2", "-K", "0"]) == 2
        assert cli.main(["train-models", "--manifest", str(synth), "--output",
                         str(tmp_path / "m.json"), "--pca-dim", "2", "-K", "2",
                         "--alpha", "2"]) == 2


class TestEncode:
    def test_cfv_length_176(self, tmp_path):
        r = np.random.default_rng(2)
        rows = []
        for i in range(3):
            p = tmp_path / f"d{i}.cfvd"
            io.save_descriptors(DescriptorSet(r.standard_normal((200, 10))), p)
            rows.append({"path": str(p), "label": str(i % 2)})
        io.write_manifest(rows, tmp_path / "m.csv")
        assert cli.main(["train-models", "--manifest", str(tmp_path / "m.csv"), "--output",
                         str(tmp_path / "c.json"), "--pca-dim", "8", "-K", "4"]) == 0
        assert cli.main(["encode", "--container", str(tmp_path / "c.json"), "--manifest",
                         str(tmp_path / "m.csv"), "--output", str(tmp_path / "e"), "--text"]) == 0
        ev = io.load_encoded(tmp_path / "e" / "d0.cfve")
        assert len(ev) == 176
        assert (tmp_path / "e" / "d0.cfve").stat().st_size == io._ENC_HEADER.size + 176 * 4
        assert len(io.read_vectors_text(tmp_path / "e" / "vectors.txt")) == 3

    def test_fv_on_full_gmm(self, synth, cfv_container, tmp_path, capsys):
        code = cli.main(["encode", "--container", str(cfv_container), "--manifest", str(synth),
                         "--output", str(tmp_path / "e"), "--encoder", "fv"])
        assert code == 2
        err = capsys.readouterr().err
        assert "diagonal" in err and "full" in err

    def test_bow_sums_to_one(self, synth, cfv_container, tmp_path):
        assert cli.main(["encode", "--container", str(cfv_container), "--manifest", str(synth),
                         "--output", str(tmp_path / "e"), "--encoder", "bow"]) == 0
        for r in read_csv(tmp_path / "e" / "manifest.csv"):
            v = io.load_encoded(tmp_path / "e" / r["path"]).values
            assert abs(v.sum() - 1.0) < 1e-6  # float32 payload

    def test_dimension_mismatch(self, cfv_container, tmp_path):
        p = tmp_path / "x.cfvd"
        io.save_descriptors(DescriptorSet(np.zeros((4, 5))), p)
        io.write_manifest([{"path": str(p), "label": "a"}], tmp_path / "m.csv")
        assert cli.main(["encode", "--container", str(cfv_container), "--manifest",
                         str(tmp_path / "m.csv"), "--output", str(tmp_path / "e")]) == 2

    def test_workers_match_single_thread(self, synth, cfv_container, tmp_path):
        for w in ("1", "3"):
            assert cli.main(["encode", "--container", str(cfv_container), "--manifest", str(synth),
                             "--output", str(tmp_path / w), "--workers", w]) == 0
        for f in (tmp_path / "1").glob("*.cfve"):
            assert f.read_bytes() == (tmp_path / "3" / f.name).read_bytes()


@pytest.fixture(scope="module")
def encoded(synth, cfv_container, tmp_path_factory):
    out = tmp_path_factory.mktemp("enc")
    assert cli.main(["encode", "--container", str(cfv_container), "--manifest", str(synth),
                     "--output", str(out)]) == 0
    return out / "manifest.csv"


class TestClassify:
    def test_fixed_split(self, encoded, tmp_path):
        outs = []
        for name in ("a", "b"):
            assert cli.main(["classify", "--manifest", str(encoded), "--output",
                             str(tmp_path / name)]) == 0
            outs.append((tmp_path / name / "summary.csv").read_bytes())
        assert outs[0] == outs[1]
        summary = read_csv(tmp_path / "a" / "summary.csv")[0]
        assert summary["splits"] == "1"
        assert {"encoder", "K", "D", "alpha", "gamma"} <= set(summary)
        assert summary["encoder"] == "cfv" and summary["K"] == "2" and summary["D"] == "3"
        assert (tmp_path / "a" / "confusion.png").stat().st_size > 0
        conf = read_csv(tmp_path / "a" / "confusion.csv")
        assert sum(int(v) for row in conf for k, v in row.items() if k != "true") == 12

    def test_repeated_splits_mean(self, encoded, tmp_path):
        rows = read_csv(encoded)
        for r in rows:
            r.pop("split")
            r["path"] = str(encoded.parent / r["path"])
        io.write_manifest(rows, tmp_path / "nosplit.csv")
        assert cli.main(["classify", "--manifest", str(tmp_path / "nosplit.csv"), "--output",
                         str(tmp_path / "o"), "--train-fraction", "0.5", "--repeats", "4",
                         "--no-figures"]) == 0
        per_split = [float(r["accuracy"]) for r in read_csv(tmp_path / "o" / "splits.csv")]
        summary = read_csv(tmp_path / "o" / "summary.csv")[0]
        assert len(per_split) == 4
        assert abs(float(summary["accuracy_mean"]) - math.fsum(per_split) / 4) < 1e-12

    def test_missing_split(self, encoded, tmp_path, capsys):
        rows = read_csv(encoded)
        for r in rows:
            r["path"] = str(encoded.parent / r["path"])
        io.write_manifest(rows, tmp_path / "nosplit.csv")
        assert cli.main(["classify", "--manifest", str(tmp_path / "nosplit.csv"), "--output",
                         str(tmp_path / "o")]) == 2
        assert "missing split definitions" in capsys.readouterr().err

    def test_model_out(self, encoded, tmp_path):
        assert cli.main(["classify", "--manifest", str(encoded), "--output", str(tmp_path / "o"),
                         "--model-out", str(tmp_path / "svm.json"), "--no-figures"]) == 0
        sections, meta = io.load_container(tmp_path / "svm.json")
        assert sections["svm"].num_classes == 2 and meta["encoder"] == "cfv"


class TestAnalyze:
    def test_outputs(self, synth, cfv_container, tmp_path, capsys):
        assert cli.main(["analyze", "--container", str(cfv_container), "--manifest", str(synth),
                         "--output", str(tmp_path)]) == 0
        for split in ("train", "test"):
            for ext in ("txt", "dat"):
                edges, freq = cli.read_histogram_table(tmp_path / f"hist_{split}.{ext}")
                assert abs(freq.sum() - 1.0) < 1e-9
                assert edges[0] == 0.0 and edges[-1] == 1.0
        summary = read_csv(tmp_path / "summary.csv")
        assert [r["split"] for r in summary] == ["test", "train"]
        assert "mass_below_0.05" in summary[0] and "mass_0.05_to_0.5" in summary[0]
        assert "below 0.05" in capsys.readouterr().out
        assert (tmp_path / "correlation_histograms.png").exists()


class TestSynthBench:
    def test_report_csv(self, tmp_path):
        assert cli.main(["synth-bench", "--output", str(tmp_path), "--ks", "2,4",
                         "--images-per-class", "10", "--descriptors-per-image", "50"]) == 0
        rows = read_csv(tmp_path / "report.csv")
        assert len(rows) == 4
        assert sorted((r["encoder"], r["K"]) for r in rows) == [
            ("cfv", "2"), ("cfv", "4"), ("fv", "2"), ("fv", "4")]
        for r in rows:
            assert 0 <= float(r["accuracy_mean"]) <= 1
        for name in ("accuracy_vs_k.png", "figure1.png", "figure1_correlations.png",
                     "figure1.csv"):
            assert (tmp_path / name).stat().st_size > 0

    def test_bad_dims(self, tmp_path):
        assert cli.main(["synth-bench", "--output", str(tmp_path), "--dims", "4"]) == 2

    def test_argparse_error_exit_code(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["synth-bench"])
        assert exc.value.code == 2


class TestConfigFile:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("a-b = 1  # comment\n\n# only comment\nc_d=x y\n")
        assert cli.read_config_file(p) == {"a_b": "1", "c_d": "x y"}

    def test_malformed(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("novalue\n")
        with pytest.raises(Exception):
            cli.read_config_file(p)

    def test_bool_values(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("power-norm = off\nks = 2,4\n")
        args = cli.parse_args(["synth-bench", "--config", str(p), "--output", "x"])
        assert args.power_norm is False and args.ks == (2, 4)
