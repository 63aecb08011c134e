import csv
import io as _io

import numpy as np

from cfv import gmm, pipeline, seeding, synthdata


class TestSeeding:
    def test_streams_independent_and_reproducible(self):
        a = seeding.stream(7, "gmm-init").random(5)
        b = seeding.stream(7, "gmm-init").random(5)
        c = seeding.stream(7, "svm-shuffle").random(5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_root_seed_changes_streams(self):
        assert seeding.stream_seed(1, "split") != seeding.stream_seed(2, "split")


class TestHelpers:
    def test_map_ordered(self):
        items = list(range(20))
        assert pipeline.map_ordered(lambda x: x * x, items, 4) == [x * x for x in items]

    def test_stratified_split(self):
        labels = np.array(["a"] * 10 + ["b"] * 6)
        tr, te = pipeline.stratified_split(labels, 0.5, np.random.default_rng(0))
        assert len(set(tr) & set(te)) == 0 and len(tr) + len(te) == 16
        assert (labels[tr] == "a").sum() == 5 and (labels[tr] == "b").sum() == 3

    def test_rows_to_csv(self):
        text = pipeline.rows_to_csv([{"x": np.float64(0.1), "y": 3}], ["x", "y"])
        assert list(csv.DictReader(_io.StringIO(text))) == [{"x": "0.1", "y": "3"}]


class TestFitModels:
    def test_refit_full(self):
        data = synthdata.twoclass_benchmark(seed=1, images_per_class=4, descriptors_per_image=80)
        models = pipeline.fit_models(data.sets, 3, 4, gmm.DIAGONAL, seed=0, refit_full=True)
        assert models.gmm.kind == gmm.FULL
        models.gmm.check_cache()


class TestSynthBench:
    def test_deterministic_rows(self):
        cfg = pipeline.SynthBenchConfig(ks=(2,), images_per_class=10, descriptors_per_image=40)
        a = pipeline.rows_to_csv(pipeline.run_synth_bench(cfg))
        b = pipeline.rows_to_csv(pipeline.run_synth_bench(cfg))
        assert a == b

    def test_workers_match(self):
        base = dict(ks=(2,), images_per_class=10, descriptors_per_image=40)
        one = pipeline.run_synth_bench(pipeline.SynthBenchConfig(**base))
        many = pipeline.run_synth_bench(pipeline.SynthBenchConfig(**base, workers=3))
        for r1, r2 in zip(one, many):
            assert abs(r1["accuracy_mean"] - r2["accuracy_mean"]) <= 1e-10

    def test_figure1_diagnostics(self):
        diag = pipeline.figure1_diagnostics(seed=0)
        assert diag.universal_offdiag < 1e-8
        assert np.all(np.abs(diag.component_rho) > 0.3)
        assert diag.histogram.mass_at_least_005 > 0.5
