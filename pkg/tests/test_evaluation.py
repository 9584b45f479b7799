import numpy as np
import pytest
from hypothesis import given, strategies as st

from oaae import evaluation
from oaae.training import TrainConfig


def test_auroc_examples():
    assert evaluation.auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert evaluation.auroc([0.5, 0.5, 0.5, 0.5], [0, 0, 1, 1]) == 0.5
    assert evaluation.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert evaluation.auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auroc_undefined():
    with pytest.raises(evaluation.UndefinedAurocError):
        evaluation.auroc([0.1, 0.2], [1, 1])
    with pytest.raises(evaluation.UndefinedAurocError):
        evaluation.auroc([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        evaluation.auroc([0.1, 0.2], [0, 1, 1])


scores_and_flags = st.integers(2, 200).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 20).map(lambda k: k / 4), min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n)))


@given(scores_and_flags)
def test_auroc_matches_pairwise(pair):
    scores, flags = pair
    if all(flags) or not any(flags):
        return
    assert evaluation.auroc(scores, flags) == evaluation.auroc_pairwise(scores, flags)


@given(scores_and_flags)
def test_auroc_invariances(pair):
    scores, flags = map(np.asarray, pair)
    if flags.all() or not flags.any():
        return
    base = evaluation.auroc(scores, flags)
    assert evaluation.auroc(np.exp(3 * scores) + 1, flags) == pytest.approx(base, abs=1e-12)
    assert evaluation.auroc(scores, ~flags) == pytest.approx(1 - base, abs=1e-12)
    perm = np.random.default_rng(0).permutation(len(scores))
    assert evaluation.auroc(scores[perm], flags[perm]) == pytest.approx(base, abs=1e-12)


def test_latent_cosine_stats():
    z = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]])
    stats = evaluation.latent_cosine_stats(z, [0, 0, 1, 1])
    assert stats == {"intra_cos": 1.0, "inter_abs_cos": 0.0}


def test_protocol_spec():
    spec = evaluation.ProtocolSpec("synthetic", 1, synthetic={"num_classes": 3, "per_class": 4, "side": 8})
    assert spec.num_classes == 3 and spec.normal_classes == [0, 2]
    assert len(spec.load("train")) == 12
    with pytest.raises(ValueError):
        evaluation.ProtocolSpec("synthetic", 5, synthetic={"num_classes": 3})


SMALL_CFG = TrainConfig(epochs=1, batch_size=16, channels=(4, 4, 4), hidden=16, latent_dim=8)


def test_run_protocol_records_failed_cell(monkeypatch):
    spec = evaluation.ProtocolSpec("synthetic", 0, synthetic={"num_classes": 3, "per_class": 8, "side": 8})
    original = evaluation.ProtocolSpec.load

    def flaky(self, split):
        if self.novelty_class == 1:
            raise OSError("disk on fire")
        return original(self, split)

    monkeypatch.setattr(evaluation.ProtocolSpec, "load", flaky)
    report = evaluation.run_protocol(spec, SMALL_CFG, classes=[0, 1, 2])
    assert [c.novelty_class for c in report.cells] == [0, 1, 2]
    assert report.cells[1].auroc is None and "disk on fire" in report.cells[1].error
    assert report.cells[0].auroc is not None and report.cells[2].auroc is not None
    assert report.mean is None
    assert "FAIL" in report.table()


def test_report_csv_round_trip(tmp_path):
    report = evaluation.EvalReport("OAAE", "mnist", [evaluation.CellResult(0, 0.9), evaluation.CellResult(1, 0.7)])
    assert report.mean == pytest.approx(0.8)
    path = tmp_path / "r.csv"
    report.write_csv(path)
    report.write_json(tmp_path / "r.json")
    rows, columns = evaluation.read_report_csv(path)
    assert columns == [0, 1]
    assert rows == [("OAAE (mnist)", {0: 0.9, 1: 0.7}, pytest.approx(0.8))]
    table = report.table().splitlines()
    assert table[0].split() == ["method", "0", "1", "Mean"]
    assert table[1].split() == ["OAAE", "0.900", "0.700", "0.800"]


def test_run_protocol_repeats_average_seeds(tmp_path):
    spec = evaluation.ProtocolSpec("synthetic", 0, synthetic={"num_classes": 3, "per_class": 8, "side": 8})
    report = evaluation.run_protocol(spec, SMALL_CFG, repeats=2)
    cell = report.cells[0]
    assert cell.seeds == [0, 1] and len(cell.runs) == 2
    assert cell.auroc == pytest.approx(np.mean(cell.runs))
    single = evaluation.run_protocol(spec, SMALL_CFG).cells[0]
    assert single.runs == cell.runs[:1]
    report.write_csv(tmp_path / "r.csv")
    assert ",0 1," in (tmp_path / "r.csv").read_text().splitlines()[1]
    with pytest.raises(ValueError):
        evaluation.run_protocol(spec, SMALL_CFG, repeats=0)
