import csv
import math
from pathlib import Path

import numpy as np
import pytest

from qident.config import builtin_config
from qident.harness import (McSummary, RunRecord, _run_batch, checkpoint_grid, default_workers,
                            export_csv, lil_scale, monte_carlo, run_identification)

DATA = Path(__file__).parent / "data"


def test_checkpoint_grid():
    g = checkpoint_grid(100_000)
    assert g[0] == 10 and g[-1] == 100_000
    for p in range(1, 6):
        assert 10 ** p in g
    ratios = g[1:] / g[:-1]
    assert np.all((ratios > 1.1) & (ratios < 1.45))
    assert np.all(np.diff(g) > 0)
    np.testing.assert_array_equal(checkpoint_grid(12), [10, 12])
    np.testing.assert_array_equal(checkpoint_grid(5), [5])
    assert checkpoint_grid(0).size == 0


def test_lil_scale():
    assert lil_scale(1000) == pytest.approx(math.sqrt(1000 / math.log(math.log(1000))))
    assert math.isnan(lil_scale(2))
    np.testing.assert_allclose(lil_scale(np.array([10, 100])),
                               [math.sqrt(10 / math.log(math.log(10))),
                                math.sqrt(100 / math.log(math.log(100)))])


def test_golden_record_csv(tmp_path):
    rec = RunRecord(run_id=3, k=np.array([10, 100]), err_theta=np.array([0.5, 0.125]),
                    err_delta=np.array([0.25, 1 / 3]), theta_hat=np.array([[0.1, -0.2], [0.3, 1e-20]]))
    out = tmp_path / "rec.csv"
    export_csv(rec, out)
    assert out.read_bytes() == (DATA / "golden_record.csv").read_bytes()
    export_csv(rec, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()


def test_empty_record_is_header_only(tmp_path):
    rec = RunRecord(run_id=0, k=np.zeros(0, int), err_theta=np.zeros(0), err_delta=np.zeros(0),
                    theta_hat=np.zeros((0, 3)))
    export_csv(rec, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == ["run_id,k,err_theta,err_delta,scaled_err,theta_hat_0,theta_hat_1,theta_hat_2"]


def test_export_rejects_other_types(tmp_path):
    with pytest.raises(TypeError):
        export_csv({"k": 1}, tmp_path / "x.csv")


def test_scaled_err_column_matches_row(tmp_path):
    cfg = builtin_config("example1").with_overrides(steps=2000)
    rec = run_identification(cfg, seed=7)
    export_csv(rec, tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        for row in csv.DictReader(fh):
            k = int(row["k"])
            expect = math.sqrt(k / math.log(math.log(k))) * float(row["err_theta"])
            assert float(row["scaled_err"]) == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_identify_determinism(tmp_path):
    cfg = builtin_config("example2").with_overrides(steps=1000)
    export_csv(run_identification(cfg, seed=7), tmp_path / "a.csv")
    export_csv(run_identification(cfg, seed=7), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    export_csv(run_identification(cfg, seed=8), tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_lockstep_batch_equals_single_runs(name):
    cfg = builtin_config(name).with_overrides(steps=600)
    batch = _run_batch(cfg, [11, 12, 13])
    for r, seed in enumerate([11, 12, 13]):
        single = _run_batch(cfg, [seed])
        np.testing.assert_array_equal(batch["theta_hat"][r], single["theta_hat"][0])
        np.testing.assert_array_equal(batch["delta_hat"][r], single["delta_hat"][0])


def test_monte_carlo_smoke_and_worker_invariance(tmp_path):
    cfg = builtin_config("example1").with_overrides(steps=10, replicas=2)
    s = monte_carlo(cfg, workers=1)
    assert isinstance(s, McSummary) and s.replicas == 2
    assert s.k.tolist() == [10]
    for arr in (s.mean_err_theta, s.median_err, s.moment_p, s.mean_err2_theta, s.cr_ratio):
        assert arr.shape == (1,)
    assert s.err_theta.shape == (2, 1)
    cfg = cfg.with_overrides(steps=300, replicas=5)
    export_csv(monte_carlo(cfg, workers=1), tmp_path / "w1.csv")
    export_csv(monte_carlo(cfg, workers=2), tmp_path / "w2.csv")
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w2.csv").read_bytes()
    header = (tmp_path / "w1.csv").read_text().splitlines()[0]
    assert header == "k,mean_err2_theta,k_mse,median_err,mean_err2_delta,cr_ratio"


def test_summary_statistics():
    cfg = builtin_config("example1").with_overrides(steps=200, replicas=4)
    s = monte_carlo(cfg, workers=1, p=3)
    np.testing.assert_allclose(s.mean_err2_theta, np.mean(s.err_theta ** 2, axis=0))
    np.testing.assert_allclose(s.moment_p, np.mean(s.err_theta ** 3, axis=0))
    np.testing.assert_allclose(s.k_mse, s.k * s.mean_err2_theta)
    assert s.at(100) == int(np.flatnonzero(s.k == 100)[0])
    with pytest.raises(KeyError):
        s.at(99)


def test_running_max():
    rec = RunRecord(run_id=0, k=np.array([100, 1000, 10000]), err_theta=np.array([1.0, 0.1, 0.01]),
                    err_delta=np.zeros(3), theta_hat=np.zeros((3, 1)))
    assert rec.running_max_scaled(1000, 10000) == pytest.approx(max(lil_scale(1000) * 0.1,
                                                                    lil_scale(10000) * 0.01))


def test_default_workers(monkeypatch):
    monkeypatch.setenv("QIDENT_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("QIDENT_THREADS", "0")
    assert default_workers() >= 1
    monkeypatch.delenv("QIDENT_THREADS")
    assert default_workers() >= 1


def test_example1_single_run_accuracy():
    cfg = builtin_config("example1")
    rec = run_identification(cfg, seed=cfg.seed)
    assert rec.k[-1] == 100_000
    assert rec.err_theta[-1] <= 0.05
    assert rec.err_delta[-1] <= 0.02
