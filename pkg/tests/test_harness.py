import json
import math
import re

import numpy as np
import pytest

from gaussalign.align import brute_force_permutation, score_matrix
from gaussalign.harness import (
    CELL_COLUMNS,
    CellSpec,
    SweepConfig,
    build_cells,
    cells_to_csv,
    read_cells,
    run_trial,
    sweep,
)
from gaussalign.model import CanonicalModel
from gaussalign.plotting import emit_plot, read_data_island
from gaussalign.synth import derive_trial_seed, sample_instance


def cell(n, rho, algorithm="map", tau=None, seed=1):
    return CellSpec(n, rho, algorithm, tau, 1.0, 1.0, seed)


def without_time(report):
    d = report.to_dict()
    d.pop("wall_time")
    return json.dumps(d, sort_keys=True)


class TestRunTrial:
    def test_single_user(self):
        for t in range(5):
            r = run_trial(cell(1, CanonicalModel([0.3])), t)["map"]
            assert r.exact and r.false_negatives == 0

    def test_strong_signal(self):
        rho = CanonicalModel.constant(0.999, 20)
        c = cell(5, rho, seed=77)
        for t in range(5):
            r = run_trial(c, t)["map"]
            assert r.exact
            inst = sample_instance(5, rho, derive_trial_seed(77, t))
            perm, _, _ = brute_force_permutation(score_matrix(inst.databases, rho).scores)
            np.testing.assert_array_equal(perm, inst.perm)

    def test_deterministic(self):
        c = cell(12, CanonicalModel.constant(0.7, 6), algorithm="both", tau=2.0)
        one, two = run_trial(c, 3), run_trial(c, 3)
        for a in ("map", "bht"):
            assert without_time(one[a]) == without_time(two[a])

    def test_failure_recorded(self):
        c = cell(4, CanonicalModel([0.5]), algorithm="bht", tau=math.nan)
        r = run_trial(c, 0)["bht"]
        assert r.error is not None
        assert r.to_dict()["error"]

    def test_bht_counts(self):
        rho = CanonicalModel.constant(0.9, 20)
        r = run_trial(cell(30, rho, algorithm="bht", tau=-1e9), 0)["bht"]
        assert r.false_negatives == 0 and r.false_positives == 30 * 29
        assert r.extra["predicted_size"] == 900


class TestConfig:
    def test_needs_one_source(self):
        with pytest.raises(ValueError):
            SweepConfig(n_values=[10])
        with pytest.raises(ValueError):
            SweepConfig(n_values=[10], rho=0.5, d_values=[3], rho_vector=[0.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            SweepConfig(n_values=[0], rho=0.5, d_values=[3])
        with pytest.raises(ValueError):
            SweepConfig(n_values=[5], rho=0.5, d_values=[3], trials=0)
        with pytest.raises(ValueError):
            SweepConfig(n_values=[5], rho=0.5, d_values=[3], algorithm="bht", tau_policy="grid")

    def test_default_trials(self):
        assert SweepConfig(n_values=[5], rho=0.5, d_values=[3]).trials == 100
        assert SweepConfig(n_values=[5], rho=0.5, d_values=[3], algorithm="bht").trials == 20

    def test_grid_cells(self):
        cfg = SweepConfig(n_values=[5, 6], rho=0.5, d_values=[2, 3], algorithm="bht", tau_policy="grid",
                          tau_grid=[0.0, 1.0, 2.0])
        assert len(build_cells(cfg)) == 12

    def test_model_file(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"mu_a": [0], "mu_b": [0], "sigma_a": [[4]], "sigma_b": [[1]], "sigma_ab": [[1.2]]}))
        cells = build_cells(SweepConfig(n_values=[5], model=str(path)))
        np.testing.assert_allclose(cells[0].rho.rho, [0.6])


class TestSweep:
    def test_single_cell(self, tmp_path):
        cfg = SweepConfig(n_values=[6], rho=0.8, d_values=[5], trials=1, master_seed=3, out_dir=str(tmp_path))
        cells = sweep(cfg)
        lines = (tmp_path / "cells.csv").read_text().splitlines()
        assert lines[0] == ",".join(CELL_COLUMNS)
        assert len(lines) == 2
        lone = run_trial(build_cells(cfg)[0], 0)["map"]
        assert cells[0].map_success_rate == float(lone.exact)
        assert cells[0].map_mean_errors == lone.false_negatives
        report = json.loads((tmp_path / "reports" / "cell000_trial0000.json").read_text())
        assert report["reports"]["map"]["exact"] == lone.exact
        assert (tmp_path / "plot.svg").exists()
        assert json.loads((tmp_path / "sweep.json").read_text())["generator"]["bit_generator"] == "PCG64"

    def test_csv_roundtrip(self, tmp_path):
        cfg = SweepConfig(n_values=[8], rho=0.7, d_values=[4, 8], algorithm="both", tau_policy="explicit", tau=3.0,
                          trials=4, out_dir=str(tmp_path))
        cells = sweep(cfg)
        back = read_cells(tmp_path / "cells.csv")
        assert cells_to_csv(back) == cells_to_csv(cells)
        assert (tmp_path / "plot_errors.svg").exists()

    def test_thread_invariance(self, tmp_path):
        base = dict(n_values=[10], rho=0.8, d_values=[6, 10], algorithm="both", tau_policy="explicit", tau=4.0,
                    trials=6, master_seed=9, write_reports=False)
        one = sweep(SweepConfig(**base, threads=1, out_dir=str(tmp_path / "a")))
        two = sweep(SweepConfig(**base, threads=2, out_dir=str(tmp_path / "b")))
        assert cells_to_csv(one) == cells_to_csv(two)

    def test_adding_cells_keeps_existing(self, tmp_path):
        small = sweep(SweepConfig(n_values=[8], rho=0.7, d_values=[6], trials=5), write=False)
        large = sweep(SweepConfig(n_values=[8], rho=0.7, d_values=[4, 6], trials=5), write=False)
        assert cells_to_csv(small).splitlines()[1] == cells_to_csv(large).splitlines()[2]

    def test_rate_halfwidth(self):
        cells = sweep(SweepConfig(n_values=[10], rho=0.7, d_values=[12], trials=20), write=False)
        p = cells[0].map_success_rate
        assert 0 <= p <= 1
        assert cells[0].map_success_halfwidth == pytest.approx(1.96 * math.sqrt(p * (1 - p) / 20))

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            sweep(SweepConfig(n_values=[3], rho=0.5, d_values=[1], trials=1, out_dir=str(blocker / "sub")))


class TestPlot:
    def test_single_cell(self, tmp_path):
        cells = sweep(SweepConfig(n_values=[10], rho=0.8, d_values=[8], trials=3), write=False)
        path = emit_plot(cells, "success-vs-I", tmp_path / "p.svg")
        text = path.read_text()
        assert text.lstrip().startswith("<?xml") or "<svg" in text[:400]
        rows = read_data_island(path)
        assert len(rows) == 1
        assert float(rows[0]["info_ratio"]) == pytest.approx(cells[0].info_ratio)

    def test_reference_lines_and_ticks(self, tmp_path):
        cells = sweep(SweepConfig(n_values=[10], rho=0.8, d_values=[2, 6, 10, 14], trials=3), write=False)
        text = emit_plot(cells, "success-vs-I", tmp_path / "p.svg").read_text()
        assert "I = ln n" in text and "I = 2 ln n" in text
        ticks = [float(t) for t in re.findall(r'<g id="xtick_\d+">.*?>(-?[0-9.]+)</text>', text, re.S)]
        assert {0.5, 1.0, 1.5, 2.0} <= set(ticks)

    def test_errors_kind(self, tmp_path):
        cells = sweep(SweepConfig(n_values=[10], rho=0.8, d_values=[6], algorithm="bht", tau_policy="grid",
                                  tau_grid=[0.0, 2.0, 4.0], trials=3), write=False)
        rows = read_data_island(emit_plot(cells, "errors-vs-I", tmp_path / "e.svg"))
        assert [float(r["tau"]) for r in rows] == [0.0, 2.0, 4.0]

    def test_deterministic_bytes(self, tmp_path):
        cells = sweep(SweepConfig(n_values=[10], rho=0.8, d_values=[4, 8], trials=3), write=False)
        a = emit_plot(cells, "success-vs-I", tmp_path / "a.svg").read_bytes()
        b = emit_plot(cells, "success-vs-I", tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_rejects_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot([], "success-vs-I", tmp_path / "x.svg")
