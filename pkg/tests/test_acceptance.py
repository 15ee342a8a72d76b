"""Exit criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (see ``conftest.py``).
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from specdemux import fixtures, harness
from specdemux.core import (
    DEFAULT_GRID,
    SensitivityMatrix,
    Spectrum,
    WavelengthGrid,
    forward_measure,
    psnr_arrays,
    psnr_from_mse,
)
from specdemux.errors import DivisionHazardError
from specdemux.forest import ForestConfig, best_split, forest_predict_batch, forest_train
from specdemux.specgen import SpectraGenConfig, build_dataset, detrend, generate_spectra_array
from specdemux.wiener import wiener_predict_batch, wiener_train

from . import oracles

RESULTS = []

MODEL_FILES = ("models/WEM.bin", "models/DEMUX-WEM.bin", "models/DEMUX-RFM.bin")


def record(cid, title, ok, detail):
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] C{cid} {title}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk") / "run1"
    cfg = harness.preset("desk", seed=42, output_dir=str(out))
    t0 = time.perf_counter()
    report = harness.run_simulation_experiment(cfg)
    return report, out, time.perf_counter() - t0


def test_c1_method_ordering(desk_run):
    report, _, elapsed = desk_run
    wem, dwem, rfm = (report.psnr[m] for m in harness.METHODS)
    ok = rfm > dwem > wem and rfm - wem >= 2.0 and elapsed <= 120.0
    record(1, "method ordering (desk preset, seed 42)", ok,
           f"WEM {wem:.2f} dB < DEMUX-WEM {dwem:.2f} dB < DEMUX-RFM {rfm:.2f} dB, "
           f"RFM-WEM margin {rfm - wem:.2f} dB (need >= 2), runtime {elapsed:.1f} s (limit 120)")


def test_c2_wiener_oracle_equivalence():
    spectra = generate_spectra_array(SpectraGenConfig(seed=2, count=2000), DEFAULT_GRID)
    data = build_dataset(spectra, fixtures.gaussian_sensor())
    model = wiener_train(data)
    want = np.array(oracles.normal_equations_wiener(data.spectra.tolist(), data.measurements.tolist(), 1e-8))
    err = np.linalg.norm(model.matrix - want) / np.linalg.norm(want)
    record(2, "Wiener vs normal-equations oracle (2000 pairs)", err <= 1e-8, f"relative Frobenius error {err:.2e}")


def test_c3_exact_recovery_square_system():
    r = np.random.default_rng(3)
    g = DEFAULT_GRID
    sens = SensitivityMatrix(g, np.eye(g.count) + 0.1 * r.uniform(size=(g.count, g.count)))
    model = wiener_train(build_dataset(r.uniform(size=(2000, g.count)), sens), ridge_epsilon=0.0)
    held_out = generate_spectra_array(SpectraGenConfig(seed=33, count=500), g)
    pred = wiener_predict_batch(model, build_dataset(held_out, sens).measurements)
    rel = float(np.max(np.linalg.norm(pred - held_out, axis=1) / np.linalg.norm(held_out, axis=1)))
    score = psnr_arrays(held_out, pred)
    record(3, "exact recovery, p = n invertible S, ridge 0", rel <= 1e-6 and score >= 120,
           f"max relative error {rel:.2e} (limit 1e-6), PSNR {score:.1f} dB")


def test_c4_forward_model_properties():
    r = np.random.default_rng(4)
    worst_lin, worst_zero = 0.0, 0.0
    for _ in range(1000):
        n = int(r.integers(2, 80))
        p = int(r.integers(1, 6))
        g = WavelengthGrid(400.0, 5.0, n)
        sens = SensitivityMatrix(g, r.uniform(0.0, 1.0, size=(p, n)) + 1e-6)
        l1, l2 = r.uniform(size=n), r.uniform(size=n)
        a, b = r.uniform(-5, 5, size=2)
        lhs = forward_measure(Spectrum(g, a * l1 + b * l2), sens).values
        rhs = a * forward_measure(Spectrum(g, l1), sens).values + b * forward_measure(Spectrum(g, l2), sens).values
        # relative to the magnitude of the summed terms, so cancellation does not inflate the ratio
        scale = (abs(a) * sens.rows @ l1 + abs(b) * sens.rows @ l2)
        worst_lin = max(worst_lin, float(np.max(np.abs(lhs - rhs) / scale)))
        worst_zero = max(worst_zero, float(np.max(np.abs(forward_measure(Spectrum(g, np.zeros(n)), sens).values))))
    record(4, "forward-model linearity and zero input (1000 instances)", worst_lin <= 1e-12 and worst_zero == 0.0,
           f"max relative linearity error {worst_lin:.2e}, max |S*0| {worst_zero:g}")


def test_c5_psnr_unit_values():
    exact = psnr_from_mse(0.01, peak=1.0)
    r = np.random.default_rng(5)
    t = r.uniform(size=(10, 61))
    e = 0.03 * r.normal(size=(10, 61))
    worst = 0.0
    for s in (1.1, 2.0, 3.7, 10.0, 1000.0):
        drop = psnr_arrays(t, t + e) - psnr_arrays(t, t + s * e)
        worst = max(worst, abs(drop - 20 * math.log10(s)))
    record(5, "PSNR unit values", exact == 20.0 and worst <= 1e-10,
           f"MSE 0.01 / peak 1 -> {exact!r} dB; scaling-law max deviation {worst:.1e} dB")


def test_c6_forest_correctness():
    r = np.random.default_rng(6)
    mismatches = 0
    for _ in range(100):
        m = int(r.integers(5, 60))
        p = int(r.integers(1, 4))
        X = r.uniform(size=(m, p))
        if r.uniform() < 0.3:
            X = np.round(X, 1)
        y = r.uniform(size=m)
        min_leaf = int(r.integers(1, 4))
        got = best_split(X, y, min_leaf)
        want = oracles.best_exhaustive_split(X.tolist(), y.tolist(), min_leaf)
        if (got is None) != (want is None):
            mismatches += 1
        elif got is not None and not math.isclose(got[2], want[0], rel_tol=1e-9, abs_tol=1e-15):
            mismatches += 1

    g = WavelengthGrid(410, 30, 11)
    sens = SensitivityMatrix(g, r.uniform(0.05, 1.0, size=(3, 11)))
    data = build_dataset(generate_spectra_array(SpectraGenConfig(seed=60, count=300), g), sens)
    memo = forest_train(data, ForestConfig(total_trees=11, max_depth=None, min_leaf_samples=1, bootstrap=False))
    train_mse = float(np.mean((forest_predict_batch(memo, data.measurements) - data.spectra) ** 2))

    model = forest_train(data, ForestConfig(total_trees=55, max_depth=10, seed=6))
    lo, hi = data.measurements.min(0), data.measurements.max(0)
    probes = r.uniform(lo - (hi - lo), hi + (hi - lo), size=(10000, 3))
    pred = forest_predict_batch(model, probes)
    out_of_range = int(np.count_nonzero((pred < data.spectra.min(0)) | (pred > data.spectra.max(0))))

    record(6, "forest correctness", mismatches == 0 and train_mse == 0.0 and out_of_range == 0,
           f"split mismatches {mismatches}/100, memorization training MSE {train_mse:g}, "
           f"out-of-range predictions {out_of_range}/{pred.size}")


def test_c7_determinism(desk_run, tmp_path):
    report, first, _ = desk_run
    second = tmp_path / "run2"
    harness.run_simulation_experiment(harness.preset("desk", seed=42, output_dir=str(second)))
    files = ("report.json",) + MODEL_FILES
    diff = [f for f in files if (Path(first) / f).read_bytes() != (second / f).read_bytes()]
    record(7, "desk-scale determinism", not diff,
           "byte-identical: " + ", ".join(files) if not diff else f"differs: {diff}")


def test_c8_detrend():
    r = np.random.default_rng(8)
    g = DEFAULT_GRID
    m = Spectrum(g, r.uniform(0.01, 10.0, size=g.count))
    err = float(np.max(np.abs(detrend(m, m, 0.99).values - 0.99)))
    ref = r.uniform(0.5, 1.0, size=g.count)
    ref[[0, 30]] = 0.0
    try:
        detrend(m, Spectrum(g, ref), 0.99)
        raised = ()
    except DivisionHazardError as exc:
        raised = exc.wavelengths_nm
    record(8, "detrend", err <= 1e-15 and raised == (410.0, 560.0),
           f"self-reference max deviation {err:.1e}; zero-reference bins reported at {raised}")
