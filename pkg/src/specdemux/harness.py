"""End-to-end experiments: simulated-sensor evaluation and the fixture icon run.

Both experiments train the same three demultiplexers:

``WEM``        Wiener estimator trained on the 24-spectrum patch set
``DEMUX-WEM``  Wiener estimator trained on the forward-model dataset
``DEMUX-RFM``  random forest trained on the forward-model dataset

and score them by pooled PSNR against the true test spectra.
"""

from __future__ import annotations

import configparser
import contextlib
import csv
import dataclasses
import hashlib
import json
import math
import shutil
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import fixtures
from .core import DEFAULT_GRID, WavelengthGrid, psnr_from_mse
from .csvio import read_wavelength_table, write_wavelength_table
from .errors import DataFormatError, ExperimentError, SpecDemuxError, UsageError
from .forest import ForestConfig, forest_predict_batch, forest_train
from .rng import derive_seed
from .specgen import SpectraGenConfig, build_dataset, generate_spectra_array
from .wiener import DEFAULT_RIDGE, wiener_predict_batch, wiener_train

METHODS = ("WEM", "DEMUX-WEM", "DEMUX-RFM")
REPORT_FORMAT = "specdemux.report"
REPORT_VERSION = 1

# substream keys under the experiment seed
_TRAIN, _TEST, _FOREST, _NOISE = 0, 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    grid: WavelengthGrid = DEFAULT_GRID
    sensitivity: str = fixtures.FIXTURE
    train_count: int = 2000
    test_count: int = 500
    bump_count_range: tuple = (1, 4)
    bump_width_range_nm: tuple = (10.0, 80.0)
    amplitude_range: tuple = (0.05, 1.0)
    forest: ForestConfig = field(default_factory=lambda: ForestConfig(total_trees=61 * 30))
    wiener_ridge: float = DEFAULT_RIDGE
    wem_patch_set: str = fixtures.FIXTURE
    icon_set: str = fixtures.FIXTURE
    noise_sigma: float = 0.0
    reuse_train_as_test: bool = False
    seed: int = 42
    output_dir: Optional[str] = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.train_count < 1 or self.test_count < 1:
            raise UsageError("train_count and test_count must be >= 1")
        if self.wiener_ridge < 0:
            raise UsageError("wiener ridge must be >= 0")
        if self.noise_sigma < 0:
            raise UsageError("noise sigma must be >= 0")

    def generator(self, seed, count):
        return SpectraGenConfig(seed=seed, count=count, bump_count_range=tuple(self.bump_count_range),
                                bump_width_range_nm=tuple(self.bump_width_range_nm),
                                amplitude_range=tuple(self.amplitude_range))

    def echo(self):
        """Result-relevant settings (output location and worker count excluded)."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("n_jobs")
        for key in ("bump_count_range", "bump_width_range_nm", "amplitude_range"):
            d[key] = list(d[key])
        return d


PRESETS = {
    "desk": ExperimentConfig(),
    "paper": ExperimentConfig(train_count=10000, test_count=10000, forest=ForestConfig(total_trees=8000)),
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise UsageError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
    return replace(base, **overrides)


_INI_SCHEMA = {
    "experiment": {"preset": str, "seed": int, "train_count": int, "test_count": int, "sensitivity": str,
                   "wem_patch_set": str, "icon_set": str, "noise_sigma": float, "n_jobs": int,
                   "reuse_train_as_test": bool, "output_dir": str},
    "grid": {"start_nm": float, "step_nm": float, "count": int},
    "generator": {"bump_count_min": int, "bump_count_max": int, "bump_width_min_nm": float,
                  "bump_width_max_nm": float, "amplitude_min": float, "amplitude_max": float},
    "wiener": {"ridge_epsilon": float},
    "forest": {"total_trees": int, "max_depth": str, "min_leaf_samples": int, "bootstrap": bool},
}


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an INI experiment file (see ``data/experiment_example.ini`` for every key).

    Unknown sections or keys are rejected. Keyword ``overrides`` are applied
    last, e.g. a ``seed`` given on the command line.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise DataFormatError(f"{path}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _INI_SCHEMA:
            raise DataFormatError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            kind = _INI_SCHEMA[section].get(key)
            if kind is None:
                raise DataFormatError(f"{path}: unknown key {key!r} in [{section}]")
            try:
                values[section, key] = parser.getboolean(section, key) if kind is bool else kind(raw)
            except ValueError as exc:
                raise DataFormatError(f"{path}: bad value for {section}.{key}: {raw!r}") from exc

    cfg = preset(values.pop(("experiment", "preset"), "desk"))
    kw = {key: v for (sec, key), v in values.items() if sec == "experiment"}
    if any(sec == "grid" for sec, _ in values):
        g = cfg.grid.to_dict()
        g.update({key: v for (sec, key), v in values.items() if sec == "grid"})
        kw["grid"] = WavelengthGrid(**g)
    gen = {key: v for (sec, key), v in values.items() if sec == "generator"}
    if gen:
        kw["bump_count_range"] = (gen.get("bump_count_min", cfg.bump_count_range[0]),
                                  gen.get("bump_count_max", cfg.bump_count_range[1]))
        kw["bump_width_range_nm"] = (gen.get("bump_width_min_nm", cfg.bump_width_range_nm[0]),
                                     gen.get("bump_width_max_nm", cfg.bump_width_range_nm[1]))
        kw["amplitude_range"] = (gen.get("amplitude_min", cfg.amplitude_range[0]),
                                 gen.get("amplitude_max", cfg.amplitude_range[1]))
    if ("wiener", "ridge_epsilon") in values:
        kw["wiener_ridge"] = values["wiener", "ridge_epsilon"]
    forest_kw = {key: v for (sec, key), v in values.items() if sec == "forest"}
    if "max_depth" in forest_kw:
        depth = forest_kw["max_depth"].strip().lower()
        forest_kw["max_depth"] = None if depth in ("none", "unlimited") else int(depth)
    if forest_kw:
        kw["forest"] = replace(cfg.forest, **forest_kw)
    kw.update(overrides)
    return replace(cfg, **kw)


@dataclass
class ExperimentReport:
    """Scores and provenance of one experiment run.

    ``errors[method]`` holds the per-spectrum mean squared error; every PSNR
    in ``psnr`` is recomputable from it with :func:`psnr_from_table`.
    """

    kind: str
    spectrum_names: list
    psnr: dict
    errors: dict
    config: dict
    fingerprints: dict
    timings: dict = field(default_factory=dict)
    section_psnr: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    peak: float = 1.0

    def payload(self):
        """Deterministic part of the report (everything but timings)."""
        return _jsonable({
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "kind": self.kind,
            "methods": list(METHODS),
            "peak": self.peak,
            "psnr_db": self.psnr,
            "section_psnr_db": self.section_psnr,
            "spectrum_names": self.spectrum_names,
            "per_spectrum_mse": self.errors,
            "config": self.config,
            "fingerprints": self.fingerprints,
            "notes": self.notes,
        })

    def to_json(self):
        return json.dumps(self.payload(), sort_keys=True, indent=1) + "\n"

    def payload_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_json(cls, text):
        d = _unjsonable(json.loads(text))
        if d.get("format") != REPORT_FORMAT:
            raise DataFormatError("not an experiment report")
        return cls(d["kind"], d["spectrum_names"], d["psnr_db"], d["per_spectrum_mse"], d["config"],
                   d["fingerprints"], {}, d.get("section_psnr_db", {}), d.get("notes", []), d["peak"])

    def summary(self):
        title = {"simulation": "Simulated-sensor experiment",
                 "fixture-icon": "Fixture icon experiment (stand-in spectra, not a physical capture)"}[self.kind]
        lines = [title, f"test spectra: {len(self.spectrum_names)}  peak: {self.peak:g}", ""]
        lines.append(f"{'method':<10s} {'PSNR (dB)':>10s}")
        for m in METHODS:
            lines.append(f"{m:<10s} {_fmt_db(self.psnr[m]):>10s}")
        if self.section_psnr:
            lines += ["", "per-section PSNR (dB)", f"{'section':<10s}" + "".join(f"{m:>11s}" for m in METHODS)]
            for name in self.spectrum_names:
                lines.append(f"{name:<10s}" + "".join(f"{_fmt_db(self.section_psnr[name][m]):>11s}" for m in METHODS))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _fmt_db(v):
    return "inf" if math.isinf(v) else f"{v:.2f}"


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _unjsonable(obj):
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _unjsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unjsonable(v) for v in obj]
    return obj


def psnr_from_table(per_spectrum_mse, peak=1.0):
    """Pooled PSNR from per-spectrum MSEs on a common grid."""
    return psnr_from_mse(float(np.mean(per_spectrum_mse)), peak)


@contextlib.contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except ExperimentError:
        raise
    except (SpecDemuxError, OSError, ValueError, ArithmeticError) as exc:
        raise ExperimentError(name, exc) from exc
    finally:
        timings[name] = time.perf_counter() - t0


def _sha(data: bytes):
    return hashlib.sha256(data).hexdigest()


def _train_models(cfg, sens, timings):
    """Shared front half of both experiments; returns models and bookkeeping."""
    grid = cfg.grid
    with _stage("generate-train", timings):
        train = generate_spectra_array(cfg.generator(derive_seed(cfg.seed, _TRAIN), cfg.train_count), grid)
    with _stage("dataset", timings):
        data = build_dataset(train, sens, cfg.noise_sigma, derive_seed(cfg.seed, _NOISE, 0))
    with _stage("load-patches", timings):
        patches = fixtures.patch_set(grid, cfg.wem_patch_set)
    with _stage("train-WEM", timings):
        wem = wiener_train(build_dataset(patches, sens), cfg.wiener_ridge)
    with _stage("train-DEMUX-WEM", timings):
        dwem = wiener_train(data, cfg.wiener_ridge)
    forest_cfg = replace(cfg.forest, seed=derive_seed(cfg.seed, _FOREST))
    with _stage("train-DEMUX-RFM", timings):
        rfm = forest_train(data, forest_cfg, n_jobs=cfg.n_jobs)
    return train, data, {"WEM": wem, "DEMUX-WEM": dwem, "DEMUX-RFM": rfm}


def _predict(models, measurements):
    return {
        "WEM": wiener_predict_batch(models["WEM"], measurements),
        "DEMUX-WEM": wiener_predict_batch(models["DEMUX-WEM"], measurements),
        "DEMUX-RFM": forest_predict_batch(models["DEMUX-RFM"], measurements),
    }


def _run(cfg: ExperimentConfig, kind: str):
    timings = {}
    with _stage("sensor", timings):
        sens = fixtures.load_sensor(cfg.sensitivity, cfg.grid)
    train, data, models = _train_models(cfg, sens, timings)
    notes = []

    if kind == "simulation":
        with _stage("generate-test", timings):
            if cfg.reuse_train_as_test:
                test = train[: cfg.test_count]
                notes.append("test set reuses training spectra (diagnostic mode)")
            else:
                test = generate_spectra_array(cfg.generator(derive_seed(cfg.seed, _TEST), cfg.test_count), cfg.grid)
                seen = {row.tobytes() for row in train}
                clash = sum(row.tobytes() in seen for row in test)
                if clash:
                    raise DataFormatError(f"{clash} test spectra coincide with training spectra")
            names = [f"test_{i:05d}" for i in range(test.shape[0])]
    else:
        with _stage("load-icon", timings):
            icon = fixtures.icon_sections(cfg.grid, cfg.icon_set)
            test = np.stack([s.values for s in icon])
            names = [s.name for s in icon]
        notes.append("icon sections are fixture stand-in spectra; the physical capture is not reproduced")

    with _stage("measure", timings):
        test_meas = build_dataset(test, sens, cfg.noise_sigma, derive_seed(cfg.seed, _NOISE, 1)).measurements
    with _stage("predict", timings):
        preds = _predict(models, test_meas)
    with _stage("evaluate", timings):
        errors = {m: np.mean((test - preds[m]) ** 2, axis=1) for m in METHODS}
        scores = {m: psnr_from_table(errors[m]) for m in METHODS}
        section = {}
        if kind == "fixture-icon":
            section = {name: {m: psnr_from_mse(float(errors[m][i])) for m in METHODS}
                       for i, name in enumerate(names)}

    model_bytes = {m: models[m].to_bytes() for m in METHODS}
    fingerprints = {
        "sensitivity": sens.fingerprint(),
        "training_dataset": data.fingerprint(),
        **{f"model:{m}": _sha(b) for m, b in model_bytes.items()},
    }
    config = cfg.echo()
    config["effective_forest_seed"] = models["DEMUX-RFM"].config.seed
    report = ExperimentReport(kind, names, scores, {m: errors[m].tolist() for m in METHODS},
                              config, fingerprints, timings, section, notes)
    if cfg.output_dir:
        with _stage("write", timings):
            _write_outputs(Path(cfg.output_dir), report, test, preds, model_bytes, cfg.grid)
    return report, test, preds


def run_simulation_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Simulated sensor: train on generated spectra, score on fresh generated spectra."""
    return _run(cfg, "simulation")[0]


def run_fixture_icon_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Score the three demultiplexers on the five named icon stand-in spectra."""
    return _run(cfg, "fixture-icon")[0]


def _pred_file(method):
    return f"pred_{method}.csv"


def _write_outputs(out: Path, report, truth, preds, model_bytes, grid):
    """Write all artifacts into a scratch directory, then move it into place.

    A failure leaves no partial output directory behind.
    """
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        (scratch / "report.json").write_text(report.to_json())
        (scratch / "summary.txt").write_text(report.summary())
        (scratch / "timings.json").write_text(json.dumps(report.timings, sort_keys=True, indent=1) + "\n")
        with (scratch / "errors.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["spectrum", *METHODS])
            for i, name in enumerate(report.spectrum_names):
                w.writerow([name, *(repr(float(report.errors[m][i])) for m in METHODS)])
        write_wavelength_table(scratch / "truth.csv", grid, report.spectrum_names, truth)
        for m in METHODS:
            write_wavelength_table(scratch / _pred_file(m), grid, report.spectrum_names, preds[m])
        models = scratch / "models"
        models.mkdir()
        for m, blob in model_bytes.items():
            (models / f"{m}.bin").write_bytes(blob)
        if out.exists():
            shutil.rmtree(out)
        scratch.rename(out)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise


def emit_plot_data(grid, names, truth, predictions, out_dir, limit=None):
    """Write one ``<name>.csv`` per spectrum: wavelength, truth and each method's prediction."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wl = grid.wavelengths
    paths = []
    count = len(names) if limit is None else min(limit, len(names))
    for i in range(count):
        path = out_dir / f"{names[i]}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["wavelength_nm", "truth", *METHODS])
            for k in range(grid.count):
                w.writerow([repr(float(wl[k])), repr(float(truth[i][k])),
                            *(repr(float(predictions[m][i][k])) for m in METHODS)])
        paths.append(path)
    return paths


def load_run(run_dir):
    """Read back ``(report, grid, names, truth, predictions)`` from a run directory."""
    run_dir = Path(run_dir)
    try:
        report = ExperimentReport.from_json((run_dir / "report.json").read_text())
    except OSError as exc:
        raise DataFormatError(f"cannot read report in {run_dir}: {exc.strerror or exc}") from exc
    grid, names, truth = read_wavelength_table(run_dir / "truth.csv")
    preds = {}
    for m in METHODS:
        g, n, values = read_wavelength_table(run_dir / _pred_file(m))
        if not g.matches(grid) or n != names:
            raise DataFormatError(f"{_pred_file(m)} does not line up with truth.csv")
        preds[m] = values
    return report, grid, list(names), truth, preds
