"""Linear minimum-MSE (Wiener) demultiplexing.

The estimator is built from raw (uncentred) sample second moments of a
training set of spectrum/measurement pairs::

    A_lc = mean(spectrum @ measurement.T)         (n x p)
    A_cc = mean(measurement @ measurement.T)      (p x p)
    W    = A_lc @ inv(A_cc + eps * tr(A_cc) / p * I)

The same code serves the patch-trained baseline and the forward-model-trained
demultiplexer; only the training data differs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import modelfile
from .core import Measurement, Spectrum, WavelengthGrid
from .errors import ConditioningError, DataFormatError, DimensionError, UsageError
from .specgen import TrainingDataset

MAGIC = b"SDMXWIEN"
VERSION = 1
DEFAULT_RIDGE = 1e-8
MAX_CONDITION = 1e13


@dataclass(frozen=True)
class WienerModel:
    grid: WavelengthGrid
    matrix: np.ndarray
    ridge_epsilon: float
    training_fingerprint: str
    channel_names: tuple = ()

    def __post_init__(self):
        w = np.array(self.matrix, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != self.grid.count:
            raise DimensionError(f"Wiener matrix shape {w.shape} does not fit a {self.grid.count}-point grid")
        if not np.all(np.isfinite(w)):
            raise DataFormatError("Wiener matrix has non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(w.shape[1]))
        object.__setattr__(self, "channel_names", names)

    @property
    def channels(self):
        return self.matrix.shape[1]

    def to_bytes(self):
        header = {
            "kind": "wiener",
            "grid": self.grid.to_dict(),
            "n": self.grid.count,
            "p": self.channels,
            "ridge_epsilon": self.ridge_epsilon,
            "training_fingerprint": self.training_fingerprint,
            "channel_names": list(self.channel_names),
        }
        return modelfile.encode(MAGIC, VERSION, header, [("W", self.matrix)])

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        magic, version, header, arrays = modelfile.decode(data)
        if magic != MAGIC or version != VERSION:
            raise DataFormatError("not a version-1 Wiener model file")
        model = cls(WavelengthGrid(**header["grid"]), arrays["W"], float(header["ridge_epsilon"]),
                    header["training_fingerprint"], tuple(header["channel_names"]))
        if model.matrix.shape != (header["n"], header["p"]):
            raise DataFormatError("Wiener header dimensions disagree with payload")
        return model

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def correlations(data: TrainingDataset):
    """Return ``(A_lc, A_cc)``, the raw cross- and auto-correlation matrices."""
    m = len(data)
    lam, c = data.spectra, data.measurements
    return lam.T @ c / m, c.T @ c / m


def wiener_train(data: TrainingDataset, ridge_epsilon: float = DEFAULT_RIDGE) -> WienerModel:
    if ridge_epsilon < 0:
        raise UsageError(f"ridge epsilon must be >= 0, got {ridge_epsilon}")
    a_lc, a_cc = correlations(data)
    p = a_cc.shape[0]
    reg = a_cc + (ridge_epsilon * np.trace(a_cc) / p) * np.eye(p)
    cond = float(np.linalg.cond(reg))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"regularized autocorrelation is ill-conditioned (condition {cond:.3g})", cond)
    try:
        factor = scipy.linalg.cho_factor(reg, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"autocorrelation is not positive definite (condition {cond:.3g})", cond) from exc
    # W @ reg = A_lc  <=>  reg @ W.T = A_lc.T  (reg is symmetric)
    w = scipy.linalg.cho_solve(factor, a_lc.T, check_finite=False).T
    return WienerModel(data.grid, w, float(ridge_epsilon), data.fingerprint(), data.channel_names)


def _check_channels(model, n_channels):
    if n_channels != model.channels:
        raise DimensionError(f"model expects {model.channels} channels, measurement has {n_channels}")


def wiener_predict(model: WienerModel, c: Measurement, clamp=False) -> Spectrum:
    _check_channels(model, c.values.size)
    out = model.matrix @ c.values
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return Spectrum(model.grid, out)


def wiener_predict_batch(model: WienerModel, measurements: np.ndarray, clamp=False) -> np.ndarray:
    c = np.atleast_2d(np.asarray(measurements, dtype=np.float64))
    _check_channels(model, c.shape[1])
    out = c @ model.matrix.T
    return np.clip(out, 0.0, 1.0) if clamp else out
