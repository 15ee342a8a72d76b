"""Wavelength grids, spectra, sensor sensitivities and the linear forward model.

A sensor with ``p`` colour-filter channels observes a spectrum sampled at ``n``
wavelengths through its sensitivity matrix ``S`` (shape ``p x n``)::

    C = S @ spectrum

Every type here is immutable: arrays are copied on construction and flagged
read-only.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataFormatError, DimensionError, UsageError

GRID_RTOL = 1e-9


def _frozen(values, ndim, name):
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise DataFormatError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform wavelength axis ``start_nm + k * step_nm`` for ``k < count``."""

    start_nm: float
    step_nm: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.start_nm) and math.isfinite(self.step_nm)):
            raise DataFormatError("grid start and step must be finite")
        if self.step_nm <= 0:
            raise DataFormatError(f"grid step must be positive, got {self.step_nm}")
        if int(self.count) != self.count or self.count < 2:
            raise DataFormatError(f"grid needs at least 2 points, got {self.count}")
        object.__setattr__(self, "start_nm", float(self.start_nm))
        object.__setattr__(self, "step_nm", float(self.step_nm))
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def from_wavelengths(cls, wavelengths, tol_nm=1e-6):
        """Build a grid from explicit ascending, uniformly spaced wavelengths."""
        wl = np.asarray(wavelengths, dtype=np.float64)
        if wl.ndim != 1 or wl.size < 2:
            raise DataFormatError("need at least two wavelengths")
        steps = np.diff(wl)
        if np.any(steps <= 0):
            raise DataFormatError("wavelengths must be strictly ascending")
        step = (wl[-1] - wl[0]) / (wl.size - 1)
        if np.max(np.abs(steps - step)) > tol_nm:
            raise DataFormatError("wavelengths are not uniformly spaced")
        return cls(float(wl[0]), float(step), int(wl.size))

    @property
    def stop_nm(self):
        return self.start_nm + (self.count - 1) * self.step_nm

    @property
    def wavelengths(self):
        return self.start_nm + self.step_nm * np.arange(self.count, dtype=np.float64)

    def wavelength(self, k):
        if not 0 <= k < self.count:
            raise IndexError(k)
        return self.start_nm + k * self.step_nm

    def matches(self, other):
        """True when ``other`` describes the same axis (up to float noise)."""
        if self.count != other.count:
            return False
        scale = max(abs(self.start_nm), abs(self.stop_nm), 1.0)
        return (abs(self.start_nm - other.start_nm) <= GRID_RTOL * scale
                and abs(self.step_nm - other.step_nm) <= GRID_RTOL * scale)

    def to_dict(self):
        return {"start_nm": self.start_nm, "step_nm": self.step_nm, "count": self.count}


DEFAULT_GRID = WavelengthGrid(410.0, 5.0, 61)


def require_same_grid(a: WavelengthGrid, b: WavelengthGrid, what="operands"):
    if not a.matches(b):
        raise DimensionError(
            f"grid mismatch between {what}: "
            f"{a.start_nm}+{a.step_nm}*k (n={a.count}) vs {b.start_nm}+{b.step_nm}*k (n={b.count})"
        )


@dataclass(frozen=True)
class Spectrum:
    """Values on a wavelength grid.

    ``is_reflectance`` marks reflectance spectra, which must lie in [0, 1].
    Radiance spectra and demultiplexer outputs carry no such bound.
    """

    grid: WavelengthGrid
    values: np.ndarray
    is_reflectance: bool = False
    name: str = ""

    def __post_init__(self):
        values = _frozen(self.values, 1, "spectrum values")
        if values.size != self.grid.count:
            raise DimensionError(f"spectrum has {values.size} values for a {self.grid.count}-point grid")
        if self.is_reflectance and (values.min() < 0.0 or values.max() > 1.0):
            raise DataFormatError("reflectance values must lie in [0, 1]")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Illuminant:
    grid: WavelengthGrid
    power: np.ndarray
    name: str = ""

    def __post_init__(self):
        power = _frozen(self.power, 1, "illuminant power")
        if power.size != self.grid.count:
            raise DimensionError(f"illuminant has {power.size} values for a {self.grid.count}-point grid")
        if np.any(power < 0):
            raise DataFormatError("illuminant power must be non-negative")
        object.__setattr__(self, "power", power)


@dataclass(frozen=True)
class SensitivityMatrix:
    """Per-channel spectral sensitivity, ``rows[i, k]`` is channel ``i`` at wavelength ``k``."""

    grid: WavelengthGrid
    rows: np.ndarray
    channel_names: tuple = ()

    def __post_init__(self):
        rows = _frozen(self.rows, 2, "sensitivity rows")
        p, n = rows.shape
        if n != self.grid.count:
            raise DimensionError(f"sensitivity has {n} columns for a {self.grid.count}-point grid")
        if p < 1:
            raise DataFormatError("sensitivity needs at least one channel")
        if np.any(rows < 0):
            raise DataFormatError("sensitivity entries must be non-negative")
        dead = [i for i in range(p) if not np.any(rows[i] > 0)]
        if dead:
            raise DataFormatError(f"sensitivity channels {dead} have no positive entry")
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(p))
        if len(names) != p:
            raise DimensionError(f"{len(names)} channel names for {p} channels")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "channel_names", tuple(str(c) for c in names))

    @property
    def channels(self):
        return self.rows.shape[0]

    def fingerprint(self):
        """SHA-256 over grid, channel names and little-endian row bytes."""
        h = hashlib.sha256()
        h.update(repr((self.grid.start_nm, self.grid.step_nm, self.grid.count)).encode())
        h.update("\x1f".join(self.channel_names).encode())
        h.update(np.ascontiguousarray(self.rows, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    channel_names: tuple = ()

    def __post_init__(self):
        values = _frozen(self.values, 1, "measurement values")
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(values.size))
        if len(names) != values.size:
            raise DimensionError(f"{len(names)} channel names for {values.size} values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)


def forward_measure(spectrum: Spectrum, sens: SensitivityMatrix) -> Measurement:
    """Noiseless sensor response ``S @ spectrum``."""
    require_same_grid(spectrum.grid, sens.grid, "spectrum and sensitivity")
    return Measurement(sens.rows @ spectrum.values, sens.channel_names)


def forward_measure_batch(spectra: np.ndarray, sens: SensitivityMatrix) -> np.ndarray:
    """Row-wise forward model for an ``(m, n)`` array; returns ``(m, p)``."""
    spectra = np.asarray(spectra, dtype=np.float64)
    if spectra.ndim != 2 or spectra.shape[1] != sens.grid.count:
        raise DimensionError(f"expected (m, {sens.grid.count}) spectra, got {spectra.shape}")
    return spectra @ sens.rows.T


def _stack(spectra: Sequence[Spectrum], grid=None):
    if len(spectra) == 0:
        raise UsageError("need at least one spectrum")
    grid = grid or spectra[0].grid
    for s in spectra:
        require_same_grid(s.grid, grid, "spectra")
    return np.stack([s.values for s in spectra])


def psnr_from_mse(mse, peak=1.0):
    """``10 log10(peak^2 / mse)``; ``math.inf`` when ``mse == 0``."""
    if peak <= 0:
        raise UsageError(f"peak must be positive, got {peak}")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr_arrays(truth, pred, peak=1.0):
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.size == 0:
        raise UsageError("need at least one spectrum")
    if truth.shape != pred.shape:
        raise DimensionError(f"shape mismatch {truth.shape} vs {pred.shape}")
    return psnr_from_mse(float(np.mean((truth - pred) ** 2)), peak)


def psnr(true_spectra: Sequence[Spectrum], pred_spectra: Sequence[Spectrum], peak=1.0) -> float:
    """PSNR in dB from the MSE pooled over every spectrum and wavelength."""
    if len(true_spectra) == 0 or len(pred_spectra) == 0:
        raise UsageError("psnr needs non-empty spectrum lists")
    if len(true_spectra) != len(pred_spectra):
        raise UsageError(f"{len(true_spectra)} true spectra vs {len(pred_spectra)} predictions")
    grid = true_spectra[0].grid
    return psnr_arrays(_stack(true_spectra, grid), _stack(pred_spectra, grid), peak)


@dataclass(frozen=True)
class SensitivityReport:
    channel_names: tuple
    peak_nm: tuple
    support_nm: tuple
    rank: int
    condition: float
    warnings: tuple = field(default_factory=tuple)

    def format(self):
        lines = [f"channels: {len(self.channel_names)}  rank: {self.rank}  condition: {self.condition:.4g}"]
        for name, peak, (lo, hi) in zip(self.channel_names, self.peak_nm, self.support_nm):
            lines.append(f"  {name:>10s}  peak {peak:7.1f} nm  support {lo:7.1f}-{hi:7.1f} nm")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def validate_sensitivity(sens: SensitivityMatrix, support_fraction=0.01) -> SensitivityReport:
    """Summarize a sensitivity matrix for inverse-problem conditioning.

    Support is the wavelength span where a channel exceeds ``support_fraction``
    of its own peak. Rank deficiency and near-duplicate channels are reported
    as warnings rather than raised.
    """
    wl = sens.grid.wavelengths
    rows = sens.rows
    peaks, supports = [], []
    for row in rows:
        peaks.append(float(wl[int(np.argmax(row))]))
        above = np.nonzero(row > support_fraction * row.max())[0]
        supports.append((float(wl[above[0]]), float(wl[above[-1]])))
    sv = np.linalg.svd(rows, compute_uv=False)
    rank = int(np.linalg.matrix_rank(rows))
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    warnings = []
    if rank < sens.channels:
        warnings.append(f"rank {rank} < {sens.channels} channels: some channels are linearly dependent")
    elif condition > 1e6:
        warnings.append(f"ill-conditioned sensitivity (condition {condition:.3g})")
    unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    gram = unit @ unit.T
    for i in range(sens.channels):
        for j in range(i + 1, sens.channels):
            if gram[i, j] > 0.999:
                warnings.append(f"channels {sens.channel_names[i]} and {sens.channel_names[j]} are nearly identical")
    return SensitivityReport(sens.channel_names, tuple(peaks), tuple(supports), rank, condition, tuple(warnings))
