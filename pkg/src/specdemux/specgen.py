"""Random reflectance spectra, illumination, detrending and training datasets."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as _rng
from .core import (
    Illuminant,
    Measurement,
    SensitivityMatrix,
    Spectrum,
    WavelengthGrid,
    forward_measure_batch,
    require_same_grid,
)
from .csvio import save_measurements_csv, write_wavelength_table
from .errors import DataFormatError, DimensionError, DivisionHazardError, UsageError

DATASET_FORMAT = "specdemux.dataset"
DATASET_VERSION = 1
DETREND_THRESHOLD = 1e-9
DEFAULT_REFERENCE_REFLECTANCE = 0.99


@dataclass(frozen=True)
class SpectraGenConfig:
    """Random sum-of-Gaussian-bumps reflectance generator.

    Widths are Gaussian standard deviations in nm. Bump centres are uniform
    over the grid span. Both ranges are inclusive.
    """

    seed: int = 0
    count: int = 1
    bump_count_range: tuple = (1, 4)
    bump_width_range_nm: tuple = (10.0, 80.0)
    amplitude_range: tuple = (0.05, 1.0)

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise UsageError(f"spectrum count must be >= 1, got {self.count}")
        lo, hi = self.bump_count_range
        if not (1 <= lo <= hi <= 4):
            raise UsageError(f"bump count range must lie in [1, 4], got {self.bump_count_range}")
        wlo, whi = self.bump_width_range_nm
        if not (0 < wlo <= whi):
            raise UsageError(f"invalid bump width range {self.bump_width_range_nm}")
        alo, ahi = self.amplitude_range
        if not (0 <= alo <= ahi <= 1):
            raise UsageError(f"amplitude range must lie within [0, 1], got {self.amplitude_range}")


def generate_spectra_array(cfg: SpectraGenConfig, grid: WavelengthGrid) -> np.ndarray:
    """Return a ``(count, n)`` array of generated reflectances in [0, 1]."""
    gen = _rng.make_rng(cfg.seed)
    m = cfg.count
    max_bumps = cfg.bump_count_range[1]
    n_bumps = gen.integers(cfg.bump_count_range[0], max_bumps, size=m, endpoint=True)
    centers = gen.uniform(grid.start_nm, grid.stop_nm, size=(m, max_bumps))
    widths = gen.uniform(*cfg.bump_width_range_nm, size=(m, max_bumps))
    amps = gen.uniform(*cfg.amplitude_range, size=(m, max_bumps))
    amps[np.arange(max_bumps)[None, :] >= n_bumps[:, None]] = 0.0

    wl = grid.wavelengths
    z = (wl[None, None, :] - centers[:, :, None]) / widths[:, :, None]
    out = np.einsum("mb,mbk->mk", amps, np.exp(-0.5 * z * z))
    return np.clip(out, 0.0, 1.0)


def generate_spectra(cfg: SpectraGenConfig, grid: WavelengthGrid) -> list[Spectrum]:
    return [Spectrum(grid, v, True) for v in generate_spectra_array(cfg, grid)]


def apply_illuminant(reflectance: Spectrum, light: Illuminant) -> Spectrum:
    require_same_grid(reflectance.grid, light.grid, "reflectance and illuminant")
    return Spectrum(reflectance.grid, reflectance.values * light.power, False, reflectance.name)


def detrend(measured: Spectrum, reference_measured: Spectrum,
            reference_reflectance: float = DEFAULT_REFERENCE_REFLECTANCE) -> Spectrum:
    """Convert a measured radiance to reflectance using a reference-target reading.

    ``reference_reflectance`` is the known reflectance of the reference
    target (0.99 for a 99% white standard). Bins where the reference reads at
    or below ``1e-9`` of its own maximum raise ``DivisionHazardError``.
    The result must lie in [0, 1].
    """
    require_same_grid(measured.grid, reference_measured.grid, "measured and reference spectra")
    if not 0 < reference_reflectance <= 1:
        raise UsageError(f"reference reflectance must be in (0, 1], got {reference_reflectance}")
    ref = reference_measured.values
    floor = DETREND_THRESHOLD * max(float(ref.max()), 0.0)
    bad = np.nonzero(ref <= floor)[0]
    if bad.size:
        wl = [float(measured.grid.wavelengths[k]) for k in bad]
        shown = ", ".join(f"{w:g} nm" for w in wl[:5]) + (" ..." if len(wl) > 5 else "")
        raise DivisionHazardError(f"reference too dark to divide at {shown}", wl)
    return Spectrum(measured.grid, reference_reflectance * (measured.values / ref), True, measured.name)


@dataclass(frozen=True)
class TrainingDataset:
    """Paired spectra (``(m, n)``) and their sensor measurements (``(m, p)``)."""

    grid: WavelengthGrid
    spectra: np.ndarray
    measurements: np.ndarray
    channel_names: tuple
    sens_fingerprint: str
    noise_sigma: float = 0.0

    def __post_init__(self):
        spectra = np.array(self.spectra, dtype=np.float64)
        meas = np.array(self.measurements, dtype=np.float64)
        if spectra.ndim != 2 or spectra.shape[0] < 1:
            raise UsageError("dataset needs at least one pair")
        if spectra.shape[1] != self.grid.count:
            raise DimensionError(f"dataset spectra have {spectra.shape[1]} columns for {self.grid.count} wavelengths")
        if meas.shape != (spectra.shape[0], len(self.channel_names)):
            raise DimensionError(f"measurement table shape {meas.shape} does not match pairs/channels")
        spectra.setflags(write=False)
        meas.setflags(write=False)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "measurements", meas)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    def __len__(self):
        return self.spectra.shape[0]

    @property
    def channels(self):
        return self.measurements.shape[1]

    @property
    def pairs(self):
        return [(Spectrum(self.grid, s), Measurement(c, self.channel_names))
                for s, c in zip(self.spectra, self.measurements)]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(self.sens_fingerprint.encode())
        h.update(repr(self.noise_sigma).encode())
        h.update(np.ascontiguousarray(self.spectra, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.measurements, dtype="<f8").tobytes())
        return h.hexdigest()

    def verify(self, sens: SensitivityMatrix, rtol=1e-12):
        """Check the stored measurements against a fresh forward-model pass."""
        if sens.fingerprint() != self.sens_fingerprint:
            raise DataFormatError("dataset was built with a different sensitivity matrix")
        if self.noise_sigma:
            return
        expected = forward_measure_batch(self.spectra, sens)
        scale = np.maximum(np.abs(expected), np.finfo(float).tiny)
        worst = float(np.max(np.abs(self.measurements - expected) / scale))
        if worst > rtol:
            raise DataFormatError(f"stored measurements disagree with the forward model (rel. error {worst:.3g})")

    def save(self, path):
        """Write a single ``.npz`` archive.

        ``pairs`` is row-major ``(m, n + p)``: the ``n`` spectrum values in
        ascending wavelength order, then the ``p`` channel readings in
        ``channel_names`` order.
        """
        header = {
            "format": DATASET_FORMAT,
            "version": DATASET_VERSION,
            "grid": self.grid.to_dict(),
            "channel_names": list(self.channel_names),
            "sens_fingerprint": self.sens_fingerprint,
            "noise_sigma": self.noise_sigma,
        }
        pairs = np.hstack([self.spectra, self.measurements])
        with Path(path).open("wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), pairs=pairs)

    def export_csv(self, directory):
        """Write ``spectra.csv`` (wavelength table) and ``measurements.csv``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = [f"s{i}" for i in range(len(self))]
        write_wavelength_table(directory / "spectra.csv", self.grid, names, self.spectra)
        save_measurements_csv(directory / "measurements.csv", self.measurements, self.channel_names)


def load_dataset(path, sens: SensitivityMatrix | None = None) -> TrainingDataset:
    """Read a dataset archive; with ``sens`` given every pair is re-verified."""
    try:
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            pairs = np.array(z["pairs"])
    except (OSError, KeyError, ValueError) as exc:
        raise DataFormatError(f"cannot read dataset {path}: {exc}") from exc
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise DataFormatError(f"{path}: not a version-{DATASET_VERSION} dataset archive")
    grid = WavelengthGrid(**header["grid"])
    n = grid.count
    if pairs.ndim != 2 or pairs.shape[1] != n + len(header["channel_names"]):
        raise DataFormatError(f"{path}: pair table has wrong width")
    data = TrainingDataset(grid, pairs[:, :n], pairs[:, n:], tuple(header["channel_names"]),
                           header["sens_fingerprint"], float(header["noise_sigma"]))
    if sens is not None:
        data.verify(sens)
    return data


def build_dataset(spectra, sens: SensitivityMatrix, noise_sigma=0.0, noise_seed=0) -> TrainingDataset:
    """Pair spectra with forward-model measurements.

    ``spectra`` is a list of ``Spectrum`` or an ``(m, n)`` array already on
    ``sens.grid``. ``noise_sigma > 0`` adds zero-mean Gaussian channel noise.
    """
    if isinstance(spectra, np.ndarray):
        values = np.asarray(spectra, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            raise UsageError("need a non-empty (m, n) spectra array")
    else:
        if len(spectra) == 0:
            raise UsageError("need at least one spectrum")
        for s in spectra:
            require_same_grid(s.grid, sens.grid, "spectrum and sensitivity")
        values = np.stack([s.values for s in spectra])
    meas = forward_measure_batch(values, sens)
    if noise_sigma:
        if noise_sigma < 0:
            raise UsageError("noise sigma must be non-negative")
        meas = meas + _rng.make_rng(noise_seed).normal(0.0, noise_sigma, size=meas.shape)
    return TrainingDataset(sens.grid, values, meas, sens.channel_names, sens.fingerprint(), float(noise_sigma))
