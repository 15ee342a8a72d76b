"""CSV readers and writers for spectra, sensitivities and measurements.

Wavelength tables have a ``wavelength_nm`` first column followed by one
column per channel or spectrum, one row per grid point. Measurement tables
have one column per channel and one row per measurement. Floats are written
with ``repr`` so a write/read round trip is exact.
"""

import csv
from pathlib import Path

import numpy as np

from .core import Measurement, SensitivityMatrix, Spectrum, WavelengthGrid
from .errors import DataFormatError


def _fmt(x):
    return repr(float(x))


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header and at least one data row")
    header = [c.strip() for c in rows[0]]
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric cell ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataFormatError(f"{path}: ragged rows, expected {len(header)} columns")
    return header, data


def read_wavelength_table(path):
    """Return ``(grid, column_names, values)`` with ``values`` shaped ``(columns, n)``."""
    header, data = _read_rows(path)
    if header[0] != "wavelength_nm" or len(header) < 2:
        raise DataFormatError(f"{path}: header must start with 'wavelength_nm' and name at least one column")
    if data.shape[0] < 2:
        raise DataFormatError(f"{path}: need at least two wavelength rows")
    try:
        grid = WavelengthGrid.from_wavelengths(data[:, 0])
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    return grid, tuple(header[1:]), np.ascontiguousarray(data[:, 1:].T)


def write_wavelength_table(path, grid, names, values):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.shape != (len(names), grid.count):
        raise DataFormatError(f"table shape {values.shape} does not match {len(names)} x {grid.count}")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength_nm", *names])
        for k, wl in enumerate(grid.wavelengths):
            w.writerow([_fmt(wl), *(_fmt(v) for v in values[:, k])])


def load_sensitivity_csv(path):
    grid, names, values = read_wavelength_table(path)
    return SensitivityMatrix(grid, values, names)


def save_sensitivity_csv(path, sens):
    write_wavelength_table(path, sens.grid, sens.channel_names, sens.rows)


def load_spectrum_csv(path, is_reflectance=False):
    grid, names, values = read_wavelength_table(path)
    if names != ("value",):
        raise DataFormatError(f"{path}: spectrum header must be 'wavelength_nm,value'")
    return Spectrum(grid, values[0], is_reflectance)


def save_spectrum_csv(path, spectrum):
    write_wavelength_table(path, spectrum.grid, ("value",), spectrum.values[None, :])


def load_spectra_csv(path, is_reflectance=False):
    """Load a multi-column table as a list of named spectra."""
    grid, names, values = read_wavelength_table(path)
    return [Spectrum(grid, v, is_reflectance, name) for name, v in zip(names, values)]


def save_spectra_csv(path, spectra, names=None):
    if not spectra:
        raise DataFormatError("no spectra to write")
    grid = spectra[0].grid
    names = names or [s.name or f"s{i}" for i, s in enumerate(spectra)]
    write_wavelength_table(path, grid, names, np.stack([s.values for s in spectra]))


def load_measurements_csv(path):
    header, data = _read_rows(path)
    return [Measurement(row, tuple(header)) for row in data]


def save_measurements_csv(path, rows, channel_names):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(channel_names)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
