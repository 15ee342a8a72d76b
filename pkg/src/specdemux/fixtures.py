"""Shipped fixtures: the simulated sensor, the baseline patch set and the icon sections.

The tabulated spectra live on the default 410-710 nm / 5 nm grid and are
linearly resampled when another grid inside that span is requested.
"""

import json
from importlib import resources

import numpy as np

from .core import DEFAULT_GRID, SensitivityMatrix, Spectrum, WavelengthGrid
from .csvio import load_sensitivity_csv, read_wavelength_table
from .errors import DataFormatError

FIXTURE = "fixture"
SENSOR_FIXTURE = "sensor_gaussian_rgb_v1.json"
PATCH_FIXTURE = "patches_v1.csv"
ICON_FIXTURE = "icon_v1.csv"


def _data_path(name):
    return resources.files("specdemux") / "data" / name


def gaussian_sensor(grid: WavelengthGrid = DEFAULT_GRID, source=SENSOR_FIXTURE) -> SensitivityMatrix:
    """Synthesize the Gaussian RGB fixture sensor on ``grid``."""
    with _data_path(source).open() as fh:
        spec = json.load(fh)
    wl = grid.wavelengths
    rows, names = [], []
    for ch in spec["channels"]:
        rows.append(ch["gain"] * np.exp(-0.5 * ((wl - ch["peak_nm"]) / ch["sigma_nm"]) ** 2))
        names.append(ch["name"])
    return SensitivityMatrix(grid, np.stack(rows), tuple(names))


def identity_sensor(grid: WavelengthGrid) -> SensitivityMatrix:
    """Square ``p = n`` sensor that reads every wavelength directly."""
    return SensitivityMatrix(grid, np.eye(grid.count), tuple(f"w{k}" for k in range(grid.count)))


def load_sensor(source, grid: WavelengthGrid = DEFAULT_GRID) -> SensitivityMatrix:
    """Resolve ``"fixture"``, ``"identity"`` or a sensitivity CSV path."""
    if source in (FIXTURE, None, ""):
        return gaussian_sensor(grid)
    if source == "identity":
        return identity_sensor(grid)
    sens = load_sensitivity_csv(source)
    if not sens.grid.matches(grid):
        sens = SensitivityMatrix(grid, _resample(sens.grid, sens.rows, grid), sens.channel_names)
    return sens


def _resample(src: WavelengthGrid, values, dst: WavelengthGrid):
    eps = 1e-9 * max(abs(src.stop_nm), 1.0)
    if dst.start_nm < src.start_nm - eps or dst.stop_nm > src.stop_nm + eps:
        raise DataFormatError(
            f"cannot resample {src.start_nm}-{src.stop_nm} nm data onto {dst.start_nm}-{dst.stop_nm} nm"
        )
    return np.stack([np.interp(dst.wavelengths, src.wavelengths, v) for v in np.atleast_2d(values)])


def load_spectra_table(source, grid: WavelengthGrid = DEFAULT_GRID, is_reflectance=True):
    """Load a wavelength table (path or packaged fixture name) as spectra on ``grid``."""
    src_grid, names, values = read_wavelength_table(source)
    if not src_grid.matches(grid):
        values = _resample(src_grid, values, grid)
    return [Spectrum(grid, v, is_reflectance, name) for name, v in zip(names, values)]


def _packaged_or_path(source, packaged):
    if source in (FIXTURE, None, ""):
        with resources.as_file(_data_path(packaged)) as p:
            return p
    return source


def patch_set(grid: WavelengthGrid = DEFAULT_GRID, source=FIXTURE):
    """The 24 smooth baseline training spectra (or a user-supplied table)."""
    return load_spectra_table(_packaged_or_path(source, PATCH_FIXTURE), grid)


def icon_sections(grid: WavelengthGrid = DEFAULT_GRID, source=FIXTURE):
    """The five named stand-in spectra for the test-icon sections."""
    return load_spectra_table(_packaged_or_path(source, ICON_FIXTURE), grid)
