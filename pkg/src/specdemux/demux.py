"""Model-type dispatch shared by the harness and the CLI."""

from . import modelfile
from .errors import DataFormatError
from .forest import ForestModel, forest_predict_batch
from .wiener import WienerModel, wiener_predict_batch


def load_model(path):
    magic = modelfile.peek_magic(path)
    if magic == b"SDMXWIEN":
        return WienerModel.load(path)
    if magic == b"SDMXFRST":
        return ForestModel.load(path)
    raise DataFormatError(f"{path}: unrecognised model file")


def predict_batch(model, measurements, clamp=False):
    if isinstance(model, WienerModel):
        return wiener_predict_batch(model, measurements, clamp=clamp)
    out = forest_predict_batch(model, measurements)
    return out.clip(0.0, 1.0) if clamp else out
