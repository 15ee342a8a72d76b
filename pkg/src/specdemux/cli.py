"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/format error (including
dimension mismatches), 3 numerical or conditioning error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import __version__, fixtures, harness
from .core import DEFAULT_GRID, WavelengthGrid, psnr_arrays, validate_sensitivity
from .csvio import (
    load_measurements_csv,
    read_wavelength_table,
    save_sensitivity_csv,
    write_wavelength_table,
)
from .demux import load_model, predict_batch
from .errors import DimensionError, SpecDemuxError, UsageError
from .forest import ForestConfig, ForestModel, forest_train
from .specgen import DATASET_VERSION, SpectraGenConfig, build_dataset, generate_spectra_array, load_dataset
from .wiener import DEFAULT_RIDGE, WienerModel, wiener_train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

EPILOG = "exit codes: 0 ok, 1 usage error, 2 data/format error, 3 numerical/conditioning error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(text):
    try:
        start, step, count = text.split(",")
        return WavelengthGrid(float(start), float(step), int(count))
    except (ValueError, SpecDemuxError) as exc:
        raise argparse.ArgumentTypeError(f"expected START,STEP,COUNT ({exc})")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _depth(text):
    if text.lower() in ("none", "unlimited"):
        return None
    return int(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--config", help="INI experiment config file")
    common.add_argument("--out", help="output file or directory")

    p = _Parser(prog="specdemux", description="Demultiplex CFA sensor readings into reflectance spectra.",
                epilog=EPILOG)
    p.add_argument("--version", action="version",
                   version=f"specdemux {__version__} (dataset v{DATASET_VERSION}, wiener model v1, "
                           f"forest model v1, report v{harness.REPORT_VERSION})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text, epilog=EPILOG)

    s = add("sensor", "Inspect or export a sensor sensitivity")
    s.add_argument("action", choices=["validate", "export"])
    s.add_argument("--in", dest="source", default="fixture", help="fixture | identity | CSV path")
    s.add_argument("--grid", type=_grid, default=DEFAULT_GRID, help="START,STEP,COUNT (default 410,5,61)")

    g = add("generate", "Generate random reflectance spectra and their forward-model measurements")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--sensor", default="fixture")
    g.add_argument("--grid", type=_grid, default=DEFAULT_GRID)
    g.add_argument("--noise", type=float, default=0.0, help="additive Gaussian channel noise sigma")
    g.add_argument("--csv", help="also export spectra.csv and measurements.csv into this directory")

    t = add("train", "Train a Wiener or random-forest demultiplexer")
    t.add_argument("--method", choices=["wiener", "forest"], required=True)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset archive from 'generate'")
    src.add_argument("--spectra", help="wavelength table of training spectra, or 'patches' for the fixture set")
    t.add_argument("--sensor", default="fixture", help="sensor used with --spectra")
    t.add_argument("--grid", type=_grid, default=DEFAULT_GRID, help="grid used with --spectra")
    t.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    t.add_argument("--trees", type=int, help="total trees (default 30 per wavelength)")
    t.add_argument("--max-depth", type=_depth, default=14, help="integer or 'none'")
    t.add_argument("--min-leaf", type=int, default=2)
    t.add_argument("--no-bootstrap", action="store_true")
    t.add_argument("--jobs", type=int, default=1)

    d = add("demux", "Reconstruct spectra from measurements with a trained model")
    d.add_argument("--model", required=True)
    meas = d.add_mutually_exclusive_group(required=True)
    meas.add_argument("--measurement", type=_floats, help="inline comma-separated channel values")
    meas.add_argument("--measurements", help="CSV with a channel-name header and one row per measurement")
    d.add_argument("--clamp", action="store_true", help="clip outputs to [0, 1]")

    e = add("evaluate", "PSNR between true and predicted spectra tables")
    e.add_argument("--true", dest="truth")
    e.add_argument("--pred")
    e.add_argument("--run", help="recompute every method's PSNR from an experiment directory")
    e.add_argument("--peak", type=float, default=1.0)

    x = add("experiment", "Run the simulated-sensor or fixture-icon experiment")
    x.add_argument("action", choices=["run", "icon"])
    x.add_argument("--preset", choices=sorted(harness.PRESETS), default=None)
    x.add_argument("--jobs", type=int)

    pd = add("plot-data", "Write per-spectrum CSVs (truth and predictions) from an experiment directory")
    pd.add_argument("--run", required=True)
    pd.add_argument("--limit", type=int)

    mi = add("model-info", "Print model size and structure statistics")
    mi.add_argument("--model", required=True)
    mi.add_argument("--json", action="store_true")
    return p


def _require_out(args):
    if not args.out:
        raise UsageError(f"{args.command} needs --out")
    return args.out


def cmd_sensor(args):
    sens = fixtures.load_sensor(args.source, args.grid)
    if args.action == "validate":
        print(validate_sensitivity(sens).format())
    else:
        save_sensitivity_csv(_require_out(args), sens)


def cmd_generate(args):
    out = _require_out(args)
    sens = fixtures.load_sensor(args.sensor, args.grid)
    seed = args.seed if args.seed is not None else 0
    spectra = generate_spectra_array(SpectraGenConfig(seed=seed, count=args.count), args.grid)
    data = build_dataset(spectra, sens, args.noise, noise_seed=seed + 1)
    data.save(out)
    if args.csv:
        data.export_csv(args.csv)
    print(f"wrote {len(data)} pairs to {out}")


def cmd_train(args):
    out = _require_out(args)
    if args.data:
        data = load_dataset(args.data)
    else:
        sens = fixtures.load_sensor(args.sensor, args.grid)
        source = fixtures.FIXTURE if args.spectra == "patches" else args.spectra
        data = build_dataset(fixtures.patch_set(args.grid, source), sens)
    if args.method == "wiener":
        model = wiener_train(data, args.ridge)
    else:
        trees = args.trees if args.trees is not None else 30 * data.grid.count
        cfg = ForestConfig(total_trees=trees, max_depth=args.max_depth, min_leaf_samples=args.min_leaf,
                           bootstrap=not args.no_bootstrap, seed=args.seed if args.seed is not None else 0)
        model = forest_train(data, cfg, n_jobs=args.jobs)
    model.save(out)
    print(f"wrote {args.method} model to {out}")


def cmd_demux(args):
    model = load_model(args.model)
    if args.measurement is not None:
        rows = np.array([args.measurement])
    else:
        rows = np.stack([m.values for m in load_measurements_csv(args.measurements)])
    pred = predict_batch(model, rows, clamp=args.clamp)
    names = ["value"] if args.measurement is not None else [f"s{i}" for i in range(pred.shape[0])]
    if args.out:
        write_wavelength_table(args.out, model.grid, names, pred)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["wavelength_nm", *names])
        for k, wl in enumerate(model.grid.wavelengths):
            w.writerow([repr(float(wl)), *(repr(float(v)) for v in pred[:, k])])


def cmd_evaluate(args):
    if args.run:
        report, grid, names, truth, preds = harness.load_run(args.run)
        for m in harness.METHODS:
            print(f"{m}\t{psnr_arrays(truth, preds[m], args.peak):.6f}")
        return
    if not (args.truth and args.pred):
        raise UsageError("evaluate needs --true and --pred, or --run")
    g1, n1, truth = read_wavelength_table(args.truth)
    g2, n2, pred = read_wavelength_table(args.pred)
    if not g1.matches(g2):
        raise DimensionError("true and predicted tables are on different grids")
    print(f"{psnr_arrays(truth, pred, args.peak):.6f}")


def cmd_experiment(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["n_jobs"] = args.jobs
    if args.config:
        cfg = harness.load_config(args.config, **overrides)
        if args.preset:
            raise UsageError("give either --preset or --config (set 'preset' inside the config file)")
    else:
        cfg = harness.preset(args.preset or "desk", **overrides)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    if not cfg.output_dir:
        raise UsageError("experiment needs --out (or output_dir in the config)")
    run = harness.run_simulation_experiment if args.action == "run" else harness.run_fixture_icon_experiment
    report = run(cfg)
    sys.stdout.write(report.summary())
    print(f"report written to {cfg.output_dir}")


def cmd_plot_data(args):
    out = _require_out(args)
    report, grid, names, truth, preds = harness.load_run(args.run)
    paths = harness.emit_plot_data(grid, names, truth, preds, out, args.limit)
    print(f"wrote {len(paths)} files to {out}")


def cmd_model_info(args):
    model = load_model(args.model)
    if isinstance(model, WienerModel):
        info = {"kind": "wiener", "grid": model.grid.to_dict(), "channels": list(model.channel_names),
                "ridge_epsilon": model.ridge_epsilon, "frobenius_norm": float(np.linalg.norm(model.matrix)),
                "training_fingerprint": model.training_fingerprint}
    else:
        assert isinstance(model, ForestModel)
        info = {"kind": "forest", "grid": model.grid.to_dict(), "channels": list(model.channel_names),
                "training_fingerprint": model.training_fingerprint, **model.stats()}
    if args.json:
        print(json.dumps(info, indent=1, sort_keys=True))
        return
    for key, value in info.items():
        if key == "depth_histogram":
            print("depth histogram:")
            for depth, count in value.items():
                print(f"  {depth:>3d}: {count}")
        else:
            print(f"{key}: {value}")


COMMANDS = {
    "sensor": cmd_sensor,
    "generate": cmd_generate,
    "train": cmd_train,
    "demux": cmd_demux,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "plot-data": cmd_plot_data,
    "model-info": cmd_model_info,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except SpecDemuxError as exc:
        print(f"specdemux: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"specdemux: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
