"""Command-line interface: benchmark campaigns, CSV fit, and prediction.

The model file is a single JSON document (format-versioned) holding all
hyperparameters and both training sets, so a reload reproduces in-memory
predictions exactly.
"""

from __future__ import annotations

import csv
import json
import sys

import click
import numpy as np

from . import bench, mfgp
from .exceptions import (
    DimensionMismatch,
    InvalidConfig,
    MfkrigError,
    ParseError,
)
from .gp import (
    Dataset,
    MultiStartConfig,
    TrainedGp,
    constant_basis,
    make_trained_gp,
)
from .kernels import KernelParams, LengthScales
from .mfgp import EmConfig, HfParams, MfData, MfModel, fit_mf, make_mf_model, predict_mf

MODEL_FORMAT_VERSION = 1

EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


def read_data_csv(path: str) -> Dataset:
    """CSV with a header row, D input columns, and one trailing output column."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: empty file, expected a header row") from None
            width = len(header)
            if width < 2:
                raise ParseError(f"{path}: need at least 2 columns, got {width}")
            rows = []
            for i, row in enumerate(reader, start=2):
                if len(row) != width:
                    raise ParseError(
                        f"{path}: row {i} has {len(row)} columns, expected {width}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ParseError(f"{path}: row {i}: {exc}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise InvalidConfig(f"{path}: no data rows")
    data = np.asarray(rows)
    return Dataset(x=data[:, :-1], z=data[:, -1])


def _gp_to_dict(model: TrainedGp) -> dict:
    k = model.hyper.kernel
    return {
        "x": model.data.x.tolist(),
        "z": model.data.z.tolist(),
        "beta": model.hyper.beta.tolist(),
        "sigma2": k.sigma2,
        "eta": k.eta,
        "theta": k.theta.theta.tolist(),
    }


def model_to_dict(model: MfModel) -> dict:
    p = model.hf_params
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "lf": _gp_to_dict(model.lf_model),
        "hf": {
            "x": model.data.hf.x.tolist(),
            "z": model.data.hf.z.tolist(),
            "beta_rho": p.beta_rho.tolist(),
            "beta_h": p.beta_h.tolist(),
            "sigma2_h": p.sigma2_h,
            "theta_h": p.theta_h.theta.tolist(),
            "eta_h": p.eta_h,
        },
        "fit_info": {
            "lf_nll": model.lf_model.fit_log.get("nll"),
            "em_log": list(model.em_log),
        },
    }


def model_from_dict(doc: dict) -> MfModel:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ParseError(f"unsupported model format version: {version!r}")
    lf = doc["lf"]
    lf_data = Dataset(x=np.asarray(lf["x"]), z=np.asarray(lf["z"]))
    lf_model = make_trained_gp(
        lf_data,
        constant_basis(),
        beta=np.asarray(lf["beta"]),
        kernel=KernelParams(
            theta=LengthScales(np.asarray(lf["theta"])),
            sigma2=lf["sigma2"],
            eta=lf["eta"],
        ),
    )
    hf = doc["hf"]
    hf_data = Dataset(x=np.asarray(hf["x"]), z=np.asarray(hf["z"]))
    params = HfParams(
        beta_rho=np.asarray(hf["beta_rho"]),
        beta_h=np.asarray(hf["beta_h"]),
        sigma2_h=hf["sigma2_h"],
        theta_h=LengthScales(np.asarray(hf["theta_h"])),
        eta_h=hf["eta_h"],
    )
    data = MfData(lf=lf_data, hf=hf_data)
    em_log = doc.get("fit_info", {}).get("em_log", [])
    return make_mf_model(data, lf_model, params, constant_basis(), constant_basis(), em_log)


def save_model(model: MfModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path: str) -> MfModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return model_from_dict(doc)


def fit_from_csv(
    lf_csv: str, hf_csv: str, config: dict | None = None
) -> MfModel:
    config = config or {}
    lf_data = read_data_csv(lf_csv)
    hf_data = read_data_csv(hf_csv)
    if lf_data.d != hf_data.d:
        raise ParseError(
            f"dimension mismatch: LF has {lf_data.d} input columns, "
            f"HF has {hf_data.d}"
        )
    if hf_data.n < 3:
        raise InvalidConfig("need at least 3 high-fidelity rows")
    ms = MultiStartConfig(
        n_starts=int(config.get("n_starts", 10)),
        rng_seed=int(config.get("seed", 0)),
    )
    em = EmConfig(
        max_em_iterations=int(config.get("max_em_iterations", 100)),
        loglik_rel_tolerance=float(config.get("loglik_rel_tolerance", 1e-8)),
    )
    return fit_mf(
        MfData(lf=lf_data, hf=hf_data), lf_config=ms, hf_config=ms, em_config=em
    )


def _run(body) -> None:
    try:
        body()
    except (InvalidConfig, ParseError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except MfkrigError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL_ERROR)


@click.group()
def main():
    """Bi-fidelity co-kriging: benchmarks, fitting, and prediction."""


@main.command("bench")
@click.option("--config", "config_path", required=True, type=click.Path())
def bench_cmd(config_path: str):
    """Run a replicated benchmark campaign described by a JSON config."""

    def body():
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{config_path}: {exc}") from exc
        config = bench.BenchmarkConfig.from_dict(raw)
        rows = bench.run_benchmark(config)
        n_failed = sum(int(row.get("failed", 0) or 0) for row in rows)
        click.echo(f"wrote {len(rows)} rows ({n_failed} failed) to {config.output_path}")

    _run(body)


@main.command("fit")
@click.option("--lf", "lf_csv", required=True, type=click.Path())
@click.option("--hf", "hf_csv", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def fit_cmd(lf_csv: str, hf_csv: str, config_path: str | None, out_path: str):
    """Fit the bi-fidelity model on two CSV training sets."""

    def body():
        config = None
        if config_path is not None:
            try:
                with open(config_path) as fh:
                    config = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ParseError(f"{config_path}: {exc}") from exc
        model = fit_from_csv(lf_csv, hf_csv, config)
        save_model(model, out_path)
        click.echo(f"model written to {out_path}")

    _run(body)


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--inputs", "inputs_csv", required=True, type=click.Path())
@click.option("--level", type=click.Choice(["lf", "hf"]), default="hf")
@click.option("--mode", type=click.Choice(["latent", "noisy"]), default="latent")
@click.option("--out", "out_path", required=True, type=click.Path())
def predict_cmd(model_path: str, inputs_csv: str, level: str, mode: str, out_path: str):
    """Predict mean and sd at the input rows of a CSV file."""

    def body():
        model = load_model(model_path)
        try:
            with open(inputs_csv, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None:
                    raise ParseError(f"{inputs_csv}: empty file")
                rows = []
                for i, row in enumerate(reader, start=2):
                    if len(row) != len(header):
                        raise ParseError(
                            f"{inputs_csv}: row {i} has {len(row)} columns, "
                            f"expected {len(header)}"
                        )
                    rows.append([float(v) for v in row])
        except OSError as exc:
            raise ParseError(f"{inputs_csv}: {exc}") from exc
        except ValueError as exc:
            raise ParseError(f"{inputs_csv}: {exc}") from exc
        x = np.asarray(rows)
        if x.ndim != 2 or x.shape[1] != model.data.hf.d:
            raise DimensionMismatch(
                f"model expects {model.data.hf.d} input columns, got {x.shape[1]}"
            )
        pred = predict_mf(model, x, level=level, mode=mode, cov="diagonal")
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([*header, "mean", "sd"])
            for xi, m, s in zip(x, pred.mean, pred.sd):
                writer.writerow([*(repr(v) for v in xi), repr(float(m)), repr(float(s))])
        click.echo(f"predictions written to {out_path}")

    _run(body)


if __name__ == "__main__":
    main()
