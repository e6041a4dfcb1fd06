"""Batch entry point: configured evolution runs, verification suites, and
rate fits over ledger CSVs.

Commands
--------
``pslab run <config>``
    March one model and write snapshots, a ledger CSV, and a manifest.
``pslab verify <suite>``
    Run a named check suite (kernels, operators, models); NDJSON results.
``pslab ratefit <csv> [--column ...] [--kind ...] [--expect ...]``
    Fit a decay rate to one ledger column; NDJSON result.

Config format: one ``key = value`` per line, ``#`` starts a comment,
unknown or duplicate keys are rejected. Keys:

    model.tag            one of the model tags (required)
    model.a              nonlocal_mcf order parameter in (0, 1)
    model.rho0           muskat_st density offset
    model.hbar0          surface_diffusion_axi reference radius (> 1)
    model.theta_cap      peskin2d stretch-ratio abort threshold
    grid.N               samples per period, power of two >= 16 (required)
    grid.L               domain length (defaults to 2*pi; nonlocal models
                         require the default)
    stepper.dt           time step (required)
    stepper.scheme       etd_rk2 | imex_frozen_phi | frozen_pointwise
    stepper.dealias      true | false
    run.T                final time, an integer number of steps (required)
    initial.preset       cosine | triangle | random_band | sd_cylinder |
                         ellipse | circle  (required unless initial.file)
    initial.file         snapshot file to restart from
    initial.amplitude    preset scale          (cosine, triangle,
                         random_band, sd_cylinder)
    initial.mode         integer wavenumber    (cosine, sd_cylinder)
    initial.mean         additive offset       (cosine, sd_cylinder)
    initial.kmin         lowest random band mode   (random_band)
    initial.kmax         highest random band mode  (random_band)
    initial.a            horizontal semi-axis  (ellipse)
    initial.b            vertical semi-axis    (ellipse)
    initial.radius       circle radius         (circle)
    ledger.stride        record every stride-th step (default 1)
    ledger.derivative_sup   comma-separated derivative orders, e.g. 1,2
    ledger.holder        comma-separated k:kappa pairs, e.g. 1:0.5
    ledger.theta         true | false | auto (default auto)
    output.dir           output directory, created if missing (required);
                         relative paths resolve under $PLAB_OUTPUT_ROOT
                         when that is set
    seed                 integer seed for randomized presets (default 0)

Outputs of ``run``: initial.bin and final.bin (64-byte header: magic
"PLAB1\\0", component count, samples per component, domain length, time;
then little-endian float64 samples), ledger.csv with a fixed column order
(t, l2, linf, mean columns, derivative sups, Holder seminorms, theta), and
manifest.txt, itself a loadable config that reproduces the run. Exit codes:
0 success, 2 config or file errors, 3 numerical abort (diagnostics.txt
written next to the other outputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import struct
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels, models, nonlocal_ops
from .grid import TWO_PI, PeriodicField
from .ratefit import fit_exponential, fit_power_law
from .stepper import (
    SCHEMES,
    EvolutionAbort,
    LedgerSpec,
    StepperConfig,
    Trajectory,
    evolve,
)

SCHEMA_VERSION = 1

_MAGIC = b"PLAB1\x00"
_HEADER = struct.Struct("<6s2xIIdd")
_HEADER_SIZE = 64


class ConfigError(ValueError):
    """Unusable config or input file; maps to exit code 2."""


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("pslab")
    except Exception:
        return "unknown"


# ---------------------------------------------------------------------------
# snapshot files

def write_snapshot(path: str, field: PeriodicField, t: float) -> None:
    data = np.atleast_2d(np.asarray(field.samples, dtype=float))
    ncomp, n = data.shape
    header = _HEADER.pack(_MAGIC, ncomp, n, float(field.domain_length),
                          float(t))
    with open(path, "wb") as fh:
        fh.write(header.ljust(_HEADER_SIZE, b"\x00"))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_snapshot(path: str) -> Tuple[PeriodicField, float]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_SIZE:
        raise ConfigError(f"{path}: truncated snapshot header")
    magic, ncomp, n, length, t = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _MAGIC:
        raise ConfigError(f"{path}: not a snapshot file")
    expected = _HEADER_SIZE + 8 * ncomp * n
    if len(raw) != expected:
        raise ConfigError(f"{path}: expected {expected} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER_SIZE).reshape(ncomp, n)
    samples = data[0] if ncomp == 1 else data
    try:
        return PeriodicField(np.array(samples), domain_length=length), t
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


# ---------------------------------------------------------------------------
# config parsing

_MODEL_PARAM_KEYS = {
    "nonlocal_mcf": ("a",),
    "peskin2d": ("theta_cap",),
    "muskat_st": ("rho0",),
    "surface_diffusion_axi": ("hbar0",),
}

# presets that build two-component contours rather than scalar fields
_CONTOUR_PRESETS = ("ellipse", "circle")
_SCALAR_PRESETS = ("cosine", "triangle", "random_band", "sd_cylinder")

_INITIAL_PARAM_KEYS = {
    "cosine": ("amplitude", "mode", "mean"),
    "triangle": ("amplitude",),
    "random_band": ("amplitude", "kmin", "kmax"),
    "sd_cylinder": ("amplitude", "mode", "mean"),
    "ellipse": ("a", "b"),
    "circle": ("radius",),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description; serializes back to config text."""

    model_spec: models.ModelSpec
    n: int
    domain_length: float
    stepper: StepperConfig
    horizon: float
    initial: Dict[str, str]
    ledger: LedgerSpec
    output_dir: str
    seed: int


def parse_config_text(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        pairs[key] = value
    return pairs


def _pop_float(pairs, key, default=None, required=False):
    if key not in pairs:
        if required:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return float(pairs.pop(key))
    except ValueError:
        raise ConfigError(f"{key} must be a number")


def _pop_int(pairs, key, default=None, required=False):
    if key not in pairs:
        if required:
            raise ConfigError(f"missing required key {key}")
        return default
    value = pairs.pop(key)
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer")


def _pop_bool(pairs, key, default):
    if key not in pairs:
        return default
    value = pairs.pop(key).lower()
    if value not in ("true", "false"):
        raise ConfigError(f"{key} must be true or false")
    return value == "true"


def build_run_config(pairs: Dict[str, str]) -> RunConfig:
    pairs = dict(pairs)

    tag = pairs.pop("model.tag", None)
    if tag is None:
        raise ConfigError("missing required key model.tag")
    if tag not in models.MODEL_TAGS:
        raise ConfigError(f"unknown model.tag {tag!r}")
    params = {}
    for name in _MODEL_PARAM_KEYS.get(tag, ()):
        value = _pop_float(pairs, f"model.{name}")
        if value is not None:
            params[name] = value
    spec = models.ModelSpec(tag, params, models._expected_order(tag, params))

    n = _pop_int(pairs, "grid.N", required=True)
    if n < 16 or n & (n - 1):
        raise ConfigError("grid.N must be a power of two >= 16")
    length = _pop_float(pairs, "grid.L", default=TWO_PI)
    if length <= 0:
        raise ConfigError("grid.L must be positive")
    if tag in ("nonlocal_mcf", "peskin2d", "muskat_st") and \
            abs(length - TWO_PI) > 1e-12 * TWO_PI:
        raise ConfigError(f"{tag} quadratures assume grid.L = 2*pi")

    try:
        stepper_config = StepperConfig(
            dt=_pop_float(pairs, "stepper.dt", required=True),
            scheme=pairs.pop("stepper.scheme", "etd_rk2"),
            dealias=_pop_bool(pairs, "stepper.dealias", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    if stepper_config.scheme not in SCHEMES:
        raise ConfigError(f"stepper.scheme must be one of {SCHEMES}")

    horizon = _pop_float(pairs, "run.T", required=True)
    if horizon <= 0:
        raise ConfigError("run.T must be positive")

    initial: Dict[str, str] = {}
    preset = pairs.pop("initial.preset", None)
    source = pairs.pop("initial.file", None)
    if (preset is None) == (source is None):
        raise ConfigError("exactly one of initial.preset / initial.file "
                          "is required")
    if source is not None:
        initial["file"] = source
    else:
        if preset not in _INITIAL_PARAM_KEYS:
            raise ConfigError(f"unknown initial.preset {preset!r}")
        initial["preset"] = preset
        for name in _INITIAL_PARAM_KEYS[preset]:
            key = f"initial.{name}"
            if key in pairs:
                initial[name] = pairs.pop(key)

    stride = _pop_int(pairs, "ledger.stride", default=1)
    if stride < 1:
        raise ConfigError("ledger.stride must be >= 1")
    derivative_sup: Tuple[int, ...] = ()
    if "ledger.derivative_sup" in pairs:
        try:
            derivative_sup = tuple(
                int(tok) for tok in pairs.pop("ledger.derivative_sup").split(","))
        except ValueError:
            raise ConfigError("ledger.derivative_sup must be integers")
        if any(m < 1 for m in derivative_sup):
            raise ConfigError("derivative orders must be >= 1")
    holder_targets: Tuple[Tuple[int, float], ...] = ()
    if "ledger.holder" in pairs:
        targets = []
        for tok in pairs.pop("ledger.holder").split(","):
            k, sep, kappa = tok.partition(":")
            try:
                targets.append((int(k), float(kappa)))
            except ValueError:
                sep = ""
            if not sep:
                raise ConfigError("ledger.holder entries must be k:kappa")
        holder_targets = tuple(targets)
    theta_raw = pairs.pop("ledger.theta", "auto").lower()
    if theta_raw not in ("auto", "true", "false"):
        raise ConfigError("ledger.theta must be true, false, or auto")
    record_theta = None if theta_raw == "auto" else theta_raw == "true"
    ledger = LedgerSpec(stride=stride, derivative_sup=derivative_sup,
                        holder_targets=holder_targets,
                        record_theta=record_theta)

    out_dir = pairs.pop("output.dir", None)
    if out_dir is None:
        raise ConfigError("missing required key output.dir")
    seed = _pop_int(pairs, "seed", default=0)

    if pairs:
        raise ConfigError(f"unknown keys: {', '.join(sorted(pairs))}")
    return RunConfig(model_spec=spec, n=n, domain_length=length,
                     stepper=stepper_config, horizon=horizon,
                     initial=initial, ledger=ledger, output_dir=out_dir,
                     seed=seed)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    return build_run_config(parse_config_text(text))


def config_lines(config: RunConfig) -> List[str]:
    """The effective config, defaults included, as loadable text lines."""
    spec = config.model_spec
    lines = [f"model.tag = {spec.tag}"]
    for name in sorted(spec.params):
        lines.append(f"model.{name} = {spec.params[name]:.17g}")
    lines.append(f"grid.N = {config.n}")
    lines.append(f"grid.L = {config.domain_length:.17g}")
    lines.append(f"stepper.dt = {config.stepper.dt:.17g}")
    lines.append(f"stepper.scheme = {config.stepper.scheme}")
    lines.append(f"stepper.dealias = {str(config.stepper.dealias).lower()}")
    lines.append(f"run.T = {config.horizon:.17g}")
    for name in sorted(config.initial):
        lines.append(f"initial.{name} = {config.initial[name]}")
    lines.append(f"ledger.stride = {config.ledger.stride}")
    if config.ledger.derivative_sup:
        joined = ",".join(str(m) for m in config.ledger.derivative_sup)
        lines.append(f"ledger.derivative_sup = {joined}")
    if config.ledger.holder_targets:
        joined = ",".join(f"{k}:{kappa:g}"
                          for k, kappa in config.ledger.holder_targets)
        lines.append(f"ledger.holder = {joined}")
    if config.ledger.record_theta is not None:
        lines.append(
            f"ledger.theta = {str(config.ledger.record_theta).lower()}")
    lines.append(f"output.dir = {config.output_dir}")
    lines.append(f"seed = {config.seed}")
    return lines


# ---------------------------------------------------------------------------
# initial data presets

def _preset_float(initial, name, default):
    try:
        return float(initial.get(name, default))
    except ValueError:
        raise ConfigError(f"initial.{name} must be a number")


def build_initial_field(config: RunConfig) -> PeriodicField:
    initial = config.initial
    if "file" in initial:
        field, _ = read_snapshot(initial["file"])
        if field.n != config.n:
            raise ConfigError(
                f"snapshot has {field.n} samples, config asks for {config.n}")
        return field

    preset = initial["preset"]
    n, length = config.n, config.domain_length
    x = np.arange(n) * (length / n)
    if preset == "cosine":
        amp = _preset_float(initial, "amplitude", 1.0)
        mode = int(_preset_float(initial, "mode", 1))
        mean = _preset_float(initial, "mean", 0.0)
        samples = mean + amp * np.cos(mode * (TWO_PI / length) * x)
    elif preset == "triangle":
        amp = _preset_float(initial, "amplitude", 1.0)
        samples = amp * (1.0 - (4.0 / length) * np.abs(x - length / 2.0))
    elif preset == "random_band":
        kmin = int(_preset_float(initial, "kmin", 1))
        kmax = int(_preset_float(initial, "kmax", 8))
        if not 1 <= kmin <= kmax < n // 2:
            raise ConfigError("random_band needs 1 <= kmin <= kmax < N/2")
        amp = _preset_float(initial, "amplitude", 1.0)
        rng = np.random.default_rng(config.seed)
        samples = np.zeros(n)
        for k in range(kmin, kmax + 1):
            phase = (TWO_PI / length) * k * x
            samples += rng.standard_normal() * np.cos(phase)
            samples += rng.standard_normal() * np.sin(phase)
        samples *= amp / max(float(np.max(np.abs(samples))), 1e-300)
    elif preset == "sd_cylinder":
        amp = _preset_float(initial, "amplitude", 0.01)
        mode = int(_preset_float(initial, "mode", 1))
        mean = _preset_float(initial, "mean", 2.0)
        samples = mean + amp * np.cos(mode * (TWO_PI / length) * x)
    elif preset == "ellipse":
        a = _preset_float(initial, "a", 1.1)
        b = _preset_float(initial, "b", 0.9)
        theta = TWO_PI * np.arange(n) / n
        samples = np.stack([a * np.cos(theta), b * np.sin(theta)])
    elif preset == "circle":
        radius = _preset_float(initial, "radius", 1.0)
        theta = TWO_PI * np.arange(n) / n
        samples = np.stack([radius * np.cos(theta), radius * np.sin(theta)])
    else:
        raise ConfigError(f"unknown initial.preset {preset!r}")

    field = PeriodicField(samples, domain_length=length)
    is_contour = preset in _CONTOUR_PRESETS
    model_is_contour = config.model_spec.tag == "peskin2d"
    if is_contour != model_is_contour:
        want = "a contour" if model_is_contour else "a scalar field"
        raise ConfigError(
            f"{config.model_spec.tag} needs {want}; preset {preset} does "
            f"not provide one")
    return field


# ---------------------------------------------------------------------------
# ledger CSV

def _holder_sort_key(name: str):
    _, k, kappa = name.split("_")
    return (int(k), float(kappa))


def ledger_columns(row: Dict[str, float]) -> List[str]:
    cols = ["t", "l2", "linf"]
    if "mean" in row:
        cols += ["mean", "osc_linf"]
    else:
        cols += ["mean_0", "mean_1"]
    cols += sorted((k for k in row if k.startswith("d") and k.endswith("_linf")),
                   key=lambda name: int(name[1:-5]))
    cols += sorted((k for k in row if k.startswith("holder_")),
                   key=_holder_sort_key)
    if "theta" in row:
        cols.append("theta")
    return cols


def write_ledger_csv(path: str, rows: Sequence[Dict[str, float]]) -> None:
    cols = ledger_columns(rows[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(format(float(row[c]), ".17g") for c in cols)
                     + "\n")


def read_ledger_csv(path: str) -> Dict[str, np.ndarray]:
    try:
        with open(path, "r", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ConfigError(f"{path}: empty CSV")
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read CSV: {exc}")
    except csv.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    out = {}
    for name in reader.fieldnames:
        try:
            out[name] = np.array([float(row[name]) for row in rows])
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: non-numeric entry in column {name}")
    return out


# ---------------------------------------------------------------------------
# run command

def _resolve_output_dir(out_dir: str) -> str:
    root = os.environ.get("PLAB_OUTPUT_ROOT")
    if root and not os.path.isabs(out_dir):
        return os.path.join(root, out_dir)
    return out_dir


def _write_manifest(path: str, config: RunConfig) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# pslab run manifest; loadable as a run config\n")
        fh.write(f"# pslab_version = {_version()}\n")
        for line in config_lines(config):
            fh.write(line + "\n")


def _write_run_outputs(out_dir: str, traj: Trajectory) -> None:
    # an abort before the first record leaves nothing to write
    if not traj.snapshots:
        return
    t0, first = traj.snapshots[0]
    t1, last = traj.snapshots[-1]
    write_snapshot(os.path.join(out_dir, "initial.bin"), first, t0)
    write_snapshot(os.path.join(out_dir, "final.bin"), last, t1)
    write_ledger_csv(os.path.join(out_dir, "ledger.csv"), traj.ledger)


def cmd_run(config_path: str) -> int:
    config = load_config(config_path)
    try:
        model = models.make_model(config.model_spec)
    except ValueError as exc:
        raise ConfigError(str(exc))
    u0 = build_initial_field(config)

    out_dir = _resolve_output_dir(config.output_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_manifest(os.path.join(out_dir, "manifest.txt"), config)
    except OSError as exc:
        raise ConfigError(f"cannot write to output dir: {exc}")

    try:
        traj = evolve(model, u0, config.horizon, config.stepper,
                      config.ledger)
    except EvolutionAbort as exc:
        _write_run_outputs(out_dir, exc.trajectory)
        with open(os.path.join(out_dir, "diagnostics.txt"), "w") as fh:
            fh.write(f"aborted_at = {exc.time:.17g}\n")
            fh.write(f"reason = {exc.reason}\n")
        print(f"pslab: run aborted at t={exc.time:.6g}: {exc.reason}",
              file=sys.stderr)
        return 3
    except ValueError as exc:
        if "stability" not in str(exc):
            raise ConfigError(str(exc))
        with open(os.path.join(out_dir, "diagnostics.txt"), "w") as fh:
            fh.write("aborted_at = 0\n")
            fh.write(f"reason = {exc}\n")
        print(f"pslab: run refused: {exc}", file=sys.stderr)
        return 3

    _write_run_outputs(out_dir, traj)
    print(f"run complete: {len(traj.ledger)} ledger rows -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# verify command

def _check(name, measured, expected, tolerance, lower_bound=False):
    if lower_bound:
        ok = measured >= expected - tolerance
    else:
        ok = abs(measured - expected) <= tolerance
    return {
        "check": name,
        "status": "pass" if ok else "fail",
        "measured": float(measured),
        "expected": float(expected),
        "tolerance": float(tolerance),
        "schema_version": SCHEMA_VERSION,
    }


def _random_band_field(rng, n=256, kmax=20) -> PeriodicField:
    x = np.arange(n) * (TWO_PI / n)
    samples = np.zeros(n)
    for k in range(1, kmax + 1):
        samples += rng.standard_normal() * np.cos(k * x)
        samples += rng.standard_normal() * np.sin(k * x)
    return PeriodicField(samples / np.sqrt(kmax))


def _verify_kernels() -> List[dict]:
    checks = []
    for d, b, z in (
        (1, (0.0,), 1.0),
        (1, (0.5,), 0.1),
        (1, (2.0,), 10.0),
        (2, (1.0, 0.0), 1.0),
    ):
        kern = kernels.PoissonAnisoKernel(b=np.array(b), d=d)
        mass = kernels.poisson_aniso_mass(kern, z)
        label = "x".join(str(v) for v in b)
        checks.append(_check(f"poisson_aniso_mass_d{d}_b{label}_z{z:g}",
                             mass, 1.0, 1e-5))

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(5):
        s = float(rng.uniform(1.0, 2.0))
        c0 = float(rng.uniform(0.2, 0.8))
        dim = int(rng.integers(1, 4))
        spread = float(rng.uniform(0.0, 1.0))
        basis = np.linalg.qr(rng.standard_normal((dim, dim)))[0]

        def symbol_eval(t, xi, c0=c0, dim=dim, spread=spread, basis=basis,
                        s=s):
            eigs = c0 + spread * (1.0 + np.sin(t + np.arange(dim)))
            return (basis * (eigs * abs(xi) ** s)) @ basis.T

        sym = kernels.FrozenSymbol(s=s, c0=c0, dim_N=dim, eval=symbol_eval)
        khat = kernels.frozen_kernel_hat(sym, t=0.5, xi_grid=[1.0, 2.0, 4.0])
        worst = max(worst, khat.frobenius_excess())
    checks.append(_check("frozen_kernel_frobenius_excess", worst, 1.0, 1e-6))

    heat = kernels.fractional_heat_kernel(t=0.1, s=1.5, n=256)
    mass = float(np.sum(heat.samples) * heat.spacing)
    checks.append(_check("fractional_heat_kernel_mass", mass, 1.0, 1e-10))

    times = np.linspace(0.1, 5.0, 50)
    l1 = [float(np.sum(np.abs(kernels.periodic_sd_kernel(t, 2.0, 256).samples))
                * (TWO_PI / 256)) for t in times]
    rate = fit_exponential(times, l1, window=(0.1, 5.0)).estimate
    checks.append(_check("periodic_sd_kernel_decay_rate", rate,
                         kernels.sd_decay_floor(2.0), 0.0, lower_bound=True))
    return checks


def _verify_operators() -> List[dict]:
    checks = []
    c1 = nonlocal_ops.lemz0_constant(1)
    checks.append(_check("lemz0_constant_d1", c1, 1.0 / np.pi, 1e-6))

    for d, b, e in (
        (1, np.array([0.5]), np.array([1.0])),
        (1, np.array([2.0]), np.array([-1.0])),
        (2, np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        (2, np.array([0.5, 0.5]), np.array([1.0, 0.0])),
    ):
        bb2 = 1.0 + float(b @ b)
        be = float(b @ e)
        expected = np.sqrt(bb2 - be * be) / bb2
        measured = nonlocal_ops.lemz0_constant(d) * \
            nonlocal_ops.contc_integral(d, b, e)
        label = "x".join(f"{v:g}" for v in b)
        checks.append(_check(f"lemz0_identity_d{d}_b{label}", measured,
                             expected, 1e-4))

    rng = np.random.default_rng(1)
    worst = 0.0
    for b in (0.0, 0.5, 1.0, 3.0):
        for _ in range(2):
            field = _random_band_field(rng)
            four = nonlocal_ops.dirichlet_neumann_op(field, b, "+",
                                                     backend="fourier")
            quad = nonlocal_ops.dirichlet_neumann_op(field, b, "+",
                                                     backend="quadrature")
            scale = float(np.max(np.abs(four.samples)))
            gap = float(np.max(np.abs(four.samples - quad.samples))) / scale
            worst = max(worst, gap)
    checks.append(_check("dirichlet_neumann_backend_gap", worst, 0.0, 1e-3))

    x = np.arange(256) * (TWO_PI / 256)
    h = nonlocal_ops.hilbert_transform(PeriodicField(np.cos(x)))
    gap = float(np.max(np.abs(h.samples - np.sin(x))))
    checks.append(_check("hilbert_transform_cosine", gap, 0.0, 1e-12))
    return checks


def _verify_models() -> List[dict]:
    checks = []
    n = 256
    x = np.arange(n) * (TWO_PI / n)
    theta = TWO_PI * np.arange(n) / n

    circle = PeriodicField(np.stack([np.cos(theta), np.sin(theta)]))
    peskin = models.Peskin2dModel()
    sup = float(np.max(np.abs(peskin.rhs(circle).samples)))
    checks.append(_check("peskin_circle_stationary", sup, 0.0, 1e-6))

    flat = PeriodicField(np.full(n, 0.7))
    sup = float(np.max(np.abs(models.McfGraphModel().rhs(flat).samples)))
    checks.append(_check("mcf_constant_stationary", sup, 0.0, 1e-14))

    h = PeriodicField(2.0 + 0.3 * np.cos(x))
    sd = models.SurfaceDiffusionModel(hbar0=2.0)
    drift = float(np.sum(h.samples * sd.rhs(h).samples) * h.spacing)
    checks.append(_check("surface_diffusion_volume_flux", drift, 0.0, 1e-10))

    bumpy = PeriodicField(0.1 * np.cos(x) + 0.05 * np.sin(2 * x))
    for name, model in (
        ("thinfilm_rhs_mean", models.ThinfilmExpModel()),
        ("muskat_rhs_mean", models.MuskatStModel()),
    ):
        mean = float(np.mean(model.rhs(bumpy).samples))
        checks.append(_check(name, mean, 0.0, 1e-12))

    for tag, field in (
        ("heat", bumpy),
        ("mcf_graph", bumpy),
        ("nonlocal_mcf", bumpy),
        ("thinfilm_exp", PeriodicField(0.01 * np.cos(x))),
    ):
        spec = models.ModelSpec(tag, {}, models._expected_order(tag, {}))
        model = models.make_model(spec)
        lhs = model.rhs(field).samples
        mult = model.linear_multiplier(
            np.fft.fftfreq(n, d=1.0 / n) * (TWO_PI / field.domain_length))
        linear = np.fft.ifft(mult * np.fft.fft(field.samples)).real
        gap = float(np.max(np.abs(lhs + linear
                                  - model.remainder(field).samples)))
        checks.append(_check(f"splitting_identity_{tag}", gap, 0.0, 1e-10))

    rate = models.mode1_rate(models.NonlocalMcfModel(a=0.5))
    expected = -models.NonlocalMcfModel(a=0.5).multiplier_constant
    checks.append(_check("nonlocal_mcf_mode1_rate", rate, expected,
                         1e-3 * abs(expected)))
    return checks


_SUITES = {
    "kernels": _verify_kernels,
    "operators": _verify_operators,
    "models": _verify_models,
}


def cmd_verify(suite: str) -> int:
    checks = _SUITES[suite]()
    for record in checks:
        print(json.dumps(record))
    return 0 if all(c["status"] == "pass" for c in checks) else 1


# ---------------------------------------------------------------------------
# ratefit command

def _parse_expect(text: str) -> Tuple[float, float]:
    target = tolerance = None
    for token in text.split(","):
        key, sep, value = token.partition("=")
        if not sep:
            raise ConfigError("--expect entries must be key=value")
        key = key.strip()
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"--expect {key} must be a number")
        if key in ("exponent", "rate"):
            target = number
        elif key == "tol":
            tolerance = number
        else:
            raise ConfigError(f"unknown --expect key {key!r}")
    if target is None or tolerance is None:
        raise ConfigError("--expect needs exponent=<value>,tol=<value>")
    return target, tolerance


def _parse_window(text: Optional[str]):
    if text is None:
        return None
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ConfigError("--window must be lo:hi")
    try:
        return (float(lo), float(hi))
    except ValueError:
        raise ConfigError("--window bounds must be numbers")


def cmd_ratefit(csv_path: str, column: str, kind: str,
                window_text: Optional[str],
                expect_text: Optional[str]) -> int:
    table = read_ledger_csv(csv_path)
    if "t" not in table:
        raise ConfigError(f"{csv_path}: no t column")
    if column not in table:
        raise ConfigError(f"{csv_path}: no column {column!r} "
                          f"(has {', '.join(table)})")
    window = _parse_window(window_text)
    fitter = fit_power_law if kind == "power_law" else fit_exponential
    try:
        fit = fitter(table["t"], table[column], window=window)
    except ValueError as exc:
        raise ConfigError(str(exc))

    print(json.dumps({
        "kind": fit.kind,
        "column": column,
        "estimate": fit.estimate,
        "stderr": fit.stderr,
        "r_squared": fit.r_squared,
        "window": list(fit.window),
        "n_points": fit.n_points,
        "schema_version": SCHEMA_VERSION,
    }))
    if expect_text is None:
        return 0
    target, tolerance = _parse_expect(expect_text)
    record = _check("expected_estimate", fit.estimate, target, tolerance)
    print(json.dumps(record))
    return 0 if record["status"] == "pass" else 1


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pslab",
        description="pseudo-spectral model runs, checks, and rate fits")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="march a configured model")
    p_run.add_argument("config", help="path to a key = value config file")

    p_verify = sub.add_parser("verify", help="run a named check suite")
    p_verify.add_argument("suite", choices=sorted(_SUITES))

    p_fit = sub.add_parser("ratefit", help="fit a rate to a ledger column")
    p_fit.add_argument("csv", help="ledger CSV from a run")
    p_fit.add_argument("--column", default="linf")
    p_fit.add_argument("--kind", choices=("power_law", "exponential"),
                       default="power_law")
    p_fit.add_argument("--window", default=None, help="fit window lo:hi")
    p_fit.add_argument("--expect", default=None,
                       help="pass/fail spec, e.g. exponent=-0.5,tol=0.05")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "verify":
            return cmd_verify(args.suite)
        return cmd_ratefit(args.csv, args.column, args.kind, args.window,
                           args.expect)
    except ConfigError as exc:
        print(f"pslab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
