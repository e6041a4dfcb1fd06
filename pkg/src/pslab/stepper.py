"""Time integration built on exact exponential propagation of each model's
frozen linear multiplier, with the nonlinear remainder treated explicitly
through phi-function weights.

Schemes
-------
imex_frozen_phi   exponential Euler: u+ = E u + dt phi1(-dt A) R(u)
etd_rk2           adds the standard second-order correction through phi2
frozen_pointwise  per-point exact kernel of the space-dependent symbol
                  a(x) base(k), nonlinear remainder added explicitly

Because the linear part is integrated exactly, explicit treatment of the
remainder stays stable as long as its damped response remains below the
linear damping; evolve() enforces that with a measured surrogate (see
_stability_bound) rather than a raw Jacobian norm, which would wrongly
reject stiff-but-dominated remainders.

picard_solve iterates the whole-window linear solve g -> S g and reports
the successive-iterate distances; contraction is a smallness statement
about the time window, so the caller bisects T on failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .grid import (
    PeriodicField,
    TWO_PI,
    dealias as dealias_filter,
    holder_seminorm,
    norms,
    spectral_derivative,
)

SCHEMES = ("imex_frozen_phi", "etd_rk2", "frozen_pointwise")
POINTWISE_MAX_N = 1024


class EvolutionAbort(RuntimeError):
    """March stopped early; carries the trajectory up to the last healthy
    snapshot and the reason."""

    def __init__(self, trajectory, reason: str, time: float):
        self.trajectory = trajectory
        self.reason = reason
        self.time = time
        super().__init__(f"evolution aborted at t={time:.6g}: {reason}")


class PicardDivergenceError(RuntimeError):
    """Whole-window iteration failed to contract; carries the distance log."""

    def __init__(self, log, message: str):
        self.log = list(log)
        super().__init__(message)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "etd_rk2"
    dealias: bool = False
    max_picard_iters: int = 25
    picard_tol: float = 1e-8

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.max_picard_iters < 1:
            raise ValueError("max_picard_iters must be >= 1")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")


@dataclass(frozen=True)
class LedgerSpec:
    """What to record at each kept snapshot.

    derivative_sup: spectral-derivative orders m recorded as d{m}_linf.
    holder_targets: (k, kappa) pairs recorded as holder_{k}_{kappa}.
    record_theta: None means record for contour models only.
    stride: keep every stride-th step (the initial and final states are
    always kept).
    """

    stride: int = 1
    derivative_sup: tuple = ()
    holder_targets: tuple = ()
    record_theta: Optional[bool] = None

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    snapshots: tuple  # ((t, PeriodicField), ...)
    ledger: tuple     # one dict per snapshot

    def __post_init__(self):
        times = [t for t, _ in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if len(self.ledger) != len(self.snapshots):
            raise ValueError("ledger and snapshots must align")

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def final(self) -> PeriodicField:
        return self.snapshots[-1][1]

    def series(self, key: str) -> np.ndarray:
        return np.array([entry[key] for entry in self.ledger])


def ledger_entry(t: float, field: PeriodicField, spec: LedgerSpec,
                 is_contour: bool = False) -> dict:
    """Diagnostics recorded for one snapshot; a pure function of its inputs,
    so any ledger row can be recomputed bit-identically from the field."""
    base = norms(field)
    entry = {"t": float(t), "l2": base["l2"], "linf": base["linf"]}
    if field.components > 1:
        for i, m in enumerate(np.atleast_1d(base["mean"])):
            entry[f"mean_{i}"] = float(m)
    else:
        entry["mean"] = base["mean"]
        entry["osc_linf"] = float(np.max(np.abs(field.samples - base["mean"])))
        for m in spec.derivative_sup:
            d = spectral_derivative(field, int(m))
            entry[f"d{int(m)}_linf"] = float(np.max(np.abs(d.samples)))
        for k, kappa in spec.holder_targets:
            est = holder_seminorm(field, int(k), float(kappa))
            entry[f"holder_{int(k)}_{float(kappa):g}"] = est.value
    want_theta = spec.record_theta if spec.record_theta is not None else is_contour
    if want_theta:
        from .nonlocal_ops import stretch_ratio
        entry["theta"] = stretch_ratio(field)[0]
    return entry


def _phi1(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    safe = np.where(z == 0.0, 1.0, z)
    out = np.expm1(safe) / safe
    return np.where(z == 0.0, 1.0, out)


def _phi2(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    out = (np.expm1(safe) - safe) / safe**2
    series = 0.5 + z / 6.0 + z**2 / 24.0
    return np.where(small, series, out)


def _wavenumbers(field: PeriodicField) -> np.ndarray:
    return np.fft.fftfreq(field.n, d=1.0 / field.n) * (TWO_PI / field.domain_length)


def imex_frozen_phi_step(u: PeriodicField, model, dt: float,
                         phi: Optional[PeriodicField] = None,
                         scheme: str = "etd_rk2",
                         dealias: bool = False) -> PeriodicField:
    """One step with exact propagation of the frozen linear multiplier and
    an explicit phi-weighted remainder (Euler or ETD-RK2 correction)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if scheme not in ("imex_frozen_phi", "etd_rk2"):
        raise ValueError("scheme must be imex_frozen_phi or etd_rk2")
    k = _wavenumbers(u)
    m = model.linear_multiplier(k, phi)
    z = -dt * m
    E = np.exp(z)
    p1 = _phi1(z)

    def remainder_hat(w):
        r = model.remainder(w, phi)
        if dealias:
            r = dealias_filter(r)
        return np.fft.fft(r.samples, axis=-1)

    uh = np.fft.fft(u.samples, axis=-1)
    r1 = remainder_hat(u)
    ah = E * uh + dt * p1 * r1
    if scheme == "imex_frozen_phi":
        return u.with_samples(np.fft.ifft(ah, axis=-1).real)
    a = u.with_samples(np.fft.ifft(ah, axis=-1).real)
    r2 = remainder_hat(a)
    out = ah + dt * _phi2(z) * (r2 - r1)
    return u.with_samples(np.fft.ifft(out, axis=-1).real)


def frozen_pointwise_step(u: PeriodicField, model, dt: float) -> PeriodicField:
    """One step where each grid point propagates under the exact kernel of
    its own frozen symbol a(x_i) base(k); dense in frequency, so scalar 1D
    fields up to N = 1024 only."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if u.is_2d or u.components != 1:
        raise ValueError("pointwise freezing is implemented for scalar 1D fields")
    if u.n > POINTWISE_MAX_N:
        raise ValueError(f"pointwise freezing is dense; N must be <= {POINTWISE_MAX_N}")
    a = model.pointwise_coefficient(u)
    if a is None:
        raise ValueError(f"{model.tag} does not expose a pointwise symbol")
    a = np.asarray(a, dtype=float)
    k = _wavenumbers(u)
    base = model.pointwise_base(k)
    E = np.exp(-dt * np.outer(a, base))
    phase = np.exp(1j * np.outer(u.nodes(), k))
    uh = np.fft.fft(u.samples)
    prop = ((E * phase) @ uh).real / u.n
    rem = model.pointwise_remainder(u)
    return u.with_samples(prop + dt * rem.samples)


def mollified_reference(field: PeriodicField, width_cells: float = 4.0) -> PeriodicField:
    """Gaussian low-pass of a field, width measured in grid cells; a
    smooth reference state for coefficient freezing."""
    if width_cells < 0:
        raise ValueError("width must be nonnegative")
    if width_cells == 0.0:
        return field
    w = width_cells * field.spacing
    k = _wavenumbers(field)
    modes = np.fft.fft(field.samples, axis=-1)
    return field.with_samples(np.fft.ifft(modes * np.exp(-0.5 * (k * w) ** 2),
                                          axis=-1).real)


def _stability_bound(model, u0: PeriodicField, dt: float,
                     phi: Optional[PeriodicField]) -> float:
    """Largest probed step tau for which the phi1-damped remainder response
    tau * ||phi1(-tau A) dR|| / ||dv|| stays below 1. The damping factor is
    what the scheme actually applies, so a remainder with stiff content but
    coefficient ratio < 1 correctly reports an unbounded window."""
    rng = np.random.default_rng(0)
    scale = 1e-6 * max(float(np.max(np.abs(u0.samples))), 1.0)
    dv = rng.standard_normal(u0.samples.shape) * scale
    r0 = model.remainder(u0, phi).samples
    r1 = model.remainder(u0.with_samples(u0.samples + dv), phi).samples
    diff_hat = np.fft.fft(r1 - r0, axis=-1)
    if float(np.max(np.abs(r1 - r0))) == 0.0:
        return np.inf
    k = _wavenumbers(u0)
    m = model.linear_multiplier(k, phi)
    dv_sup = float(np.max(np.abs(dv)))
    bound = 0.0
    for j in range(-2, 16):
        tau = dt * 2.0**j
        resp = np.fft.ifft(_phi1(-tau * m) * diff_hat, axis=-1).real
        q = tau * float(np.max(np.abs(resp))) / dv_sup
        if q <= 1.0:
            bound = tau
        elif bound > 0.0:
            break
    if bound == dt * 2.0**15:
        return np.inf
    return bound


def _check_dt_guard(model, u0, config: StepperConfig, phi):
    bound = _stability_bound(model, u0, config.dt, phi)
    if config.dt > 0.5 * bound:
        raise ValueError(
            f"dt={config.dt:.3e} exceeds half the measured stability bound "
            f"{bound:.3e} for the explicit remainder")


def _step(u, model, config: StepperConfig, phi):
    if config.scheme == "frozen_pointwise":
        return frozen_pointwise_step(u, model, config.dt)
    return imex_frozen_phi_step(u, model, config.dt, phi=phi,
                                scheme=config.scheme, dealias=config.dealias)


def evolve(model, u0: PeriodicField, T: float, config: StepperConfig,
           ledger_spec: Optional[LedgerSpec] = None,
           phi: Optional[PeriodicField] = None) -> Trajectory:
    """Uniform-dt march to time T. Deterministic; aborts (with the partial
    trajectory attached) on non-finite values, contour stretch beyond the
    model's cap, or a model-level positivity failure."""
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = int(round(T / config.dt))
    if n_steps < 1 or abs(n_steps * config.dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer number of steps")
    spec = ledger_spec if ledger_spec is not None else LedgerSpec()
    is_contour = bool(getattr(model, "is_contour", False))

    def record(t, w, snaps, rows):
        row = ledger_entry(t, w, spec, is_contour)
        cap = getattr(model, "theta_cap", None)
        if "theta" in row and cap is not None and row["theta"] >= cap:
            raise EvolutionAbort(
                Trajectory(tuple(snaps), tuple(rows)),
                f"stretch ratio {row['theta']:.3g} reached the cap {cap:.3g}", t)
        snaps.append((t, w))
        rows.append(row)

    snaps, rows = [], []
    record(0.0, u0, snaps, rows)
    try:
        _check_dt_guard(model, u0, config, phi)
    except RuntimeError as exc:
        raise EvolutionAbort(Trajectory(tuple(snaps), tuple(rows)),
                             str(exc), 0.0) from exc
    u = u0
    for j in range(1, n_steps + 1):
        t = j * config.dt
        try:
            u = _step(u, model, config, phi)
        except (RuntimeError, FloatingPointError) as exc:
            raise EvolutionAbort(Trajectory(tuple(snaps), tuple(rows)),
                                 str(exc), t) from exc
        except ValueError as exc:
            # field construction rejects NaN/Inf, so numeric blowup inside
            # a step or a model evaluation surfaces here
            if "NaN/Inf" not in str(exc):
                raise
            raise EvolutionAbort(Trajectory(tuple(snaps), tuple(rows)),
                                 "non-finite values in the state", t) from exc
        if j % spec.stride == 0 or j == n_steps:
            record(t, u, snaps, rows)
    return Trajectory(tuple(snaps), tuple(rows))


def _picard_apply(model, g_snaps, config: StepperConfig, phi):
    """One application of the whole-window map: solve the linear problem
    d/dt f = -A f + R(g(t)) with the same exponential weights as evolve."""
    dt = config.dt
    u0 = g_snaps[0][1]
    k = _wavenumbers(u0)
    m = model.linear_multiplier(k, phi)
    z = -dt * m
    E, p1, p2 = np.exp(z), _phi1(z), _phi2(z)

    def rem_hat(w):
        r = model.remainder(w, phi)
        if config.dealias:
            r = dealias_filter(r)
        return np.fft.fft(r.samples, axis=-1)

    r_hats = [rem_hat(w) for _, w in g_snaps]
    source_free = all(float(np.max(np.abs(r))) == 0.0 for r in r_hats)
    out = [g_snaps[0]]
    fh = np.fft.fft(u0.samples, axis=-1)
    for j in range(len(g_snaps) - 1):
        fh = E * fh + dt * p1 * r_hats[j]
        if config.scheme == "etd_rk2":
            fh = fh + dt * p2 * (r_hats[j + 1] - r_hats[j])
        t = g_snaps[j + 1][0]
        out.append((t, u0.with_samples(np.fft.ifft(fh, axis=-1).real)))
    return out, source_free


def _trajectory_distance(a_snaps, b_snaps) -> float:
    return max(float(np.max(np.abs(wa.samples - wb.samples)))
               for (_, wa), (_, wb) in zip(a_snaps, b_snaps))


def picard_apply(model, traj: Trajectory, config: StepperConfig,
                 phi: Optional[PeriodicField] = None) -> Trajectory:
    """Public single application of the window map to a trajectory."""
    snaps, _ = _picard_apply(model, list(traj.snapshots), config, phi)
    is_contour = bool(getattr(model, "is_contour", False))
    rows = tuple(ledger_entry(t, w, LedgerSpec(), is_contour) for t, w in snaps)
    return Trajectory(tuple(snaps), rows)


def picard_solve(model, u0: PeriodicField, T: float, config: StepperConfig,
                 phi: Optional[PeriodicField] = None):
    """Iterate the whole-window map from the constant-in-time trajectory.

    Returns (Trajectory, contraction_log) where the log holds the
    successive-iterate sup distances. Raises PicardDivergenceError (log
    attached) when the ratio is >= 1 three times in a row or the iteration
    budget runs out; contraction is a property of the window length, so
    the caller should retry on a shorter window.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = int(round(T / config.dt))
    if n_steps < 1 or abs(n_steps * config.dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer number of steps")
    g = [(j * config.dt, u0) for j in range(n_steps + 1)]
    log = []
    prev = None
    rising = 0
    for _ in range(config.max_picard_iters):
        f, source_free = _picard_apply(model, g, config, phi)
        d = _trajectory_distance(f, g)
        log.append(d)
        g = f
        # a remainder that vanishes identically on the window makes the map
        # constant, so its first output is already the fixed point
        if d < config.picard_tol or source_free:
            is_contour = bool(getattr(model, "is_contour", False))
            rows = tuple(ledger_entry(t, w, LedgerSpec(), is_contour)
                         for t, w in g)
            return Trajectory(tuple(g), rows), log
        if prev is not None and prev > 0 and d / prev >= 1.0:
            rising += 1
            if rising >= 3:
                raise PicardDivergenceError(
                    log, "successive-iterate distances rose three times in a "
                         "row; shorten the window")
        elif prev is not None:
            rising = 0
        prev = d
    raise PicardDivergenceError(
        log, f"no contraction to tol within {config.max_picard_iters} iterates")
