"""Six evolution equations in a shared splitting contract: each model
exposes the full right side, a constant-coefficient linear multiplier for
exact exponential propagation, and the explicit remainder.

Splitting convention: d/dt u_hat = -multiplier * u_hat + remainder_hat, so
remainder(u) = rhs(u) + L u with (L u)^ = multiplier * u_hat. Models
override the generic remainder where a dedicated form is better
conditioned for small data.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma

from .grid import (
    PeriodicField,
    TWO_PI,
    dealias as dealias_filter,
    spectral_derivative,
)
from .kernels import sd_symbol
from .nonlocal_ops import (
    TensionLaw,
    fractional_mean_curvature,
    hookean_tension,
    muskat_st_rhs,
    peskin_rhs,
    stretch_ratio,
)

MODEL_TAGS = (
    "mcf_graph",
    "nonlocal_mcf",
    "peskin2d",
    "muskat_st",
    "surface_diffusion_axi",
    "thinfilm_exp",
    # baseline presets used by the stepper and CLI, not part of the six
    "heat",
    "varcoef_heat",
)


class PositivityError(RuntimeError):
    """Surface-diffusion state touched zero; the local theory needs a
    positive lower bound."""

    def __init__(self, min_value):
        self.min_value = min_value
        super().__init__(f"state minimum {min_value:.3e} is not positive")


@dataclass(frozen=True)
class ModelSpec:
    """Tag, parameter record, and linear order of one evolution equation."""

    tag: str
    params: dict = dc_field(default_factory=dict)
    order_s: float = 0.0

    def __post_init__(self):
        if self.tag not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.tag!r}")
        expected = _expected_order(self.tag, self.params)
        if abs(self.order_s - expected) > 1e-12:
            raise ValueError(
                f"order_s for {self.tag} must be {expected}, got {self.order_s}"
            )


def _expected_order(tag, params):
    if tag == "nonlocal_mcf":
        return 1.0 + float(params.get("a", 0.5))
    return {
        "mcf_graph": 2.0,
        "peskin2d": 1.0,
        "muskat_st": 3.0,
        "surface_diffusion_axi": 4.0,
        "thinfilm_exp": 4.0,
        "heat": 2.0,
        "varcoef_heat": 2.0,
    }[tag]


def _multiplier_apply(field: PeriodicField, mult: np.ndarray) -> np.ndarray:
    modes = np.fft.fft(field.samples, axis=-1)
    return np.fft.ifft(modes * mult, axis=-1).real


class _ModelBase:
    """Shared splitting plumbing; concrete models fill in the physics."""

    tag: str = ""
    is_contour: bool = False

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(tag=self.tag, params=self._params(),
                         order_s=_expected_order(self.tag, self._params()))

    def _params(self) -> dict:
        return {}

    def rhs(self, field: PeriodicField) -> PeriodicField:
        raise NotImplementedError

    def _base_multiplier(self, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def coefficient_profile(self, field: PeriodicField):
        """Frozen-coefficient envelope a(x) with rhs ~ -a(x) * base(k);
        None when the model has no such factorization."""
        return None

    def linear_multiplier(self, k: np.ndarray, phi: Optional[PeriodicField] = None) -> np.ndarray:
        c = 1.0
        if phi is not None:
            prof = self.coefficient_profile(phi)
            if prof is None:
                raise ValueError(f"{self.tag} has no frozen-coefficient profile")
            c = float(np.mean(prof))
        return c * self._base_multiplier(np.asarray(k, dtype=float))

    def remainder(self, field: PeriodicField, phi: Optional[PeriodicField] = None) -> PeriodicField:
        k = np.fft.fftfreq(field.n, d=1.0 / field.n) * (TWO_PI / field.domain_length)
        mult = self.linear_multiplier(k, phi)
        lin = _multiplier_apply(field, mult)
        return field.with_samples(self.rhs(field).samples + lin)

    def pointwise_coefficient(self, field: PeriodicField):
        return self.coefficient_profile(field)

    def pointwise_base(self, k: np.ndarray) -> np.ndarray:
        return self._base_multiplier(np.asarray(k, dtype=float))

    def pointwise_remainder(self, field: PeriodicField) -> PeriodicField:
        a = self.pointwise_coefficient(field)
        if a is None:
            raise ValueError(f"{self.tag} does not expose a pointwise symbol")
        k = np.fft.fftfreq(field.n, d=1.0 / field.n) * (TWO_PI / field.domain_length)
        lin = a * _multiplier_apply(field, self.pointwise_base(k))
        return field.with_samples(self.rhs(field).samples + lin)

    def conserved(self, field: PeriodicField):
        """(name, value) of the model's conservation-law diagnostic, or None."""
        return None


class HeatModel(_ModelBase):
    """d/dt u = u_xx; the remainder is identically zero."""

    tag = "heat"

    def rhs(self, field):
        return spectral_derivative(field, 2)

    def _base_multiplier(self, k):
        return k**2

    def coefficient_profile(self, field):
        return np.ones(field.n)

    def remainder(self, field, phi=None):
        return field.with_samples(np.zeros_like(field.samples))

    def conserved(self, field):
        return ("mean", float(np.mean(field.samples)))


class VarCoefHeatModel(_ModelBase):
    """d/dt u = a(x) u_xx with smooth positive a; the exercise problem for
    pointwise freezing (the remainder vanishes at the frozen point)."""

    tag = "varcoef_heat"

    def __init__(self, profile: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        # default ranges over [0.5, 2]
        self.profile = profile if profile is not None else (
            lambda x: 1.25 + 0.75 * np.cos(x))

    def _params(self):
        return {}

    def _profile_samples(self, field):
        a = np.asarray(self.profile(field.nodes()), dtype=float)
        if np.any(a <= 0):
            raise ValueError("coefficient profile must be positive")
        return a

    def rhs(self, field):
        a = self._profile_samples(field)
        return field.with_samples(a * spectral_derivative(field, 2).samples)

    def _base_multiplier(self, k):
        return k**2

    def linear_multiplier(self, k, phi=None):
        # the frozen constant coefficient is the profile mean; phi carries
        # no extra information for a fixed-coefficient problem
        n = 4096
        x = np.arange(n) * (TWO_PI / n)
        return float(np.mean(self.profile(x))) * k**2

    def coefficient_profile(self, field):
        return self._profile_samples(field)


class McfGraphModel(_ModelBase):
    """Graph mean curvature flow d/dt f = f_xx / (1 + f_x^2)."""

    tag = "mcf_graph"

    def rhs(self, field):
        fx = spectral_derivative(field, 1).samples
        fxx = spectral_derivative(field, 2).samples
        return field.with_samples(fxx / (1.0 + fx * fx))

    def _base_multiplier(self, k):
        return k**2

    def coefficient_profile(self, field):
        fx = spectral_derivative(field, 1).samples
        return 1.0 / (1.0 + fx * fx)

    def remainder(self, field, phi=None):
        # (A[f'] - A[phi']) f_xx, which is -f_x^2 f_xx/(1+f_x^2) at phi=0;
        # written this way it is O(f^3) without cancellation
        fx = spectral_derivative(field, 1).samples
        fxx = spectral_derivative(field, 2).samples
        if phi is None:
            c = 1.0
        else:
            c = float(np.mean(self.coefficient_profile(phi)))
        return field.with_samples((1.0 / (1.0 + fx * fx) - c) * fxx)


class NonlocalMcfModel(_ModelBase):
    """d/dt u = -<u_x> H_a[u]; linearization about 0 is -M(a) Lambda^{1+a}
    with M(a) = 2 int (1-cos b)/|b|^{2+a} db = -4 Gamma(-1-a) cos(pi(1+a)/2)."""

    tag = "nonlocal_mcf"

    def __init__(self, a: float = 0.5):
        if not 0.0 < a < 1.0:
            raise ValueError("a must lie in (0, 1)")
        self.a = float(a)
        self.multiplier_constant = float(
            -4.0 * gamma(-1.0 - self.a) * np.cos(0.5 * np.pi * (1.0 + self.a)))

    def _params(self):
        return {"a": self.a}

    def rhs(self, field):
        ux = spectral_derivative(field, 1).samples
        H = fractional_mean_curvature(field, self.a).samples
        return field.with_samples(-np.sqrt(1.0 + ux * ux) * H)

    def _base_multiplier(self, k):
        return self.multiplier_constant * np.abs(k) ** (1.0 + self.a)


class Peskin2dModel(_ModelBase):
    """Elastic membrane in Stokes flow; linear part (1/4) Lambda applied
    componentwise (the Hookean frozen scalar), remainder the drift
    integrals plus the tension mismatch."""

    tag = "peskin2d"
    is_contour = True

    def __init__(self, tension: Optional[TensionLaw] = None, theta_cap: float = 100.0):
        self.tension = tension if tension is not None else hookean_tension()
        self.theta_cap = float(theta_cap)

    def _params(self):
        return {"theta_cap": self.theta_cap}

    def rhs(self, field):
        return peskin_rhs(field, tension=self.tension, theta_cap=self.theta_cap)

    def _base_multiplier(self, k):
        return 0.25 * np.abs(k)

    def conserved(self, field):
        return ("area", enclosed_area(field))


class MuskatStModel(_ModelBase):
    """Surface-tension Muskat interface; linear part Lambda^3."""

    tag = "muskat_st"

    def __init__(self, rho0: float = 0.0):
        self.rho0 = float(rho0)

    def _params(self):
        return {"rho0": self.rho0}

    def rhs(self, field):
        return muskat_st_rhs(field, rho0=self.rho0)

    def _base_multiplier(self, k):
        return np.abs(k) ** 3

    def coefficient_profile(self, field):
        fp = spectral_derivative(field, 1).samples
        return (1.0 + fp * fp) ** -1.5

    def conserved(self, field):
        return ("mean", float(np.mean(field.samples)))


class SurfaceDiffusionModel(_ModelBase):
    """Axisymmetric surface diffusion of a near-cylinder profile h(x) > 0:
    d/dt h = (1/h) ( (h/<h_x>) (curv)_x )_x with curv = 1/(h <h_x>)
    - h_xx/<h_x>^3. Linear part about the reference radius hbar0 is
    -h_xxxx - h_xx/hbar0^2.

    The outer (1/h) d/dx(...) structure is kept unfiltered so that
    sum h * rhs = sum d/dx(flux) = 0 exactly on the grid; the conserved
    integral of h^2 then drifts only through time discretization.
    """

    tag = "surface_diffusion_axi"

    def __init__(self, hbar0: float, dealias: bool = True):
        if hbar0 <= 1.0:
            raise ValueError("reference radius must exceed 1")
        self.hbar0 = float(hbar0)
        self.dealias = bool(dealias)

    def _params(self):
        return {"hbar0": self.hbar0}

    def rhs(self, field):
        h = field.samples
        if float(h.min()) <= 0.0:
            raise PositivityError(float(h.min()))
        filt = dealias_filter if self.dealias else (lambda f: f)
        hx = spectral_derivative(field, 1).samples
        hxx = spectral_derivative(field, 2).samples
        br = np.sqrt(1.0 + hx * hx)
        curv = filt(field.with_samples(1.0 / (h * br) - hxx / br**3))
        curv_x = spectral_derivative(curv, 1).samples
        flux = filt(field.with_samples((h / br) * curv_x))
        flux_x = spectral_derivative(flux, 1).samples
        return field.with_samples(flux_x / h)

    def _base_multiplier(self, k):
        # sd_symbol(n, hbar0) = n^4 - n^2/hbar0^2 in integer frequencies;
        # k here is physical, identical on the 2pi-torus
        return sd_symbol(k, self.hbar0)

    def conserved(self, field):
        return ("volume", float(field.spacing * np.sum(field.samples**2)))


class ThinfilmExpModel(_ModelBase):
    """d/dt u = (e^{-u_xx})_xx; linear part -u_xxxx, remainder
    (g(u_xx))_xx with g(v) = e^{-v} - 1 + v kept cancellation-free."""

    tag = "thinfilm_exp"

    def rhs(self, field):
        v = spectral_derivative(field, 2).samples
        w = field.with_samples(np.exp(-v))
        return spectral_derivative(w, 2)

    def _base_multiplier(self, k):
        return k**4

    def remainder(self, field, phi=None):
        v = spectral_derivative(field, 2).samples
        g = field.with_samples(np.expm1(-v) + v)
        return spectral_derivative(g, 2)

    def conserved(self, field):
        return ("mean", float(np.mean(field.samples)))


def make_model(spec: ModelSpec) -> _ModelBase:
    """Instantiate the model named by a spec record."""
    tag, p = spec.tag, spec.params
    if tag == "heat":
        return HeatModel()
    if tag == "varcoef_heat":
        return VarCoefHeatModel()
    if tag == "mcf_graph":
        return McfGraphModel()
    if tag == "nonlocal_mcf":
        return NonlocalMcfModel(a=float(p.get("a", 0.5)))
    if tag == "peskin2d":
        return Peskin2dModel(theta_cap=float(p.get("theta_cap", 100.0)))
    if tag == "muskat_st":
        return MuskatStModel(rho0=float(p.get("rho0", 0.0)))
    if tag == "surface_diffusion_axi":
        if "hbar0" not in p:
            raise ValueError("surface_diffusion_axi needs an hbar0 parameter")
        return SurfaceDiffusionModel(hbar0=float(p["hbar0"]))
    if tag == "thinfilm_exp":
        return ThinfilmExpModel()
    raise ValueError(f"unknown model tag {tag!r}")


# ---------------------------------------------------------------------------
# diagnostics

def theta_monitor(X: PeriodicField) -> float:
    """Contour stretch ratio over all node pairs (torus metric)."""
    return stretch_ratio(X)[0]


def enclosed_area(X: PeriodicField) -> float:
    """Signed area (1/2) closed-integral (x dy - y dx), spectral tangents."""
    if X.components != 2 or X.is_2d:
        raise ValueError("enclosed_area takes a 2-component contour")
    xs, ys = X.samples
    xp = spectral_derivative(PeriodicField(xs, domain_length=X.domain_length), 1).samples
    yp = spectral_derivative(PeriodicField(ys, domain_length=X.domain_length), 1).samples
    return 0.5 * X.spacing * float(np.sum(xs * yp - ys * xp))


def mode1_rate(model: _ModelBase, base: Optional[PeriodicField] = None,
               eps: float = 1e-6, n: int = 256) -> float:
    """Linearized growth rate at mode 1, measured from the right side:
    project rhs(base + eps cos) - rhs(base) onto cos(x)."""
    if base is None:
        base = PeriodicField(np.zeros(n))
    x = base.nodes()
    pert = base.with_samples(base.samples + eps * np.cos(x))
    r = model.rhs(pert).samples - model.rhs(base).samples
    return float(2.0 * np.mean(r * np.cos(x)) / eps)


# spec-facing functional aliases: one call per model, no instance plumbing

def mcf_rhs(f: PeriodicField) -> PeriodicField:
    return McfGraphModel().rhs(f)


def mcf_symbol(k, phi: Optional[PeriodicField] = None) -> np.ndarray:
    return McfGraphModel().linear_multiplier(np.asarray(k, dtype=float), phi)


def nonlocal_mcf_rhs(u: PeriodicField, a: float) -> PeriodicField:
    return NonlocalMcfModel(a=a).rhs(u)


def peskin_model(X: PeriodicField, tension: Optional[TensionLaw] = None) -> PeriodicField:
    return Peskin2dModel(tension=tension).rhs(X)


def muskat_st_model(f: PeriodicField, rho0: float = 0.0) -> PeriodicField:
    return MuskatStModel(rho0=rho0).rhs(f)


def surface_diffusion_model(h: PeriodicField, hbar0: float) -> PeriodicField:
    return SurfaceDiffusionModel(hbar0=hbar0).rhs(h)


def thinfilm_model(u: PeriodicField) -> PeriodicField:
    return ThinfilmExpModel().rhs(u)
