"""One IMEX step of the growth model and the PID step-size controller.

Each step works on geometry ``s^k``: the two concentration systems are
solved with the reaction term taken explicitly, the geometry is pushed along
``n^k`` by ``h K v^{k+1}`` in weak form, and the next step size follows from
the relative change of ``(u, v)`` in the mass-matrix norm.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import assemble
from .errors import InvalidArgument, StepRejected
from .linalg import SolveInfo, kkt_residual, positivity_step, solve_spd

__all__ = [
    "ModelParameters",
    "PIDGains",
    "SimulationState",
    "CoercivityResult",
    "StepReport",
    "coercivity_check",
    "step_concentrations",
    "update_geometry",
    "relative_change",
    "pid_select",
    "take_step",
    "solve_spd",
    "positivity_step",
]

ERROR_FLOOR = 1e-12
MAX_RETRIES = 5


@dataclass(frozen=True)
class ModelParameters:
    """Feed ``F``, drainage ``H``, growth ``K`` and diffusivities ``d1, d2``."""

    F: float = 0.04
    H: float = 0.06
    K: float = 0.001
    d1: float = 0.2
    d2: float = 0.1

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise InvalidArgument("diffusion constants must be positive")
        if self.K < 0 or self.F < 0 or self.H < 0:
            raise InvalidArgument("F, H and K must be non-negative")


@dataclass(frozen=True)
class PIDGains:
    kP: float = 0.075
    kI: float = 0.175
    kD: float = 0.01
    tau: float = 0.01
    h_min: float = 1e-4
    h_max: float = 50.0

    def __post_init__(self):
        if not (self.tau > 0 and 0 < self.h_min <= self.h_max):
            raise InvalidArgument("need tau > 0 and 0 < h_min <= h_max")


@dataclass
class SimulationState:
    """Everything carried from one step to the next.

    ``errors`` holds ``(e_k, e_{k-1}, e_{k-2})``; ``e_prev`` is the control
    net of the previous step (equal to ``e`` before the first step).
    """

    space: object
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    e_prev: np.ndarray
    h: float
    h_prev: float
    errors: tuple = (1.0, 1.0, 1.0)
    k: int = 0
    t: float = 0.0
    extras: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, space, c, d, e, h0=0.1):
        if h0 <= 0:
            raise InvalidArgument("initial step size must be positive")
        e = np.asarray(e, dtype=float)
        return cls(space, np.asarray(c, dtype=float), np.asarray(d, dtype=float), e, e, float(h0), float(h0))

    def __post_init__(self):
        n = self.space.num_dofs
        if self.c.shape != (n,) or self.d.shape != (n,) or self.e.shape != (n, 3) or self.e_prev.shape != (n, 3):
            raise InvalidArgument("state vectors do not match the basis")
        if not self.h > 0:
            raise InvalidArgument("step size must be positive")


@dataclass(frozen=True)
class CoercivityResult:
    passed: bool
    margin_u: float
    margin_v: float

    @property
    def margin(self):
        return min(self.margin_u, self.margin_v)


def coercivity_check(rate, params, h):
    """Infimum over quadrature points of ``(rate + F) h + 1`` and
    ``(rate + F + H) h + 1``; passes iff both are positive."""
    r = float(np.min(rate)) if np.size(rate) else 0.0
    mu = (r + params.F) * h + 1.0
    mv = (r + params.F + params.H) * h + 1.0
    return CoercivityResult(mu > 0 and mv > 0, mu, mv)


def _systems(state, params, system, h):
    A, D, B = system.A, system.D, system.B
    Mu = A * (1 + h * params.F) + (params.d1 * h) * D + h * B
    Mv = A * (1 + h * (params.F + params.H)) + (params.d2 * h) * D + h * B
    bu = h * params.F * system.w_vec - h * system.f_r + A @ state.c
    bv = h * system.f_r + A @ state.d
    return (Mu, bu), (Mv, bv)


def step_concentrations(state, params, system, h, tol=1e-10, positivity=False, return_info=False):
    """Solve both concentration systems for ``(c^{k+1}, d^{k+1})``.

    With ``positivity`` the solutions are replaced by the non-negative
    minimisers of the corresponding quadratic programs (warm-started from
    the unconstrained solves).
    """
    (Mu, bu), (Mv, bv) = _systems(state, params, system, h)
    c, iu = solve_spd(Mu, bu, tol, x0=state.c, return_info=True)
    d, iv = solve_spd(Mv, bv, tol, x0=state.d, return_info=True)
    kkt = 0.0
    if positivity:
        c = positivity_step(Mu, bu, c)
        d = positivity_step(Mv, bv, d)
        kkt = max(kkt_residual(Mu, bu, c), kkt_residual(Mv, bv, d))
    if return_info:
        return c, d, {"cg_iterations": iu.iterations + iv.iterations, "residual": max(iu.residual, iv.residual), "kkt": kkt}
    return c, d


def update_geometry(state, system, d_new, h, params, tol=1e-10, return_info=False):
    """Weak-form normal growth ``A e^{k+1} = int w (s^k + h K v^{k+1} n^k) sqrt g_k``.

    Solved in increment form (``int w s^k sqrt g_k`` is exactly ``A e^k``).
    """
    if params.K == 0.0:
        out = state.e.copy()
        return (out, SolveInfo(0, 0.0)) if return_info else out
    quad, geo = system.quad, system.geometry
    v = quad.field(state.space.to_local(d_new))
    W = quad.weights[None] * geo.sqrt_g * (h * params.K) * v
    rhs = np.stack([quad.load_vector(W * geo.normal[..., j]) for j in range(3)], 1)
    de, info = solve_spd(system.A, rhs, tol, return_info=True)
    out = state.e + de
    return (out, info) if return_info else out


def relative_change(A, new, old):
    """``||new - old||_A / ||new||_A`` (zero if both vanish)."""
    diff = new - old
    num = float(diff @ (A @ diff))
    den = float(new @ (A @ new))
    if num <= 0.0:
        return 0.0
    if den <= 0.0:
        return np.inf
    return np.sqrt(num / den)


def pid_select(h, errors, gains=PIDGains()):
    """Next step size from the error history ``(e_k, e_{k-1}, e_{k-2})``.

    Errors below ``1e-12`` (including zeros) are floored there; the result is
    clamped to ``[h_min, h_max]``.
    """
    ek, ek1, ek2 = (max(float(x), ERROR_FLOOR) for x in errors)
    fac = (ek1 / ek) ** gains.kP * (1.0 / ek) ** gains.kI * (ek1 * ek1 / (ek * ek2)) ** gains.kD
    return float(np.clip(h * fac, gains.h_min, gains.h_max))


@dataclass
class StepReport:
    h: float
    error: float
    error_u: float
    error_v: float
    margin: float
    retries: int
    cg_iterations: int
    kkt: float


def take_step(state, params, gains, quad, tol=1e-10, positivity=False, workers=1, system=None):
    """Advance ``state`` by one accepted step.

    Coercivity failures halve ``h`` (at most five times) before giving up
    with :class:`StepRejected`. Returns ``(new_state, report, system)``.
    """
    if system is None:
        system = assemble(quad, state.e, state.e_prev, state.h_prev, state.c, state.d, workers)
    h = state.h
    for retries in range(MAX_RETRIES + 1):
        co = coercivity_check(system.rate, params, h)
        if co.passed:
            break
        if retries == MAX_RETRIES:
            raise StepRejected(f"coercivity violated (margin {co.margin:.3e}) after {MAX_RETRIES} halvings", co.margin)
        h = h / 2
    c, d, info = step_concentrations(state, params, system, h, tol, positivity, return_info=True)
    e_new, ginfo = update_geometry(state, system, d, h, params, tol, return_info=True)
    eu = relative_change(system.A, c, state.c) / gains.tau
    ev = relative_change(system.A, d, state.d) / gains.tau
    err = max(eu, ev)
    errors = (err, state.errors[0], state.errors[1])
    h_next = pid_select(h, errors, gains)
    new = replace(
        state,
        c=c,
        d=d,
        e=e_new,
        e_prev=state.e,
        h=h_next,
        h_prev=h,
        errors=errors,
        k=state.k + 1,
        t=state.t + h,
        extras={},
    )
    report = StepReport(
        h=h,
        error=err,
        error_u=eu,
        error_v=ev,
        margin=co.margin,
        retries=retries,
        cg_iterations=info["cg_iterations"] + ginfo.iterations,
        kkt=info["kkt"],
    )
    return new, report, system
