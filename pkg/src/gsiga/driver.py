"""Initial conditions, the run loop, checkpoints and the projection-error table."""
import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .assembly import QuadratureGrid, QuadratureRule, assemble, l2_project
from .config import RunConfig
from .errors import DegenerateMetric, InvalidArgument, NumericalFailure, StepRejected
from .geometry import sphere_patch
from .integrator import ModelParameters, PIDGains, SimulationState, take_step
from .refinement import Baselines, baselines, compute_indicators, mark
from .space import SplineSpace
from .vtk import export_surface

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class RunLogRecord:
    k: int
    t: float
    h: float
    e_k: float
    norm_u: float
    norm_v: float
    min_u: float
    min_v: float
    area: float
    dofs: int
    cg_iterations: int
    coercivity_margin: float


RUN_LOG_COLUMNS = tuple(f.name for f in fields(RunLogRecord))


# -- initial data ---------------------------------------------------------------


def gaussian_sum(config, x):
    """``I(x)``: the sum of the configured Gaussians at ambient points ``x``."""
    ic = config.initial_condition
    R = config.geometry.R
    w = np.asarray(ic.widths, dtype=float)
    out = np.zeros(x.shape[:-1])
    for g in ic.centers:
        x0 = R * np.array([np.sin(g.xi) * np.cos(g.eta), np.sin(g.xi) * np.sin(g.eta), np.cos(g.xi)])
        out += g.amplitude * np.exp(-np.sum(((x - x0) / w) ** 2, axis=-1))
    return out


def build_initial_condition(config, quad=None):
    """``(c0, d0, e0)`` on the space of ``quad`` (uniform ``Xi_{n,p}`` if
    omitted).

    ``e0`` is the parametric least-squares fit of the cube-to-sphere map;
    ``U(0)`` and ``V(0)`` are evaluated through that exact map and projected
    in the surface measure of ``e0``.
    """
    if quad is None:
        g = config.geometry
        quad = QuadratureGrid(SplineSpace.uniform(g.n, g.p), QuadratureRule(config.solver.quadrature_order))
    R = config.geometry.R
    tol = min(config.solver.tol, 1e-12)
    e0 = l2_project(lambda f, x, y: sphere_patch(f, x, y, R), quad, tol=tol)
    ic = config.initial_condition

    def u0(f, x, y):
        return ic.u_base + ic.u_scale * gaussian_sum(config, sphere_patch(f, x, y, R))

    def v0(f, x, y):
        return ic.v_base + ic.v_scale * gaussian_sum(config, sphere_patch(f, x, y, R))

    c0 = l2_project(u0, quad, "surface", e0, tol)
    d0 = l2_project(v0, quad, "surface", e0, tol)
    return c0, d0, e0


# -- helpers ------------------------------------------------------------------------


def dump_triplets(M, path):
    """Write a sparse matrix as ``row col value`` lines."""
    C = M.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row, C.col, C.data):
            fh.write(f"{r} {c} {v!r}\n")


def _face_min(a):
    return a.reshape(a.shape[0], -1).min(axis=1)


@dataclass
class RunResult:
    state: SimulationState
    records: list
    stop_reason: str
    out_dir: str | None
    refinements: list


class Simulation:
    """The run loop: assemble, step, grow, adapt, write.

    Parameters
    ----------
    config : RunConfig
    out_dir : str, optional
        Where snapshots, the run log and checkpoints go; nothing is written
        when ``None``.
    workers : int, optional
        Threads for per-face assembly (``config.solver.workers`` by default).
    """

    def __init__(self, config, out_dir=None, workers=None, _restore=None):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers if workers is not None else config.solver.workers
        m, t = config.model, config.time
        self.params = ModelParameters(m.F, m.H, m.K, m.d1, m.d2)
        h_max = t.h_max if t.adaptive else t.h0
        h_min = t.h_min if t.adaptive else t.h0
        self.gains = PIDGains(t.kP, t.kI, t.kD, t.tau, min(h_min, t.h0), max(h_max, t.h0))
        self.rule = QuadratureRule(config.solver.quadrature_order)
        self.records = []
        self.refinements = []
        g = config.geometry
        if _restore is None:
            space = SplineSpace.uniform(g.n, g.p, max_level=config.refinement.max_depth)
            self.quad = QuadratureGrid(space, self.rule)
            c0, d0, e0 = build_initial_condition(config, self.quad)
            self.state = SimulationState.initial(space, c0, d0, e0, t.h0)
            geo = self.quad.geometry(e0)
            self.sqrt_g0 = _face_min(geo.sqrt_g)
            self.base = None
            if config.refinement.enabled:
                self.base = baselines(compute_indicators(self.quad, e0))
        else:
            self.state, self.sqrt_g0, self.base = _restore
            self.quad = QuadratureGrid(self.state.space, self.rule)
        self._geo = self.quad.geometry(self.state.e)
        self._geo_prev = None if self.state.e_prev is self.state.e else self.quad.geometry(self.state.e_prev)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        self._log_path = None if out_dir is None else os.path.join(out_dir, "run_log.csv")

    # -- one step -----------------------------------------------------------------

    def _guard(self, geo_new):
        gd = self.config.guards
        ratio = _face_min(geo_new.sqrt_g) / self.sqrt_g0
        if np.any(ratio < gd.min_sqrt_g_ratio):
            return f"degenerate: min sqrt(g) fell to {ratio.min():.3e} of its initial patch minimum"
        if gd.normal_flip:
            dots = np.einsum("...k,...k->...", geo_new.normal, self._geo.normal)
            if np.any(dots < 0):
                return "degenerate: normal flipped between steps"
        return None

    def step(self):
        """Take one step; returns ``(record, stop_reason or None)``."""
        st, quad = self.state, self.quad
        prev_geo = None if st.e_prev is st.e else self._geo_prev
        system = assemble(quad, st.e, st.e_prev, st.h_prev, st.c, st.d, self.workers, self._geo, prev_geo)
        if self.config.output.dump_matrices and self.out_dir is not None:
            for name in ("A", "D", "B"):
                dump_triplets(getattr(system, name), os.path.join(self.out_dir, f"{name}_{st.k:05d}.txt"))
        new, rep, _ = take_step(
            st, self.params, self.gains, quad, self.config.solver.tol, self.config.positivity.enabled, self.workers, system
        )
        geo_new = quad.geometry(new.e)
        reason = self._guard(geo_new)
        if reason is not None:
            return None, reason
        self.state = new
        self._geo_prev, self._geo = self._geo, geo_new
        W = quad.weights[None] * geo_new.sqrt_g
        u = quad.field(new.space.to_local(new.c))
        v = quad.field(new.space.to_local(new.d))
        rec = RunLogRecord(
            k=new.k,
            t=new.t,
            h=rep.h,
            e_k=rep.error,
            norm_u=float(np.sqrt(np.sum(W * u * u))),
            norm_v=float(np.sqrt(np.sum(W * v * v))),
            min_u=float(u.min()),
            min_v=float(v.min()),
            area=float(np.sum(W)),
            dofs=new.space.num_dofs,
            cg_iterations=rep.cg_iterations,
            coercivity_margin=rep.margin,
        )
        self.last_report = rep
        self.records.append(rec)
        return rec, None

    def maybe_refine(self):
        """Cadenced refinement check; returns the number of refined functions."""
        rc = self.config.refinement
        st = self.state
        if not rc.enabled or st.k % rc.cadence != 0:
            return 0
        ind = compute_indicators(self.quad, st.e)
        marked = mark(ind, self.base, rc.k_cell, rc.k_curve)
        capped = st.space.dof_levels()[marked] >= st.space.max_level
        marked = marked[~capped]
        if marked.size == 0:
            return 0
        space, R = st.space.refine(marked)
        st.space = space
        st.c, st.d = R @ st.c, R @ st.d
        same = st.e_prev is st.e
        st.e = np.asarray(R @ st.e)
        st.e_prev = st.e if same else np.asarray(R @ st.e_prev)
        self.quad = QuadratureGrid(space, self.rule)
        self._geo = self.quad.geometry(st.e)
        self._geo_prev = None if same else self.quad.geometry(st.e_prev)
        event = {"k": st.k, "marked": int(marked.size), "capped": int(capped.sum()), "dofs": space.num_dofs}
        self.refinements.append(event)
        log.info("refined %d functions at step %d -> %d dofs", marked.size, st.k, space.num_dofs)
        if self.out_dir is not None:
            path = os.path.join(self.out_dir, "refinement_log.csv")
            new_file = not os.path.exists(path)
            with open(path, "a", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(event))
                if new_file:
                    w.writeheader()
                w.writerow(event)
        return int(marked.size)

    # -- outputs ---------------------------------------------------------------------

    def snapshot(self):
        if self.out_dir is None:
            return None
        st = self.state
        path = os.path.join(self.out_dir, f"snapshot_{st.k:05d}.vtk")
        export_surface(st.space, st.e, path, st.c, st.d, self.config.output.mesh_density)
        return path

    def _append_log(self, rec):
        if self._log_path is None:
            return
        new_file = not os.path.exists(self._log_path)
        with open(self._log_path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new_file:
                w.writerow(RUN_LOG_COLUMNS)
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else int(x) for x in asdict(rec).values()])

    def save_checkpoint(self, path):
        save_checkpoint(self, path)

    # -- loop --------------------------------------------------------------------------

    def run(self, steps=None):
        """Run until ``max_steps`` (or ``steps`` more steps), ``t_end`` or a
        guard stops the loop."""
        cfg = self.config
        target = cfg.time.max_steps if steps is None else self.state.k + steps
        every = cfg.output.snapshot_every
        if self.state.k == 0 and every > 0:
            self.snapshot()
        reason = "max_steps"
        try:
            while self.state.k < target:
                if cfg.time.t_end is not None and self.state.t >= cfg.time.t_end:
                    reason = "t_end"
                    break
                rec, stop = self.step()
                if stop is not None:
                    reason = stop
                    log.warning("stopping at step %d: %s", self.state.k, stop)
                    break
                self._append_log(rec)
                if not np.all(np.isfinite(self.state.c)) or not np.all(np.isfinite(self.state.d)):
                    raise NumericalFailure("non-finite concentrations", residual=np.inf)
                if every > 0 and self.state.k % every == 0:
                    self.snapshot()
                self.maybe_refine()
        except (NumericalFailure, StepRejected, DegenerateMetric):
            if self.out_dir is not None and cfg.output.checkpoint:
                self.save_checkpoint(os.path.join(self.out_dir, "failure.ckpt.npz"))
            raise
        if every > 0 and self.state.k % every != 0:
            self.snapshot()
        if self.out_dir is not None and cfg.output.checkpoint:
            self.save_checkpoint(os.path.join(self.out_dir, "final.ckpt.npz"))
        return RunResult(self.state, self.records, reason, self.out_dir, self.refinements)


def run(config, out_dir=None, steps=None, workers=None):
    """Build a :class:`Simulation` from ``config`` and run it."""
    return Simulation(config, out_dir, workers).run(steps)


# -- checkpoints ----------------------------------------------------------------------


def save_checkpoint(sim, path):
    """Binary checkpoint (numpy ``.npz``): config, its hash, all state
    vectors, the hierarchy masks and the guard / indicator baselines."""
    st = sim.state
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "config": np.array(sim.config.to_json()),
        "config_hash": np.array(sim.config.digest()),
        "c": st.c,
        "d": st.d,
        "e": st.e,
        "e_prev": st.e_prev,
        "same_prev": np.array(st.e_prev is st.e),
        "scalars": np.array([st.h, st.h_prev, st.t]),
        "errors": np.array(st.errors, dtype=float),
        "k": np.array(st.k),
        "basis": np.array([st.space.n0, st.space.p, st.space.max_level]),
        "num_domains": np.array(len(st.space.domains)),
        "sqrt_g0": sim.sqrt_g0,
        "baselines": np.array([np.nan, np.nan] if sim.base is None else [sim.base.mu_cell, sim.base.mu_curve]),
    }
    for l, dmask in enumerate(st.space.domains):
        arrays[f"domain_{l}"] = dmask
    tmp = path + ".tmp.npz"
    np.savez_compressed(tmp, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path, out_dir=None, workers=None, config=None):
    """Rebuild a :class:`Simulation` from a checkpoint.

    A ``config`` passed explicitly must hash to the stored value (output
    settings may differ).
    """
    with np.load(path, allow_pickle=False) as z:
        stored = RunConfig.from_dict(json.loads(str(z["config"])))
        if str(z["config_hash"]) != stored.digest():
            raise InvalidArgument("checkpoint config hash mismatch (file corrupted?)")
        if config is not None and config.digest() != stored.digest():
            raise InvalidArgument("checkpoint was written with a different configuration")
        cfg = config or stored
        n0, p, max_level = (int(x) for x in z["basis"])
        doms = [z[f"domain_{l}"] for l in range(int(z["num_domains"]))]
        space = SplineSpace(n0, p, doms, max_level)
        e = z["e"]
        e_prev = e if bool(z["same_prev"]) else z["e_prev"]
        h, h_prev, t = (float(x) for x in z["scalars"])
        state = SimulationState(space, z["c"], z["d"], e, e_prev, h, h_prev, tuple(float(x) for x in z["errors"]), int(z["k"]), t)
        b = z["baselines"]
        base = None if np.isnan(b[0]) else Baselines(float(b[0]), float(b[1]))
        sqrt_g0 = z["sqrt_g0"]
    return Simulation(cfg, out_dir, workers, _restore=(state, sqrt_g0, base))


# -- projection-error table -------------------------------------------------------------


def projection_error(n, p, R=40.0):
    """``L2`` distance between the exact cube-to-sphere map and its
    least-squares fit on ``Xi_{n,p}``, measured over the cube surface
    (faces of side 2)."""
    space = SplineSpace.uniform(n, p)
    quad = QuadratureGrid(space)
    target = lambda f, x, y: sphere_patch(f, x, y, R)  # noqa: E731
    e = l2_project(target, quad, tol=1e-13)
    s = quad.field(space.to_local(e))
    exact = np.stack([target(f, quad.xi, quad.eta) for f in range(6)])
    return float(np.sqrt(4.0 * quad.integrate(np.sum((s - exact) ** 2, -1))))


def table1_harness(ns=(5, 10, 20), ps=(1, 2, 3), R=40.0):
    """Projection errors for every ``(n, p)``; list of dicts."""
    return [{"n": n, "p": p, "E": projection_error(n, p, R)} for n in ns for p in ps]
