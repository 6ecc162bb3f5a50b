"""Jump-adapted, taming-stabilized time stepping.

One table-driven kernel integrates every dynamics in the toolkit: the
coupled slow-fast system, the frozen fast equation, the pathwise-coupled
averaged equation (shared Wiener increments and shared jump events for
strong-error measurement), the weak-form averaged equation, and
synchronously coupled fast pairs.

Scheme: between jump events, drift increments are tamed,
``drift * dt / (1 + dt * |drift|)``, which keeps explicit stepping stable
under superlinear monotone drifts; diffusion increments use the actual
elapsed sub-interval lengths (increments are generated forward, so no
bridge construction is needed); compensated jump measures contribute a
deterministic drift correction between events and the raw jump map at
events. Event times are exact draws of the constant-rate Poisson streams,
inserted into the micro grid path by path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .model import ModelSpec
from .rng import JumpMeasureSpec, RngStream, sample_jump_times_batch

__all__ = [
    "StepperConfig",
    "PathSample",
    "JumpEvent",
    "simulate_slow_fast",
    "simulate_frozen",
    "simulate_pair_coupled",
    "simulate_averaged_weak",
    "run_system_batch",
    "run_pair_batch",
    "run_frozen_batch",
    "run_frozen_pair_batch",
    "run_averaged_batch",
]

_SCHEMES = ("tamed_euler", "split_step_implicit", "euler")
_MAX_FAST_SUBSTEP = 1.0 / 16.0
_STATE_CAP = 1e12


@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping parameters for the scale-separated system.

    The micro step must resolve the fast dynamics: delta <= epsilon / 16.
    delta may leave a final partial step before t_end.
    """

    epsilon: float
    delta: float
    t_end: float
    scheme: str = "tamed_euler"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        if self.scheme not in _SCHEMES:
            raise ConfigurationError(f"scheme must be one of {_SCHEMES}")
        if self.delta > self.epsilon * _MAX_FAST_SUBSTEP * (1 + 1e-12):
            raise ConfigurationError(
                f"delta={self.delta!r} exceeds epsilon/16; the fast component "
                "would be under-resolved"
            )


@dataclass(frozen=True)
class JumpEvent:
    """One applied jump: post - pre equals the jump map at (pre, mark)."""

    time: float
    mark: float
    channel: str
    target: str
    pre: np.ndarray
    post: np.ndarray
    context: dict


@dataclass
class PathSample:
    """A trajectory on the jump-augmented micro grid.

    `times` is strictly increasing from 0 to the horizon. Rows at jump
    times hold the post-jump state; the pre-jump state is in the event
    log entry, so every discontinuity can be replayed exactly.
    """

    times: np.ndarray
    slow: np.ndarray | None
    fast: np.ndarray | None
    events: list

    def validate(self):
        if not np.all(np.diff(self.times) > 0):
            raise AssertionError("grid must be strictly increasing")
        for arr in (self.slow, self.fast):
            if arr is not None and arr.shape[0] != self.times.shape[0]:
                raise AssertionError("state rows must match the grid")
        return self

    def save_csv(self, path):
        """Trace dump: time, state components, event flag, mark.

        Rows at jump times carry flag 1 and the applied mark; elsewhere
        flag 0 and mark 0. 17 significant digits, '.' decimals.
        """
        by_time = {}
        for ev in self.events:
            by_time.setdefault(ev.time, ev)
        header = ["time"]
        blocks = []
        if self.slow is not None:
            header += [f"slow_{i}" for i in range(self.slow.shape[1])]
            blocks.append(self.slow)
        if self.fast is not None:
            header += [f"fast_{i}" for i in range(self.fast.shape[1])]
            blocks.append(self.fast)
        header += ["event", "mark"]
        lines = [",".join(header)]
        for k, t in enumerate(self.times):
            ev = by_time.get(float(t))
            row = [t]
            for b in blocks:
                row.extend(b[k])
            row.append(1.0 if ev is not None else 0.0)
            row.append(ev.mark if ev is not None else 0.0)
            lines.append(",".join(format(float(v), ".17g") for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def replay_jumps(self, model: ModelSpec) -> bool:
        """Re-evaluate every logged event through the coefficient maps.

        True iff each logged post-state equals pre + jump_map(pre, mark)
        bit for bit (the same arithmetic the stepper performed).
        """
        for ev in self.events:
            z = np.array([ev.mark])
            if ev.channel == "slow":
                inc = model.slow_jump(ev.pre[None, :], z)[0]
            else:
                x = ev.context["x"][None, :] if "x" in ev.context else ev.pre[None, :]
                inc = model.fast_jump(x, ev.pre[None, :], z)[0]
            if not np.array_equal(ev.post, ev.pre + inc):
                return False
        return True


def _norm(v: np.ndarray) -> np.ndarray:
    if v.shape[1] == 1:
        return np.abs(v[:, 0])
    return np.sqrt(np.sum(v * v, axis=1))


def _matvec(g: np.ndarray, dw: np.ndarray) -> np.ndarray:
    if g.shape[1] == 1 and g.shape[2] == 1:
        return g[:, :, 0] * dw
    return np.einsum("kij,kj->ki", g, dw)


def _init_state(value, dim: int, n_paths: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full((n_paths, dim), float(arr))
    if arr.shape == (dim,):
        return np.tile(arr, (n_paths, 1))
    if arr.shape == (n_paths, dim):
        return arr.astype(float).copy()
    raise ConfigurationError(
        f"initial state of shape {arr.shape} does not match dim {dim}"
    )


@dataclass
class _Component:
    name: str
    dim: int
    drift: object
    diffusion: object
    wiener: str | None
    time_scale: float
    compensator: object = None
    jump_measure: JumpMeasureSpec | None = None
    jump_fn: object = None


class _Recorder:
    def __init__(self, names, states):
        self.names = list(names)
        self.times = [0.0]
        self.values = {n: [states[n][0].copy()] for n in self.names}
        self.events = []

    def snapshot(self, t, states):
        t = float(t)
        if t <= self.times[-1]:
            for n in self.names:
                self.values[n][-1] = states[n][0].copy()
            return
        self.times.append(t)
        for n in self.names:
            self.values[n].append(states[n][0].copy())

    def series(self, name):
        return np.array(self.values[name]) if name in self.values else None


class _Kernel:
    """Vectorized jump-adapted stepping over a batch of paths."""

    def __init__(self, *, n_paths, t_end, delta, scheme, stream: RngStream):
        self.n_paths = int(n_paths)
        self.t_end = float(t_end)
        self.delta = float(delta)
        self.scheme = scheme
        self.stream = stream
        self.components: list[_Component] = []
        self.channels: list[dict] = []
        self.states: dict[str, np.ndarray] = {}
        self.wiener: dict[str, tuple[int, np.random.Generator]] = {}
        self.sup_pair = None
        self.running_sup = None
        self.recorder = None

    # -- construction -----------------------------------------------------

    def add_constant(self, name, value, dim):
        self.states[name] = _init_state(value, dim, self.n_paths)

    def add_component(self, name, dim, init, *, drift, diffusion, wiener,
                      wiener_dim=0, time_scale=1.0):
        self.states[name] = _init_state(init, dim, self.n_paths)
        comp = _Component(name, dim, drift, diffusion, wiener, float(time_scale))
        self.components.append(comp)
        if wiener is not None and wiener not in self.wiener:
            gen = self.stream.child(f"wiener:{wiener}").generator()
            self.wiener[wiener] = (int(wiener_dim), gen)
        return comp

    def add_channel(self, name, measure: JumpMeasureSpec, rate, targets):
        """targets: list of (component_name, jump_fn(sub, marks)->(k,dim))."""
        self.channels.append(
            {"name": name, "measure": measure, "rate": float(rate),
             "targets": list(targets)}
        )

    def set_compensator(self, comp: _Component, measure: JumpMeasureSpec, jump_fn):
        comp.jump_measure = measure
        comp.jump_fn = jump_fn
        comp.compensator = _build_compensator(jump_fn, measure, self._probe_subs())

    def track_sup(self, name_a, name_b):
        self.sup_pair = (name_a, name_b)
        self.running_sup = _norm(self.states[name_a] - self.states[name_b])

    def _probe_subs(self):
        gen = np.random.Generator(np.random.Philox(0xC0FFEE))
        subs = []
        for _ in range(2):
            subs.append({
                n: a[:4] + gen.uniform(-1.0, 1.0, a[:4].shape)
                for n, a in self.states.items()
            })
        return subs

    # -- stepping ----------------------------------------------------------

    def _advance(self, idx, dt):
        states = self.states
        if idx is None:
            sub = states
            k = self.n_paths
        else:
            sub = {n: a[idx] for n, a in states.items()}
            k = len(idx)
        dt = np.asarray(dt, dtype=float)
        draws = {}
        for key, (dim, gen) in self.wiener.items():
            draws[key] = gen.standard_normal((k, dim))
        out = {}
        for comp in self.components:
            s = sub[comp.name]
            dte = dt * comp.time_scale
            if comp.drift is not None:
                d = np.asarray(comp.drift(sub))
                if self.scheme == "tamed_euler":
                    fac = dte / (1.0 + dte * _norm(d))
                    inc = d * fac[:, None]
                elif self.scheme == "split_step_implicit":
                    inc = _implicit_increment(comp, sub, s, dte)
                else:
                    inc = d * dte[:, None]
            else:
                inc = np.zeros_like(s)
            if comp.compensator is not None:
                inc = inc - comp.compensator(sub) * dte[:, None]
            if comp.diffusion is not None:
                g = np.asarray(comp.diffusion(sub))
                dw = draws[comp.wiener] * np.sqrt(dte)[:, None]
                inc = inc + _matvec(g, dw)
            out[comp.name] = s + inc
        if idx is None:
            for n, v in out.items():
                states[n] = v
        else:
            for n, v in out.items():
                states[n][idx] = v
        if self.sup_pair is not None:
            a, b = self.sup_pair
            d = _norm(out[a] - out[b])
            if idx is None:
                np.maximum(self.running_sup, d, out=self.running_sup)
            else:
                self.running_sup[idx] = np.maximum(self.running_sup[idx], d)

    def _apply_jumps(self, paths, chans, marks, times):
        for ci, chan in enumerate(self.channels):
            m = chans == ci
            if not m.any():
                continue
            idx = paths[m]
            z = marks[m]
            sub = {n: a[idx] for n, a in self.states.items()}
            for tname, jfn in chan["targets"]:
                inc = np.asarray(jfn(sub, z))
                pre = sub[tname]
                post = pre + inc
                self.states[tname][idx] = post
                if self.recorder is not None:
                    ctx = {n: v[0].copy() for n, v in sub.items() if n != tname}
                    self.recorder.events.append(JumpEvent(
                        time=float(times[m][0]), mark=float(z[0]),
                        channel=chan["name"], target=tname,
                        pre=pre[0].copy(), post=post[0].copy(), context=ctx,
                    ))
            if self.sup_pair is not None:
                a, b = self.sup_pair
                d = _norm(self.states[a][idx] - self.states[b][idx])
                self.running_sup[idx] = np.maximum(self.running_sup[idx], d)

    def _generate_events(self, n_steps):
        paths, times, chans, marks = [], [], [], []
        for ci, chan in enumerate(self.channels):
            if chan["rate"] <= 0:
                continue
            p, t = sample_jump_times_batch(
                chan["rate"], self.t_end, self.n_paths,
                self.stream.child(f"events:{chan['name']}"),
            )
            gen = self.stream.child(f"marks:{chan['name']}").generator()
            z = chan["measure"].size.sample(gen, len(t))
            paths.append(p)
            times.append(t)
            chans.append(np.full(len(t), ci, dtype=np.int64))
            marks.append(z)
        if not paths:
            offsets = np.zeros(n_steps + 1, dtype=np.int64)
            e = np.empty(0)
            return offsets, e.astype(np.int64), e, e.astype(np.int64), e
        p = np.concatenate(paths)
        t = np.concatenate(times)
        c = np.concatenate(chans)
        z = np.concatenate(marks)
        step = np.minimum((t / self.delta).astype(np.int64), n_steps - 1)
        order = np.lexsort((t, p, step))
        p, t, c, z, step = p[order], t[order], c[order], z[order], step[order]
        offsets = np.searchsorted(step, np.arange(n_steps + 1))
        return offsets, p, t, c, z

    def run(self, *, watchers=(), checkpoints=(), record=False):
        P, dl, T = self.n_paths, self.delta, self.t_end
        n_steps = max(1, int(np.ceil(T / dl - 1e-9)))
        if record:
            if P != 1:
                raise ConfigurationError("path recording requires a single path")
            self.recorder = _Recorder([c.name for c in self.components], self.states)
        offsets, ev_p, ev_t, ev_c, ev_z = self._generate_events(n_steps)

        cp_map: dict[int, float] = {}
        for t_cp in checkpoints:
            k = int(round(t_cp / dl))
            cp_map[min(max(k, 1), n_steps) - 1] = float(t_cp)
        snapshots: dict[float, dict[str, np.ndarray]] = {}

        for w in watchers:
            if hasattr(w, "start"):
                w.start(self.states)

        for s in range(n_steps):
            t0 = s * dl
            t1 = min(T, (s + 1) * dl)
            lo, hi = offsets[s], offsets[s + 1]
            if lo == hi:
                self._advance(None, np.full(P, t1 - t0))
                if self.recorder is not None:
                    self.recorder.snapshot(t1, self.states)
            else:
                p = ev_p[lo:hi]
                tt = ev_t[lo:hi]
                cc = ev_c[lo:hi]
                zz = ev_z[lo:hi]
                upaths, starts, counts = np.unique(p, return_index=True,
                                                   return_counts=True)
                bound = np.full(P, t1)
                bound[upaths] = tt[starts]
                self._advance(None, bound - t0)
                nxt = np.full(hi - lo, t1)
                same = p[1:] == p[:-1]
                nxt[:-1][same] = tt[1:][same]
                ranks = np.arange(hi - lo) - np.repeat(starts, counts)
                for r in range(int(counts.max())):
                    sel = ranks == r
                    self._apply_jumps(p[sel], cc[sel], zz[sel], tt[sel])
                    if self.recorder is not None:
                        self.recorder.snapshot(tt[sel][0], self.states)
                    self._advance(p[sel], nxt[sel] - tt[sel])
                    if self.recorder is not None:
                        self.recorder.snapshot(nxt[sel][0], self.states)
                if self.recorder is not None:
                    self.recorder.snapshot(t1, self.states)
            bad = None
            for comp in self.components:
                arr = self.states[comp.name]
                ok = np.isfinite(arr).all(axis=1) & (np.abs(arr) < _STATE_CAP).all(axis=1)
                if not ok.all():
                    bad = np.flatnonzero(~ok)
                    break
            if bad is not None:
                raise BlowUpError(t1, bad.tolist())
            for w in watchers:
                w.observe(s, t1, self.states)
            if s in cp_map:
                snapshots[cp_map[s]] = {c.name: self.states[c.name].copy()
                                        for c in self.components}
        return snapshots


def _implicit_increment(comp, sub, s, dte):
    if s.shape[1] != 1:
        raise ConfigurationError("split-step implicit scheme supports scalar components")
    u = s.copy()
    dcol = dte[:, None]
    for _ in range(50):
        d = np.asarray(comp.drift({**sub, comp.name: u}))
        g = u - s - dcol * d
        h = 1e-6 * (1.0 + np.abs(u))
        dp = (np.asarray(comp.drift({**sub, comp.name: u + h}))
              - np.asarray(comp.drift({**sub, comp.name: u - h}))) / (2.0 * h)
        gp = 1.0 - dcol * dp
        step = g / gp
        u = u - step
        if np.max(np.abs(step)) < 1e-12:
            break
    return u - s


def _build_compensator(jump_fn, measure: JumpMeasureSpec, probe_subs):
    """Drift correction -integral of h dnu, specialized where possible.

    Returns None when the integral vanishes identically (mark-linear map
    against a centered mark law), a constant closure when it is
    state-independent, an affine-in-mark closed form otherwise, and a
    Gauss-Legendre quadrature over the bounded mark support as the
    general fallback.
    """
    lam = float(measure.intensity)
    if lam == 0.0:
        return None
    m1 = float(measure.m1)

    def affine_value(sub):
        k = len(next(iter(sub.values())))
        c0 = np.asarray(jump_fn(sub, np.zeros(k)), dtype=float)
        if m1 == 0.0:
            return lam * c0
        c1 = np.asarray(jump_fn(sub, np.ones(k)), dtype=float) - c0
        return lam * (c0 + m1 * c1)

    is_affine = True
    vals = []
    for sub in probe_subs:
        k = len(next(iter(sub.values())))
        c0 = np.asarray(jump_fn(sub, np.zeros(k)), dtype=float)
        c1 = np.asarray(jump_fn(sub, np.ones(k)), dtype=float) - c0
        probe = np.asarray(jump_fn(sub, np.full(k, 0.37)), dtype=float)
        if not np.allclose(probe, c0 + 0.37 * c1, rtol=1e-9, atol=1e-12):
            is_affine = False
            break
        vals.append(lam * (c0 + m1 * c1))
    if is_affine:
        if all(np.all(v == 0.0) for v in vals):
            return None
        flat = [np.unique(v, axis=0) for v in vals]
        if all(f.shape[0] == 1 for f in flat) and np.array_equal(flat[0], flat[1]):
            const_row = flat[0][0]

            def constant(sub):
                k = len(next(iter(sub.values())))
                return np.broadcast_to(const_row, (k, const_row.size))

            return constant
        return affine_value

    nodes, weights = measure.size.quadrature(64)

    def quadrature(sub):
        k = len(next(iter(sub.values())))
        acc = weights[0] * np.asarray(jump_fn(sub, np.full(k, nodes[0])), dtype=float)
        for z, w in zip(nodes[1:], weights[1:]):
            acc = acc + w * np.asarray(jump_fn(sub, np.full(k, z)), dtype=float)
        return lam * acc

    return quadrature


# ---------------------------------------------------------------------------
# System builders
# ---------------------------------------------------------------------------


def _slow_jump_fn(model, state_name="x"):
    return lambda sub, z: model.slow_jump(sub[state_name], z)


def _fast_jump_fn(model, y_name="y"):
    return lambda sub, z: model.fast_jump(sub["x"], sub[y_name], z)


def _build_slow_fast(kernel: _Kernel, model: ModelSpec, x0, y0, eps, twin=None):
    cx = kernel.add_component(
        "x", model.dim_slow, x0,
        drift=lambda sub: model.slow_drift(sub["x"], sub["y"]),
        diffusion=lambda sub: model.slow_diffusion(sub["x"], sub["y"]),
        wiener="w1", wiener_dim=model.dw_slow, time_scale=1.0,
    )
    cy = kernel.add_component(
        "y", model.dim_fast, y0,
        drift=lambda sub: model.fast_drift(sub["x"], sub["y"]),
        diffusion=lambda sub: model.fast_diffusion(sub["x"], sub["y"]),
        wiener="w2", wiener_dim=model.dw_fast, time_scale=1.0 / eps,
    )
    slow_targets = [("x", _slow_jump_fn(model, "x"))]
    if twin is not None:
        ct = kernel.add_component(
            "xt", model.dim_slow, x0,
            drift=lambda sub: twin.drift(sub["xt"]),
            diffusion=lambda sub: model.slow_diffusion(sub["xt"], sub["y"]),
            wiener="w1", wiener_dim=model.dw_slow, time_scale=1.0,
        )
        slow_targets.append(("xt", _slow_jump_fn(model, "xt")))
    kernel.add_channel("slow", model.slow_measure, model.slow_measure.intensity,
                       slow_targets)
    kernel.add_channel("fast", model.fast_measure,
                       model.fast_measure.intensity / eps,
                       [("y", _fast_jump_fn(model))])
    kernel.set_compensator(cx, model.slow_measure, _slow_jump_fn(model, "x"))
    kernel.set_compensator(cy, model.fast_measure, _fast_jump_fn(model))
    if twin is not None:
        kernel.set_compensator(ct, model.slow_measure, _slow_jump_fn(model, "xt"))


def _build_frozen(kernel: _Kernel, model: ModelSpec, x, y0, second_y0=None):
    kernel.add_constant("x", x, model.dim_slow)
    cy = kernel.add_component(
        "y", model.dim_fast, y0,
        drift=lambda sub: model.fast_drift(sub["x"], sub["y"]),
        diffusion=lambda sub: model.fast_diffusion(sub["x"], sub["y"]),
        wiener="w2", wiener_dim=model.dw_fast, time_scale=1.0,
    )
    targets = [("y", _fast_jump_fn(model, "y"))]
    if second_y0 is not None:
        cz = kernel.add_component(
            "y2", model.dim_fast, second_y0,
            drift=lambda sub: model.fast_drift(sub["x"], sub["y2"]),
            diffusion=lambda sub: model.fast_diffusion(sub["x"], sub["y2"]),
            wiener="w2", wiener_dim=model.dw_fast, time_scale=1.0,
        )
        targets.append(("y2", _fast_jump_fn(model, "y2")))
    kernel.add_channel("fast", model.fast_measure, model.fast_measure.intensity,
                       targets)
    kernel.set_compensator(cy, model.fast_measure, _fast_jump_fn(model, "y"))
    if second_y0 is not None:
        kernel.set_compensator(cz, model.fast_measure, _fast_jump_fn(model, "y2"))


def _build_averaged(kernel: _Kernel, model: ModelSpec, avg, x0):
    cx = kernel.add_component(
        "x", model.dim_slow, x0,
        drift=lambda sub: avg.drift(sub["x"]),
        diffusion=lambda sub: avg.diffusion_root(sub["x"]),
        wiener="w", wiener_dim=model.dim_slow, time_scale=1.0,
    )
    kernel.add_channel("slow", model.slow_measure, model.slow_measure.intensity,
                       [("x", _slow_jump_fn(model, "x"))])
    kernel.set_compensator(cx, model.slow_measure, _slow_jump_fn(model, "x"))


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def simulate_slow_fast(model: ModelSpec, x0, y0, cfg: StepperConfig,
                       stream: RngStream) -> PathSample:
    """One path of the coupled system on the jump-augmented micro grid."""
    kernel = _Kernel(n_paths=1, t_end=cfg.t_end, delta=cfg.delta,
                     scheme=cfg.scheme, stream=stream)
    _build_slow_fast(kernel, model, x0, y0, cfg.epsilon)
    kernel.run(record=True)
    rec = kernel.recorder
    return PathSample(
        times=np.asarray(rec.times),
        slow=rec.series("x"),
        fast=rec.series("y"),
        events=rec.events,
    ).validate()


def simulate_frozen(model: ModelSpec, x, y0, horizon: float, delta: float,
                    stream: RngStream, scheme: str = "tamed_euler") -> PathSample:
    """One path of the fast equation with the slow state held at x."""
    if not 0 < delta <= _MAX_FAST_SUBSTEP * (1 + 1e-12):
        raise ConfigurationError("frozen dynamics require 0 < delta <= 1/16")
    kernel = _Kernel(n_paths=1, t_end=horizon, delta=delta, scheme=scheme,
                     stream=stream)
    _build_frozen(kernel, model, x, y0)
    kernel.run(record=True)
    rec = kernel.recorder
    return PathSample(
        times=np.asarray(rec.times),
        slow=None,
        fast=rec.series("y"),
        events=rec.events,
    ).validate()


def simulate_pair_coupled(model: ModelSpec, avg, x0, y0, cfg: StepperConfig,
                          stream: RngStream):
    """One coupled pair (slow-fast path, averaged path) sharing W1 and the
    slow jump events/marks; returns both paths, the sup distance over the
    augmented grid, and the terminal states."""
    out = run_pair_batch(model, avg, x0, y0, cfg, n_paths=1, stream=stream,
                         record=True)
    return out["path_system"], out["path_averaged"], float(out["sup"][0]), (
        out["terminal_system"][0], out["terminal_averaged"][0])


def simulate_averaged_weak(model: ModelSpec, avg, x0, cfg: StepperConfig,
                           stream: RngStream) -> PathSample:
    """One path of the averaged equation driven by its own n-dimensional
    Wiener process and its own slow jump stream, with diffusion equal to
    the PSD square root of the averaged squared diffusion."""
    if not hasattr(avg, "diffusion_root"):
        raise ConfigurationError("averaged coefficients lack squared-diffusion data")
    kernel = _Kernel(n_paths=1, t_end=cfg.t_end, delta=cfg.delta,
                     scheme=cfg.scheme, stream=stream)
    _build_averaged(kernel, model, avg, x0)
    kernel.run(record=True)
    rec = kernel.recorder
    return PathSample(
        times=np.asarray(rec.times),
        slow=rec.series("x"),
        fast=None,
        events=rec.events,
    ).validate()


def run_system_batch(model: ModelSpec, x0, y0, cfg: StepperConfig, n_paths: int,
                     stream: RngStream, *, watchers=(), checkpoints=()):
    """Vectorized batch of coupled slow-fast paths; returns terminal states
    and checkpoint snapshots."""
    kernel = _Kernel(n_paths=n_paths, t_end=cfg.t_end, delta=cfg.delta,
                     scheme=cfg.scheme, stream=stream)
    _build_slow_fast(kernel, model, x0, y0, cfg.epsilon)
    snaps = kernel.run(watchers=watchers, checkpoints=checkpoints)
    return {
        "terminal_slow": kernel.states["x"].copy(),
        "terminal_fast": kernel.states["y"].copy(),
        "checkpoints": snaps,
    }


def run_pair_batch(model: ModelSpec, avg, x0, y0, cfg: StepperConfig,
                   n_paths: int, stream: RngStream, *, checkpoints=(),
                   record: bool = False):
    """Coupled pairs (system, averaged) through identical W1 increments and
    identical slow jump events; the strong-error workhorse."""
    if not model.sigma_y_independent:
        raise ConfigurationError(
            "pathwise coupling requires a slow diffusion independent of the fast state"
        )
    kernel = _Kernel(n_paths=n_paths, t_end=cfg.t_end, delta=cfg.delta,
                     scheme=cfg.scheme, stream=stream)
    _build_slow_fast(kernel, model, x0, y0, cfg.epsilon, twin=avg)
    kernel.track_sup("x", "xt")
    snaps = kernel.run(checkpoints=checkpoints, record=record)
    out = {
        "sup": kernel.running_sup.copy(),
        "terminal_system": kernel.states["x"].copy(),
        "terminal_averaged": kernel.states["xt"].copy(),
        "checkpoints": snaps,
        "clamped": int(getattr(avg, "clamp_count", 0)),
    }
    if record:
        rec = kernel.recorder
        times = np.asarray(rec.times)
        out["path_system"] = PathSample(
            times=times, slow=rec.series("x"), fast=rec.series("y"),
            events=[e for e in rec.events if e.target in ("x", "y")],
        ).validate()
        out["path_averaged"] = PathSample(
            times=times, slow=rec.series("xt"), fast=None,
            events=[e for e in rec.events if e.target == "xt"],
        ).validate()
    return out


def run_frozen_batch(model: ModelSpec, x, y0, horizon: float, delta: float,
                     n_chains: int, stream: RngStream, *, watchers=(),
                     checkpoints=(), scheme: str = "tamed_euler"):
    """Vectorized frozen-equation chains at a fixed slow state."""
    if not 0 < delta <= _MAX_FAST_SUBSTEP * (1 + 1e-12):
        raise ConfigurationError("frozen dynamics require 0 < delta <= 1/16")
    kernel = _Kernel(n_paths=n_chains, t_end=horizon, delta=delta, scheme=scheme,
                     stream=stream)
    _build_frozen(kernel, model, x, y0)
    snaps = kernel.run(watchers=watchers, checkpoints=checkpoints)
    return {"terminal_fast": kernel.states["y"].copy(), "checkpoints": snaps}


def run_frozen_pair_batch(model: ModelSpec, x, y0_a, y0_b, horizon: float,
                          delta: float, n_pairs: int, stream: RngStream, *,
                          watchers=()):
    """Synchronously coupled frozen pairs: same Wiener path, same jump
    events and marks, same slow state."""
    if not 0 < delta <= _MAX_FAST_SUBSTEP * (1 + 1e-12):
        raise ConfigurationError("frozen dynamics require 0 < delta <= 1/16")
    kernel = _Kernel(n_paths=n_pairs, t_end=horizon, delta=delta,
                     scheme="tamed_euler", stream=stream)
    _build_frozen(kernel, model, x, y0_a, second_y0=y0_b)
    kernel.run(watchers=watchers)
    return {"final_a": kernel.states["y"].copy(),
            "final_b": kernel.states["y2"].copy()}


def run_averaged_batch(model: ModelSpec, avg, x0, cfg: StepperConfig,
                       n_paths: int, stream: RngStream, *, watchers=(),
                       checkpoints=()):
    """Vectorized batch of weak-form averaged paths."""
    kernel = _Kernel(n_paths=n_paths, t_end=cfg.t_end, delta=cfg.delta,
                     scheme=cfg.scheme, stream=stream)
    _build_averaged(kernel, model, avg, x0)
    snaps = kernel.run(watchers=watchers, checkpoints=checkpoints)
    return {"terminal_slow": kernel.states["x"].copy(), "checkpoints": snaps}
