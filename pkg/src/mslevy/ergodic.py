"""Invariant-measure estimation and averaged-coefficient construction.

The frozen fast equation is exponentially ergodic, so its invariant law
at a fixed slow state x is estimated by pooled time averages over a few
long chains. Averaged coefficients are invariant-measure integrals:

    drift_bar(x)  = E_mu[ b(x, Y) ]
    diff2_bar(x)  = E_mu[ sigma(x, Y) sigma(x, Y)^T ]   (PSD square root
                    taken by eigendecomposition, negative values clipped)

and the corrector of the centered drift is the truncated time integral

    cell(x, y) = integral_0^t_cut ( E b(x, Y_t^{x,y}) - drift_bar(x) ) dt

with an exponential tail bound fitted from the observed decay.

Confidence intervals for time averages use batch means rather than naive
independence, since pooled samples are autocorrelated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigurationError, DecayFitError, TableValidationError
from .integrate import run_frozen_batch, run_frozen_pair_batch
from .model import ModelSpec
from .observers import MeanCurve, PairDistanceCurve, ThinCollector
from .rng import RngStream

__all__ = [
    "InvariantSample",
    "InvariantConfig",
    "AveragedTable",
    "AveragedDiffusion",
    "ExactAveraged",
    "PoissonCell",
    "DecayCurve",
    "ConvergenceCurve",
    "psd_sqrt",
    "estimate_invariant_measure",
    "averaged_drift",
    "averaged_diffusion",
    "build_averaged_table",
    "save_averaged_table",
    "load_averaged_table",
    "poisson_cell",
    "ergodicity_decay",
    "convergence_to_average",
]

_EXTRAPOLATIONS = ("clamp", "error")


# ---------------------------------------------------------------------------
# PSD square root
# ---------------------------------------------------------------------------


def psd_sqrt(mat: np.ndarray, hard_floor: float = -1e-6) -> tuple[np.ndarray, float]:
    """Symmetric PSD square root with eigenvalue clipping.

    Returns (root, clip_magnitude) where clip_magnitude is the largest
    negative eigenvalue that was clipped to zero. Raises when an
    eigenvalue falls below `hard_floor`, which signals corrupted input
    rather than round-off.
    """
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + mat.T)
    if sym.shape == (1, 1):
        v = float(sym[0, 0])
        if v < hard_floor:
            raise ConfigurationError(f"squared diffusion {v} is negative")
        return np.array([[np.sqrt(max(v, 0.0))]]), max(0.0, -v)
    w, vecs = np.linalg.eigh(sym)
    if w.min() < hard_floor:
        raise ConfigurationError(f"matrix eigenvalue {w.min()} below PSD floor")
    clip = max(0.0, float(-w.min()))
    w = np.maximum(w, 0.0)
    root = (vecs * np.sqrt(w)) @ vecs.T
    return root, clip


# ---------------------------------------------------------------------------
# Invariant measure
# ---------------------------------------------------------------------------


@dataclass
class InvariantSample:
    """Pooled, thinned time samples approximating the frozen invariant law.

    Weights are uniform and sum to one. `batch_index` partitions samples
    into contiguous time blocks (per chain) for batch-mean confidence
    intervals. `ess` is the effective sample size of |y|^2 via integrated
    autocorrelation.
    """

    x: np.ndarray
    samples: np.ndarray
    weights: np.ndarray
    batch_index: np.ndarray
    n_batches: int
    ess: float
    burn_in: float
    horizon: float
    delta: float
    thin: int
    flags: tuple = ()

    def mean_ci(self, values: np.ndarray, level: float = 0.95):
        """Weighted mean and batch-mean CI half-width of an integrand.

        `values` has one row per stored sample; trailing shape is kept.
        """
        values = np.asarray(values, dtype=float)
        flat = values.reshape(len(values), -1)
        mean = flat.mean(axis=0)
        # batch_index is nondecreasing (chain-major, time blocks in order)
        counts = np.bincount(self.batch_index, minlength=self.n_batches)
        bounds = np.searchsorted(self.batch_index, np.arange(self.n_batches))
        bm = np.add.reduceat(flat, bounds, axis=0) / counts[:, None]
        tcrit = stats.t.ppf(0.5 + level / 2, self.n_batches - 1)
        ci = tcrit * bm.std(axis=0, ddof=1) / np.sqrt(self.n_batches)
        ci = np.maximum(ci, 4 * np.finfo(float).eps * (1.0 + np.abs(mean)))
        shape = values.shape[1:]
        return mean.reshape(shape), ci.reshape(shape)

    def moment(self, p: float):
        """Weighted moment E|Y|^p (scalar fast state returns E[Y^p])."""
        if self.samples.shape[1] == 1:
            return float(np.mean(self.samples[:, 0] ** p))
        return float(np.mean(np.linalg.norm(self.samples, axis=1) ** p))


@dataclass(frozen=True)
class InvariantConfig:
    """Budget for invariant-measure estimation at one slow state.

    burn_in and horizon default to the pilot heuristic 5/gamma and
    100/gamma from a synchronously coupled decay fit.
    """

    n_chains: int = 8
    burn_in: float | None = None
    horizon: float | None = None
    delta: float = 2.0**-8
    thin: int = 8
    y0: float = 0.0
    n_batches: int = 32


def _integrated_autocorr(series: np.ndarray) -> float:
    """Integrated autocorrelation time (in sample units) of one series,
    by the initial-positive-sequence rule on the empirical acf."""
    x = series - series.mean()
    n = len(x)
    if n < 8 or np.allclose(x, 0):
        return 1.0
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conjugate(f))[:n]
    if acov[0] <= 0:
        return 1.0
    rho = acov / acov[0]
    tau = 1.0
    for k in range(1, min(n // 2, 2000), 2):
        pair = rho[k] + (rho[k + 1] if k + 1 < n else 0.0)
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(max(tau, 1.0))


def estimate_invariant_measure(model: ModelSpec, x, *, burn_in: float,
                               horizon: float, n_chains: int = 8,
                               delta: float = 2.0**-8, thin: int = 8,
                               y0=0.0, n_batches: int = 32,
                               stream: RngStream) -> InvariantSample:
    """Pooled time averages over independent frozen chains at slow state x.

    Chains run burn_in + horizon, the burn-in is discarded, and every
    `thin`-th micro-grid state is retained with equal weight. The
    effective sample size comes from the autocorrelation of |y|^2; below
    100 the sample is flagged.
    """
    if burn_in < 0 or horizon <= 0:
        raise ConfigurationError("burn_in must be >= 0 and horizon > 0")
    burn_steps = int(round(burn_in / delta))
    collector = ThinCollector("y", burn_steps, thin)
    run_frozen_batch(model, x, y0, horizon=burn_in + horizon, delta=delta,
                     n_chains=n_chains, stream=stream, watchers=(collector,))
    stacked = collector.stacked()                      # (kept, chains, m)
    kept, chains, m = stacked.shape
    series = np.transpose(stacked, (1, 0, 2))          # (chains, kept, m)
    samples = series.reshape(chains * kept, m)

    per_chain = max(1, int(np.ceil(n_batches / chains)))
    n_batches_eff = per_chain * chains
    block = (np.arange(kept) * per_chain) // kept      # (kept,)
    batch_index = (np.arange(chains)[:, None] * per_chain + block[None, :]).reshape(-1)

    sq = np.sum(series * series, axis=2)               # (chains, kept)
    taus = [_integrated_autocorr(sq[c]) for c in range(min(chains, 8))]
    ess = chains * kept / float(np.mean(taus))
    flags = ("low-ess",) if ess < 100 else ()

    return InvariantSample(
        x=np.atleast_1d(np.asarray(x, dtype=float)),
        samples=samples,
        weights=np.full(len(samples), 1.0 / len(samples)),
        batch_index=batch_index,
        n_batches=n_batches_eff,
        ess=float(ess),
        burn_in=float(burn_in),
        horizon=float(horizon),
        delta=float(delta),
        thin=int(thin),
        flags=flags,
    )


def _require_same_x(model, x, inv):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != inv.x.shape or not np.allclose(x, inv.x):
        raise ConfigurationError(
            f"invariant sample was estimated at x={inv.x}, not {x}"
        )
    return x


def averaged_drift(model: ModelSpec, x, inv: InvariantSample):
    """Invariant-measure average of the slow drift at x, with batch CI."""
    x = _require_same_x(model, x, inv)
    xs = np.broadcast_to(x, (len(inv.samples), model.dim_slow))
    vals = model.slow_drift(xs, inv.samples)
    return inv.mean_ci(vals)


@dataclass
class AveragedDiffusion:
    matrix: np.ndarray
    root: np.ndarray
    ci: np.ndarray
    clip: float


def averaged_diffusion(model: ModelSpec, x, inv: InvariantSample) -> AveragedDiffusion:
    """Invariant-measure average of sigma sigma^T at x and its PSD root."""
    x = _require_same_x(model, x, inv)
    xs = np.broadcast_to(x, (len(inv.samples), model.dim_slow))
    sig = np.asarray(model.slow_diffusion(xs, inv.samples))
    outer = np.einsum("kid,kjd->kij", sig, sig)
    mean, ci = inv.mean_ci(outer)
    mean = 0.5 * (mean + mean.T)
    root, clip = psd_sqrt(mean)
    return AveragedDiffusion(matrix=mean, root=root, ci=ci, clip=clip)


# ---------------------------------------------------------------------------
# Averaged-coefficient table
# ---------------------------------------------------------------------------


class ExactAveraged:
    """Averaged coefficients given as exact callables (no grid).

    Used when the averaged drift is known in closed form, e.g. for
    fast-independent coefficients where drift_bar == drift; pathwise
    degeneracy checks rely on the resulting bit-identical evaluation.
    """

    def __init__(self, drift_fn, diff2_fn=None):
        self._drift = drift_fn
        self._diff2 = diff2_fn
        self.clamp_count = 0

    def drift(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._drift(x), dtype=float)

    def diff2(self, x: np.ndarray) -> np.ndarray:
        if self._diff2 is None:
            raise ConfigurationError("exact averaged coefficients lack diffusion data")
        return np.asarray(self._diff2(x), dtype=float)

    def diffusion_root(self, x: np.ndarray) -> np.ndarray:
        v = self.diff2(x)
        if v.shape[1:] == (1, 1):
            if np.any(v < 0):
                raise ConfigurationError("squared diffusion went negative")
            return np.sqrt(v)
        return np.stack([psd_sqrt(m)[0] for m in v])


@dataclass
class AveragedTable:
    """Grid of averaged drift and squared diffusion with CIs.

    Piecewise-linear interpolation between nodes; queries outside the box
    follow the extrapolation policy ("clamp" returns the boundary value
    and counts the event, "error" raises). Interpolated CI queries
    inherit the larger neighboring half-width. Stored diffusion nodes are
    symmetric PSD, so linear interpolation stays PSD.
    """

    axes: tuple
    drift_values: np.ndarray
    drift_ci: np.ndarray
    diff2_values: np.ndarray
    diff2_ci: np.ndarray
    extrapolation: str = "clamp"
    meta: dict = field(default_factory=dict)
    max_clip: float = 0.0
    clamp_count: int = 0

    def __post_init__(self):
        if self.extrapolation not in _EXTRAPOLATIONS:
            raise ConfigurationError(f"extrapolation must be one of {_EXTRAPOLATIONS}")
        if len(self.axes) != 1:
            raise ConfigurationError("averaged tables are built on 1-d slow grids")

    @property
    def dim(self) -> int:
        return len(self.axes)

    def _locate(self, x: np.ndarray):
        g = self.axes[0]
        q = np.asarray(x, dtype=float)[:, 0]
        outside = (q < g[0]) | (q > g[-1])
        if outside.any():
            if self.extrapolation == "error":
                raise ConfigurationError(
                    f"query {q[outside][0]!r} outside table box [{g[0]}, {g[-1]}]"
                )
            self.clamp_count += int(outside.sum())
            q = np.clip(q, g[0], g[-1])
        idx = np.clip(np.searchsorted(g, q, side="right") - 1, 0, len(g) - 2)
        w = (q - g[idx]) / (g[idx + 1] - g[idx])
        return idx, w

    def drift(self, x: np.ndarray) -> np.ndarray:
        idx, w = self._locate(x)
        lo = self.drift_values[idx]
        hi = self.drift_values[idx + 1]
        return lo + w[:, None] * (hi - lo)

    def drift_ci_at(self, x: np.ndarray) -> np.ndarray:
        idx, _ = self._locate(x)
        return np.maximum(self.drift_ci[idx], self.drift_ci[idx + 1])

    def diff2(self, x: np.ndarray) -> np.ndarray:
        idx, w = self._locate(x)
        lo = self.diff2_values[idx]
        hi = self.diff2_values[idx + 1]
        return lo + w[:, None, None] * (hi - lo)

    def diffusion_root(self, x: np.ndarray) -> np.ndarray:
        v = self.diff2(x)
        if v.shape[1:] == (1, 1):
            bad = v[:, 0, 0] < 0
            if bad.any():
                raise ConfigurationError(
                    f"interpolated squared diffusion negative at x={x[bad][0]!r}"
                )
            return np.sqrt(v)
        w, vecs = np.linalg.eigh(0.5 * (v + np.transpose(v, (0, 2, 1))))
        if w.min() < -1e-10:
            k = int(np.argmin(w.min(axis=1)))
            raise ConfigurationError(
                f"interpolated squared diffusion not PSD at x={x[k]!r}"
            )
        w = np.maximum(w, 0.0)
        return np.einsum("kij,kj,klj->kil", vecs, np.sqrt(w), vecs)

    def node_count(self) -> int:
        return int(self.drift_values.shape[0])


def _pilot_rates(model, x_center, delta, stream):
    """Pilot decay fit used to size burn-in and horizon."""
    times = np.linspace(0.1, 2.0, 16)
    dec = ergodicity_decay(model, x_center, 1.0, -1.0, times=times,
                           n_pairs=256, delta=delta, stream=stream)
    gamma = dec.gamma_hat if dec.gamma_hat and dec.gamma_hat > 0.1 else 1.0
    return 5.0 / gamma, 100.0 / gamma


def build_averaged_table(model: ModelSpec, box, nodes: int,
                         inv_cfg: InvariantConfig, stream: RngStream, *,
                         extrapolation: str = "clamp") -> AveragedTable:
    """Estimate averaged coefficients on a uniform grid and validate the
    interpolant by leave-node-out error on interior nodes.

    Raises TableValidationError (suggesting a finer grid) when the
    midpoint prediction error exceeds max(3 combined CI half-widths,
    1% relative).
    """
    if model.dim_slow != 1:
        raise ConfigurationError("averaged tables require a scalar slow state")
    lo, hi = float(box[0]), float(box[1])
    if not (hi > lo and nodes >= 2):
        raise ConfigurationError("box must be nonempty and nodes >= 2")
    grid = np.linspace(lo, hi, int(nodes))

    burn_in, horizon = inv_cfg.burn_in, inv_cfg.horizon
    if burn_in is None or horizon is None:
        pilot_burn, pilot_hor = _pilot_rates(model, 0.5 * (lo + hi),
                                             inv_cfg.delta, stream.child("pilot"))
        burn_in = pilot_burn if burn_in is None else burn_in
        horizon = pilot_hor if horizon is None else horizon

    n = model.dim_slow
    drift_values = np.empty((nodes, n))
    drift_ci = np.empty((nodes, n))
    diff2_values = np.empty((nodes, n, n))
    diff2_ci = np.empty((nodes, n, n))
    max_clip = 0.0
    for i, xv in enumerate(grid):
        inv = estimate_invariant_measure(
            model, xv, burn_in=burn_in, horizon=horizon,
            n_chains=inv_cfg.n_chains, delta=inv_cfg.delta, thin=inv_cfg.thin,
            y0=inv_cfg.y0, n_batches=inv_cfg.n_batches,
            stream=stream.child(f"node:{i}"),
        )
        drift_values[i], drift_ci[i] = averaged_drift(model, xv, inv)
        ad = averaged_diffusion(model, xv, inv)
        diff2_values[i], diff2_ci[i] = ad.matrix, ad.ci
        max_clip = max(max_clip, ad.clip)

    for label, vals, cis in (("drift", drift_values, drift_ci),
                             ("diffusion", diff2_values, diff2_ci)):
        # 1% relative reads against the coefficient's scale on the grid;
        # a pointwise denominator would make any curved coefficient with a
        # zero crossing unrepresentable at every resolution
        scale = np.max(np.abs(vals), axis=0)
        for i in range(1, nodes - 1):
            pred = 0.5 * (vals[i - 1] + vals[i + 1])
            err = np.abs(pred - vals[i])
            combined = np.sqrt(cis[i] ** 2 + 0.25 * (cis[i - 1] ** 2 + cis[i + 1] ** 2))
            tol = np.maximum(3.0 * combined, 0.01 * scale)
            if np.any(err > tol):
                raise TableValidationError(
                    f"{label} interpolation error {err.max():.3g} at node "
                    f"x={grid[i]:.4g} exceeds {tol.max():.3g}; use a finer grid"
                )

    meta = {
        "model": model.name,
        "box": [lo, hi],
        "nodes": int(nodes),
        "seed": [stream.master_seed, stream.stream_id, list(stream.tags)],
        "delta": inv_cfg.delta,
        "burn_in": burn_in,
        "horizon": horizon,
        "n_chains": inv_cfg.n_chains,
        "thin": inv_cfg.thin,
    }
    return AveragedTable(
        axes=(grid,),
        drift_values=drift_values,
        drift_ci=drift_ci,
        diff2_values=diff2_values,
        diff2_ci=diff2_ci,
        extrapolation=extrapolation,
        meta=meta,
        max_clip=max_clip,
    )


_TABLE_FORMAT_VERSION = 1


def save_averaged_table(table: AveragedTable, csv_path, meta_path):
    """Versioned CSV of nodes plus a JSON header; floats keep 17
    significant digits so reload is bit-exact."""
    n = table.drift_values.shape[1]
    cols = (["x"]
            + [f"drift_{i}" for i in range(n)]
            + [f"drift_ci_{i}" for i in range(n)]
            + [f"diff2_{i}{j}" for i in range(n) for j in range(n)]
            + [f"diff2_ci_{i}{j}" for i in range(n) for j in range(n)])
    lines = [",".join(cols)]
    for k in range(table.node_count()):
        row = ([table.axes[0][k]]
               + list(table.drift_values[k]) + list(table.drift_ci[k])
               + list(table.diff2_values[k].ravel())
               + list(table.diff2_ci[k].ravel()))
        lines.append(",".join(format(v, ".17g") for v in row))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    header = {
        "format_version": _TABLE_FORMAT_VERSION,
        "dim": n,
        "extrapolation": table.extrapolation,
        "max_clip": table.max_clip,
        "meta": table.meta,
    }
    with open(meta_path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_averaged_table(csv_path, meta_path) -> AveragedTable:
    with open(meta_path) as fh:
        header = json.load(fh)
    if header.get("format_version") != _TABLE_FORMAT_VERSION:
        raise ConfigurationError("unsupported table format version")
    n = int(header["dim"])
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    grid = data[:, 0]
    at = 1
    drift = data[:, at:at + n]; at += n
    drift_ci = data[:, at:at + n]; at += n
    diff2 = data[:, at:at + n * n].reshape(-1, n, n); at += n * n
    diff2_ci = data[:, at:at + n * n].reshape(-1, n, n)
    return AveragedTable(
        axes=(grid,),
        drift_values=drift,
        drift_ci=drift_ci,
        diff2_values=diff2,
        diff2_ci=diff2_ci,
        extrapolation=header["extrapolation"],
        meta=header["meta"],
        max_clip=float(header["max_clip"]),
    )


# ---------------------------------------------------------------------------
# Poisson-equation corrector
# ---------------------------------------------------------------------------


@dataclass
class PoissonCell:
    value: np.ndarray
    ci: np.ndarray
    tail_bound: float
    decay_rate: float
    times: np.ndarray
    gap: np.ndarray
    gap_ci: np.ndarray | None = None


def poisson_cell(model: ModelSpec, x, y, *, t_cut: float, n_traj: int,
                 delta: float, avg_b, avg_b_ci=0.0,
                 stream: RngStream) -> PoissonCell:
    """Corrector estimate: time integral of E b(x, Y_t^{x,y}) - drift_bar(x)
    up to t_cut, trapezoid rule on the micro grid.

    The CI combines the Monte Carlo spread of per-path drift integrals
    with the averaged-drift uncertainty (t_cut * avg_b_ci). The reported
    tail bound extrapolates the fitted exponential decay of the gap
    beyond t_cut; a non-positive fitted rate raises DecayFitError.
    """
    if t_cut <= 0:
        raise ConfigurationError("t_cut must be positive")
    avg_b = np.atleast_1d(np.asarray(avg_b, dtype=float))
    avg_b_ci = np.broadcast_to(np.asarray(avg_b_ci, dtype=float), avg_b.shape)

    curve = MeanCurve(lambda states: model.slow_drift(states["x"], states["y"]))
    integrals = _PerPathIntegral(
        lambda states: model.slow_drift(states["x"], states["y"]))
    run_frozen_batch(model, x, y, horizon=t_cut, delta=delta, n_chains=n_traj,
                     stream=stream, watchers=(curve, integrals))
    times, means = curve.curve()
    gap = means - avg_b[None, :]
    gap_norm = np.linalg.norm(gap, axis=1)

    per_path = integrals.value          # (n_traj, n)
    value = per_path.mean(axis=0) - avg_b * t_cut
    mc_ci = 1.96 * per_path.std(axis=0, ddof=1) / np.sqrt(n_traj)
    ci = mc_ci + t_cut * avg_b_ci

    if np.all(gap == 0.0):
        return PoissonCell(value=value, ci=ci, tail_bound=0.0,
                           decay_rate=np.inf, times=times, gap=gap_norm,
                           gap_ci=np.zeros_like(gap_norm))

    # fit the exponential tail on the late clean segment: folded noise
    # inflates |gap| once the signal nears the per-point standard error
    point_se = curve.point_se()
    clean = np.flatnonzero(gap_norm > 6 * point_se)
    usable = np.zeros(len(times), dtype=bool)
    if clean.size:
        t_hi = times[clean[-1]]
        usable[clean] = times[clean] >= 0.5 * t_hi
    late = times >= 0.75 * t_cut
    late_in_noise = bool(
        np.median(gap_norm[late]) <= 4 * np.median(point_se[late]) + 1e-300
    )
    rate = np.nan
    tail = float(3 * np.median(point_se))
    if usable.sum() >= 4:
        slope, intercept = np.polyfit(times[usable], np.log(gap_norm[usable]), 1)
        if -slope > 1e-6:
            rate = -slope
            tail = float(np.exp(intercept + slope * t_cut) / rate)
        elif not late_in_noise:
            raise DecayFitError(
                f"fitted gap decay rate {-slope:.3g} is not positive; "
                "increase t_cut or the trajectory budget"
            )
    elif not late_in_noise:
        raise DecayFitError(
            "gap neither decays demonstrably nor falls below the noise floor; "
            "increase t_cut or the trajectory budget"
        )
    return PoissonCell(value=value, ci=ci, tail_bound=tail, decay_rate=rate,
                       times=times, gap=gap_norm, gap_ci=1.96 * point_se)


class _PerPathIntegral:
    """Trapezoid integral of fn(states) per path over the run."""

    def __init__(self, fn):
        self.fn = fn
        self.value = None
        self._prev = None
        self._t = 0.0

    def start(self, states):
        self._prev = np.asarray(self.fn(states))
        self.value = np.zeros_like(self._prev)
        self._t = 0.0

    def observe(self, step, t, states):
        val = np.asarray(self.fn(states))
        self.value += 0.5 * (t - self._t) * (self._prev + val)
        self._prev = val
        self._t = t


# ---------------------------------------------------------------------------
# Ergodicity diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DecayCurve:
    times: np.ndarray
    msd: np.ndarray
    gamma_hat: float | None
    r2: float | None
    degenerate: bool = False
    ci_half: np.ndarray | None = None


def ergodicity_decay(model: ModelSpec, x, y1, y2, *, times, n_pairs: int,
                     delta: float, stream: RngStream) -> DecayCurve:
    """Mean squared distance of synchronously coupled frozen pairs
    (same Wiener path, same jump events and marks, same slow state),
    with a log-linear decay fit."""
    times = np.sort(np.asarray(times, dtype=float))
    if times[0] <= 0:
        raise ConfigurationError("decay times must be positive")
    y1a = np.atleast_1d(np.asarray(y1, dtype=float))
    y2a = np.atleast_1d(np.asarray(y2, dtype=float))
    if np.array_equal(y1a, y2a):
        z = np.zeros_like(times)
        return DecayCurve(times=times, msd=z, gamma_hat=None, r2=None,
                          degenerate=True, ci_half=z.copy())
    record_steps = [int(round(t / delta)) - 1 for t in times]
    watcher = PairDistanceCurve("y", "y2", record_steps)
    run_frozen_pair_batch(model, x, y1, y2, horizon=float(times[-1]),
                          delta=delta, n_pairs=n_pairs, stream=stream,
                          watchers=(watcher,))
    t_obs, msd = watcher.curve()
    ci = 1.96 * np.asarray(watcher.se)
    t_fit, m_fit, ci_fit = t_obs[1:], msd[1:], ci[1:]
    pos = m_fit > 0
    if pos.sum() < 3:
        return DecayCurve(times=t_fit, msd=m_fit, gamma_hat=None, r2=None,
                          degenerate=True, ci_half=ci_fit)
    logm = np.log(m_fit[pos])
    slope, intercept = np.polyfit(t_fit[pos], logm, 1)
    fitted = intercept + slope * t_fit[pos]
    ss_res = float(np.sum((logm - fitted) ** 2))
    ss_tot = float(np.sum((logm - logm.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayCurve(times=t_fit, msd=m_fit, gamma_hat=float(-slope), r2=r2,
                      ci_half=ci_fit)


@dataclass
class ConvergenceCurve:
    times: np.ndarray
    gap: np.ndarray
    envelope_log_c: float | None
    envelope_rate: float | None
    r2: float | None


def convergence_to_average(model: ModelSpec, x, y, *, horizon: float,
                           n_traj: int, avg_b, delta: float,
                           stream: RngStream) -> ConvergenceCurve:
    """Gap curve |E b(x, Y_t^{x,y}) - drift_bar(x)| on the micro grid with a
    fitted exponential envelope; the t = 0 point is |b(x, y) - drift_bar|
    exactly. Used to size burn-in and corrector truncation."""
    avg_b = np.atleast_1d(np.asarray(avg_b, dtype=float))
    curve = MeanCurve(lambda states: model.slow_drift(states["x"], states["y"]))
    run_frozen_batch(model, x, y, horizon=horizon, delta=delta,
                     n_chains=n_traj, stream=stream, watchers=(curve,))
    times, means = curve.curve()
    gap = np.linalg.norm(means - avg_b[None, :], axis=1)
    pos = gap > 0
    if pos.sum() >= 4:
        slope, intercept = np.polyfit(times[pos], np.log(gap[pos]), 1)
        fitted = intercept + slope * times[pos]
        lg = np.log(gap[pos])
        ss_tot = float(np.sum((lg - lg.mean()) ** 2))
        r2 = 1.0 - float(np.sum((lg - fitted) ** 2)) / ss_tot if ss_tot > 0 else 1.0
        return ConvergenceCurve(times=times, gap=gap, envelope_log_c=float(intercept),
                                envelope_rate=float(-slope), r2=r2)
    return ConvergenceCurve(times=times, gap=gap, envelope_log_c=None,
                            envelope_rate=None, r2=None)
