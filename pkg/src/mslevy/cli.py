"""Command-line entry point: `mslevy <command> --config <path>`.

Commands wire JSON run configurations to the pipeline: model validation,
frozen-equation statistics, averaged-table construction, corrector
diagnostics, ergodicity decay, strong/weak order studies, and fast-moment
sweeps. Every run echoes its fully-defaulted effective configuration so
outputs are replayable bit for bit from the artifacts alone.

Exit codes: 0 success; 1 a quantitative check failed or was refused
(science failure, e.g. fitted slope outside the configured window);
2 configuration error; 3 numerical abort (path blow-up).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import ergodic, estimate
from .errors import (
    BlowUpError,
    ConfigurationError,
    DecayFitError,
    MslevyError,
    TableValidationError,
)
from .model import (
    check_fast_dissipativity,
    check_growth,
    check_monotonicity,
    check_strong_monotonicity_fast,
    get_model,
)
from .rng import RngStream

__all__ = ["main", "run", "parse_config", "RunConfig", "COMMANDS"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num(key):
    def check(v):
        if not _is_num(v):
            raise ConfigurationError(f"{key}: expected a number, got {v!r}")
        return float(v)
    return check


def _int(key, minimum=1):
    def check(v):
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigurationError(f"{key}: expected an integer >= {minimum}")
        return int(v)
    return check


def _num_list(key, min_len=1):
    def check(v):
        if (not isinstance(v, list) or len(v) < min_len
                or not all(_is_num(u) for u in v)):
            raise ConfigurationError(
                f"{key}: expected a list of >= {min_len} numbers"
            )
        return [float(u) for u in v]
    return check


def _pair(key):
    def check(v):
        if not isinstance(v, list) or len(v) != 2 or not all(_is_num(u) for u in v):
            raise ConfigurationError(f"{key}: expected [lo, hi]")
        return [float(v[0]), float(v[1])]
    return check


def _str(key, choices=None):
    def check(v):
        if not isinstance(v, str) or (choices and v not in choices):
            raise ConfigurationError(
                f"{key}: expected one of {choices}" if choices
                else f"{key}: expected a string"
            )
        return v
    return check


def _maybe(checker):
    def check(v):
        return None if v is None else checker(v)
    return check


def _block(key, schema):
    def check(v):
        if not isinstance(v, dict):
            raise ConfigurationError(f"{key}: expected a mapping")
        return _apply_schema(v, schema, prefix=key + ".")
    return check


def _apply_schema(raw: dict, schema: dict, prefix: str = "") -> dict:
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s): {sorted(prefix + k for k in unknown)}"
        )
    out = {}
    missing = []
    for key, (required, default, checker) in schema.items():
        if key in raw:
            out[key] = checker(raw[key])
        elif required:
            missing.append(prefix + key)
        else:
            out[key] = default
    if missing:
        raise ConfigurationError(f"missing required config key(s): {missing}")
    return out


_TABLE_BLOCK = {
    "box": (True, None, _pair("table.box")),
    "nodes": (True, None, _int("table.nodes", 2)),
    "chains": (False, 8, _int("table.chains")),
    "burn_in": (False, None, _maybe(_num("table.burn_in"))),
    "horizon": (False, None, _maybe(_num("table.horizon"))),
    "delta": (False, 2.0**-8, _num("table.delta")),
    "thin": (False, 8, _int("table.thin")),
    "y0": (False, 0.0, _num("table.y0")),
}

_POLICY_BLOCK = {
    "mode": (False, "global", _str("delta_policy.mode", ("global", "scaled"))),
    "fast_exp": (False, 6, _int("delta_policy.fast_exp", 1)),
}

_SCHEMAS: dict[str, dict] = {
    "validate-model": {
        "probes": (False, 2000, _int("probes")),
        "box": (False, 5.0, _num("box")),
    },
    "frozen-stats": {
        "x": (True, None, _num("x")),
        "chains": (False, 8, _int("chains")),
        "burn_in": (False, 5.0, _num("burn_in")),
        "horizon": (False, 100.0, _num("horizon")),
        "delta": (False, 2.0**-8, _num("delta")),
        "thin": (False, 8, _int("thin")),
        "y0": (False, 0.0, _num("y0")),
    },
    "avg-table": {
        "table": (True, None, _block("table", _TABLE_BLOCK)),
        "extrapolation": (False, "clamp", _str("extrapolation", ("clamp", "error"))),
    },
    "poisson-check": {
        "x": (True, None, _num("x")),
        "y": (True, None, _num("y")),
        "t_cut": (True, None, _num("t_cut")),
        "n_traj": (False, 4096, _int("n_traj")),
        "delta": (False, 2.0**-8, _num("delta")),
        "chains": (False, 32, _int("chains")),
        "burn_in": (False, 5.0, _num("burn_in")),
        "horizon": (False, 100.0, _num("horizon")),
        "semigroup_s": (False, None, _maybe(_num("semigroup_s"))),
        "endpoint_draws": (False, 32, _int("endpoint_draws")),
    },
    "ergodicity": {
        "x": (True, None, _num("x")),
        "y1": (True, None, _num("y1")),
        "y2": (True, None, _num("y2")),
        "t_end": (False, 2.0, _num("t_end")),
        "n_times": (False, 16, _int("n_times", 3)),
        "n_pairs": (False, 1000, _int("n_pairs")),
        "delta": (False, 2.0**-8, _num("delta")),
        "gamma_min": (False, None, _maybe(_num("gamma_min"))),
        "r2_min": (False, None, _maybe(_num("r2_min"))),
    },
    "strong-order": {
        "epsilon": (True, None, _num_list("epsilon", 3)),
        "p": (False, 2.0, _num("p")),
        "t_end": (False, 1.0, _num("t_end")),
        "n_paths": (False, 1000, _int("n_paths", 2)),
        "x0": (False, 1.0, _num("x0")),
        "y0": (False, 1.0, _num("y0")),
        "delta_policy": (False, _apply_schema({}, _POLICY_BLOCK),
                         _block("delta_policy", _POLICY_BLOCK)),
        "table": (True, None, _block("table", _TABLE_BLOCK)),
        "bootstrap": (False, 1000, _int("bootstrap", 10)),
        "confidence": (False, 0.95, _num("confidence")),
        "slope_window": (False, [0.35, 0.65], _pair("slope_window")),
        "r2_min": (False, 0.9, _num("r2_min")),
    },
    "weak-order": {
        "epsilon": (True, None, _num_list("epsilon", 3)),
        "phi": (False, "x_squared", _str("phi")),
        "mode": (False, "coupled_difference",
                 _str("mode", ("coupled_difference", "independent"))),
        "t_end": (False, 1.0, _num("t_end")),
        "n_paths": (False, None, _maybe(_int("n_paths", 2))),
        "x0": (False, 0.5, _num("x0")),
        "y0": (False, 0.5, _num("y0")),
        "delta_policy": (False, _apply_schema({}, _POLICY_BLOCK),
                         _block("delta_policy", _POLICY_BLOCK)),
        "table": (True, None, _block("table", _TABLE_BLOCK)),
        "bootstrap": (False, 1000, _int("bootstrap", 10)),
        "confidence": (False, 0.95, _num("confidence")),
        "slope_window": (False, [0.75, 1.25], _pair("slope_window")),
        "r2_min": (False, 0.85, _num("r2_min")),
    },
    "fast-moments": {
        "epsilon": (True, None, _num_list("epsilon", 3)),
        "p": (False, 4.0, _num("p")),
        "t_end": (False, 1.0, _num("t_end")),
        "n_paths": (False, 4096, _int("n_paths", 2)),
        "x0": (False, 1.0, _num("x0")),
        "y0": (False, 1.0, _num("y0")),
        "fast_exp": (False, 6, _int("fast_exp", 1)),
    },
}

COMMANDS = tuple(_SCHEMAS)


class RunConfig:
    """Validated run configuration with defaults applied."""

    def __init__(self, command: str, model_ref, seed: int, options: dict):
        self.command = command
        self.model_ref = model_ref
        self.seed = int(seed)
        self.options = options

    def to_dict(self) -> dict:
        return {"command": self.command, "model": self.model_ref,
                "seed": self.seed, **self.options}


def parse_config(path, command: str | None = None,
                 seed_override: int | None = None) -> RunConfig:
    """Load, validate, and default-fill a JSON run configuration.

    Unknown keys are rejected with their path; expression-defined
    coefficients are parsed through the arithmetic grammar and probe
    evaluated for totality at model construction.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    raw = dict(raw)
    cfg_command = raw.pop("command", None)
    command = command or cfg_command
    if command is None:
        raise ConfigurationError("no command given (CLI argument or 'command' key)")
    if command not in _SCHEMAS:
        raise ConfigurationError(
            f"unknown command {command!r}; expected one of {sorted(_SCHEMAS)}"
        )
    if cfg_command is not None and cfg_command != command:
        raise ConfigurationError(
            f"config was written for {cfg_command!r}, not {command!r}"
        )
    model_ref = raw.pop("model", None)
    if model_ref is None:
        raise ConfigurationError("missing required config key(s): ['model']")
    seed = raw.pop("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigurationError("seed: expected an integer")
    if seed_override is not None:
        seed = int(seed_override)
    options = _apply_schema(raw, _SCHEMAS[command])
    get_model(model_ref)  # validates the reference and probes expressions
    return RunConfig(command, model_ref, seed, options)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _table_cache_key(model_ref, tb: dict, seed: int) -> str:
    payload = json.dumps({"model": model_ref, "table": tb, "seed": seed},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _get_table(model, model_ref, tb: dict, extrapolation: str, seed: int,
               out: Path, stream: RngStream):
    """Build the averaged table or load it from the run cache."""
    cache = out / "cache"
    cache.mkdir(exist_ok=True)
    key = _table_cache_key(model_ref, tb, seed)
    csv_p = cache / f"avg_table_{key}.csv"
    meta_p = cache / f"avg_table_{key}.json"
    if csv_p.exists() and meta_p.exists():
        return ergodic.load_averaged_table(csv_p, meta_p), True
    inv_cfg = ergodic.InvariantConfig(
        n_chains=tb["chains"], burn_in=tb["burn_in"], horizon=tb["horizon"],
        delta=tb["delta"], thin=tb["thin"], y0=tb["y0"])
    table = ergodic.build_averaged_table(
        model, tuple(tb["box"]), tb["nodes"], inv_cfg, stream,
        extrapolation=extrapolation)
    ergodic.save_averaged_table(table, csv_p, meta_p)
    return table, False


def _save_error_report(rep, out: Path):
    rows = [(e, err, err - ci, err + ci, n)
            for e, err, ci, n in zip(rep.eps, rep.errors, rep.ci_half, rep.n_paths)]
    _write_csv(out / "errors.csv",
               ["epsilon", "error", "ci_lo", "ci_hi", "n_paths"], rows)
    _write_json(out / "report.json", rep.to_dict())


# ---------------------------------------------------------------------------
# Command implementations (return (exit_code, summary_lines))
# ---------------------------------------------------------------------------


def _cmd_validate_model(model, opts, out, stream):
    box = opts["box"]
    probes = opts["probes"]
    reports = [
        check_monotonicity(model, probes, box, stream.child("mono")),
        check_fast_dissipativity(model, probes, box, stream.child("diss")),
        check_strong_monotonicity_fast(model, probes, box, stream.child("contr")),
        check_growth(model, probes, box, stream.child("growth")),
    ]
    payload = {"model": model.name, "checks": []}
    lines = []
    ok = True
    for rep in reports:
        payload["checks"].append({
            "assumption": rep.assumption,
            "observed": rep.observed,
            "declared": rep.declared,
            "passed": rep.passed,
            "n_probes": rep.n_probes,
            "details": {k: float(v) for k, v in rep.details.items()},
            "witness": None if rep.witness is None else {
                k: (v.tolist() if isinstance(v, np.ndarray) else float(v))
                for k, v in rep.witness.items()},
        })
        lines.append(str(rep))
        ok = ok and rep.passed
    _write_json(out / "report.json", payload)
    return (0 if ok else 1), lines


def _cmd_frozen_stats(model, opts, out, stream):
    inv = ergodic.estimate_invariant_measure(
        model, opts["x"], burn_in=opts["burn_in"], horizon=opts["horizon"],
        n_chains=opts["chains"], delta=opts["delta"], thin=opts["thin"],
        y0=opts["y0"], stream=stream)
    rows = []
    lines = [f"invariant law at x={opts['x']:g} "
             f"(ess={inv.ess:.0f}{', LOW' if 'low-ess' in inv.flags else ''})"]
    for p in (1, 2, 3, 4, 6, 8):
        val, ci = inv.mean_ci(inv.samples[:, 0] ** p if model.dim_fast == 1
                              else np.linalg.norm(inv.samples, axis=1) ** p)
        rows.append((p, float(val), float(ci)))
        lines.append(f"  moment {p}: {val:.6g} +- {ci:.2g}")
    _write_csv(out / "invariant_moments.csv", ["order", "value", "ci_half"], rows)
    _write_json(out / "report.json", {
        "x": opts["x"], "ess": inv.ess, "flags": list(inv.flags),
        "moments": [{"order": p, "value": v, "ci_half": c} for p, v, c in rows]})
    return 0, lines


def _cmd_avg_table(model, opts, out, stream):
    tb = opts["table"]
    inv_cfg = ergodic.InvariantConfig(
        n_chains=tb["chains"], burn_in=tb["burn_in"], horizon=tb["horizon"],
        delta=tb["delta"], thin=tb["thin"], y0=tb["y0"])
    table = ergodic.build_averaged_table(
        model, tuple(tb["box"]), tb["nodes"], inv_cfg, stream,
        extrapolation=opts["extrapolation"])
    ergodic.save_averaged_table(table, out / "avg_table.csv",
                                out / "avg_table.json")
    lines = [f"averaged table: {tb['nodes']} nodes on {tb['box']}, "
             f"max drift CI {table.drift_ci.max():.3g}, "
             f"max PSD clip {table.max_clip:.2g}"]
    return 0, lines


def _cmd_poisson_check(model, opts, out, stream):
    x, y = opts["x"], opts["y"]
    inv = ergodic.estimate_invariant_measure(
        model, x, burn_in=opts["burn_in"], horizon=opts["horizon"],
        n_chains=opts["chains"], delta=opts["delta"], stream=stream.child("inv"))
    avg_b, avg_ci = ergodic.averaged_drift(model, x, inv)
    cell = ergodic.poisson_cell(
        model, x, y, t_cut=opts["t_cut"], n_traj=opts["n_traj"],
        delta=opts["delta"], avg_b=avg_b, avg_b_ci=avg_ci,
        stream=stream.child("cell"))
    payload = {
        "x": x, "y": y,
        "avg_drift": avg_b.tolist(), "avg_drift_ci": avg_ci.tolist(),
        "value": cell.value.tolist(), "ci": cell.ci.tolist(),
        "tail_bound": cell.tail_bound, "decay_rate": cell.decay_rate,
    }
    lines = [f"corrector({x:g}, {y:g}) = {cell.value[0]:.5g} +- {cell.ci[0]:.2g}"
             f"  tail {cell.tail_bound:.2g} (rate {cell.decay_rate:.3g})"]
    if opts["semigroup_s"] is not None:
        res = semigroup_identity_check(
            model, x, y, s=opts["semigroup_s"], t_cut=opts["t_cut"],
            n_traj=max(256, opts["n_traj"] // 8),
            endpoint_draws=opts["endpoint_draws"], delta=opts["delta"],
            avg_b=avg_b, avg_b_ci=avg_ci, stream=stream.child("semigroup"))
        payload["semigroup"] = res
        lines.append(
            f"semigroup identity at s={opts['semigroup_s']:g}: "
            f"lhs {res['lhs']:.4g} rhs {res['rhs']:.4g} "
            f"(3ci {3 * res['ci']:.2g}, {'pass' if res['pass'] else 'FAIL'})")
    _write_csv(out / "gap_curve.csv", ["t", "gap", "ci_half"],
               zip(cell.times, cell.gap, cell.gap_ci))
    _write_json(out / "report.json", payload)
    code = 0
    if opts["semigroup_s"] is not None and not payload["semigroup"]["pass"]:
        code = 1
    return code, lines


def semigroup_identity_check(model, x, y, *, s, t_cut, n_traj, endpoint_draws,
                             delta, avg_b, avg_b_ci, stream):
    """Check cell(x,y) - E cell(x, Y_s) == integral_0^s E[b(x,Y_t) - avg] dt.

    The right side is a fresh short-horizon run; the left side averages
    corrector estimates over endpoint draws, so the identity is tested
    without assuming it.
    """
    from .integrate import run_frozen_batch
    from .observers import MeanCurve

    cell_here = ergodic.poisson_cell(
        model, x, y, t_cut=t_cut, n_traj=n_traj, delta=delta, avg_b=avg_b,
        avg_b_ci=avg_b_ci, stream=stream.child("phi-at-y"))
    ends = run_frozen_batch(model, x, y, horizon=s, delta=delta,
                            n_chains=endpoint_draws,
                            stream=stream.child("endpoints"))["terminal_fast"]
    vals = np.empty((endpoint_draws, model.dim_slow))
    for i, ye in enumerate(ends):
        vals[i] = ergodic.poisson_cell(
            model, x, ye, t_cut=t_cut, n_traj=n_traj, delta=delta, avg_b=avg_b,
            avg_b_ci=avg_b_ci, stream=stream.child(f"phi-end:{i}")).value
    mean_end = vals.mean(axis=0)
    se_end = vals.std(axis=0, ddof=1) / np.sqrt(endpoint_draws)

    curve = MeanCurve(lambda st: model.slow_drift(st["x"], st["y"]))
    run_frozen_batch(model, x, y, horizon=s, delta=delta,
                     n_chains=4 * n_traj, stream=stream.child("short"),
                     watchers=(curve,))
    times, means = curve.curve()
    gap = means - np.atleast_1d(avg_b)[None, :]
    rhs = np.trapezoid(gap, times, axis=0)

    lhs = cell_here.value - mean_end
    ci = float(np.linalg.norm(cell_here.ci) + np.linalg.norm(se_end)
               + s * float(np.linalg.norm(np.atleast_1d(avg_b_ci))))
    ok = bool(np.linalg.norm(lhs - rhs) <= 3.0 * ci)
    return {"lhs": float(np.linalg.norm(lhs)), "rhs": float(np.linalg.norm(rhs)),
            "gap": float(np.linalg.norm(lhs - rhs)), "ci": ci, "pass": ok}


def _cmd_ergodicity(model, opts, out, stream):
    times = np.linspace(opts["t_end"] / opts["n_times"], opts["t_end"],
                        opts["n_times"])
    dec = ergodic.ergodicity_decay(
        model, opts["x"], opts["y1"], opts["y2"], times=times,
        n_pairs=opts["n_pairs"], delta=opts["delta"], stream=stream)
    _write_csv(out / "decay_curve.csv", ["t", "mean_sq_dist", "ci_half"],
               zip(dec.times, dec.msd, dec.ci_half))
    payload = {"gamma_hat": dec.gamma_hat, "r2": dec.r2,
               "degenerate": dec.degenerate}
    _write_json(out / "report.json", payload)
    if dec.degenerate:
        return 0, ["decay curve degenerate (identical starts or zero distance)"]
    lines = [f"fitted decay rate {dec.gamma_hat:.4g} (r2 {dec.r2:.4f})"]
    code = 0
    if opts["gamma_min"] is not None and dec.gamma_hat < opts["gamma_min"]:
        code = 1
        lines.append(f"FAIL: rate below {opts['gamma_min']:g}")
    if opts["r2_min"] is not None and (dec.r2 or 0.0) < opts["r2_min"]:
        code = 1
        lines.append(f"FAIL: r2 below {opts['r2_min']:g}")
    return code, lines


def _order_command(kind, model, model_ref, opts, out, stream):
    table, cached = _get_table(model, model_ref, opts["table"], "clamp",
                               stream.master_seed, out, stream.child("table"))
    policy = estimate.DeltaPolicy(mode=opts["delta_policy"]["mode"],
                                  fast_exp=opts["delta_policy"]["fast_exp"])
    eps = opts["epsilon"]
    if kind == "strong":
        rep = estimate.strong_error(
            model, table, eps=eps, p=opts["p"], t_end=opts["t_end"],
            n_paths=opts["n_paths"], x0=opts["x0"], y0=opts["y0"],
            delta_policy=policy, n_boot=opts["bootstrap"],
            confidence=opts["confidence"], stream=stream.child("sweep"))
    else:
        n_paths = opts["n_paths"]
        if n_paths is None:
            n_paths = 1 << int(np.ceil(np.log2(25.0 / min(eps))))
        rep = estimate.weak_error(
            model, table, estimate.make_test_function(opts["phi"]),
            eps=eps, t_end=opts["t_end"], n_paths=n_paths, mode=opts["mode"],
            delta_policy=policy, n_boot=opts["bootstrap"],
            confidence=opts["confidence"], x0=opts["x0"], y0=opts["y0"],
            stream=stream.child("sweep"))
    _save_error_report(rep, out)
    lines = [f"{kind} errors ({'cached' if cached else 'fresh'} table):"]
    for e, err, ci in zip(rep.eps, rep.errors, rep.ci_half):
        lines.append(f"  eps={e:<10g} error={err:.6g} +- {ci:.2g}")
    if rep.degenerate:
        lines.append("outcome: degenerate (exact agreement)")
        return 0, lines
    if rep.slope is None:
        lines.append(f"slope withheld: {','.join(rep.flags)}")
        return 1, lines
    lo, hi = opts["slope_window"]
    lines.append(f"fitted slope {rep.slope:.4f} (r2 {rep.r2:.4f}), "
                 f"window [{lo:g}, {hi:g}], r2 min {opts['r2_min']:g}")
    ok = lo <= rep.slope <= hi and rep.r2 >= opts["r2_min"]
    if not ok:
        lines.append("FAIL: fitted order outside the accepted window")
    return (0 if ok else 1), lines


def _cmd_fast_moments(model, opts, out, stream):
    rep = estimate.fast_moment_sweep(
        model, eps=opts["epsilon"], p=opts["p"], t_end=opts["t_end"],
        n_paths=opts["n_paths"], x0=opts["x0"], y0=opts["y0"],
        fast_exp=opts["fast_exp"], stream=stream)
    _write_csv(out / "fast_moments.csv",
               ["epsilon", "marginal_sup", "marginal_ci", "pathwise_sup",
                "pathwise_ci"],
               zip(rep.eps, rep.marginal_sup, rep.marginal_ci,
                   rep.pathwise_sup, rep.pathwise_ci))
    _write_json(out / "report.json", {
        "eps": rep.eps.tolist(), "marginal_sup": rep.marginal_sup.tolist(),
        "pathwise_sup": rep.pathwise_sup.tolist(), "flags": list(rep.flags)})
    lines = [f"marginal sup ratio {rep.marginal_sup.max() / rep.marginal_sup.min():.3f}"
             if rep.marginal_sup.min() > 0 else "all-zero fast moments"]
    lines += [f"flags: {', '.join(rep.flags) or 'none'}"]
    return (1 if rep.flags else 0), lines


def run(command: str, config_path, seed_override: int | None = None,
        out_dir=None) -> int:
    """Execute one command; returns the exit code and writes artifacts."""
    out = Path(out_dir) if out_dir else Path.cwd() / "mslevy_out"
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = parse_config(config_path, command, seed_override)
        model = get_model(cfg.model_ref)
        _write_json(out / "effective_config.json", cfg.to_dict())
        stream = RngStream(cfg.seed)
        if command == "validate-model":
            code, lines = _cmd_validate_model(model, cfg.options, out, stream)
        elif command == "frozen-stats":
            code, lines = _cmd_frozen_stats(model, cfg.options, out, stream)
        elif command == "avg-table":
            code, lines = _cmd_avg_table(model, cfg.options, out, stream)
        elif command == "poisson-check":
            code, lines = _cmd_poisson_check(model, cfg.options, out, stream)
        elif command == "ergodicity":
            code, lines = _cmd_ergodicity(model, cfg.options, out, stream)
        elif command == "strong-order":
            code, lines = _order_command("strong", model, cfg.model_ref,
                                         cfg.options, out, stream)
        elif command == "weak-order":
            code, lines = _order_command("weak", model, cfg.model_ref,
                                         cfg.options, out, stream)
        elif command == "fast-moments":
            code, lines = _cmd_fast_moments(model, cfg.options, out, stream)
        else:  # pragma: no cover - parse_config rejects unknown commands
            raise ConfigurationError(f"unknown command {command!r}")
    except (ConfigurationError, TableValidationError) as exc:
        _log_error(out, 2, exc)
        return 2
    except BlowUpError as exc:
        _log_error(out, 3, exc)
        return 3
    except (DecayFitError, MslevyError) as exc:
        _log_error(out, 1, exc)
        return 1
    summary = "\n".join(lines)
    print(summary)
    with open(out / "summary.txt", "w") as fh:
        fh.write(summary + "\n")
    return code


def _log_error(out: Path, code: int, exc: Exception):
    reason = f"error_code={code} type={type(exc).__name__} reason={exc}"
    print(reason, file=sys.stderr)
    try:
        with open(out / "error.log", "w") as fh:
            fh.write(reason + "\n")
    except OSError:
        pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mslevy",
        description="Slow-fast jump-diffusion simulation and averaging toolkit",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
