import numpy as np
import pytest

from mslevy.errors import BlowUpError, ConfigurationError
from mslevy.integrate import (
    StepperConfig,
    run_frozen_batch,
    run_pair_batch,
    run_system_batch,
    simulate_frozen,
    simulate_pair_coupled,
    simulate_slow_fast,
)
from mslevy.model import example_2_7, scalar_model
from mslevy.rng import JumpMeasureSpec, PointMass, RngStream, Uniform


class ExactAveraged:
    """Function-valued averaged coefficients for degeneracy checks."""

    def __init__(self, drift_flat, diff2_flat=None):
        self._drift = drift_flat
        self._diff2 = diff2_flat
        self.clamp_count = 0

    def drift(self, x):
        return np.asarray(self._drift(x[:, 0]), dtype=float).reshape(len(x), 1)

    def diffusion_root(self, x):
        v = np.asarray(self._diff2(x[:, 0]), dtype=float).reshape(len(x), 1)
        return np.sqrt(v)[:, :, None]


def _ou_model(**kw):
    defaults = dict(b=lambda x, y: -x, sigma=0.0, f=lambda x, y: -y, g=1.0)
    defaults.update(kw)
    return scalar_model("toy", **defaults)


class TestConfig:
    def test_fast_resolution_guard(self):
        with pytest.raises(ConfigurationError):
            StepperConfig(epsilon=2**-4, delta=2**-6, t_end=1.0)
        StepperConfig(epsilon=2**-4, delta=2**-8, t_end=1.0)

    def test_positive_fields(self):
        for bad in (dict(epsilon=0.0), dict(delta=-1.0), dict(t_end=0.0)):
            kw = dict(epsilon=0.25, delta=2**-8, t_end=1.0)
            kw.update(bad)
            with pytest.raises(ConfigurationError):
                StepperConfig(**kw)

    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            StepperConfig(epsilon=0.25, delta=2**-8, t_end=1.0, scheme="milstein")


class TestZeroAndJumpDynamics:
    def test_zero_slow_dynamics_is_constant(self):
        m = scalar_model("still", b=0.0, sigma=0.0,
                         h1=lambda x, z: np.zeros_like(z),
                         f=lambda x, y: -y, g=1.0)
        cfg = StepperConfig(epsilon=0.25, delta=2**-7, t_end=1.0)
        path = simulate_slow_fast(m, 1.5, 0.0, cfg, RngStream(1))
        np.testing.assert_array_equal(path.slow[:, 0], 1.5)

    def test_pure_jump_compensated_bookkeeping(self):
        # X_T - x0 = 0.3 N - 0.6 T for point-mass marks at intensity 2
        nu1 = JumpMeasureSpec(2.0, PointMass(0.3))
        m = scalar_model("purejump", b=0.0, sigma=0.0, f=lambda x, y: -y, g=1.0,
                         nu1=nu1)
        cfg = StepperConfig(epsilon=0.25, delta=2**-7, t_end=1.0)
        path = simulate_slow_fast(m, 0.0, 0.0, cfg, RngStream(2))
        n_slow = sum(1 for e in path.events if e.channel == "slow")
        assert n_slow > 0
        expect = 0.3 * n_slow - 0.6 * 1.0
        assert path.slow[-1, 0] == pytest.approx(expect, abs=1e-10)

    def test_replay_reconstructs_discontinuities_exactly(self):
        m = example_2_7("state_linear")
        cfg = StepperConfig(epsilon=2**-4, delta=2**-9, t_end=1.0)
        path = simulate_slow_fast(m, 1.0, 1.0, cfg, RngStream(3))
        assert len(path.events) > 0
        assert path.replay_jumps(m)
        path.validate()

    def test_augmented_grid_contains_event_times(self):
        m = example_2_7("state_linear")
        cfg = StepperConfig(epsilon=2**-4, delta=2**-9, t_end=1.0)
        path = simulate_slow_fast(m, 1.0, 1.0, cfg, RngStream(3))
        times = set(path.times.tolist())
        for ev in path.events:
            assert ev.time in times


class TestFrozen:
    def test_linear_ode_limit(self):
        m = _ou_model(g=0.0, h2=lambda x, y, z: np.zeros_like(z))
        path = simulate_frozen(m, 0.0, 2.0, horizon=1.0, delta=2**-8,
                               stream=RngStream(4))
        assert abs(path.fast[-1, 0] - 2.0 * np.exp(-1.0)) <= 0.05

    def test_delta_guard(self):
        with pytest.raises(ConfigurationError):
            simulate_frozen(_ou_model(), 0.0, 1.0, horizon=1.0, delta=0.25,
                            stream=RngStream(5))

    def test_compensated_jumps_keep_mean(self):
        # h2 = z only, mean-zero marks: compensated martingale, E Y_t = y0
        m = scalar_model("mart", b=0.0, sigma=0.0, f=0.0, g=0.0)
        out = run_frozen_batch(m, 0.0, 0.7, horizon=1.0, delta=2**-7,
                               n_chains=4000, stream=RngStream(6))
        y = out["terminal_fast"][:, 0]
        se = y.std(ddof=1) / np.sqrt(y.size)
        assert abs(y.mean() - 0.7) < 3 * se

    def test_moment_envelope_example_2_7(self):
        # E|Y_t|^2 decays from |y0|^2 into a stationary band
        m = example_2_7("state_linear")
        delta = 2**-7
        steps = int(1.5 / delta)

        class Grab:
            def __init__(self):
                self.vals = []

            def observe(self, step, t, states):
                self.vals.append(float(np.mean(states["y"][:, 0] ** 2)))

        g = Grab()
        run_frozen_batch(m, 0.0, 3.0, horizon=1.5, delta=delta, n_chains=3000,
                         stream=RngStream(7), watchers=(g,))
        curve = np.asarray(g.vals)
        tail = curve[-steps // 5:].mean()
        head = curve[: steps // 50]
        assert curve[0] < 9.0  # one step in, already contracting
        assert head.mean() > 5 * tail  # strong initial decay from y0^2 = 9
        # envelope: exp(-gamma t)|y0|^2 + C with fitted positive gamma
        t = (1 + np.arange(curve.size)) * delta
        excess = np.clip(curve - tail, 1e-12, None)
        early = t < 0.5
        slope = np.polyfit(t[early], np.log(excess[early]), 1)[0]
        assert slope < -0.5
        envelope = np.exp(slope * t) * 9.0 + 1.1 * tail
        assert np.all(curve <= envelope + 0.1)


class TestSchemes:
    def test_tamed_and_plain_euler_agree_on_lipschitz_model(self):
        m = _ou_model(sigma=1.0)
        ends = {}
        for scheme in ("tamed_euler", "euler"):
            cfg = StepperConfig(epsilon=0.25, delta=2**-10, t_end=1.0,
                                scheme=scheme)
            path = simulate_slow_fast(m, 1.0, 0.5, cfg, RngStream(8))
            ends[scheme] = path.slow[-1, 0]
        assert abs(ends["tamed_euler"] - ends["euler"]) < 1e-2

    def test_split_step_implicit_tracks_ou_mean(self):
        m = _ou_model(g=0.0, h2=lambda x, y, z: np.zeros_like(z), sigma=0.0,
                      h1=lambda x, z: np.zeros_like(z))
        cfg = StepperConfig(epsilon=0.25, delta=2**-8, t_end=1.0,
                            scheme="split_step_implicit")
        path = simulate_slow_fast(m, 2.0, 0.0, cfg, RngStream(9))
        assert abs(path.slow[-1, 0] - 2.0 * np.exp(-1.0)) < 0.02

    def test_split_step_cross_checks_tamed_on_example_2_7(self):
        m = example_2_7("state_linear")
        cfg_kw = dict(epsilon=2**-4, delta=2**-9, t_end=1.0)
        res = {}
        for scheme in ("tamed_euler", "split_step_implicit"):
            out = run_system_batch(
                m, 1.0, 1.0, StepperConfig(scheme=scheme, **cfg_kw),
                n_paths=200, stream=RngStream(10))
            res[scheme] = out["terminal_slow"][:, 0]
        ta, ss = res["tamed_euler"], res["split_step_implicit"]
        se = np.hypot(ta.std(ddof=1), ss.std(ddof=1)) / np.sqrt(ta.size)
        assert abs(ta.mean() - ss.mean()) < 4 * se + 0.02


class TestPairCoupling:
    def test_bit_identical_when_drift_diffusion_fast_free(self):
        m = scalar_model("xonly", b=lambda x, y: -x, sigma=lambda x, y: 0.4,
                         f=lambda x, y: -y, g=1.0, sigma_y_independent=True)
        avg = ExactAveraged(lambda x: -x)
        cfg = StepperConfig(epsilon=2**-4, delta=2**-8, t_end=1.0)
        out = run_pair_batch(m, avg, 1.0, 0.3, cfg, n_paths=64,
                             stream=RngStream(11))
        np.testing.assert_array_equal(out["terminal_system"],
                                      out["terminal_averaged"])
        assert np.all(out["sup"] == 0.0)

    def test_requires_sigma_y_independent(self):
        m = example_2_7("sine_bounded")
        cfg = StepperConfig(epsilon=2**-4, delta=2**-8, t_end=1.0)
        with pytest.raises(ConfigurationError):
            run_pair_batch(m, ExactAveraged(lambda x: -x), 1.0, 1.0, cfg,
                           n_paths=4, stream=RngStream(12))

    def test_time_average_variance_oracle(self):
        # b(x,y) = y with fast OU: X_T - x0 integrates the fast path, and
        # Var(int_0^T Y dt) has a closed form for the jump-OU.
        m = scalar_model("avgy", b=lambda x, y: y, sigma=0.0,
                         h1=lambda x, z: np.zeros_like(z),
                         f=lambda x, y: -y, g=1.0, sigma_y_independent=True)
        eps, T = 2**-4, 1.0
        lam_m2 = 1.0 * (1.0 / 12.0)
        e = np.exp(-T / eps)
        want = (1.0 + lam_m2) * (
            eps * T - eps**2 * (1 - e) - 0.5 * eps**2 * (1 - e) ** 2
        )
        cfg = StepperConfig(epsilon=eps, delta=eps * 2**-6, t_end=T)
        out = run_pair_batch(m, ExactAveraged(lambda x: 0.0 * x), 0.0, 0.0, cfg,
                             n_paths=2000, stream=RngStream(13))
        diff = out["terminal_system"][:, 0] - out["terminal_averaged"][:, 0]
        assert abs(diff.mean()) < 4 * diff.std(ddof=1) / np.sqrt(diff.size)
        assert np.var(diff, ddof=1) == pytest.approx(want, rel=0.13)

    def test_single_path_api_returns_paths_and_sup(self):
        m = example_2_7("state_linear")
        avg = ExactAveraged(lambda x: -x * x * x + x)
        cfg = StepperConfig(epsilon=2**-4, delta=2**-9, t_end=0.5)
        p_sys, p_avg, sup, (xe, xa) = simulate_pair_coupled(
            m, avg, 1.0, 1.0, cfg, RngStream(14))
        assert p_sys.slow.shape == p_avg.slow.shape
        np.testing.assert_array_equal(p_sys.times, p_avg.times)
        grid_sup = np.max(np.abs(p_sys.slow - p_avg.slow))
        assert sup == pytest.approx(grid_sup)
        assert xe[0] == p_sys.slow[-1, 0] and xa[0] == p_avg.slow[-1, 0]


class TestCheckpointsAndBlowup:
    def test_checkpoints_match_deterministic_motion(self):
        m = scalar_model("driftonly", b=1.0, sigma=0.0,
                         h1=lambda x, z: np.zeros_like(z),
                         f=lambda x, y: -y, g=0.0,
                         h2=lambda x, y, z: np.zeros_like(z),
                         sigma_y_independent=True)
        cfg = StepperConfig(epsilon=0.25, delta=2**-8, t_end=1.0, scheme="euler")
        out = run_system_batch(m, 0.0, 0.0, cfg, n_paths=3, stream=RngStream(15),
                               checkpoints=(0.25, 0.5, 1.0))
        for t, snap in out["checkpoints"].items():
            np.testing.assert_allclose(snap["x"][:, 0], t, atol=1e-12)

    def test_blow_up_aborts_with_diagnostic(self):
        m = scalar_model("explode", b=lambda x, y: x * x * x, sigma=0.0,
                         f=lambda x, y: -y, g=0.0)
        cfg = StepperConfig(epsilon=0.25, delta=2**-6, t_end=4.0, scheme="euler")
        with pytest.raises(BlowUpError) as exc:
            run_system_batch(m, 3.0, 0.0, cfg, n_paths=2, stream=RngStream(16))
        assert 0 < exc.value.time <= 4.0
        assert len(exc.value.paths) >= 1

    @pytest.mark.slow
    def test_no_blow_up_example_2_7(self):
        # superlinear drifts -x^3, -y^5 complete a full batch without aborts
        m = example_2_7("state_linear")
        cfg = StepperConfig(epsilon=2**-6, delta=2**-6 * 2**-6, t_end=1.0)
        out = run_system_batch(m, 1.0, 1.0, cfg, n_paths=1000,
                               stream=RngStream(17))
        assert np.all(np.isfinite(out["terminal_slow"]))
        assert np.all(np.isfinite(out["terminal_fast"]))


class TestMomentStability:
    @pytest.mark.slow
    def test_slow_sup_moment_stable_under_delta_halving(self):
        from mslevy.observers import PathwiseSup

        m = example_2_7("state_linear")
        vals = {}
        for k, delta in ((0, 2**-10), (1, 2**-11)):
            cfg = StepperConfig(epsilon=2**-4, delta=delta, t_end=1.0)
            sup = PathwiseSup("x")
            run_system_batch(m, 1.0, 1.0, cfg, n_paths=200,
                             stream=RngStream(18), watchers=(sup,))
            vals[k] = float(np.mean(sup.value**4))
        assert np.isfinite(vals[0]) and np.isfinite(vals[1])
        assert abs(vals[0] - vals[1]) < 0.3 * max(vals[0], vals[1])


class TestAveragedWeak:
    def test_unit_diffusion_terminal_variance(self):
        from mslevy.ergodic import ExactAveraged
        from mslevy.integrate import run_averaged_batch

        m = scalar_model("flat", b=0.0, sigma=1.0,
                         h1=lambda x, z: np.zeros_like(z),
                         f=lambda x, y: -y, g=1.0, sigma_y_independent=True)
        avg = ExactAveraged(lambda x: 0.0 * x,
                            lambda x: np.full((len(x), 1, 1), 1.0))
        cfg = StepperConfig(epsilon=0.25, delta=2**-8, t_end=1.0)
        out = run_averaged_batch(m, avg, 0.0, cfg, n_paths=10_000,
                                 stream=RngStream(60))
        var = out["terminal_slow"][:, 0].var(ddof=1)
        assert abs(var - 1.0) < 0.05

    def test_scalar_roots(self):
        from mslevy.ergodic import ExactAveraged

        avg = ExactAveraged(lambda x: 0.0 * x,
                            lambda x: np.full((len(x), 1, 1), 4.0))
        assert avg.diffusion_root(np.zeros((3, 1)))[0, 0, 0] == 2.0
        unit = ExactAveraged(lambda x: 0.0 * x,
                             lambda x: np.full((len(x), 1, 1), 1.0))
        assert unit.diffusion_root(np.zeros((3, 1)))[0, 0, 0] == 1.0

    def test_single_path_api(self):
        from mslevy.ergodic import ExactAveraged
        from mslevy.integrate import simulate_averaged_weak

        m = example_2_7("state_linear")
        avg = ExactAveraged(lambda x: -x * x * x + x,
                            lambda x: (x * x)[:, :, None])
        cfg = StepperConfig(epsilon=0.25, delta=2**-8, t_end=0.5)
        path = simulate_averaged_weak(m, avg, 1.0, cfg, RngStream(61))
        assert path.fast is None
        assert np.isfinite(path.slow).all()
        path.validate()


class TestTraceDump:
    def test_csv_columns_and_event_flags(self, tmp_path):
        m = example_2_7("state_linear")
        cfg = StepperConfig(epsilon=2**-4, delta=2**-8, t_end=0.5)
        path = simulate_slow_fast(m, 1.0, 1.0, cfg, RngStream(62))
        f = tmp_path / "trace.csv"
        path.save_csv(f)
        lines = f.read_text().splitlines()
        assert lines[0] == "time,slow_0,fast_0,event,mark"
        assert len(lines) == 1 + len(path.times)
        flagged = [ln for ln in lines[1:] if ln.split(",")[3] == "1"]
        assert len(flagged) == len({e.time for e in path.events})
