"""Frame-level queue dynamics, stability diagnostics, and tail fitting."""

import math

import numpy as np
import pytest

from blockrate.channel import (
    Deterministic,
    Rayleigh,
    SystemParams,
    _exponential_from_uniform,
    uniform_windows,
)
from blockrate.effective_rate import SampleSet, log_psi
from blockrate.errors import DomainError, EstimationError
from blockrate.fbl import FixedRate, VariableRate, rate_lower_bound, rate_stats
from blockrate.optimize import optimal_epsilon
from blockrate.queue_sim import (
    QueueConfig,
    QueueResult,
    TailEstimate,
    _lindley_chunk,
    estimate_decay_rate,
    service_sample,
    simulate_queue,
)

P2 = SystemParams(snr_linear=1.0, n=50, m=2, theta=0.05)


def _config(**kw):
    base = dict(arrival_bits_per_frame=10.0, frames=1_000, burn_in_frames=100,
                seed=1, policy=VariableRate(epsilon=0.01), params=P2)
    base.update(kw)
    return QueueConfig(**base)


class TestQueueConfig:
    @pytest.mark.parametrize("kw", [
        dict(arrival_bits_per_frame=-1.0),
        dict(arrival_bits_per_frame=math.inf),
        dict(frames=0),
        dict(frames=99.5),
        dict(burn_in_frames=-1),
        dict(burn_in_frames=1_000),       # >= frames
        dict(policy=VariableRate()),      # no epsilon target
        dict(policy=FixedRate()),         # no rate target
    ])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            _config(**kw)

    def test_zero_arrival_allowed(self):
        assert _config(arrival_bits_per_frame=0.0).arrival_bits_per_frame == 0.0


class TestServiceSample:
    def test_sure_success_fixed_rate(self):
        # huge gain: failure probability underflows, every frame delivers n*m*R
        z = np.array([1e6, 1e6])
        for _ in range(5):
            s = service_sample(z, FixedRate(rate=0.5), P2, np.random.default_rng(0))
            assert s == P2.nm * 0.5

    def test_sure_failure_fixed_rate(self):
        z = np.array([0.01, 0.01])  # rate far above anything decodable
        s = service_sample(z, FixedRate(rate=50.0), P2, np.random.default_rng(0))
        assert s == 0.0

    def test_variable_rate_value_and_failure_fraction(self):
        z = np.array([0.8, 1.3])
        pol = VariableRate(epsilon=0.3)
        expect = P2.nm * rate_lower_bound(z, P2, 0.3)
        rng = np.random.default_rng(42)
        draws = np.array([service_sample(z, pol, P2, rng) for _ in range(10_000)])
        assert set(np.unique(draws)) == {0.0, expect}
        failures = np.mean(draws == 0.0)
        assert abs(failures - 0.3) < 3 * math.sqrt(0.3 * 0.7 / 10_000)

    def test_consumes_exactly_one_uniform(self):
        z = np.array([1.0, 1.0])
        rng = np.random.default_rng(5)
        service_sample(z, VariableRate(epsilon=0.1), P2, rng)
        ref = np.random.default_rng(5)
        ref.random()
        assert rng.random() == ref.random()

    def test_requires_explicit_target(self):
        z = np.array([1.0, 1.0])
        with pytest.raises(DomainError):
            service_sample(z, VariableRate(), P2, np.random.default_rng(0))
        with pytest.raises(DomainError):
            service_sample(z, FixedRate(), P2, np.random.default_rng(0))


class TestLindley:
    def _loop(self, q0, x):
        out = np.empty_like(x)
        q = q0
        for i, xi in enumerate(x):
            q = max(q + xi, 0.0)
            out[i] = q
        return out

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_scalar_recursion(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(0.0, 5.0, size=4_000)
        got = _lindley_chunk(3.5, x)
        np.testing.assert_allclose(got, self._loop(3.5, x), rtol=0, atol=1e-9)

    def test_chunk_boundary_carry(self):
        rng = np.random.default_rng(9)
        x = rng.normal(-0.2, 3.0, size=1_000)
        whole = _lindley_chunk(0.0, x)
        first = _lindley_chunk(0.0, x[:337])
        second = _lindley_chunk(float(first[-1]), x[337:])
        np.testing.assert_allclose(
            np.concatenate([first, second]), whole, rtol=0, atol=1e-9)

    def test_never_negative_and_empty_start(self):
        x = np.array([-5.0, 2.0, -10.0, 1.0])
        got = _lindley_chunk(0.0, x)
        np.testing.assert_array_equal(got, [0.0, 2.0, 0.0, 1.0])


class TestSimulateQueue:
    def test_matches_manual_frame_loop(self):
        # recompute every frame's service straight from its uniform window
        # and run the scalar recursion; the chunked engine must agree
        cfg = _config(frames=400, burn_in_frames=0, arrival_bits_per_frame=30.0)
        res = simulate_queue(cfg)
        q = 0.0
        expect = np.empty(400)
        for t in range(400):
            u = uniform_windows(cfg.seed, t, 1, cfg.params.m + 1)[0]
            z = _exponential_from_uniform(u[: cfg.params.m], 1.0)
            r = rate_lower_bound(z, cfg.params, cfg.policy.epsilon)
            s = cfg.params.nm * r if u[cfg.params.m] >= cfg.policy.epsilon else 0.0
            q = max(q + 30.0 - s, 0.0)
            expect[t] = q
        np.testing.assert_allclose(res.samples, expect, rtol=0, atol=1e-9)

    def test_deterministic_fading_consumes_one_draw(self):
        cfg = _config(frames=50, burn_in_frames=0,
                      fading=Deterministic(gains=(0.9, 1.1)),
                      policy=FixedRate(rate=0.4),
                      arrival_bits_per_frame=20.0)
        res = simulate_queue(cfg)
        from blockrate.fbl import error_probability
        eps = error_probability(np.array([0.9, 1.1]), cfg.params, 0.4)
        q = 0.0
        expect = np.empty(50)
        for t in range(50):
            u = uniform_windows(cfg.seed, t, 1, 1)[0, 0]
            s = cfg.params.nm * 0.4 if u >= eps else 0.0
            q = max(q + 20.0 - s, 0.0)
            expect[t] = q
        np.testing.assert_allclose(res.samples, expect, rtol=0, atol=1e-9)

    def test_zero_arrival_clamped_stays_empty(self):
        cfg = _config(arrival_bits_per_frame=0.0,
                      policy=VariableRate(epsilon=0.01, clamp_negative=True))
        res = simulate_queue(cfg)
        assert np.all(res.samples == 0.0)
        assert not res.unstable
        assert res.trend_slope == 0.0

    def test_burn_in_dropped(self):
        full = simulate_queue(_config(burn_in_frames=0))
        cut = simulate_queue(_config(burn_in_frames=250))
        np.testing.assert_array_equal(cut.samples, full.samples[250:])

    def test_unstable_flag_fires_on_overload(self):
        fading = Deterministic(gains=(1.0, 1.0))
        mu = rate_stats(np.array([1.0, 1.0]), P2).mu
        service = P2.nm * 0.5  # rate well below mu: essentially sure success
        assert 0.5 < mu
        over = _config(fading=fading, policy=FixedRate(rate=0.5),
                       arrival_bits_per_frame=1.2 * service, frames=5_000)
        under = _config(fading=fading, policy=FixedRate(rate=0.5),
                        arrival_bits_per_frame=0.8 * service, frames=5_000)
        assert simulate_queue(over).unstable
        assert not simulate_queue(under).unstable

    def test_mean_service_deterministic_case(self):
        cfg = _config(fading=Deterministic(gains=(50.0, 50.0)),
                      policy=FixedRate(rate=0.5), frames=200,
                      burn_in_frames=0, arrival_bits_per_frame=0.0)
        res = simulate_queue(cfg)
        assert res.mean_service == pytest.approx(P2.nm * 0.5, rel=1e-12)

    def test_trace_decimation(self):
        cfg = _config(frames=1_000, burn_in_frames=100)
        res = simulate_queue(cfg, trace_every=10)
        assert res.trace is not None and res.trace.shape == (90, 4)
        frames = res.trace[:, 0]
        np.testing.assert_array_equal(frames, np.arange(100, 1_000, 10))
        idx = frames.astype(int) - 100
        np.testing.assert_array_equal(res.trace[:, 3], res.samples[idx])

    def test_trace_off_by_default(self):
        assert simulate_queue(_config(frames=200, burn_in_frames=0)).trace is None

    def test_bad_trace_every(self):
        with pytest.raises(DomainError):
            simulate_queue(_config(), trace_every=-1)

    def test_result_type(self):
        assert isinstance(simulate_queue(_config(frames=120, burn_in_frames=10)),
                          QueueResult)


class TestArrivalCalibration:
    def test_throughput_arrival_balances_service_exponentially(self):
        # with a = -ln(psi)/theta bits per frame, the exponential
        # work-minus-service martingale has mean exactly one over the very
        # sample set that defined psi -- the unclamped negative-rate
        # convention is what makes this identity exact
        params = SystemParams(1.0, 50, 1, 0.05)
        ss = SampleSet.draw(Rayleigh(), 1, 10_000, seed=3)
        eps = 0.01
        lp = log_psi(eps, ss, params)
        a = -lp / params.theta
        mu, delta = ss.stats(params)
        from blockrate.special import q_inverse
        service = params.nm * (mu - delta * q_inverse(eps))
        glow = np.mean(eps * math.exp(params.theta * a)
                       + (1 - eps) * np.exp(params.theta * (a - service)))
        assert glow == pytest.approx(1.0, rel=1e-12)


class TestEstimateDecayRate:
    def test_recovers_exponential_tail(self):
        lam = 0.37
        rng = np.random.default_rng(17)
        s = rng.exponential(1.0 / lam, size=400_000)
        est = estimate_decay_rate(s)
        assert isinstance(est, TailEstimate)
        assert est.theta_hat == pytest.approx(lam, rel=0.05)
        assert est.fit_r2 > 0.999
        assert est.q_lo < est.q_hi
        assert 1e-4 <= est.overflow_fraction_at_q_hi <= 1e-1 + 1e-12

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        s = rng.exponential(2.0, size=200_000)
        a = estimate_decay_rate(s)
        b = estimate_decay_rate(3.0 * s)
        assert b.theta_hat == pytest.approx(a.theta_hat / 3.0, rel=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(EstimationError):
            estimate_decay_rate(np.arange(9.0))

    def test_degenerate_window(self):
        with pytest.raises(EstimationError, match="degenerate"):
            estimate_decay_rate(np.ones(1_000))

    def test_flat_tail_rejected(self):
        # two atoms: the tail probability is constant across the window
        s = np.concatenate([np.zeros(96_000), np.full(4_000, 5.0)])
        with pytest.raises(EstimationError, match="not decaying"):
            estimate_decay_rate(s)

    def test_sparse_window_rejected(self):
        s = np.repeat([0.0, 1.0, 2.0], [96_000, 3_900, 100])
        with pytest.raises(EstimationError, match="run longer"):
            estimate_decay_rate(s, grid_points=5)

    @pytest.mark.parametrize("kw", [
        dict(p_lo=0.0), dict(p_lo=0.2, p_hi=0.1), dict(p_hi=1.0),
        dict(grid_points=4),
    ])
    def test_bad_arguments(self, kw):
        with pytest.raises(DomainError):
            estimate_decay_rate(np.arange(100.0), **kw)


class TestEndToEnd:
    def test_decay_rate_matches_qos_exponent(self):
        # feed the queue at its own effective rate and read theta back off
        # the stationary tail (tight version runs in the acceptance suite)
        params = P2  # theta = 0.05, n = 50, m = 2
        draws = SampleSet.draw(Rayleigh(), params.m, 100_000, seed=2024)
        opt = optimal_epsilon(draws, params)
        cfg = QueueConfig(
            arrival_bits_per_frame=opt.value * params.nm,
            frames=1_000_000,
            burn_in_frames=10_000,
            seed=31337,
            policy=VariableRate(epsilon=opt.argument),
            params=params,
        )
        res = simulate_queue(cfg)
        assert not res.unstable
        est = estimate_decay_rate(res.samples)
        assert est.theta_hat == pytest.approx(params.theta, rel=0.15)
        assert est.fit_r2 > 0.99
