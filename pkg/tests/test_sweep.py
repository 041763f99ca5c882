"""Parameter sweeps, semicontinuity checks, and the entropy splitting."""

import math

import pytest

from sinailab.entropy import PESIN, EntropyEstimate
from sinailab.errors import SweepAbortError
from sinailab.measures import birkhoff_sample
from sinailab.serialize import write_json
from sinailab.sweep import (
    SweepConfig,
    SweepResult,
    SweepRow,
    continuity_modulus,
    neighborhood_split_entropy,
    run_sweep,
    split_log_det_integral,
    usc_check,
)
from sinailab.systems import FamilyHandle, make_manneville_pomeau

LOG2 = math.log(2.0)


def staircase_result(values, slack_se=0.0):
    rows = []
    for i, v in enumerate(values):
        row = SweepRow(index=i, t=float(i))
        row.estimates[PESIN] = EntropyEstimate(value=v, method=PESIN,
                                               std_error=slack_se)
        rows.append(row)
    cfg = SweepConfig(family="mp", grid=tuple(float(i) for i in range(len(values))))
    return SweepResult(config=cfg, rows=rows)


class TestSweepConfig:
    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            SweepConfig(family="mp", grid=(0.1, 0.1))

    def test_tolerance_positive(self):
        with pytest.raises(ValueError):
            SweepConfig(family="mp", grid=(0.0, 0.1), tolerance=0.0)

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            SweepConfig(family="mp", grid=(0.0,), estimators=("nope",))

    def test_point_seeds_differ(self):
        cfg = SweepConfig(family="mp", grid=(0.0, 0.1, 0.2))
        seeds = [cfg.point_seed(i) for i in range(3)]
        assert len(set(seeds)) == 3
        assert seeds == [cfg.point_seed(i) for i in range(3)]


class TestRunSweep:
    def test_mp_endpoint_log_two(self):
        cfg = SweepConfig(family="mp", grid=(0.0, 0.3), estimators=(PESIN,),
                          seed=5, burn_in=500, length=20_000)
        result = run_sweep(cfg)
        assert result.rows[0].estimates[PESIN].value == pytest.approx(LOG2, abs=0.01)

    def test_single_point_grid(self):
        cfg = SweepConfig(family="mp", grid=(0.2,), estimators=(PESIN,),
                          seed=1, burn_in=100, length=5_000)
        result = run_sweep(cfg)
        assert len(result.rows) == 1
        with pytest.raises(ValueError):
            usc_check(result)
        with pytest.raises(ValueError):
            continuity_modulus(result)

    def test_da_endpoint_cat_entropy(self):
        cfg = SweepConfig(family="da", grid=(0.0, 0.1, 0.2), estimators=(PESIN,),
                          seed=3, burn_in=1000, length=100_000)
        result = run_sweep(cfg)
        lam = (3.0 + math.sqrt(5.0)) / 2.0
        assert result.rows[0].estimates[PESIN].value == pytest.approx(
            math.log(lam), abs=0.01)

    def test_determinism_bytes(self, tmp_path):
        cfg = SweepConfig(family="mp", grid=(0.0, 0.2, 0.4), estimators=(PESIN,),
                          seed=9, burn_in=100, length=5_000)
        a = run_sweep(cfg)
        b = run_sweep(cfg)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        write_json(pa, a.to_json_dict())
        write_json(pb, b.to_json_dict())
        assert pa.read_bytes() == pb.read_bytes()

    def test_row_count_preserved_with_failures(self):
        bad = FamilyHandle("bad", "t", 0.0, 1.0,
                           lambda t: (_ for _ in ()).throw(ValueError("boom"))
                           if 0.15 < t < 0.25 else make_manneville_pomeau(t))
        import sinailab.sweep as sweep_mod

        sweep_mod_families = dict(t=bad)
        # patch the registry lookup through a tiny family table
        orig = sweep_mod.get_family
        sweep_mod.get_family = lambda fid: bad
        try:
            cfg = SweepConfig(family="bad", grid=(0.0, 0.2, 0.4, 0.6, 0.8),
                              estimators=(PESIN,), seed=1, burn_in=50,
                              length=2_000)
            result = run_sweep(cfg)
        finally:
            sweep_mod.get_family = orig
        assert len(result.rows) == 5
        errors = [r for r in result.rows if not r.ok]
        assert len(errors) == 1
        assert "boom" in errors[0].error

    def test_abort_over_threshold(self):
        always_bad = FamilyHandle("bad", "t", 0.0, 1.0,
                                  lambda t: (_ for _ in ()).throw(ValueError("no")))
        import sinailab.sweep as sweep_mod

        orig = sweep_mod.get_family
        sweep_mod.get_family = lambda fid: always_bad
        try:
            cfg = SweepConfig(family="bad", grid=(0.0, 0.5), estimators=(PESIN,))
            with pytest.raises(SweepAbortError):
                run_sweep(cfg)
        finally:
            sweep_mod.get_family = orig

    def test_ulam_measure_sweep(self):
        # grid-measure route: the ls/jacobian estimators integrate over the
        # Ulam stationary density instead of an orbit cloud. One dyadic cell
        # center ((2^k - 1)/2^k) descends exactly onto the branch point and
        # exercises the skip-and-reweight path (1/256 < the 1% threshold).
        from sinailab.entropy import LEDRAPPIER_STRELCYN

        cfg = SweepConfig(family="mp", grid=(0.0, 0.1),
                          estimators=(LEDRAPPIER_STRELCYN,),
                          seed=3, ulam_resolution=256, n_max=30)
        result = run_sweep(cfg)
        row0 = result.rows[0].estimates[LEDRAPPIER_STRELCYN]
        assert row0.value == pytest.approx(LOG2, abs=0.01)
        # alpha = 0 advances with the dither (no exact hit); alpha = 0.1
        # steps exactly and loses the one dyadic center
        row1 = result.rows[1].estimates[LEDRAPPIER_STRELCYN]
        assert row1.diagnostics["skipped_points"] == 1

    def test_worker_count_independence(self):
        cfg1 = SweepConfig(family="mp", grid=(0.0, 0.2, 0.4, 0.6),
                           estimators=(PESIN,), seed=13, burn_in=100,
                           length=4_000, workers=1)
        cfg2 = SweepConfig(family="mp", grid=(0.0, 0.2, 0.4, 0.6),
                           estimators=(PESIN,), seed=13, burn_in=100,
                           length=4_000, workers=2)
        r1 = run_sweep(cfg1)
        r2 = run_sweep(cfg2)
        for a, b in zip(r1.rows, r2.rows):
            assert a.estimates[PESIN].value == b.estimates[PESIN].value
            assert a.weak_star_prev == b.weak_star_prev

    def test_weak_star_column_filled(self):
        cfg = SweepConfig(family="mp", grid=(0.0, 0.2, 0.4), estimators=(PESIN,),
                          seed=2, burn_in=100, length=5_000)
        result = run_sweep(cfg)
        assert result.rows[0].weak_star_prev is None
        assert result.rows[1].weak_star_prev is not None
        assert result.rows[1].weak_star_prev >= 0.0


class TestUSCCheck:
    def test_constant_curve_passes(self):
        rep = usc_check(staircase_result([1.0, 1.0, 1.0, 1.0]), slack=0.1)
        assert rep.passed and not rep.witnesses

    def test_staircase_dip_witness_at_middle(self):
        rep = usc_check(staircase_result([1.0, 1.0, 0.0, 1.0, 1.0]), slack=0.1)
        assert not rep.passed
        assert len(rep.witnesses) == 1
        assert rep.witnesses[0]["t"] == 2.0

    def test_error_bars_absorb_dips(self):
        rep = usc_check(staircase_result([1.0, 1.0, 0.0, 1.0, 1.0], slack_se=0.6),
                        slack=0.1)
        assert rep.passed


class TestContinuityModulus:
    def test_constant_curve_zero(self):
        mod = continuity_modulus(staircase_result([0.7, 0.7, 0.7]))
        assert mod.max_gap(PESIN) == 0.0

    def test_endpoint_grid_single_gap(self):
        mod = continuity_modulus(staircase_result([0.2, 0.9]))
        assert mod.max_gap(PESIN) == pytest.approx(0.7)
        assert mod.per_method[PESIN]["at"] == [0.0, 1.0]

    def test_locates_worst_gap(self):
        mod = continuity_modulus(staircase_result([0.0, 0.1, 0.5, 0.55]))
        assert mod.per_method[PESIN]["at"] == [1.0, 2.0]


class TestSinaiConsistencyAlongSweep:
    def test_mp_pesin_ls_agree_below_half(self):
        # agreement between the exponent route and the wedge route at every
        # alpha <= 0.5 (the fast-mixing regime)
        from sinailab.entropy import LEDRAPPIER_STRELCYN

        cfg = SweepConfig(family="mp",
                          grid=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
                          estimators=(PESIN, LEDRAPPIER_STRELCYN),
                          seed=23, burn_in=2_000, length=50_000)
        result = run_sweep(cfg)
        for row in result.rows:
            p = row.estimates[PESIN]
            ls = row.estimates[LEDRAPPIER_STRELCYN]
            combined = 2.0 * (p.std_error + ls.std_error) + 0.02
            assert abs(p.value - ls.value) <= combined, (
                f"alpha={row.t}: pesin {p.value:.5f} vs ls {ls.value:.5f}"
            )


class TestNeighborhoodSplit:
    def test_doubling_band_mass(self):
        out = neighborhood_split_entropy("mp", 0.0, 0.01, seed=3,
                                         burn_in=1000, length=200_000)
        assert out["inside"] == pytest.approx(0.02 * LOG2, rel=0.10)
        assert out["outside"] == pytest.approx(0.98 * LOG2, rel=0.02)

    def test_zero_delta_empty_inside(self):
        out = neighborhood_split_entropy("mp", 0.0, 0.0, seed=3,
                                         burn_in=100, length=10_000)
        assert out["inside"] == 0.0

    def test_partition_identity(self):
        sys = make_manneville_pomeau(0.3)
        mu = birkhoff_sample(sys, seed=4, burn_in=500, length=50_000)
        full = split_log_det_integral(sys, mu, 10.0)  # everything inside
        split = split_log_det_integral(sys, mu, 0.07)
        total = full["inside"] + full["outside"]
        assert split["inside"] + split["outside"] == pytest.approx(total, abs=1e-10)

    def test_monotone_in_delta(self):
        sys = make_manneville_pomeau(0.2)
        mu = birkhoff_sample(sys, seed=5, burn_in=500, length=50_000)
        vals = [split_log_det_integral(sys, mu, d)["inside"]
                for d in (0.005, 0.01, 0.02, 0.05)]
        for a, b in zip(vals, vals[1:]):
            assert b >= a - 1e-3
