import math
import random
from fractions import Fraction

import pytest

from smallball.discrepancy import (DiscrepancyReport, PointSet,
                                   discrepancy_eval, discrepancy_report,
                                   l2_discrepancy, load_points, save_points,
                                   sup_discrepancy, van_der_corput)
from smallball.dyadic import GuardRefusal

from oracles import ref_bit_reversal, ref_disc_extrema, ref_l2_sq

F = Fraction


def random_points(rng, n, d, dens=(8, 12, 16)):
    return PointSet.build(
        [[F(rng.randrange(den), den) for _ in range(d)]
         for den in (rng.choice(dens) for _ in range(n))])


def corner_value(ps, corner, closed):
    if closed:
        cnt = sum(1 for p in ps.points
                  if all(pc <= cc for pc, cc in zip(p, corner)))
    else:
        cnt = sum(1 for p in ps.points
                  if all(pc < cc for pc, cc in zip(p, corner)))
    return cnt - len(ps) * math.prod(corner)


# ---------------------------------------------------------------------------
# point sets
# ---------------------------------------------------------------------------

def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet(2, ((F(0), F(0)), (F(1, 2),)))
    with pytest.raises(ValueError):
        PointSet(1, ((F(1),),))  # right endpoint excluded
    with pytest.raises(ValueError):
        PointSet(1, ())
    ps = PointSet.build([[F(1, 3), F(1, 2)]])
    assert ps.dimension == 2 and len(ps) == 1


def test_save_load_round_trip(tmp_path):
    ps = PointSet.build([[F(1, 3), F(0)], [F(5, 7), F(15, 16)]])
    path = tmp_path / "pts.txt"
    save_points(ps, str(path))
    assert load_points(str(path)) == ps


def test_load_rejects_malformed_files(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2\n")
    with pytest.raises(ValueError):
        load_points(str(path))
    path.write_text("2 3\n0 0\n")
    with pytest.raises(ValueError):
        load_points(str(path))


def test_van_der_corput_matches_bit_reversal():
    for k in (0, 1, 3, 6):
        ps = van_der_corput(k)
        n = 1 << k
        assert len(ps) == n and ps.dimension == 2
        for i, (x, y) in enumerate(ps.points):
            assert x == F(i, n)
            assert y == F(ref_bit_reversal(i, k), n)


def test_van_der_corput_guard():
    with pytest.raises(GuardRefusal):
        van_der_corput(27)


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------

def test_discrepancy_eval_hand_case():
    ps = PointSet.build([[F(1, 2), F(1, 2)]])
    assert discrepancy_eval(ps, (F(3, 4), F(3, 4))) == F(7, 16)
    # the box is half-open: the point itself is not counted at x = p
    assert discrepancy_eval(ps, (F(1, 2), F(1, 2))) == F(-1, 4)
    assert discrepancy_eval(ps, (F(1), F(1))) == 0


def test_discrepancy_eval_validation():
    ps = van_der_corput(2)
    with pytest.raises(ValueError):
        discrepancy_eval(ps, (F(1, 2),))
    with pytest.raises(ValueError):
        discrepancy_eval(ps, (F(1, 2), F(3, 2)))


# ---------------------------------------------------------------------------
# exact supremum vs the corner-enumeration oracle
# ---------------------------------------------------------------------------

def test_single_point_at_origin():
    rep = sup_discrepancy(PointSet.build([[F(0), F(0)]]))
    assert rep["sup_abs"] == 1
    assert rep["sup_plus"] == 1 and rep["inf"] == 0
    assert rep["side"] == "closed" and rep["corner"] == (0, 0)


def test_sup_matches_oracle_2d():
    rng = random.Random(7)
    for _ in range(15):
        ps = random_points(rng, rng.randrange(2, 9), 2)
        hi, lo = ref_disc_extrema(ps.points)
        rep = sup_discrepancy(ps)
        assert rep["sup_plus"] == hi
        assert rep["inf"] == lo
        assert rep["sup_abs"] == max(hi, -lo)
        closed = rep["side"] == "closed"
        attained = corner_value(ps, rep["corner"], closed)
        assert attained == (rep["sup_abs"] if closed else -rep["sup_abs"])


def test_sup_matches_oracle_3d():
    rng = random.Random(19)
    for _ in range(6):
        ps = random_points(rng, rng.randrange(2, 7), 3)
        hi, lo = ref_disc_extrema(ps.points)
        rep = sup_discrepancy(ps)
        assert rep["sup_plus"] == hi and rep["inf"] == lo
        assert rep["sup_abs"] == max(hi, -lo)


def test_sup_matches_oracle_1d():
    rng = random.Random(3)
    for _ in range(4):
        ps = random_points(rng, rng.randrange(1, 6), 1)
        hi, lo = ref_disc_extrema(ps.points)
        rep = sup_discrepancy(ps)
        assert rep["sup_plus"] == hi and rep["inf"] == lo


def test_sup_2d_and_grid_paths_agree():
    # the column sweep and the rank-histogram grid must see the same corners
    from smallball.discrepancy import _grid_nd, _sweep_2d
    rng = random.Random(23)
    for _ in range(8):
        ps = random_points(rng, rng.randrange(2, 9), 2)
        (hi2, _, _), (lo2, _, _) = _sweep_2d(ps)
        (hig, _), (log_, _) = _grid_nd(ps)
        assert (hi2, lo2) == (hig, log_)


def test_sup_with_duplicate_points():
    ps = PointSet.build([[F(1, 4), F(1, 4)]] * 3 + [[F(3, 4), F(1, 2)]])
    hi, lo = ref_disc_extrema(ps.points)
    rep = sup_discrepancy(ps)
    assert rep["sup_plus"] == hi and rep["inf"] == lo


def test_sup_guards():
    big = PointSet.build([[F(1, 1 << 31), F(1, (1 << 31) - 1)],
                          [F(3, 1 << 31), F(5, (1 << 31) - 1)]])
    with pytest.raises(GuardRefusal):
        sup_discrepancy(big)
    den = 1024
    many = PointSet.build(
        [[F((3 * i + 1) % den, den), F((5 * i + 2) % den, den),
          F((7 * i + 3) % den, den)] for i in range(170)])
    with pytest.raises(GuardRefusal):
        sup_discrepancy(many)


# ---------------------------------------------------------------------------
# Monte Carlo L2 vs the exact pair formula
# ---------------------------------------------------------------------------

def test_l2_matches_exact_integral():
    ps = van_der_corput(3)
    exact = float(ref_l2_sq(ps.points))
    rep = l2_discrepancy(ps, budget=20000, seed=5)
    assert abs(rep["mean_sq"] - exact) <= 5 * rep["stderr_sq"]
    assert rep["norm"] == pytest.approx(math.sqrt(rep["mean_sq"]))
    assert rep["stderr_sq"] > 0


def test_l2_matches_exact_integral_3d():
    rng = random.Random(31)
    ps = random_points(rng, 6, 3)
    exact = float(ref_l2_sq(ps.points))
    rep = l2_discrepancy(ps, budget=20000, seed=9)
    assert abs(rep["mean_sq"] - exact) <= 5 * rep["stderr_sq"]


def test_l2_is_seed_stable_and_chunk_invariant():
    ps = van_der_corput(4)
    a = l2_discrepancy(ps, budget=3000, seed=2, chunk=512)
    b = l2_discrepancy(ps, budget=3000, seed=2, chunk=4096)
    assert a["mean_sq"] == pytest.approx(b["mean_sq"], rel=1e-12)
    c = l2_discrepancy(ps, budget=3000, seed=3)
    assert c["mean_sq"] != b["mean_sq"]
    with pytest.raises(ValueError):
        l2_discrepancy(ps, budget=1, seed=2)


# ---------------------------------------------------------------------------
# combined report
# ---------------------------------------------------------------------------

def test_report_fields_and_consistency():
    ps = van_der_corput(4)
    rep = discrepancy_report(ps, budget=4000, seed=1)
    assert rep.n_points == 16 and rep.dimension == 2
    assert rep.consistent  # sup dominates the L2 norm pointwise
    ratios = rep.growth_ratios()
    assert ratios["sup_over_log"] > 0
    data = rep.to_json()
    assert data["sup_abs"] == str(rep.sup_abs)
    assert data["sup_abs_float"] == pytest.approx(float(rep.sup_abs))
    assert data["side"] in ("closed", "strict")


def test_report_growth_ratio_undefined_for_single_point():
    ps = PointSet.build([[F(1, 2), F(1, 4)]])
    rep = discrepancy_report(ps, budget=100, seed=1)
    assert rep.growth_ratios() == {"sup_over_log": None,
                                   "l2_over_sqrt_log": None}
