import numpy as np
import pytest

from splitsim.marvell import estimate_stats, power_budget, solve
from splitsim.numeric import make_rng
from splitsim.protection import (
    MechanismConfig,
    apply_mechanism,
    perturb_iso,
    perturb_marvell,
    perturb_max_norm,
    perturb_none,
)


def _mixed_batch(rng, B=16, d=8, pos=4):
    g = rng.standard_normal((B, d))
    g[:pos] += 2.0
    labels = np.array([1] * pos + [0] * (B - pos))
    return g, labels


def test_none_is_identity():
    g = make_rng(0).standard_normal((5, 3))
    out = perturb_none(g)
    assert np.array_equal(out.perturbed, g)
    assert out.noise_power == 0.0
    assert out.certificate is None


def test_iso_zero_scale_is_identity():
    g = make_rng(1).standard_normal((4, 6))
    out = perturb_iso(g, 0.0, make_rng(2))
    assert np.array_equal(out.perturbed, g)


def test_iso_all_zero_batch_stays_zero():
    out = perturb_iso(np.zeros((3, 4)), 2.0, make_rng(3))
    assert np.array_equal(out.perturbed, np.zeros((3, 4)))


def test_iso_per_coordinate_variance():
    # t = d makes the per-coordinate noise variance equal ||g_max||^2
    rng = make_rng(4)
    d = 4
    g_fixed = np.array([0.5, -1.0, 0.25, 0.0])
    g_max = np.array([2.0, 1.0, -1.0, 0.5])
    max_sq = float(g_max @ g_max)
    copies = 10**5
    batch = np.vstack([np.tile(g_fixed, (copies, 1)), g_max[None, :]])
    out = perturb_iso(batch, float(d), rng)
    noise = out.perturbed[:copies] - g_fixed
    emp_var = noise.var(axis=0)
    assert np.all(np.abs(emp_var - max_sq) <= 0.02 * max_sq)
    assert out.noise_power == pytest.approx(d * max_sq)


def test_max_norm_largest_row_unchanged():
    rng = make_rng(5)
    g, _ = _mixed_batch(rng)
    sq = (g * g).sum(axis=1)
    j = int(np.argmax(sq))
    out = perturb_max_norm(g, make_rng(6))
    assert np.array_equal(out.perturbed[j], g[j])


def test_max_norm_sigma_formula():
    # ||g_max||^2 = 4, ||g_j||^2 = 1 -> sigma = sqrt(3), E||g~||^2 = 4;
    # many copies of g_j in one batch all get the same sigma
    copies = 10**5
    batch = np.vstack([np.tile([1.0, 0.0], (copies, 1)), [[2.0, 0.0]]])
    out = perturb_max_norm(batch, make_rng(7))
    sq = (out.perturbed[:copies] ** 2).sum(axis=1)
    assert abs(sq.mean() - 4.0) <= 0.02 * 4.0
    # realized rows stay collinear with g_j (rank-1 noise along g_j)
    assert np.all(out.perturbed[:copies, 1] == 0.0)


def test_max_norm_expected_norms_match_max():
    rng = make_rng(9)
    g = rng.standard_normal((6, 5))
    g *= (0.4 + 0.6 * rng.random(6))[:, None]  # spread of norms, none tiny
    max_sq = float((g * g).sum(axis=1).max())
    trials = 4000
    acc = np.zeros(6)
    noise_rng = make_rng(10)
    for _ in range(trials):
        out = perturb_max_norm(g, noise_rng)
        acc += (out.perturbed**2).sum(axis=1)
    emp = acc / trials
    assert np.all(np.abs(emp - max_sq) <= 0.1 * max_sq)


def test_max_norm_zero_rows_stay_zero():
    g = np.array([[1.0, 1.0], [0.0, 0.0]])
    out = perturb_max_norm(g, make_rng(11))
    assert np.array_equal(out.perturbed[1], np.zeros(2))


def test_marvell_tiny_power_is_near_identity():
    rng = make_rng(12)
    g, labels = _mixed_batch(rng)
    out = perturb_marvell(g, labels, 1e-15, make_rng(13))
    assert not out.fallback
    assert np.allclose(out.perturbed, g, atol=1e-5)


def test_marvell_sum_kl_monotone_in_s():
    rng = make_rng(14)
    g, labels = _mixed_batch(rng, B=64, d=8, pos=16)
    kls = []
    for s in (0.1, 1.0, 4.0, 16.0):
        out = perturb_marvell(g, labels, s, make_rng(15))
        kls.append(out.certificate.sum_kl)
    assert all(kls[i + 1] <= kls[i] + 1e-9 for i in range(len(kls) - 1))


def test_marvell_single_class_fallback():
    g = make_rng(16).standard_normal((4, 3))
    out = perturb_marvell(g, np.array([1, 1, 1, 1]), 1.0, make_rng(17))
    assert out.fallback
    assert np.array_equal(out.perturbed, g)
    assert out.certificate is None


def test_marvell_zero_gap_fallback():
    g = np.tile(np.array([1.0, 2.0]), (4, 1))
    out = perturb_marvell(g, np.array([1, 1, 0, 0]), 1.0, make_rng(18))
    assert out.fallback
    assert np.array_equal(out.perturbed, g)


def test_marvell_power_within_budget():
    rng = make_rng(19)
    g, labels = _mixed_batch(rng, B=32, d=6, pos=8)
    s = 4.0
    out = perturb_marvell(g, labels, s, make_rng(20))
    stats = estimate_stats(g, labels)
    P = power_budget(s, stats)
    assert out.noise_power <= P * (1 + 1e-6)


def test_marvell_positive_noise_spectrum():
    # empirical covariance of the positive-class noise has delta_g as an
    # eigenvector with eigenvalue lam1_pos; orthogonal variance lam2_pos
    rng = make_rng(21)
    d = 6
    base_pos = np.array([1.0, 0.5, -0.2, 0.0, 0.3, -0.1])
    base_neg = -base_pos
    copies = 10**5
    g = np.vstack([np.tile(base_pos, (copies, 1)), np.tile(base_neg, (copies // 2, 1))])
    labels = np.array([1] * copies + [0] * (copies // 2))
    out = perturb_marvell(g, labels, 4.0, make_rng(22))
    assert not out.fallback
    stats = estimate_stats(g, labels)
    sol = solve(stats, power_budget(4.0, stats))
    noise = out.perturbed[:copies] - base_pos
    direction = stats.delta_g / np.sqrt(stats.delta_norm_sq)
    along = noise @ direction
    assert abs(along.var() - sol.lam1_pos) <= 0.05 * max(sol.lam1_pos, 1e-12)
    ortho = noise - along[:, None] * direction[None, :]
    ortho_var = (ortho**2).sum() / (copies * (d - 1))
    assert abs(ortho_var - sol.lam2_pos) <= 0.05 * max(sol.lam2_pos, 1e-9) + 1e-9


@pytest.mark.parametrize("kind,param", [("none", None), ("iso", 1.0), ("max_norm", None), ("marvell", 2.0)])
def test_unbiasedness(kind, param):
    # fixed row, many perturbed copies: componentwise mean within
    # 4 std / sqrt(N) of the clean row
    rng = make_rng(23)
    d = 6
    g_row = rng.standard_normal(d)
    copies = 10**5
    anchor = 2.0 * np.ones(d)  # fixes ||g_max|| and the class gap
    batch = np.vstack([np.tile(g_row, (copies, 1)), np.tile(anchor, (copies // 4, 1))])
    labels = np.array([1] * copies + [0] * (copies // 4))
    if kind == "iso":
        config = MechanismConfig(kind="iso", t=param)
    elif kind == "marvell":
        config = MechanismConfig(kind="marvell", s=param)
    else:
        config = MechanismConfig(kind=kind)
    out = apply_mechanism(config, batch, labels, make_rng(24))
    copies_pert = out.perturbed[:copies]
    emp_mean = copies_pert.mean(axis=0)
    emp_std = copies_pert.std(axis=0)
    # small absolute term absorbs float accumulation when the noise is zero
    tol = 4.0 * emp_std / np.sqrt(copies) + 1e-10
    assert np.all(np.abs(emp_mean - g_row) <= tol)


def test_mechanism_config_validation():
    with pytest.raises(ValueError):
        MechanismConfig(kind="nope")
    with pytest.raises(ValueError):
        MechanismConfig(kind="iso", t=-1.0)
    with pytest.raises(ValueError):
        MechanismConfig(kind="marvell", s=0.0)
    assert MechanismConfig(kind="iso", t=2.0).param == 2.0
    assert MechanismConfig(kind="marvell", s=3.0).param == 3.0
    assert MechanismConfig(kind="none").param is None
