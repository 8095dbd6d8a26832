"""Acceptance checks for the numerical engine.

Each test covers one headline property at its stated tolerance and
prints a single PASS line when it holds. Run with `pytest -v` for one
line per criterion.
"""

import math
import pathlib
import time

import numpy as np
import pytest

from discobox import cli, membank, synthgen
from discobox.correspondence import geometric_consistency, icm_match
from discobox.corrmetric import (
    DEFAULT_ALPHAS,
    GroundTruthPair,
    _index_pairs,
    _pairs_for_prediction,
    evaluate,
    generate_pairs,
    score_prediction,
)
from discobox.crf import TeacherConfig, build_kernel, gibbs_energy, mean_field, threshold_phi
from discobox.mil import build_bags, mil_loss_bce, mil_loss_dice
from discobox.teacher import LossWeights, ParamVector, ema_update, total_loss
from discobox.transport import TransportPlan, sinkhorn, transport_cost

from oracles import (
    bag_labels,
    exact_ot_cost,
    exhaustive_min_energy,
    naive_ap,
    naive_energy,
    naive_geometric,
    naive_score,
)

GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"


def _ok(name):
    print(f"[ACCEPTANCE] {name}: PASS")


def _random_instance(rng, n, m):
    cost = rng.uniform(0.0, 1.0, size=(n, m))
    mu_a = rng.uniform(0.5, 1.5, size=n)
    mu_b = rng.uniform(0.5, 1.5, size=m)
    mu_b *= mu_a.sum() / mu_b.sum()
    return cost, mu_a, mu_b


def test_sinkhorn_marginals_200_matrices_under_5s():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        if i < 10:
            n = m = 1024
        else:
            n = int(rng.integers(4, 129))
            m = int(rng.integers(4, 129))
        cost, mu_a, mu_b = _random_instance(rng, n, m)
        plan = sinkhorn(cost, mu_a, mu_b)
        assert plan.converged
        worst = max(worst, plan.marginal_violation())
    elapsed = time.perf_counter() - t0
    assert worst < 1e-6, worst
    assert elapsed < 5.0, elapsed
    _ok(f"sinkhorn marginals (worst {worst:.2e}, {elapsed:.2f} s)")


def test_ot_cost_within_2pct_of_exact_optimum():
    rng = np.random.default_rng(1)
    for n in range(2, 9):
        for m in range(2, 9):
            cost, mu_a, mu_b = _random_instance(rng, n, m)
            plan = sinkhorn(cost, mu_a, mu_b, epsilon=1e-3, t_max=20000)
            got = transport_cost(plan, cost)
            exact = exact_ot_cost(cost, mu_a, mu_b)
            assert got <= exact * 1.02 + 1e-12, (n, m, got, exact)
    _ok("entropic cost within 2% of exact optimum (all sizes <= 8x8)")


def test_cost_shift_invariance():
    rng = np.random.default_rng(2)
    cost, mu_a, mu_b = _random_instance(rng, 12, 9)
    base = sinkhorn(cost, mu_a, mu_b)
    shifted = sinkhorn(cost + 7.3, mu_a, mu_b)
    diff = np.abs(base.values - shifted.values).max()
    assert diff < 1e-8, diff
    _ok(f"cost-shift invariance (max diff {diff:.2e})")


def test_geometric_term_matches_naive_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ha, wa = rng.integers(2, 7, size=2)
        hb, wb = rng.integers(2, 7, size=2)
        values = rng.uniform(0.0, 1.0, size=(ha * wa, hb * wb))
        gamma = float(rng.uniform(5.0, 20.0))
        plan = TransportPlan(values, np.ones(ha * wa), np.ones(hb * wb),
                             0.05, 1, True)
        fast = geometric_consistency(plan, gamma, (int(ha), int(wa)), (int(hb), int(wb)))
        slow = naive_geometric(values, gamma, (int(ha), int(wa)), (int(hb), int(wb)))
        np.testing.assert_allclose(fast.values, slow, atol=1e-5)
    _ok("geometric consistency equals quadruple-loop oracle (50 cases, 1e-5)")


def test_permutation_recovery_95pct():
    accs = []
    for seed in range(20):
        a, b, perm = synthgen.gen_permuted_pair(seed, size=16)
        mu = np.full(256, 0.6)
        res = icm_match(a.feature, b.feature, mu, mu, icm_iters=2)
        accs.append(float(np.mean(res.argmax_targets == perm)))
    mean_acc = float(np.mean(accs))
    assert mean_acc >= 0.95, mean_acc
    _ok(f"permutation recovery (mean accuracy {mean_acc:.3f})")


def test_mean_field_denoising_iou():
    cfg = TeacherConfig(w1=10.0)
    ious = []
    for seed in range(100):
        obj, gt = synthgen.gen_shape_roi(seed, size=16, noise_rate=0.1)
        kernel = build_kernel(obj.rgb, cfg.w1, cfg.zeta)
        x, _ = mean_field(obj.mask, kernel, [], cfg)
        inter = np.sum((x > 0) & (gt > 0))
        union = np.sum((x > 0) | (gt > 0))
        ious.append(inter / union if union else 1.0)
    mean_iou = float(np.mean(ious))
    assert mean_iou >= 0.95, mean_iou
    _ok(f"mean-field denoising (suite IoU {mean_iou:.4f} over 100 RoIs)")


def _random_energy_instance(rng, n):
    mask = rng.uniform(size=(n, n))
    rgb = rng.uniform(0, 255, size=(3, n, n))
    cfg = TeacherConfig()
    kernel = build_kernel(rgb, cfg.w1, cfg.zeta)
    return mask, rgb, kernel, cfg


def test_energy_descends_from_initial_labeling():
    rng = np.random.default_rng(4)
    wins = 0
    for _ in range(100):
        mask, _, kernel, cfg = _random_energy_instance(rng, 4)
        x0 = (mask > 0.5).astype(float)
        x1, _ = mean_field(mask, kernel, [], cfg)
        e0 = gibbs_energy(x0, mask, kernel, [])
        e1 = gibbs_energy(x1, mask, kernel, [])
        wins += e1 <= e0 + 1e-12
    assert wins >= 95, wins
    _ok(f"energy descent on 4x4 ({wins}/100)")


def test_energy_near_global_optimum_3x3():
    rng = np.random.default_rng(5)
    wins = 0
    for _ in range(100):
        mask, rgb, kernel, cfg = _random_energy_instance(rng, 3)
        x, _ = mean_field(mask, kernel, [], cfg)
        e = gibbs_energy(x, mask, kernel, [])
        best = exhaustive_min_energy(mask, rgb, cfg.w1, cfg.zeta)
        wins += e <= best * 1.05 + 1e-12
    assert wins >= 90, wins
    _ok(f"energy within 5% of 3x3 global optimum ({wins}/100)")


def test_mil_hand_values_and_bag_oracle():
    from discobox.mil import Bag, BagSet

    one_pos = BagSet([Bag(np.array([0]), True)], 1, 1, (0, 0, 1, 1))
    assert mil_loss_bce(one_pos, np.array([[0.9]])) == pytest.approx(-math.log(0.9), abs=1e-6)
    one_neg = BagSet([Bag(np.array([0]), False)], 1, 1, (0, 0, 1, 1))
    assert mil_loss_bce(one_neg, np.array([[0.2]])) == pytest.approx(-math.log(0.8), abs=1e-6)
    full = build_bags(4, 4, (0, 0, 4, 4))
    assert mil_loss_dice(full, np.ones((4, 4))) == pytest.approx(0.0, abs=1e-6)
    assert mil_loss_dice(full, np.zeros((4, 4))) == pytest.approx(1.0, abs=1e-6)

    rng = np.random.default_rng(6)
    for _ in range(100):
        h = int(rng.integers(2, 12))
        w = int(rng.integers(2, 12))
        x0 = int(rng.integers(0, w - 1))
        y0 = int(rng.integers(0, h - 1))
        x1 = int(rng.integers(x0 + 1, w + 1))
        y1 = int(rng.integers(y0 + 1, h + 1))
        bags = build_bags(h, w, (x0, y0, x1, y1))
        rows, cols = bag_labels(h, w, (x0, y0, x1, y1))
        assert sum(b.positive for b in bags.bags) == rows.count("pos") + cols.count("pos")
        assert sum(not b.positive for b in bags.bags) == rows.count("neg") + cols.count("neg")
        inside = np.zeros((h, w), dtype=bool)
        inside[y0:y1, x0:x1] = True
        flat = inside.ravel()
        for b in bags.bags:
            if b.positive:
                assert flat[b.pixel_indices].all()
            else:
                assert not flat[b.pixel_indices].any()
    _ok("MIL hand values and 100-geometry bag oracle")


def test_metric_equals_naive_oracle_on_50_fixtures():
    for seed in range(50):
        gt, preds = synthgen.gen_metric_fixture(
            seed=seed, n_pairs=3, noise_px=float(seed % 5), kp_per_object=5
        )
        result = evaluate(gt, preds)
        pairs = generate_pairs(gt)
        index = _index_pairs(pairs)
        for alpha in DEFAULT_ALPHAS:
            triples, confs = [], []
            for pred in preds:
                cands = _pairs_for_prediction(index, pred)
                flat = []
                for pair in cands:
                    for gs, gtp in pair.keypoint_pairs:
                        flat.append((gs, gtp, pair.source.diagonal, pair.target.diagonal))
                triples.append(naive_score(pred.src_xy, pred.tgt_xy, flat, alpha))
                confs.append(pred.confidence)
            want = naive_ap(triples, confs)
            assert abs(result["ap"][alpha] - want) <= 1e-12, (seed, alpha)
    _ok("AP equals naive oracle on 50 fixtures (1e-12)")


def test_metric_fractional_half_half_case():
    from test_corrmetric import _gt_pair, _pred

    pair = _gt_pair([(5.0, 5.0), (5.4, 5.0)], [(8.0, 8.0), (30.0, 30.0)])
    s = score_prediction(_pred((5.2, 5.0), (8.0, 8.0)), [pair], alpha=0.02)
    assert (s.tp, s.fp, s.fn) == (0.5, 0.5, 0)
    _ok("fractional (0.5, 0.5, 0) scoring case")


def test_memory_bank_boundaries_and_stated_constants():
    bank = membank.MemoryBank()
    small, _ = synthgen.gen_shape_roi(0, 16)
    import dataclasses
    rejected = dataclasses.replace(small, box=(0.0, 0.0, 31.0, 31.0))
    membank.push(bank, rejected)
    assert bank.size(rejected.category) == 0  # area 961 rejected
    accepted = dataclasses.replace(small, box=(0.0, 0.0, 32.0, 32.0))
    membank.push(bank, accepted)
    assert bank.size(accepted.category) == 1  # area 1024 accepted

    for i in range(3):
        membank.push(bank, dataclasses.replace(accepted, id=f"x{i}"))
    assert membank.retrieve(bank, accepted.category, 0) == []  # 4 < 5

    ids = [f"fifo-{i}" for i in range(105)]
    fifo = membank.MemoryBank()
    for oid in ids:
        membank.push(fifo, dataclasses.replace(accepted, id=oid))
    kept = [e.id for e in fifo.queues[accepted.category]]
    assert kept == ids[5:]  # capacity 100, oldest evicted first

    assert membank.CAPACITY == 100
    assert membank.MAX_RETRIEVE == 10
    assert membank.MIN_BANK_SIZE == 5
    assert membank.MIN_AREA == 32 * 32
    ema = ema_update(ParamVector(np.array([1.0])), ParamVector(np.array([0.0])), 0.999)
    assert ema.values[0] == pytest.approx(0.999)
    assert (LossWeights().alpha_mil, LossWeights().alpha_con, LossWeights().alpha_nce) == (10.0, 2.0, 0.1)
    assert total_loss(1.0, 1.0, 1.0, LossWeights()) == pytest.approx(12.1)
    assert total_loss(1.0, 1.0, 1.0, LossWeights(1.0, 1.0, 0.1)) == pytest.approx(2.1)
    _ok("memory bank boundaries and stated constants")


def test_end_to_end_golden_bit_exact(tmp_path):
    from golden.generate import MATCH_ARGS, REFINE_ARGS

    out = tmp_path / "refine.dbxb"
    bank = tmp_path / "bank.dbxb"
    rc = cli.main(["refine", "--input", str(GOLDEN / "refine_input.dbxb"),
                   "--output", str(out), "--bank-out", str(bank), *REFINE_ARGS])
    assert rc == 0
    assert out.read_bytes() == (GOLDEN / "refine_expected.dbxb").read_bytes()
    assert bank.read_bytes() == (GOLDEN / "bank_expected.dbxb").read_bytes()

    mout = tmp_path / "match.dbxb"
    rc = cli.main(["match", "--a", str(GOLDEN / "match_a.dbxb"),
                   "--b", str(GOLDEN / "match_b.dbxb"), "--out", str(mout),
                   *MATCH_ARGS])
    assert rc == 0
    assert mout.read_bytes() == (GOLDEN / "match_expected.dbxb").read_bytes()
    _ok("end-to-end golden outputs bit-exact")
