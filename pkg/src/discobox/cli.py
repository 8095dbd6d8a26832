"""Command-line surface: refine / match / eval-corr / bench.

Exit codes: 0 success, 2 malformed input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import corrmetric, membank, report, synthgen
from .config import RunConfig, load_config
from .correspondence import SinkhornConfig, cost_volume_u, geometric_consistency, icm_match
from .crf import TeacherConfig, build_kernel, mean_field
from .errors import EngineError, InputError, NumericError
from .tensors import RoiObject, TensorBundle, read_bundle, write_bundle
from .teacher import refine_batch
from .transport import sinkhorn, step_marginal

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_REQUIRED = ("rgb", "feat", "mask", "box", "cat")


def _objects_from_bundle(bundle: TensorBundle, roi_size: int) -> list[RoiObject]:
    ids = sorted({name.split("/", 1)[1] for name in bundle.names() if "/" in name})
    objects = []
    for oid in ids:
        for prefix in _REQUIRED:
            if f"{prefix}/{oid}" not in bundle:
                raise InputError(f"object {oid!r}: missing array {prefix}/{oid}")
        rgb = np.asarray(bundle.get(f"rgb/{oid}"), dtype=np.float64)
        feat = np.asarray(bundle.get(f"feat/{oid}"), dtype=np.float64)
        mask = np.asarray(bundle.get(f"mask/{oid}"), dtype=np.float64)
        box = np.asarray(bundle.get(f"box/{oid}"), dtype=np.float64).ravel()
        cat = int(np.asarray(bundle.get(f"cat/{oid}")).ravel()[0])
        conf = 1.0
        if f"conf/{oid}" in bundle:
            conf = float(np.asarray(bundle.get(f"conf/{oid}")).ravel()[0])
        if rgb.ndim != 3 or rgb.shape[0] != 3:
            raise InputError(f"object {oid!r}: rgb must be (3, H, W), got {rgb.shape}")
        if feat.ndim != 3 or mask.ndim != 2 or box.size != 4:
            raise InputError(f"object {oid!r}: malformed feat/mask/box arrays")
        if mask.min() < 0.0 or mask.max() > 1.0:
            raise InputError(f"object {oid!r}: mask values outside [0, 1]")
        obj = RoiObject(
            id=oid, category=cat, box=tuple(box), confidence=conf,
            rgb=rgb, feature=feat, mask=np.clip(mask, 0.0, 1.0),
        )
        objects.append(obj.resampled(roi_size))
    return objects


def cmd_refine(args) -> int:
    cfg = load_config(args.config, args.set or [])
    if args.threads is not None:
        cfg.threads = args.threads
    bundle = read_bundle(args.input)
    objects = _objects_from_bundle(bundle, cfg.roi_size)
    bank = membank.restore(read_bundle(args.bank)) if args.bank else membank.MemoryBank()
    outputs = refine_batch(objects, bank, cfg.refine_config())

    out = TensorBundle()
    rows = []
    for o in outputs:
        out.put(f"label/{o.id}", o.labeling.astype(np.uint8))
        rows.append(
            {
                "id": o.id,
                "l_mil": o.l_mil,
                "l_con": o.l_con,
                "l_nce": o.l_nce,
                "total": o.total,
                "n_neighbors": len(o.matches),
            }
        )
    text = json.dumps({"schema_version": report.SCHEMA_VERSION, "losses": rows},
                      sort_keys=True, separators=(",", ":"))
    out.put("report.json", np.frombuffer(text.encode("utf-8"), dtype=np.uint8))
    write_bundle(out, args.output)
    if args.bank_out:
        write_bundle(membank.snapshot(bank), args.bank_out)
    return EXIT_OK


def cmd_match(args) -> int:
    cfg = load_config(args.config, args.set or [])
    objs_a = _objects_from_bundle(read_bundle(args.a), cfg.roi_size)
    objs_b = _objects_from_bundle(read_bundle(args.b), cfg.roi_size)
    if len(objs_a) != 1 or len(objs_b) != 1:
        raise InputError(
            f"match expects one RoI per bundle, got {len(objs_a)} and {len(objs_b)}"
        )
    a, b = objs_a[0], objs_b[0]
    result = icm_match(
        a.feature, b.feature,
        step_marginal(a.mask), step_marginal(b.mask),
        icm_iters=cfg.icm_iters,
        sinkhorn_cfg=SinkhornConfig(cfg.epsilon, cfg.t_max, cfg.tol),
        gamma=cfg.gamma,
    )
    h, w = a.resolution
    out = TensorBundle()
    out.put("plan", result.plan.values)
    out.put("targets", result.argmax_targets.astype(np.float64).reshape(h, w))
    out.put("confidence", result.plan.values.max(axis=1).reshape(h, w))
    write_bundle(out, args.out)
    return EXIT_OK


def cmd_eval_corr(args) -> int:
    gt = corrmetric.load_annotations(args.gt)
    preds = corrmetric.load_predictions(args.pred)
    result = corrmetric.evaluate(gt, preds)
    report.write_eval_report(args.report, result)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.set or [])
    if args.roi_size is not None:
        cfg.roi_size = args.roi_size
    if cfg.roi_size <= 0:
        raise InputError(f"roi-size must be positive, got {cfg.roi_size}")
    n = cfg.roi_size
    pairs = args.pairs
    rng = np.random.default_rng(cfg.seed)

    rows = []

    def timed(name, fn, reps):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        dt = time.perf_counter() - t0
        rows.append({"operation": name, "seconds": dt, "per_call_ms": dt / reps * 1e3})

    hw = n * n
    cost = rng.uniform(0.0, 1.0, size=(hw, hw))
    mu = np.ones(hw)
    timed("sinkhorn", lambda: sinkhorn(cost, mu, mu, cfg.epsilon, cfg.t_max, cfg.tol), pairs)
    plan = sinkhorn(cost, mu, mu, cfg.epsilon, cfg.t_max, cfg.tol)
    timed("geometric_consistency", lambda: geometric_consistency(plan, cfg.gamma), pairs)

    pair_objs = [synthgen.gen_permuted_pair(cfg.seed + i, n) for i in range(pairs)]
    sk = SinkhornConfig(cfg.epsilon, cfg.t_max, cfg.tol)

    def run_matches():
        for a, b, _ in pair_objs:
            icm_match(a.feature, b.feature, step_marginal(a.mask),
                      step_marginal(b.mask), cfg.icm_iters, sk, cfg.gamma)

    timed("icm_match", run_matches, 1)

    obj, _ = synthgen.gen_shape_roi(cfg.seed, n, noise_rate=0.1)
    tc = TeacherConfig(cfg.w1, cfg.w2, cfg.zeta, cfg.gamma, cfg.mf_iters, cfg.mf_tol, cfg.mode)
    kernel = build_kernel(obj.rgb, cfg.w1, cfg.zeta)
    timed("mean_field", lambda: mean_field(obj.mask, kernel, [], tc), pairs)

    for r in rows:
        print(f"{r['operation']:>24}: {r['seconds']:.3f} s total, {r['per_call_ms']:.2f} ms/call")
    if args.out:
        report.write_bench_report(args.out, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="discobox", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")

    sp = sub.add_parser("refine", help="refine a batch of RoIs against a memory bank")
    sp.add_argument("--input", required=True)
    sp.add_argument("--bank", default=None, help="bank snapshot bundle")
    sp.add_argument("--bank-out", default=None, help="write updated bank snapshot")
    sp.add_argument("--output", required=True)
    sp.add_argument("--threads", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("match", help="match two single-RoI bundles")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("eval-corr", help="evaluate correspondence predictions")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=cmd_eval_corr)

    sp = sub.add_parser("bench", help="time the core operations on synthetic inputs")
    sp.add_argument("--roi-size", type=int, default=None)
    sp.add_argument("--pairs", type=int, default=1)
    sp.add_argument("--out", default=None, help="CSV path (figure written alongside)")
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is None and "DISCOBOX_THREADS" in os.environ:
        try:
            args.threads = int(os.environ["DISCOBOX_THREADS"])
        except ValueError:
            args.threads = None
    try:
        return args.func(args)
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EngineError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
