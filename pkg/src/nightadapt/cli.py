"""Command-line surface tying the modules into batch workflows.

Subcommands: ``glt`` (enhance a directory of day images with a night
prior), ``stats`` (build a night prior from images), ``fuse`` (merge
teacher and proxy detection files into pseudo-labels), ``ait-sweep``
(grid-sweep fusion thresholds and decay, emitting TP/FP counts and AP per
grid point), ``simulate`` (run the closed adaptation loop from a config),
and ``evaluate`` (score detections against ground truth).

Every subcommand accepts ``--config`` and ``--seed``.  Exit codes: 0 on
success, 1 on validation errors, 2 on runtime errors; errors go to stderr
as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fileio
from .boxes import DetectionSet, match_by_class_and_iou
from .config import RunConfig, load_run_config
from .enhance import enhance_pipeline
from .errors import ValidationError
from .evaluation import EvalConfig, evaluate
from .fusion import FusionConfig, fuse_pseudo_labels, mine_consistent
from .images import night_prior_from_images
from .simulate import generate_scenes, run_adaptation_loop
from .thresholding import ThresholdState, update_threshold

_IMAGE_SUFFIXES = (".png", ".ppm")


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _image_files(directory: str) -> list[str]:
    if not os.path.isdir(directory):
        raise ValidationError(f"{directory}: not a directory")
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith(_IMAGE_SUFFIXES)
    )
    if not names:
        raise ValidationError(f"{directory}: no .png or .ppm images found")
    return names


def _grid(text: str, flag: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValidationError(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise ValidationError(f"{flag}: empty grid")
    return values


def _cmd_glt(args) -> None:
    cfg = _load_config(args)
    prior = fileio.load_night_prior(args.prior)
    boxes_by_image = (
        fileio.load_detections(args.boxes, "ground_truth") if args.boxes else {}
    )
    names = _image_files(args.images)
    os.makedirs(args.out, exist_ok=True)
    for index, name in enumerate(names):
        img = fileio.read_image(os.path.join(args.images, name))
        stem = os.path.splitext(name)[0]
        boxes = [d.box for d in boxes_by_image[stem].detections] if stem in boxes_by_image else []
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(index,))
        )
        out_img = enhance_pipeline(img, boxes, prior, cfg.glt, rng)
        fileio.write_image(out_img, os.path.join(args.out, name))


def _cmd_stats(args) -> None:
    names = _image_files(args.images)
    images = (fileio.read_image(os.path.join(args.images, n)) for n in names)
    prior = night_prior_from_images(images)
    fileio.save_night_prior(prior, args.out)


def _fusion_cfg(args, cfg: RunConfig) -> FusionConfig:
    return FusionConfig(
        tau_cls=args.tau_cls if args.tau_cls is not None else cfg.ptc.tau_cls,
        tau_loc=args.tau_loc if args.tau_loc is not None else cfg.ptc.tau_loc,
        tau_lb=args.tau_lb if args.tau_lb is not None else cfg.ptc.tau_lb,
    )


def _cmd_fuse(args) -> None:
    cfg = _load_config(args)
    fusion = _fusion_cfg(args, cfg)
    teacher = fileio.load_detections(args.teacher, "teacher")
    proxy = fileio.load_detections(args.proxy, "proxy")
    fused = {}
    for image_id in sorted(teacher):
        proxy_set = proxy.get(image_id, DetectionSet(image_id, [], "proxy"))
        fused[image_id] = fuse_pseudo_labels(teacher[image_id], proxy_set, fusion)
    fileio.save_pseudo_labels(fused, args.out)


def _cmd_ait_sweep(args) -> None:
    cfg = _load_config(args)
    teacher = fileio.load_detections(args.teacher, "teacher")
    proxy = fileio.load_detections(args.proxy, "proxy")
    gt = fileio.load_detections(args.gt, "ground_truth")
    unknown = set(teacher) - set(gt)
    if unknown:
        raise ValidationError(f"teacher detections reference unknown image_ids: {sorted(unknown)}")
    tau_cls_grid = _grid(args.tau_cls_grid, "--tau-cls-grid")
    tau_loc_grid = _grid(args.tau_loc_grid, "--tau-loc-grid")
    gamma_grid = _grid(args.gamma_grid, "--gamma-grid")
    image_ids = sorted(gt)
    rows = []
    for tau_cls in tau_cls_grid:
        for tau_loc in tau_loc_grid:
            for gamma in gamma_grid:
                rows.append(
                    _sweep_point(cfg, teacher, proxy, gt, image_ids, tau_cls, tau_loc, gamma)
                )
    header = [
        "tau_cls", "tau_loc", "gamma", "final_tau",
        "n_initial", "n_extended", "matched_tp", "matched_fp",
        "tp", "fp", "fn", "map",
    ]
    fileio.save_csv(args.out, header, rows)


def _sweep_point(cfg, teacher, proxy, gt, image_ids, tau_cls, tau_loc, gamma):
    """One sweep grid point: fuse every image, adapting the threshold per image.

    ``matched_tp``/``matched_fp`` count extended (proxy-validated) labels
    that do or do not hit a same-class ground-truth box at IoU 0.5; the
    ``tp/fp/fn`` triple and AP score the full fused label set.
    """
    floor = min(cfg.ait.floor, tau_cls)
    state = ThresholdState(tau=tau_cls, gamma=gamma, floor=floor)
    fused_by_image: dict[str, DetectionSet] = {}
    n_initial = n_extended = matched_tp = matched_fp = 0
    for step, image_id in enumerate(image_ids):
        teacher_set = teacher.get(image_id, DetectionSet(image_id, [], "teacher"))
        proxy_set = proxy.get(image_id, DetectionSet(image_id, [], "proxy"))
        live = FusionConfig(
            tau_cls=state.tau, tau_loc=tau_loc, tau_lb=min(cfg.ptc.tau_lb, state.tau)
        )
        fused = fuse_pseudo_labels(teacher_set, proxy_set, live)
        extended = mine_consistent(teacher_set, proxy_set, live)
        n_initial += len(fused) - len(extended)
        n_extended += len(extended)
        ext_set = DetectionSet(image_id, extended.labels, "teacher")
        ext_matches = match_by_class_and_iou(ext_set, gt[image_id], 0.5)
        matched_tp += len(ext_matches)
        matched_fp += len(extended) - len(ext_matches)
        fused_by_image[image_id] = DetectionSet(image_id, fused.labels, "teacher")
        state = update_threshold(
            state, [lab.confidence for lab in extended.labels], step
        )
    report = evaluate(fused_by_image, gt, EvalConfig())
    q = report.pl_quality
    return (
        tau_cls, tau_loc, gamma, state.tau,
        n_initial, n_extended, matched_tp, matched_fp,
        q.tp, q.fp, q.fn, round(report.map, 6),
    )


def _cmd_simulate(args) -> None:
    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed)
    scenes = generate_scenes(cfg.sim.n_scenes, cfg.sim.scene, rng)
    state = ThresholdState(tau=cfg.ptc.tau_cls, gamma=cfg.ait.gamma,
                           floor=min(cfg.ait.floor, cfg.ptc.tau_cls))
    report = run_adaptation_loop(
        cfg.plan, cfg.ptc, state,
        (cfg.sim.teacher, cfg.sim.proxy, cfg.sim.student),
        scenes, rng,
        lr=cfg.sim.lr,
        use_band_mining=cfg.sim.use_band_mining,
        use_threshold_adaptation=cfg.sim.use_threshold_adaptation,
        n_epochs=cfg.sim.n_epochs,
    )
    os.makedirs(args.out, exist_ok=True)
    fileio.save_json(report.to_dict(), os.path.join(args.out, "report.json"))
    epochs = range(len(report.f1))
    fileio.save_csv(
        os.path.join(args.out, "traces.csv"),
        ["epoch", "precision", "recall", "f1", "tau",
         "teacher_skill", "proxy_skill", "student_skill", "n_initial", "n_extended"],
        [
            (e, report.precision[e], report.recall[e], report.f1[e], report.tau[e],
             report.teacher_skill[e], report.proxy_skill[e], report.student_skill[e],
             report.n_initial[e], report.n_extended[e])
            for e in epochs
        ],
    )
    fileio.save_csv(
        os.path.join(args.out, "threshold_history.csv"),
        ["iteration", "tau", "mu", "sigma"],
        [(r.iteration, r.tau, r.mu, r.sigma) for r in report.threshold_history],
    )


def _cmd_evaluate(args) -> None:
    _load_config(args)
    dets = fileio.load_detections(args.dets, "student")
    gt = fileio.load_detections(args.gt, "ground_truth")
    report = evaluate(dets, gt, EvalConfig())
    fileio.save_json(report.to_dict(), args.out)
    table = report.text_table()
    if args.table:
        fileio.atomic_write_text(args.table, table + "\n")
    else:
        print(table)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON", default=None)
    common.add_argument("--seed", type=int, help="override the config seed", default=None)

    parser = argparse.ArgumentParser(
        prog="nightadapt",
        description="Day-to-night adaptation toolkit: enhancement, fusion, "
        "thresholding, simulation, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("glt", parents=[common],
                       help="enhance day images toward night statistics")
    p.add_argument("--images", required=True, help="input image directory")
    p.add_argument("--prior", required=True, help="night prior JSON")
    p.add_argument("--out", required=True, help="output image directory")
    p.add_argument("--boxes", default=None,
                   help="optional detection JSON supplying per-image boxes "
                        "(image_id = file stem)")
    p.set_defaults(func=_cmd_glt)

    p = sub.add_parser("stats", parents=[common],
                       help="aggregate a night prior from an image directory")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="output prior JSON")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("fuse", parents=[common],
                       help="fuse teacher and proxy detections into pseudo-labels")
    p.add_argument("--teacher", required=True, help="teacher detection JSON")
    p.add_argument("--proxy", required=True, help="proxy detection JSON")
    p.add_argument("--out", required=True, help="output pseudo-label JSON")
    p.add_argument("--tau-cls", type=float, default=None)
    p.add_argument("--tau-loc", type=float, default=None)
    p.add_argument("--tau-lb", type=float, default=None)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("ait-sweep", parents=[common],
                       help="sweep fusion thresholds and decay over grids")
    p.add_argument("--teacher", required=True)
    p.add_argument("--proxy", required=True)
    p.add_argument("--gt", required=True, help="ground-truth detection JSON")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--tau-cls-grid", default="0.8")
    p.add_argument("--tau-loc-grid", default="0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--gamma-grid", default="0.05")
    p.set_defaults(func=_cmd_ait_sweep)

    p = sub.add_parser("simulate", parents=[common],
                       help="run the closed adaptation loop from a config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score detections against ground truth")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--table", default=None, help="write the text table here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": "runtime", "message": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
