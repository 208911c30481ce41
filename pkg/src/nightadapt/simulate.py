"""Synthetic closed-loop harness for the adaptation mechanisms.

Real detector training is out of reach on a desk, so this module replaces
gradient descent with a scalar "skill" dynamic: a detector's skill sets its
per-object detection probability, box jitter, confidence level, and class
accuracy, and the student's skill is pulled toward the F1 of the
pseudo-labels that supervise it.  Everything downstream of detector
outputs (fusion, threshold adaptation, EMA, phase gates) is exercised
unchanged.  This substitution is the one deliberate departure from a real
training loop and is the reason the harness runs in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .boxes import BBox, Detection, DetectionSet, match_by_class_and_iou
from .errors import ValidationError
from .evaluation import EvalConfig, EvalReport, evaluate
from .fusion import (
    FusionConfig,
    filter_initial,
    merge_pseudo_labels,
    mine_consistent,
)
from .schedule import PhasePlan, ema_update, phase_at
from .thresholding import ThresholdState, ThresholdUpdate, update_threshold

_CONF_EPS = 1e-6


@dataclass(slots=True)
class SceneConfig:
    """Parameters for synthetic ground-truth scene generation."""

    canvas_width: int = 256
    canvas_height: int = 256
    class_count: int = 5
    mean_objects: float = 4.0
    min_size: float = 8.0
    max_size: float = 96.0
    difficulty_jitter: float = 0.1

    def __post_init__(self) -> None:
        if self.canvas_width < 8 or self.canvas_height < 8:
            raise ValidationError("canvas must be at least 8x8")
        if self.class_count < 1:
            raise ValidationError("class_count must be >= 1")
        if self.mean_objects < 0:
            raise ValidationError("mean_objects must be >= 0")
        if not (0 < self.min_size <= self.max_size):
            raise ValidationError("need 0 < min_size <= max_size")
        if self.max_size >= min(self.canvas_width, self.canvas_height):
            raise ValidationError("max_size must fit inside the canvas")


@dataclass(slots=True)
class Scene:
    """One synthetic image: ground truth plus per-object difficulty."""

    image_id: str
    width: int
    height: int
    gt: DetectionSet
    class_count: int
    difficulty: list[float]


@dataclass(slots=True)
class DetectorModel:
    """A parameterized noisy detector standing in for a trained network.

    ``skill`` drives detection probability, confidence level, and class
    accuracy; ``loc_noise`` scales box jitter as a fraction of box size;
    ``conf_sharpness`` concentrates the confidence distribution;
    ``fp_rate`` is the expected number of false positives per scene.
    """

    skill: float
    loc_noise: float = 0.1
    conf_sharpness: float = 12.0
    fp_rate: float = 0.5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.skill <= 1.0):
            raise ValidationError(f"skill must be in [0, 1], got {self.skill}")
        if self.loc_noise < 0 or self.fp_rate < 0 or self.conf_sharpness <= 0:
            raise ValidationError(
                "need loc_noise >= 0, fp_rate >= 0, conf_sharpness > 0"
            )


@dataclass(slots=True)
class LoopReport:
    """Per-epoch traces plus the final evaluation of the student."""

    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)
    f1: list[float] = field(default_factory=list)
    tau: list[float] = field(default_factory=list)
    teacher_skill: list[float] = field(default_factory=list)
    proxy_skill: list[float] = field(default_factory=list)
    student_skill: list[float] = field(default_factory=list)
    n_initial: list[int] = field(default_factory=list)
    n_extended: list[int] = field(default_factory=list)
    threshold_history: list[ThresholdUpdate] = field(default_factory=list)
    final_eval: EvalReport | None = None

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tau": self.tau,
            "teacher_skill": self.teacher_skill,
            "proxy_skill": self.proxy_skill,
            "student_skill": self.student_skill,
            "n_initial": self.n_initial,
            "n_extended": self.n_extended,
            "threshold_history": [
                {
                    "iteration": r.iteration,
                    "tau": r.tau,
                    "mu": None if math.isnan(r.mu) else r.mu,
                    "sigma": None if math.isnan(r.sigma) else r.sigma,
                }
                for r in self.threshold_history
            ],
            "final_eval": self.final_eval.to_dict() if self.final_eval else None,
        }


def generate_scenes(n: int, cfg: SceneConfig, rng) -> list[Scene]:
    """Generate ``n`` scenes with Poisson object counts and log-uniform sizes.

    Difficulty tracks object size (smaller is harder) with a little jitter.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    log_lo, log_hi = math.log(cfg.min_size), math.log(cfg.max_size)
    scenes: list[Scene] = []
    for idx in range(n):
        count = int(rng.poisson(cfg.mean_objects))
        dets: list[Detection] = []
        difficulty: list[float] = []
        if count:
            w = np.exp(rng.uniform(log_lo, log_hi, count))
            h = np.exp(rng.uniform(log_lo, log_hi, count))
            x1 = rng.uniform(0.0, cfg.canvas_width - w)
            y1 = rng.uniform(0.0, cfg.canvas_height - h)
            cls = rng.integers(0, cfg.class_count, count)
            jitter = rng.uniform(-cfg.difficulty_jitter, cfg.difficulty_jitter, count)
            if log_hi > log_lo:
                ease = (0.5 * (np.log(w) + np.log(h)) - log_lo) / (log_hi - log_lo)
            else:
                ease = np.full(count, 0.5)
            diff = np.clip(1.0 - ease + jitter, 0.0, 1.0)
            for i in range(count):
                box = BBox(float(x1[i]), float(y1[i]), float(x1[i] + w[i]), float(y1[i] + h[i]))
                dets.append(Detection(box, int(cls[i]), 1.0))
                difficulty.append(float(diff[i]))
        scenes.append(
            Scene(
                image_id=f"scene_{idx:05d}",
                width=cfg.canvas_width,
                height=cfg.canvas_height,
                gt=DetectionSet(f"scene_{idx:05d}", dets, "ground_truth"),
                class_count=cfg.class_count,
                difficulty=difficulty,
            )
        )
    return scenes


def _repair_interval(lo: float, hi: float, limit: float) -> tuple[float, float]:
    """Clip an interval into [0, limit], keeping extent of at least 0.5."""
    lo, hi = (hi, lo) if hi < lo else (lo, hi)
    lo = max(0.0, min(lo, limit - 0.5))
    hi = max(lo + 0.5, min(hi, limit))
    return lo, hi


def detect(model: DetectorModel, scene: Scene, rng, source_tag: str = "teacher") -> DetectionSet:
    """Sample one detector output for a scene.

    Each object is found with probability ``skill * (1 - d * (1 - skill))``
    for difficulty ``d``; found boxes get Gaussian corner jitter of scale
    ``loc_noise * (1 - skill) * size``, Beta-distributed confidence with
    mean ``skill * (1 - 0.5 * d)``, and the correct class with probability
    ``skill + (1 - skill) / class_count``.  A Poisson number of uniform
    false positives with low (mean 0.3) confidence is appended.  A skill-1
    model is the perfect-detector limit and reports confidence exactly 1.
    """
    skill = model.skill
    n = len(scene.difficulty)
    dets: list[Detection] = []
    if n:
        d = np.asarray(scene.difficulty)
        gt_boxes = scene.gt.detections
        p_detect = skill * (1.0 - d * (1.0 - skill))
        keep = rng.random(n) < p_detect
        jitter = rng.normal(0.0, 1.0, (n, 4))
        mean_conf = np.clip(skill * (1.0 - 0.5 * d), _CONF_EPS, 1.0 - _CONF_EPS)
        conf = rng.beta(mean_conf * model.conf_sharpness,
                        (1.0 - mean_conf) * model.conf_sharpness, n)
        class_u = rng.random(n)
        wrong = rng.integers(0, max(scene.class_count - 1, 1), n)
        p_correct = skill + (1.0 - skill) / scene.class_count
        for i in range(n):
            if not keep[i]:
                continue
            gt_box = gt_boxes[i].box
            sx = model.loc_noise * (1.0 - skill) * gt_box.width
            sy = model.loc_noise * (1.0 - skill) * gt_box.height
            x1, x2 = _repair_interval(
                gt_box.x1 + jitter[i, 0] * sx, gt_box.x2 + jitter[i, 1] * sx, scene.width
            )
            y1, y2 = _repair_interval(
                gt_box.y1 + jitter[i, 2] * sy, gt_box.y2 + jitter[i, 3] * sy, scene.height
            )
            if class_u[i] < p_correct:
                cls = gt_boxes[i].class_id
            else:
                cls = int(wrong[i])
                if cls >= gt_boxes[i].class_id:
                    cls += 1
                cls %= scene.class_count
            c = 1.0 if skill >= 1.0 else float(conf[i])
            dets.append(Detection(BBox(x1, y1, x2, y2), cls, c))
    n_fp = int(rng.poisson(model.fp_rate))
    if n_fp:
        fp_w = rng.uniform(4.0, scene.width / 3.0, n_fp)
        fp_h = rng.uniform(4.0, scene.height / 3.0, n_fp)
        fp_x = rng.uniform(0.0, scene.width - fp_w)
        fp_y = rng.uniform(0.0, scene.height - fp_h)
        fp_cls = rng.integers(0, scene.class_count, n_fp)
        fp_conf = rng.beta(0.3 * model.conf_sharpness, 0.7 * model.conf_sharpness, n_fp)
        for i in range(n_fp):
            box = BBox(float(fp_x[i]), float(fp_y[i]),
                       float(fp_x[i] + fp_w[i]), float(fp_y[i] + fp_h[i]))
            dets.append(Detection(box, int(fp_cls[i]), float(fp_conf[i])))
    return DetectionSet(scene.image_id, dets, source_tag)


def _quality(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def run_adaptation_loop(
    plan: PhasePlan,
    fusion_cfg: FusionConfig,
    threshold_state: ThresholdState,
    models: tuple[DetectorModel, DetectorModel, DetectorModel],
    scenes: Sequence[Scene],
    rng,
    lr: float = 0.1,
    use_band_mining: bool = True,
    use_threshold_adaptation: bool = True,
    n_epochs: int | None = None,
) -> LoopReport:
    """Run the teacher/proxy/student loop over the scene set.

    One epoch is one pass over ``scenes`` and counts as one plan iteration.
    During burn-in nothing learns; from burn-up on, the student's skill is
    pulled toward the fused pseudo-label F1 and the teacher's skill follows
    the student by EMA.  The proxy is supervised by the initial labels:
    its skill moves toward ``precision * teacher_skill`` at a rate scaled
    by label recall, so sparse high-precision supervision holds it steady
    while noisy labels genuinely degrade it.  Band mining starts at the
    plan's first gate, threshold adaptation at the second, each
    additionally subject to its ``use_*`` switch.  The live threshold
    feeds fusion as ``tau_cls``; matched band confidences from mining feed
    the threshold update once per epoch.
    """
    if lr < 0 or lr > 1:
        raise ValidationError(f"lr must be in [0, 1], got {lr}")
    teacher, proxy, student = models
    epochs = plan.total_iters if n_epochs is None else n_epochs
    if epochs < 0:
        raise ValidationError(f"n_epochs must be >= 0, got {epochs}")
    master = int(rng.integers(0, 2**63))
    t_skill, p_skill, s_skill = teacher.skill, proxy.skill, student.skill
    state = threshold_state
    report = LoopReport()

    for epoch in range(epochs):
        flags = phase_at(plan, epoch)
        mining_on = flags.in_burn_up and flags.ptc_enabled and use_band_mining
        rng_teacher = np.random.default_rng(
            np.random.SeedSequence(entropy=master, spawn_key=(epoch, 0))
        )
        rng_proxy = np.random.default_rng(
            np.random.SeedSequence(entropy=master, spawn_key=(epoch, 1))
        )
        teacher_now = replace(teacher, skill=t_skill)
        proxy_now = replace(proxy, skill=p_skill)
        live_cfg = FusionConfig(
            tau_cls=state.tau, tau_loc=fusion_cfg.tau_loc,
            tau_lb=min(fusion_cfg.tau_lb, state.tau),
        )
        tp = fp = fn = 0
        tp_i = fp_i = fn_i = 0
        n_init = n_ext = 0
        matched_confs: list[float] = []
        for scene in scenes:
            teacher_dets = detect(teacher_now, scene, rng_teacher, "teacher")
            initial = filter_initial(teacher_dets, live_cfg)
            if mining_on:
                proxy_dets = detect(proxy_now, scene, rng_proxy, "proxy")
                extended = mine_consistent(teacher_dets, proxy_dets, live_cfg)
                labels = merge_pseudo_labels(initial, extended)
                matched_confs.extend(lab.confidence for lab in extended.labels)
                n_ext += len(extended)
            else:
                labels = initial
            n_init += len(initial)
            label_set = DetectionSet(scene.image_id, labels.labels, "teacher")
            matches = match_by_class_and_iou(label_set, scene.gt, 0.5)
            tp += len(matches)
            fp += len(labels) - len(matches)
            fn += len(scene.gt) - len(matches)
            if mining_on:
                init_set = DetectionSet(scene.image_id, initial.labels, "teacher")
                init_matches = match_by_class_and_iou(init_set, scene.gt, 0.5)
            else:
                init_matches = matches
            tp_i += len(init_matches)
            fp_i += len(initial) - len(init_matches)
            fn_i += len(scene.gt) - len(init_matches)

        precision, recall, f1 = _quality(tp, fp, fn)
        precision_init, recall_init, _ = _quality(tp_i, fp_i, fn_i)

        if flags.in_burn_up:
            s_skill = min(1.0, max(0.0, s_skill + lr * (f1 - s_skill)))
            proxy_target = precision_init * t_skill
            p_skill = min(
                1.0, max(0.0, p_skill + lr * recall_init * (proxy_target - p_skill))
            )
            t_skill = ema_update(t_skill, s_skill, plan.ema_alpha)
        if flags.ait_enabled and use_threshold_adaptation:
            state = update_threshold(state, matched_confs, epoch)

        report.precision.append(precision)
        report.recall.append(recall)
        report.f1.append(f1)
        report.tau.append(state.tau)
        report.teacher_skill.append(t_skill)
        report.proxy_skill.append(p_skill)
        report.student_skill.append(s_skill)
        report.n_initial.append(n_init)
        report.n_extended.append(n_ext)

    report.threshold_history = list(state.history)
    rng_student = np.random.default_rng(
        np.random.SeedSequence(entropy=master, spawn_key=(epochs, 2))
    )
    student_now = replace(student, skill=s_skill)
    dets_by_image = {
        scene.image_id: detect(student_now, scene, rng_student, "student")
        for scene in scenes
    }
    gt_by_image = {scene.image_id: scene.gt for scene in scenes}
    report.final_eval = evaluate(dets_by_image, gt_by_image, EvalConfig())
    return report
