"""Verification protocols and metrics over same/not-same image pairs.

Recognition scoring is out of process: plans and pair manifests go out as
CSV, similarity scores come back as CSV, and this module turns them into
100%-EER, cross-validated accuracy, and nAUC. Higher scores mean "same".
"""
import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import GalleryExhaustedError, InvalidArgumentError

FACE_PRESERVING = "face_preserving"
CONTEXT_PRESERVING = "context_preserving"
INTRA = "intra"
DEFAULT_FOLDS = 10


@dataclass(frozen=True)
class PairEntry:
    ref1: str
    ref2: str
    same: bool


@dataclass
class PairList:
    entries: List[PairEntry]
    folds: List[Tuple[int, int]]  # half-open [start, end) index ranges

    def __post_init__(self):
        covered = sorted(self.folds)
        pos = 0
        for start, end in covered:
            if start != pos or end < start:
                raise InvalidArgumentError("folds must partition the entries")
            pos = end
        if pos != len(self.entries):
            raise InvalidArgumentError("folds must cover every entry")


def make_folds(n: int, fold_count: int) -> List[Tuple[int, int]]:
    """Contiguous near-equal fold boundaries."""
    if fold_count < 1 or fold_count > max(1, n):
        raise InvalidArgumentError(f"cannot split {n} entries into {fold_count} folds")
    return [(i * n // fold_count, (i + 1) * n // fold_count) for i in range(fold_count)]


@dataclass
class ScoredPairList:
    pairs: PairList
    scores: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (len(self.pairs.entries),):
            raise InvalidArgumentError("one score per pair required")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidArgumentError("scores must be finite")


@dataclass(frozen=True)
class PlanEntry:
    pair_index: int
    which_side: str  # "first" | "second"
    source: str
    target: str
    same: bool
    other: str  # the untouched side's image
    substituted: bool = False


@dataclass
class SwapPlan:
    mode: str
    trial: str  # "A" | "B"
    seed: int
    entries: List[PlanEntry]
    substitutions: int = 0

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "trial": self.trial,
            "seed": self.seed,
            "substitutions": self.substitutions,
            "entries": [
                {
                    "pair_index": e.pair_index,
                    "which_side": e.which_side,
                    "source": e.source,
                    "target": e.target,
                    "same": e.same,
                    "other": e.other,
                    "substituted": e.substituted,
                }
                for e in self.entries
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SwapPlan":
        payload = json.loads(text)
        entries = [PlanEntry(
            pair_index=int(e["pair_index"]),
            which_side=e["which_side"],
            source=e["source"],
            target=e["target"],
            same=bool(e["same"]),
            other=e["other"],
            substituted=bool(e.get("substituted", False)),
        ) for e in payload["entries"]]
        return cls(mode=payload["mode"], trial=payload["trial"],
                   seed=int(payload["seed"]), entries=entries,
                   substitutions=int(payload.get("substitutions", 0)))


def _subject_of(gallery: Dict[str, Sequence[str]]) -> Dict[str, str]:
    rev = {}
    for subject, images in gallery.items():
        for img in images:
            rev[img] = subject
    return rev


def _side_ref(entry: PairEntry, trial: str) -> Tuple[str, str, str]:
    if trial == "A":
        return entry.ref1, entry.ref2, "first"
    if trial == "B":
        return entry.ref2, entry.ref1, "second"
    raise InvalidArgumentError(f"trial must be 'A' or 'B', got {trial!r}")


def build_inter_plan(pairs: PairList, gallery: Dict[str, Sequence[str]],
                     seed: int, mode: str, trial: str = "A") -> SwapPlan:
    """Swap one side of every pair with a randomly drawn other subject.

    face_preserving keeps the pair image as the swap source (its face moves
    to a new context); context_preserving keeps it as the target. The drawn
    subject always differs from both pair subjects.
    """
    if mode not in (FACE_PRESERVING, CONTEXT_PRESERVING):
        raise InvalidArgumentError(f"unknown inter mode {mode!r}")
    rev = _subject_of(gallery)
    rng = random.Random(seed)
    entries = []
    for i, entry in enumerate(pairs.entries):
        ref, other, side = _side_ref(entry, trial)
        for r in (entry.ref1, entry.ref2):
            if r not in rev:
                raise InvalidArgumentError(f"pair image {r!r} not present in the gallery")
        excluded = {rev[entry.ref1], rev[entry.ref2]}
        eligible = sorted(s for s in gallery if s not in excluded and len(gallery[s]) > 0)
        if not eligible:
            raise GalleryExhaustedError(
                f"no gallery subject left for pair {i} once {sorted(excluded)} are excluded")
        subject = rng.choice(eligible)
        image = rng.choice(sorted(gallery[subject]))
        if mode == FACE_PRESERVING:
            source, target = ref, image
        else:
            source, target = image, ref
        entries.append(PlanEntry(pair_index=i, which_side=side, source=source,
                                 target=target, same=entry.same, other=other))
    return SwapPlan(mode=mode, trial=trial, seed=seed, entries=entries)


def build_intra_plan(pairs: PairList, gallery: Dict[str, Sequence[str]],
                     seed: int, trial: str = "A") -> SwapPlan:
    """Swap one side of every pair onto another photo of the same subject.

    A not-same pair whose swapped side belongs to a single-photo subject is
    substituted with a multi-photo subject (deterministically by seed); the
    substitution count is recorded on the plan.
    """
    rev = _subject_of(gallery)
    rng = random.Random(seed)
    entries = []
    substitutions = 0
    for i, entry in enumerate(pairs.entries):
        ref, other, side = _side_ref(entry, trial)
        if ref not in rev or other not in rev:
            raise InvalidArgumentError(f"pair {i} references images missing from the gallery")
        subject = rev[ref]
        images = sorted(gallery[subject])
        substituted = False
        if len(images) < 2:
            if entry.same:
                raise InvalidArgumentError(
                    f"same pair {i} uses single-photo subject {subject!r}")
            other_subject = rev[other]
            eligible = sorted(s for s in gallery
                              if len(gallery[s]) >= 2 and s != other_subject)
            if not eligible:
                raise GalleryExhaustedError(
                    f"no multi-photo subject available to replace {subject!r}")
            subject = rng.choice(eligible)
            images = sorted(gallery[subject])
            ref = rng.choice(images)
            substituted = True
            substitutions += 1
        target = rng.choice(sorted(set(images) - {ref}))
        entries.append(PlanEntry(pair_index=i, which_side=side, source=ref,
                                 target=target, same=entry.same, other=other,
                                 substituted=substituted))
    return SwapPlan(mode=INTRA, trial=trial, seed=seed, entries=entries,
                    substitutions=substitutions)


# --- metrics -------------------------------------------------------------------

def roc_points(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """ROC as (FAR, TPR) rows from (0,0) to (1,1), one point per distinct score.

    The decision rule is "same iff score >= threshold"; tied scores collapse
    into a single step, which trapezoidal integration averages.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise InvalidArgumentError("both classes are required for ROC metrics")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    distinct = np.nonzero(np.diff(s))[0]  # last index of each tie group
    ends = np.concatenate([distinct, [s.size - 1]])
    tp = np.cumsum(l)[ends]
    fp = np.cumsum(~l)[ends]
    pts = np.zeros((ends.size + 1, 2))
    pts[1:, 0] = fp / neg
    pts[1:, 1] = tp / pos
    return pts


def nauc_from_roc(pts: np.ndarray) -> float:
    """Percent area under the ROC curve (trapezoidal)."""
    return 100.0 * float(np.trapezoid(pts[:, 1], pts[:, 0]))


def eer100_from_roc(pts: np.ndarray) -> float:
    """100*(1 - rate at the FAR = FRR crossing), linearly interpolated."""
    far = pts[:, 0]
    frr = 1.0 - pts[:, 1]
    diff = far - frr  # monotone nondecreasing along the sweep
    k = int(np.searchsorted(diff >= 0, True))
    if k == 0:
        eer = far[0]
    else:
        d0, d1 = diff[k - 1], diff[k]
        if d1 == d0:
            eer = far[k]
        else:
            t = -d0 / (d1 - d0)
            eer = far[k - 1] + t * (far[k] - far[k - 1])
    return 100.0 * (1.0 - eer)


def _threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct scores, plus accept-all/reject-all.

    Midpoints generalize to held-out folds (a threshold sitting exactly on a
    training score misclassifies unseen scores just below it).
    """
    s = np.unique(scores)
    mids = (s[:-1] + s[1:]) / 2.0
    return np.concatenate([[s[0] - 1.0], mids, [s[-1] + 1.0]])


def _best_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Threshold maximizing accuracy of "same iff score >= t" (lowest on ties)."""
    best_t = None
    best_acc = -1.0
    for t in _threshold_candidates(scores):
        pred = scores >= t
        acc = float(np.mean(pred == labels))
        if acc > best_acc:
            best_acc = acc
            best_t = t
    return float(best_t)


@dataclass
class VerificationMetrics:
    eer100: float
    acc_mean: float
    acc_std: float
    nauc_mean: float
    nauc_std: float
    nauc_global: float
    roc: np.ndarray
    fold_acc: List[float] = field(default_factory=list)
    fold_nauc: List[float] = field(default_factory=list)

    def report(self) -> dict:
        """Row shaped like the tables: value ± std columns."""
        return {
            "eer100": self.eer100,
            "acc_mean": self.acc_mean,
            "acc_std": self.acc_std,
            "nauc_mean": self.nauc_mean,
            "nauc_std": self.nauc_std,
        }


def format_row(report: dict) -> str:
    """Render one report as a `value±std` table row, e.g. `Acc. 98.10±0.90`."""
    return (f"100%-EER {report['eer100']:.2f}  "
            f"Acc. {report['acc_mean']:.2f}±{report['acc_std']:.2f}  "
            f"nAUC {report['nauc_mean']:.2f}±{report['nauc_std']:.2f}")


def _std(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values), ddof=1))


def verification_metrics(scored: ScoredPairList) -> VerificationMetrics:
    """Global EER and ROC; accuracy and nAUC cross-validated over the folds.

    Accuracy picks the best threshold on the other folds and evaluates on the
    held-out fold; nAUC is computed inside each fold. Reported as mean with
    sample standard deviation across folds.
    """
    scores = scored.scores
    labels = np.asarray([e.same for e in scored.pairs.entries], dtype=bool)
    pts = roc_points(scores, labels)
    eer100 = eer100_from_roc(pts)
    nauc_global = nauc_from_roc(pts)

    fold_acc = []
    fold_nauc = []
    for start, end in scored.pairs.folds:
        test = np.zeros(labels.size, dtype=bool)
        test[start:end] = True
        if test.all() or not test.any():
            raise InvalidArgumentError("fold structure leaves no train/test split")
        t = _best_threshold(scores[~test], labels[~test])
        pred = scores[test] >= t
        fold_acc.append(float(np.mean(pred == labels[test])) * 100.0)
        fold_nauc.append(nauc_from_roc(roc_points(scores[test], labels[test])))

    return VerificationMetrics(
        eer100=eer100,
        acc_mean=float(np.mean(fold_acc)),
        acc_std=_std(fold_acc),
        nauc_mean=float(np.mean(fold_nauc)),
        nauc_std=_std(fold_nauc),
        nauc_global=nauc_global,
        roc=pts,
        fold_acc=fold_acc,
        fold_nauc=fold_nauc,
    )


def average_trials(a: VerificationMetrics, b: VerificationMetrics) -> VerificationMetrics:
    """Mean of the two trials per metric; stds combined as the mean of stds."""
    return VerificationMetrics(
        eer100=(a.eer100 + b.eer100) / 2.0,
        acc_mean=(a.acc_mean + b.acc_mean) / 2.0,
        acc_std=(a.acc_std + b.acc_std) / 2.0,
        nauc_mean=(a.nauc_mean + b.nauc_mean) / 2.0,
        nauc_std=(a.nauc_std + b.nauc_std) / 2.0,
        nauc_global=(a.nauc_global + b.nauc_global) / 2.0,
        roc=np.zeros((0, 2)),
    )


# --- CSV / JSON surfaces --------------------------------------------------------

def save_pairs(pairs: PairList, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["img1", "img2", "same"])
        for e in pairs.entries:
            w.writerow([e.ref1, e.ref2, int(e.same)])


def load_pairs(path, fold_count: int = DEFAULT_FOLDS) -> PairList:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() == "img1":
                continue
            if len(row) != 3:
                raise InvalidArgumentError(f"pair row needs 3 columns: {row}")
            entries.append(PairEntry(ref1=row[0].strip(), ref2=row[1].strip(),
                                     same=row[2].strip() in ("1", "true", "True")))
    return PairList(entries=entries, folds=make_folds(len(entries), fold_count))


def save_scores(entries: Sequence[Tuple[str, str, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["img1", "img2", "score"])
        for r1, r2, s in entries:
            w.writerow([r1, r2, repr(float(s))])


def load_scores(pairs: PairList, path) -> ScoredPairList:
    table = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() == "img1":
                continue
            if len(row) != 3:
                raise InvalidArgumentError(f"score row needs 3 columns: {row}")
            table[(row[0].strip(), row[1].strip())] = float(row[2])
    scores = np.empty(len(pairs.entries))
    for i, e in enumerate(pairs.entries):
        key = (e.ref1, e.ref2)
        if key not in table:
            raise InvalidArgumentError(f"no score for pair {key}")
        scores[i] = table[key]
    return ScoredPairList(pairs=pairs, scores=scores)


def save_roc_csv(metrics: VerificationMetrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["far", "tpr"])
        for far, tpr in metrics.roc:
            w.writerow([repr(float(far)), repr(float(tpr))])


def save_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
