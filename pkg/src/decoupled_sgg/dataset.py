"""Synthetic moving-shapes videos, corpus files, and compositional splits.

Each video shows a few coloured shapes drifting across a dark frame. Relation
labels are never sampled: they are recomputed from the box geometry of every
frame by :func:`relations_between`, so stored labels can always be re-derived.

Corpus layout on disk::

    header.json          vocabularies, generator config, seed
    annotations.jsonl    one record per frame
    frames/<video>/<t>.png
    manifest.json        sha256 of every file above
    split.json           (written by make-split)
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .errors import AnnotationParseError, ConfigError, InfeasibleSplitError, InvalidInputError
from .geometry import Box, iou
from .structures import FrameAnnotation, Triplet, TripletClass, VideoAnnotation

FORMAT_VERSION = 1

KNOWN_RELATIONS = ("above", "below", "left_of", "right_of", "overlapping", "containing", "near")

COLORS = {
    "white": (235, 235, 235), "red": (220, 40, 40), "green": (40, 200, 60), "blue": (50, 90, 230),
    "yellow": (230, 220, 40), "magenta": (210, 50, 210), "cyan": (40, 210, 220), "orange": (240, 140, 30),
}
SHAPES = ("rectangle", "ellipse", "triangle", "diamond")

DEFAULT_CATEGORIES = (
    ("agent", "rectangle", "white"),
    ("red_rectangle", "rectangle", "red"),
    ("green_ellipse", "ellipse", "green"),
    ("blue_triangle", "triangle", "blue"),
    ("yellow_diamond", "diamond", "yellow"),
    ("magenta_ellipse", "ellipse", "magenta"),
    ("cyan_rectangle", "rectangle", "cyan"),
    ("orange_triangle", "triangle", "orange"),
    ("green_diamond", "diamond", "green"),
)


@dataclass
class GeneratorConfig:
    num_videos: int = 200
    frames_per_video: int = 8
    image_size: int = 64
    categories: tuple = DEFAULT_CATEGORIES
    relations: tuple = KNOWN_RELATIONS
    subject_fixed: bool = True
    objects_per_frame: tuple[int, int] = (1, 3)
    size_range: tuple[float, float] = (0.15, 0.3)
    max_speed: float = 0.02
    jitter: float = 0.004
    margin: float = 0.05
    near_threshold: float = 0.25

    def __post_init__(self):
        self.categories = tuple(tuple(c) for c in self.categories)
        self.relations = tuple(self.relations)
        self.objects_per_frame = tuple(self.objects_per_frame)
        self.size_range = tuple(self.size_range)
        if len(self.categories) < 6:
            raise ConfigError(f"need at least 6 object categories, got {len(self.categories)}")
        if len(self.relations) < 6:
            raise ConfigError(f"need at least 6 relations, got {len(self.relations)}")
        unknown = set(self.relations) - set(KNOWN_RELATIONS)
        if unknown:
            raise ConfigError(f"unknown relations {sorted(unknown)}; supported: {KNOWN_RELATIONS}")
        for name, shape, color in self.categories:
            if shape not in SHAPES or color not in COLORS:
                raise ConfigError(f"category {name!r}: unsupported shape/color {shape}/{color}")
        lo, hi = self.objects_per_frame
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad objects_per_frame {self.objects_per_frame}")
        if self.num_videos < 0 or self.frames_per_video < 1:
            raise ConfigError("num_videos must be >= 0 and frames_per_video >= 1")

    @property
    def object_names(self) -> list[str]:
        return [c[0] for c in self.categories]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, data: dict) -> GeneratorConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator config fields: {sorted(unknown)}")
        return cls(**data)


def relations_between(sub: Box, obj: Box, cfg: GeneratorConfig) -> tuple[int, ...]:
    """Geometric relation oracle, returning indices into ``cfg.relations``.

    above/below/left_of/right_of compare centers with a margin; overlapping
    means positive IoU; containing means the subject strictly encloses the
    object; near means disjoint with centers closer than ``near_threshold``
    times the frame diagonal.
    """
    m = cfg.margin
    overlap = iou(sub, obj)
    sx0, sy0, sx1, sy1 = sub.corners
    ox0, oy0, ox1, oy1 = obj.corners
    dist = math.hypot(sub.cx - obj.cx, sub.cy - obj.cy)
    holds = {
        "above": sub.cy < obj.cy - m,
        "below": sub.cy > obj.cy + m,
        "left_of": sub.cx < obj.cx - m,
        "right_of": sub.cx > obj.cx + m,
        "overlapping": overlap > 0,
        "containing": sx0 < ox0 and sy0 < oy0 and ox1 < sx1 and oy1 < sy1,
        "near": overlap == 0 and dist < cfg.near_threshold * math.sqrt(2),
    }
    return tuple(i for i, name in enumerate(cfg.relations) if holds[name])


# ---------------------------------------------------------------- generation


def _layout(rng: np.random.Generator, cfg: GeneratorConfig):
    """Boxes (cx, cy, w, h) in a local frame plus category ids. Index 0 is the subject in agent mode."""
    lo, hi = cfg.size_range
    n_obj = int(rng.integers(cfg.objects_per_frame[0], cfg.objects_per_frame[1] + 1))
    if cfg.subject_fixed:
        agent = [0.0, 0.0, rng.uniform(lo, hi) * 1.3, rng.uniform(lo, hi) * 1.3]
        boxes, cats = [agent], [0]
        for _ in range(n_obj):
            w, h = rng.uniform(lo, hi, size=2)
            intent = cfg.relations[int(rng.integers(len(cfg.relations)))]
            boxes.append(_place(rng, agent, w, h, intent, cfg))
            cats.append(int(rng.integers(1, len(cfg.categories))))
        return np.array(boxes), cats
    boxes, cats = [], []
    for k in range(n_obj + 1):
        w, h = rng.uniform(lo, hi, size=2)
        if k == 0:
            boxes.append([0.0, 0.0, w, h])
        else:
            anchor = boxes[int(rng.integers(len(boxes)))]
            intent = cfg.relations[int(rng.integers(len(cfg.relations)))]
            boxes.append(_place(rng, anchor, w, h, intent, cfg))
        cats.append(int(rng.integers(len(cfg.categories))))
    return np.array(boxes), cats


def _place(rng, anchor, w, h, intent, cfg):
    """Position a w x h box so that ``anchor`` most likely holds ``intent`` towards it."""
    ax, ay, aw, ah = anchor
    small = rng.uniform(-cfg.margin, cfg.margin) * 0.6
    if intent in ("above", "below", "left_of", "right_of"):
        vertical = intent in ("above", "below")
        extent = (ah + h) / 2 if vertical else (aw + w) / 2
        gap = extent + rng.uniform(0.02, 0.25)
        sign = 1.0 if intent in ("above", "left_of") else -1.0
        dx, dy = (small, sign * gap) if vertical else (sign * gap, small)
        return [ax + dx, ay + dy, w, h]
    if intent == "overlapping":
        return [ax + rng.uniform(-0.5, 0.5) * aw, ay + rng.uniform(-0.5, 0.5) * ah, w, h]
    if intent == "containing":
        w, h = min(w, aw * 0.6), min(h, ah * 0.6)
        return [ax + rng.uniform(-0.15, 0.15) * aw, ay + rng.uniform(-0.15, 0.15) * ah, w, h]
    # near: disjoint, small gap in a random direction
    angle = rng.uniform(0, 2 * math.pi)
    reach = max(abs(math.cos(angle)) * (aw + w) / 2, abs(math.sin(angle)) * (ah + h) / 2)
    r = reach / max(abs(math.cos(angle)), abs(math.sin(angle))) + rng.uniform(0.01, 0.06)
    return [ax + r * math.cos(angle), ay + r * math.sin(angle), w, h]


def _trajectory(rng, boxes: np.ndarray, cfg: GeneratorConfig) -> np.ndarray:
    """Per-frame boxes ``(T, n, 4)``: shared drift plus small jitter, kept inside the frame."""
    t_len = cfg.frames_per_video
    boxes = boxes.copy()
    boxes[:, 2:] = np.minimum(boxes[:, 2:], 0.9)
    speed = rng.uniform(0, cfg.max_speed)
    angle = rng.uniform(0, 2 * math.pi)
    drift = np.array([math.cos(angle), math.sin(angle)]) * speed
    steps = np.arange(t_len)[:, None, None] * drift[None, None, :]
    jitter = np.cumsum(rng.uniform(-cfg.jitter, cfg.jitter, size=(t_len, len(boxes), 2)), axis=0)
    jitter[0] = 0.0
    centers = boxes[None, :, :2] + steps + jitter  # (T, n, 2)
    half = boxes[None, :, 2:] / 2
    lo = (centers - half).min(axis=(0, 1))
    hi = (centers + half).max(axis=(0, 1))
    span = hi - lo
    scale = min(1.0, 0.98 / span.max())
    # shrink the whole scene when it does not fit, then shift it to a random feasible offset
    centers = (centers - lo) * scale
    sizes = np.broadcast_to(boxes[None, :, 2:] * scale, centers.shape)
    lo2 = (centers - sizes / 2).min(axis=(0, 1))
    hi2 = (centers + sizes / 2).max(axis=(0, 1))
    free = 1.0 - (hi2 - lo2)
    offset = -lo2 + rng.uniform(0, 1, size=2) * np.maximum(free, 0)
    centers = centers + offset
    return np.concatenate([centers, sizes], axis=-1)


def _frame_triplets(frame_boxes: np.ndarray, cats: Sequence[int], cfg: GeneratorConfig) -> FrameAnnotation:
    boxes = [Box.clamped(*b) for b in frame_boxes]
    if cfg.subject_fixed:
        pairs = [(0, j) for j in range(1, len(boxes))]
    else:
        pairs = [(i, j) for i in range(len(boxes)) for j in range(len(boxes)) if i != j]
    triplets = []
    for i, j in pairs:
        rels = relations_between(boxes[i], boxes[j], cfg)
        if rels:
            triplets.append(Triplet(boxes[i], cats[i], boxes[j], cats[j], rels))
    return FrameAnnotation(tuple(triplets))


def render_frame(boxes: Sequence[Box], cats: Sequence[int], cfg: GeneratorConfig) -> np.ndarray:
    """Draw shapes (largest first) on a dark background; returns ``(H, W, 3)`` uint8."""
    size = cfg.image_size
    img = np.full((size, size, 3), 20, dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    yy, xx = yy / size, xx / size
    for k in sorted(range(len(boxes)), key=lambda k: -boxes[k].area):
        b = boxes[k]
        _, shape, color = cfg.categories[cats[k]]
        u = (xx - b.cx) / (b.w / 2)
        v = (yy - b.cy) / (b.h / 2)
        if shape == "rectangle":
            mask = (np.abs(u) <= 1) & (np.abs(v) <= 1)
        elif shape == "ellipse":
            mask = u ** 2 + v ** 2 <= 1
        elif shape == "diamond":
            mask = np.abs(u) + np.abs(v) <= 1
        else:  # triangle, apex up
            mask = (v <= 1) & (v >= -1) & (np.abs(u) <= (v + 1) / 2)
        img[mask] = COLORS[color]
    return img


def _video_scene(cfg: GeneratorConfig, seed: int, index: int):
    rng = np.random.default_rng([seed, index])
    layout, cats = _layout(rng, cfg)
    return _trajectory(rng, layout, cfg), cats


def generate_synthetic(cfg: GeneratorConfig, seed: int) -> tuple[list[VideoAnnotation], list[np.ndarray]]:
    """Annotations and rendered frames ``(T, H, W, 3)`` for ``cfg.num_videos`` videos.

    Video ``i`` depends only on ``(seed, i)``.
    """
    videos, frames = [], []
    for i in range(cfg.num_videos):
        traj, cats = _video_scene(cfg, seed, i)
        anns, imgs = [], []
        for t in range(cfg.frames_per_video):
            anns.append(_frame_triplets(traj[t], cats, cfg))
            imgs.append(render_frame([Box.clamped(*b) for b in traj[t]], cats, cfg))
        videos.append(VideoAnnotation(f"v{i:05d}", anns, cfg.image_size, cfg.image_size))
        frames.append(np.stack(imgs))
    return videos, frames


# --------------------------------------------------------------------- files


@dataclass
class Corpus:
    objects: list[str]
    relations: list[str]
    videos: list[VideoAnnotation]
    generator: Optional[dict] = None
    seed: Optional[int] = None
    subject_class: Optional[int] = None
    root: Optional[Path] = None

    @property
    def num_objects(self) -> int:
        return len(self.objects)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def video(self, video_id: str) -> VideoAnnotation:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def load_frames(self, video_id: str) -> np.ndarray:
        """``(T, H, W, 3)`` uint8 frames of one video."""
        v = self.video(video_id)
        return np.stack([np.asarray(Image.open(self.root / "frames" / video_id / f"{t:03d}.png").convert("RGB"))
                         for t in range(len(v.frames))])


_TRIPLET_KEYS = {"subject_box", "subject_label", "object_box", "object_label", "relations"}
_RECORD_KEYS = {"video_id", "frame", "width", "height", "triplets"}


def _triplet_record(t: Triplet) -> dict:
    return {
        "subject_box": list(t.subject_box.as_tuple()),
        "subject_label": t.subject_label,
        "object_box": list(t.object_box.as_tuple()),
        "object_label": t.object_label,
        "relations": list(t.relations),
    }


def save_annotations(videos: Iterable[VideoAnnotation], path: Union[str, Path]) -> None:
    """Write one JSON line per frame; boxes are normalized center form."""
    with open(path, "w", encoding="utf-8") as fp:
        for v in videos:
            for t, frame in enumerate(v.frames):
                rec = {"video_id": v.video_id, "frame": t, "width": v.width, "height": v.height,
                       "triplets": [_triplet_record(tr) for tr in frame.triplets]}
                fp.write(json.dumps(rec, sort_keys=True) + "\n")


def _parse_triplet(raw, where: str, num_objects, num_relations) -> Triplet:
    if not isinstance(raw, dict):
        raise AnnotationParseError(f"{where}: triplet must be an object")
    extra = set(raw) - _TRIPLET_KEYS
    missing = _TRIPLET_KEYS - set(raw)
    if extra or missing:
        raise AnnotationParseError(f"{where}: unknown fields {sorted(extra)} / missing fields {sorted(missing)}")
    try:
        sub = Box(*map(float, raw["subject_box"]))
        obj = Box(*map(float, raw["object_box"]))
    except (TypeError, InvalidInputError) as exc:
        raise AnnotationParseError(f"{where}: bad box: {exc}") from None
    labels = (raw["subject_label"], raw["object_label"])
    for lab in labels:
        if not isinstance(lab, int) or (num_objects is not None and not 0 <= lab < num_objects):
            raise AnnotationParseError(f"{where}: object label {lab!r} out of range")
    rels = raw["relations"]
    if not isinstance(rels, list) or not rels:
        raise AnnotationParseError(f"{where}: relations must be a non-empty list")
    for r in rels:
        if not isinstance(r, int) or (num_relations is not None and not 0 <= r < num_relations):
            raise AnnotationParseError(f"{where}: relation {r!r} out of range")
    return Triplet(sub, labels[0], obj, labels[1], tuple(rels))


def load_annotations(path: Union[str, Path], num_objects: Optional[int] = None,
                     num_relations: Optional[int] = None) -> list[VideoAnnotation]:
    """Parse an annotation file. Label ranges are checked against the sibling
    ``header.json`` unless vocabulary sizes are passed explicitly."""
    path = Path(path)
    header = path.parent / "header.json"
    if num_objects is None and num_relations is None and header.exists():
        head = json.loads(header.read_text())
        num_objects, num_relations = len(head["objects"]), len(head["relations"])
    videos: list[VideoAnnotation] = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise AnnotationParseError(f"line {lineno}: record must be an object")
            where = f"line {lineno} (video {rec.get('video_id')!r}, frame {rec.get('frame')!r})"
            extra, missing = set(rec) - _RECORD_KEYS, _RECORD_KEYS - set(rec)
            if extra or missing:
                raise AnnotationParseError(f"{where}: unknown fields {sorted(extra)} / missing fields {sorted(missing)}")
            vid, t = rec["video_id"], rec["frame"]
            if not isinstance(vid, str) or not isinstance(t, int):
                raise AnnotationParseError(f"{where}: video_id must be a string and frame an integer")
            if not videos or videos[-1].video_id != vid:
                if any(v.video_id == vid for v in videos):
                    raise AnnotationParseError(f"{where}: frames of a video must be contiguous")
                videos.append(VideoAnnotation(vid, [], rec["width"], rec["height"]))
            video = videos[-1]
            if t != len(video.frames):
                raise AnnotationParseError(f"{where}: expected frame {len(video.frames)}")
            if not isinstance(rec["triplets"], list):
                raise AnnotationParseError(f"{where}: triplets must be a list")
            video.frames.append(FrameAnnotation(tuple(
                _parse_triplet(raw, f"{where}, triplet {k}", num_objects, num_relations)
                for k, raw in enumerate(rec["triplets"]))))
    return videos


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(root: Path) -> None:
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name not in ("manifest.json",))
    manifest = {str(p.relative_to(root)): _sha256(p) for p in files}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def write_corpus(root: Union[str, Path], cfg: GeneratorConfig, seed: int,
                 videos: list[VideoAnnotation], frames: list[np.ndarray]) -> Corpus:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    header = {
        "format_version": FORMAT_VERSION,
        "objects": cfg.object_names,
        "relations": list(cfg.relations),
        "subject_class": 0 if cfg.subject_fixed else None,
        "generator": cfg.to_dict(),
        "seed": seed,
    }
    (root / "header.json").write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")
    save_annotations(videos, root / "annotations.jsonl")
    for v, imgs in zip(videos, frames):
        d = root / "frames" / v.video_id
        d.mkdir(parents=True, exist_ok=True)
        for t, img in enumerate(imgs):
            Image.fromarray(img).save(d / f"{t:03d}.png", optimize=False)
    write_manifest(root)
    return load_corpus(root)


def load_corpus(root: Union[str, Path]) -> Corpus:
    root = Path(root)
    try:
        head = json.loads((root / "header.json").read_text())
    except FileNotFoundError:
        raise AnnotationParseError(f"{root}: no header.json") from None
    if head.get("format_version") != FORMAT_VERSION:
        raise AnnotationParseError(f"{root}: unsupported format version {head.get('format_version')}")
    videos = load_annotations(root / "annotations.jsonl", len(head["objects"]), len(head["relations"]))
    return Corpus(head["objects"], head["relations"], videos, head.get("generator"), head.get("seed"),
                  head.get("subject_class"), root)


# --------------------------------------------------------------------- split


@dataclass
class SplitSpec:
    seen: frozenset
    unseen: frozenset
    train_videos: tuple[str, ...]
    test_videos: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seen": sorted(list(c) for c in self.seen),
            "unseen": sorted(list(c) for c in self.unseen),
            "train_videos": list(self.train_videos),
            "test_videos": list(self.test_videos),
            "meta": self.meta,
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> SplitSpec:
        data = json.loads(Path(path).read_text())
        return cls(frozenset(TripletClass(*c) for c in data["seen"]),
                   frozenset(TripletClass(*c) for c in data["unseen"]),
                   tuple(data["train_videos"]), tuple(data["test_videos"]), data.get("meta", {}))


def _split_for(videos: Sequence[VideoAnnotation], video_classes: list[set], holdout: set):
    test = [v.video_id for v, cls in zip(videos, video_classes) if cls & holdout]
    train_idx = [i for i, cls in enumerate(video_classes) if not cls & holdout]
    seen = set().union(*(video_classes[i] for i in train_idx)) if train_idx else set()
    return train_idx, test, seen


def _missing_component(holdout: set, seen: set) -> Optional[str]:
    subs = {c.subject for c in seen}
    objs = {c.object for c in seen}
    rels = {c.relation for c in seen}
    for c in sorted(holdout):
        if c.subject not in subs:
            return f"subject label {c.subject} of {tuple(c)}"
        if c.object not in objs:
            return f"object label {c.object} of {tuple(c)}"
        if c.relation not in rels:
            return f"relation {c.relation} of {tuple(c)}"
    return None


def make_compositional_split(videos: Sequence[VideoAnnotation],
                             holdout: Union[Sequence[TripletClass], int, float],
                             seed: int = 0, test_fraction: float = 0.0) -> SplitSpec:
    """Hold out triplet classes as unseen and exclude every video containing one from training.

    ``holdout`` is an explicit class list, a class count, or a fraction of the
    classes present. Counts and fractions draw classes in a seeded random
    order, skipping any that would leave one of its subject, object, or
    relation labels without a seen triplet. A further ``test_fraction`` of
    the remaining videos goes to test so seen classes are evaluated as well.
    """
    video_classes = [v.classes() for v in videos]
    present = set().union(*video_classes) if video_classes else set()
    rng = np.random.default_rng(seed)

    if isinstance(holdout, (int, float)) and not isinstance(holdout, bool):
        want = int(holdout) if isinstance(holdout, int) else int(round(holdout * len(present)))
        chosen: set = set()
        candidates = sorted(present)
        for k in rng.permutation(len(candidates)):
            if len(chosen) == want:
                break
            c = candidates[k]
            trial = chosen | {c}
            train_idx, _, seen = _split_for(videos, video_classes, trial)
            if train_idx and _missing_component(trial, seen) is None:
                chosen = trial
        if len(chosen) < want:
            raise InfeasibleSplitError(f"only {len(chosen)} of {want} requested classes can be held out")
        holdout_set = chosen
    else:
        holdout_set = {TripletClass(*c) for c in holdout}
        absent = sorted(holdout_set - present)
        if absent:
            raise InfeasibleSplitError(f"held-out classes never occur in the corpus: {absent}")

    train_idx, test, seen = _split_for(videos, video_classes, holdout_set)
    missing = _missing_component(holdout_set, seen)
    if missing:
        raise InfeasibleSplitError(f"holdout leaves no seen triplet with {missing}")

    train = [videos[i].video_id for i in train_idx]
    n_extra = int(round(test_fraction * len(train)))
    if n_extra:
        extra = set(rng.choice(len(train), size=n_extra, replace=False).tolist())
        test_ids = set(test) | {train[i] for i in extra}
        train = [v for i, v in enumerate(train) if i not in extra]
        test = [v.video_id for v in videos if v.video_id in test_ids]
        seen = set().union(*(video_classes[i] for i, v in enumerate(videos) if v.video_id in set(train)))
        missing = _missing_component(holdout_set, seen)
        if missing:
            raise InfeasibleSplitError(f"test_fraction leaves no seen triplet with {missing}")
    return SplitSpec(frozenset(seen), frozenset(holdout_set), tuple(train), tuple(test),
                     {"seed": seed, "test_fraction": test_fraction})


def check_split(split: SplitSpec, corpus_videos: Sequence[VideoAnnotation]) -> list[str]:
    """Problems with a split (empty list when sound)."""
    problems = []
    by_id = {v.video_id: v for v in corpus_videos}
    if split.seen & split.unseen:
        problems.append(f"seen and unseen overlap: {sorted(split.seen & split.unseen)}")
    for vid in split.train_videos:
        for t, frame in enumerate(by_id[vid].frames):
            leaked = frame.classes() & split.unseen
            if leaked:
                problems.append(f"train video {vid} frame {t} contains unseen {sorted(leaked)}")
    test_classes = set().union(*(by_id[v].classes() for v in split.test_videos)) if split.test_videos else set()
    for c in sorted(split.unseen - test_classes):
        problems.append(f"unseen class {tuple(c)} never occurs in test")
    missing = _missing_component(set(split.unseen), set(split.seen))
    if missing:
        problems.append(f"no seen triplet with {missing}")
    return problems
