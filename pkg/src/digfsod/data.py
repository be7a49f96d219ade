"""Procedural toy instance dataset.

Twelve classes of small synthetic object slices (colored geometric shapes on
a smooth terrain-like background) with base/novel splits, few-shot sampling,
flip/rotation augmentation and novel-class filtering.  Everything is a pure
function of explicit seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import StateError
from .seeding import derive_seed, numpy_rng

SHAPE_FAMILIES = ("disc", "cross", "chevron", "ring", "bar", "triangle", "grid", "blob")
PROVENANCES = ("real", "augmented", "generated")
SPLITS = ("train", "eval")

DEFAULT_SLICE_SIZE = 64


@dataclass(frozen=True)
class ClassSpec:
    """One toy object class: a shape family plus a color band."""

    class_id: int
    name: str
    shape_family: str
    color_range: tuple[tuple[float, float, float], tuple[float, float, float]]
    texture_seed_offset: int = 0

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if self.shape_family not in SHAPE_FAMILIES:
            raise ValueError(f"unknown shape_family {self.shape_family!r}")


@dataclass(frozen=True)
class InstanceSlice:
    """A single square object instance image with label and provenance."""

    pixels: np.ndarray  # (H, W, 3) float32 in [0, 1]
    class_id: int
    seed: int
    provenance: str = "real"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"pixels must be HxWx3, got {self.pixels.shape}")
        if self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValueError(f"slices must be square, got {self.pixels.shape}")

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class SplitConfig:
    n_base_classes: int = 8
    n_novel_classes: int = 4
    train_per_base: int = 200
    k_shot: int = 20
    eval_per_class: int = 100

    def __post_init__(self):
        if self.k_shot < 1:
            raise ValueError("k_shot must be >= 1")
        for name in ("n_base_classes", "train_per_base", "eval_per_class"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_novel_classes < 0:
            raise ValueError("n_novel_classes must be >= 0")


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # "slices/<class_id>/<seed>.png"
    class_id: int
    split: str
    provenance: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def seed(self) -> int:
        return int(Path(self.path).stem)


@dataclass(frozen=True)
class DatasetManifest:
    """Authoritative record of splits, shots and entry provenance."""

    seed: int
    base_classes: tuple[int, ...]
    novel_classes: tuple[int, ...]
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)
    slice_size: int = DEFAULT_SLICE_SIZE

    def __post_init__(self):
        base, novel = set(self.base_classes), set(self.novel_classes)
        if base & novel:
            raise ValueError(f"base/novel classes overlap: {sorted(base & novel)}")
        known = base | novel
        for e in self.entries:
            if e.class_id not in known:
                raise ValueError(f"entry class {e.class_id} not in base or novel sets")
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate slice references in manifest")

    def train_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == "train"]

    def eval_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == "eval"]

    def class_entries(self, class_id: int, split: str | None = None) -> list[ManifestEntry]:
        return [
            e
            for e in self.entries
            if e.class_id == class_id and (split is None or e.split == split)
        ]


def default_registry() -> list[ClassSpec]:
    """Twelve classes: eight base then four novel, distinct shape/color combos."""
    rows = [
        # base
        ("red-disc", "disc", (0.75, 0.12, 0.10), (0.95, 0.30, 0.22)),
        ("green-cross", "cross", (0.10, 0.65, 0.15), (0.25, 0.88, 0.30)),
        ("blue-chevron", "chevron", (0.10, 0.25, 0.70), (0.25, 0.45, 0.95)),
        ("yellow-ring", "ring", (0.82, 0.72, 0.10), (0.97, 0.90, 0.25)),
        ("cyan-bar", "bar", (0.08, 0.65, 0.68), (0.22, 0.85, 0.90)),
        ("magenta-triangle", "triangle", (0.70, 0.12, 0.62), (0.92, 0.30, 0.85)),
        ("orange-grid", "grid", (0.85, 0.45, 0.08), (0.98, 0.62, 0.20)),
        ("purple-blob", "blob", (0.40, 0.15, 0.60), (0.60, 0.32, 0.85)),
        # novel
        ("white-disc", "disc", (0.85, 0.85, 0.85), (0.97, 0.97, 0.97)),
        ("brown-cross", "cross", (0.55, 0.28, 0.08), (0.72, 0.42, 0.18)),
        ("pink-chevron", "chevron", (0.95, 0.55, 0.65), (1.00, 0.72, 0.80)),
        ("spring-ring", "ring", (0.22, 0.88, 0.45), (0.38, 1.00, 0.62)),
    ]
    return [
        ClassSpec(i, name, family, (lo, hi), texture_seed_offset=i * 101)
        for i, (name, family, lo, hi) in enumerate(rows)
    ]


# --------------------------------------------------------------------------- #
# slice rendering
# --------------------------------------------------------------------------- #


def _bilinear_upsample(grid: np.ndarray, size: int) -> np.ndarray:
    """Upsample a small (g, g) grid to (size, size) with bilinear weights."""
    g = grid.shape[0]
    pos = np.linspace(0.0, g - 1.0, size)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, g - 1)
    frac = pos - i0
    rows = grid[i0][:, i0] * np.outer(1 - frac, 1 - frac)
    rows += grid[i0][:, i1] * np.outer(1 - frac, frac)
    rows += grid[i1][:, i0] * np.outer(frac, 1 - frac)
    rows += grid[i1][:, i1] * np.outer(frac, frac)
    return rows


def _rot(u, v, phi):
    c, s = math.cos(phi), math.sin(phi)
    return c * u + s * v, -s * u + c * v


def _bar_sdf(u, v, hw, hh):
    return np.maximum(np.abs(u) - hw, np.abs(v) - hh)


def _shape_sdf(family: str, u, v, radius: float, rng: np.random.Generator):
    """Signed distance of the shape in object coordinates (negative inside)."""
    r = np.sqrt(u * u + v * v)
    if family == "disc":
        return r - radius
    if family == "ring":
        return np.abs(r - 0.74 * radius) - 0.27 * radius
    if family == "bar":
        return _bar_sdf(u, v, radius, 0.30 * radius)
    if family == "cross":
        return np.minimum(
            _bar_sdf(u, v, radius, 0.24 * radius), _bar_sdf(u, v, 0.24 * radius, radius)
        )
    if family == "chevron":
        # two arms joined at the apex, opening downward
        au, av = _rot(u, v - 0.45 * radius, 0.85)
        bu, bv = _rot(u, v - 0.45 * radius, -0.85)
        arm_a = _bar_sdf(au - 0.5 * radius, av, 0.62 * radius, 0.17 * radius)
        arm_b = _bar_sdf(bu + 0.5 * radius, bv, 0.62 * radius, 0.17 * radius)
        return np.minimum(arm_a, arm_b)
    if family == "triangle":
        d = None
        for k in range(3):
            ang = 2.0 * math.pi * k / 3.0 + math.pi / 2.0
            plane = u * math.cos(ang) + v * math.sin(ang) - 0.55 * radius
            d = plane if d is None else np.maximum(d, plane)
        return d
    if family == "grid":
        period = radius * 0.55
        half_line = 0.16 * radius
        fu = np.abs(((u + period / 2) % period) - period / 2) - half_line
        fv = np.abs(((v + period / 2) % period) - period / 2) - half_line
        square = np.maximum(np.abs(u), np.abs(v)) - radius
        return np.maximum(square, np.minimum(fu, fv))
    if family == "blob":
        theta = np.arctan2(v, u)
        wobble = np.zeros_like(theta)
        for k in range(2, 5):
            amp = rng.uniform(0.06, 0.16)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            wobble += amp * np.cos(k * theta + phase)
        return r - radius * (1.0 + wobble)
    raise ValueError(f"unknown shape family {family!r}")


def generate_slice(spec: ClassSpec, seed: int, size: int = DEFAULT_SLICE_SIZE) -> InstanceSlice:
    """Render one instance slice as a pure function of (spec, seed, size)."""
    if size < 16:
        raise ValueError(f"size must be >= 16, got {size}")

    rng = numpy_rng(derive_seed(seed, "slice-render", spec.class_id))
    tex_rng = numpy_rng(derive_seed(seed, "slice-texture", spec.texture_seed_offset))

    # pixel-center coordinates in [-1, 1]
    coords = (np.arange(size, dtype=np.float64) + 0.5) / size * 2.0 - 1.0
    xx, yy = np.meshgrid(coords, coords)

    # seed-driven pose: jittered center, scale, continuous rotation
    cx, cy = rng.uniform(-0.14, 0.14, size=2)
    radius = rng.uniform(0.42, 0.62)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    u, v = _rot(xx - cx, yy - cy, angle)

    sdf = _shape_sdf(spec.shape_family, u, v, radius, rng)
    soft = 1.5 * (2.0 / size)  # ~1.5 px anti-aliased edge, keeps edges smooth
    mask = np.clip(0.5 - sdf / soft, 0.0, 1.0)

    # color: a point on the class color segment plus small per-channel jitter
    lo = np.asarray(spec.color_range[0], dtype=np.float64)
    hi = np.asarray(spec.color_range[1], dtype=np.float64)
    color = lo + rng.uniform(0.0, 1.0) * (hi - lo) + rng.uniform(-0.03, 0.03, size=3)

    # gentle linear shading across the object so instances are not flat fills
    shade = 1.0 - 0.18 * np.clip((v / max(radius, 1e-6) + 1.0) / 2.0, 0.0, 1.0)
    obj = color[None, None, :] * shade[:, :, None]

    # smooth low-frequency background plus faint fine noise
    bg = np.empty((size, size, 3))
    base_level = tex_rng.uniform(0.10, 0.22)
    for c in range(3):
        coarse = tex_rng.uniform(-0.07, 0.07, size=(5, 5)) + base_level
        bg[:, :, c] = _bilinear_upsample(coarse, size)
    bg += tex_rng.uniform(-0.012, 0.012, size=(size, size, 3))

    pixels = bg * (1.0 - mask[:, :, None]) + obj * mask[:, :, None]
    pixels = np.clip(pixels, 0.0, 1.0).astype(np.float32)
    return InstanceSlice(pixels=pixels, class_id=spec.class_id, seed=seed, provenance="real")


# --------------------------------------------------------------------------- #
# augmentation
# --------------------------------------------------------------------------- #


def augment_params(seed: int) -> tuple[int, int]:
    """Seeded draw of (flip, quarter_turns); flip: 0 none, 1 horizontal, 2 vertical."""
    rng = numpy_rng(derive_seed(seed, "augment"))
    return int(rng.integers(0, 3)), int(rng.integers(0, 4))


def dihedral(pixels: np.ndarray, flip: int, quarter_turns: int) -> np.ndarray:
    """Apply a flip and/or k*90 degree rotation; returns a fresh array."""
    out = pixels
    if flip == 1:
        out = out[:, ::-1]
    elif flip == 2:
        out = out[::-1]
    if quarter_turns % 4:
        out = np.rot90(out, quarter_turns % 4)
    return np.ascontiguousarray(out)


def augment(sl: InstanceSlice, seed: int) -> InstanceSlice:
    """Seed-chosen flip/rotation of the slice; class and shape preserved."""
    flip, k = augment_params(seed)
    return InstanceSlice(
        pixels=dihedral(sl.pixels, flip, k),
        class_id=sl.class_id,
        seed=seed,
        provenance="augmented",
    )


# --------------------------------------------------------------------------- #
# manifests
# --------------------------------------------------------------------------- #


def _entry(manifest_seed: int, class_id: int, split: str, index: int) -> ManifestEntry:
    s = derive_seed(manifest_seed, f"slice-{split}", class_id, index)
    return ManifestEntry(
        path=f"slices/{class_id}/{s}.png", class_id=class_id, split=split, provenance="real"
    )


def build_manifest(
    cfg: SplitConfig,
    registry: list[ClassSpec],
    seed: int,
    slice_size: int = DEFAULT_SLICE_SIZE,
) -> DatasetManifest:
    """Deterministic manifest: base classes get full training sets, novel ones k shots."""
    needed = cfg.n_base_classes + cfg.n_novel_classes
    if len(registry) < needed:
        raise ValueError(f"registry has {len(registry)} classes, need {needed}")
    ids = [spec.class_id for spec in registry]
    if len(set(ids)) != len(ids):
        raise ValueError("registry contains duplicate class_ids")

    base = tuple(ids[: cfg.n_base_classes])
    novel = tuple(ids[cfg.n_base_classes : needed])

    entries: list[ManifestEntry] = []
    for cid in base:
        entries.extend(_entry(seed, cid, "train", i) for i in range(cfg.train_per_base))
    for cid in novel:
        entries.extend(_entry(seed, cid, "train", i) for i in range(cfg.k_shot))
    for cid in base + novel:
        entries.extend(_entry(seed, cid, "eval", i) for i in range(cfg.eval_per_class))

    return DatasetManifest(
        seed=seed,
        base_classes=base,
        novel_classes=novel,
        entries=tuple(entries),
        slice_size=slice_size,
    )


def filter_novel(manifest: DatasetManifest) -> DatasetManifest:
    """Drop every novel-class entry; base entries keep their order. Idempotent."""
    base = set(manifest.base_classes)
    kept = tuple(e for e in manifest.entries if e.class_id in base)
    return replace(manifest, entries=kept)


def sample_few_shot(manifest: DatasetManifest, k: int, seed: int) -> DatasetManifest:
    """Reduce each novel class to exactly k deterministic training entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    novel = set(manifest.novel_classes)
    keep_paths: set[str] = set()
    for cid in sorted(novel):
        pool = [e for e in manifest.entries if e.class_id == cid and e.split == "train"]
        if len(pool) < k:
            raise StateError(
                f"novel class {cid} has {len(pool)} training entries, need {k}"
            )
        rng = numpy_rng(derive_seed(seed, "fewshot", cid))
        chosen = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
        keep_paths.update(pool[i].path for i in chosen)
    kept = tuple(
        e
        for e in manifest.entries
        if e.class_id not in novel or e.split != "train" or e.path in keep_paths
    )
    return replace(manifest, entries=kept)


# --------------------------------------------------------------------------- #
# dataset directory I/O
# --------------------------------------------------------------------------- #


def save_pixels_png(pixels: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    quantized = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")


def load_pixels_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def manifest_to_json(manifest: DatasetManifest) -> str:
    doc = {
        "seed": manifest.seed,
        "slice_size": manifest.slice_size,
        "base_classes": list(manifest.base_classes),
        "novel_classes": list(manifest.novel_classes),
        "entries": [
            {
                "path": e.path,
                "class_id": e.class_id,
                "split": e.split,
                "provenance": e.provenance,
            }
            for e in manifest.entries
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def manifest_from_json(text: str) -> DatasetManifest:
    doc = json.loads(text)
    return DatasetManifest(
        seed=int(doc["seed"]),
        base_classes=tuple(doc["base_classes"]),
        novel_classes=tuple(doc["novel_classes"]),
        entries=tuple(
            ManifestEntry(
                path=e["path"],
                class_id=int(e["class_id"]),
                split=e["split"],
                provenance=e["provenance"],
            )
            for e in doc["entries"]
        ),
        slice_size=int(doc.get("slice_size", DEFAULT_SLICE_SIZE)),
    )


def write_dataset(
    root: Path,
    manifest: DatasetManifest,
    registry: list[ClassSpec] | None = None,
    slices: dict[str, np.ndarray] | None = None,
) -> None:
    """Materialize a dataset directory: slices/<class>/<seed>.png + manifest.json.

    Real entries are rendered from the registry; other provenances must be
    supplied through ``slices`` (path -> pixel array).
    """
    root = Path(root)
    by_id = {spec.class_id: spec for spec in registry} if registry else {}
    for e in manifest.entries:
        if slices is not None and e.path in slices:
            pixels = slices[e.path]
        elif e.provenance == "real" and e.class_id in by_id:
            pixels = generate_slice(by_id[e.class_id], e.seed, manifest.slice_size).pixels
        else:
            raise ValueError(f"no pixel source for entry {e.path}")
        save_pixels_png(pixels, root / e.path)
    (root / "manifest.json").write_text(manifest_to_json(manifest))


def read_manifest(root: Path) -> DatasetManifest:
    return manifest_from_json((Path(root) / "manifest.json").read_text())


class SliceStore:
    """Loads dataset slices from disk with an in-memory cache."""

    def __init__(self, root: Path, manifest: DatasetManifest):
        self.root = Path(root)
        self.manifest = manifest
        self._cache: dict[str, np.ndarray] = {}

    def pixels(self, entry: ManifestEntry) -> np.ndarray:
        cached = self._cache.get(entry.path)
        if cached is None:
            cached = load_pixels_png(self.root / entry.path)
            self._cache[entry.path] = cached
        return cached

    def slice(self, entry: ManifestEntry) -> InstanceSlice:
        return InstanceSlice(
            pixels=self.pixels(entry),
            class_id=entry.class_id,
            seed=entry.seed,
            provenance=entry.provenance,
        )
