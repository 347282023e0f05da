"""Dataset assembly: stratified split plus diffusion balancing.

Input layout: `root/<class>/<plane>/*.pgm` with exactly two class
directories. The split is 90:10 per class over deterministically sorted
file lists; the minority class's training side is topped up with
diffusion-sampled synthetic images until the class counts match. Test
files are always real.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..diffusion import build_schedule, sample
from ..errors import BadFormat, EmptyInput, MissingDiffusionModel
from ..rng import Rng
from ..volio import Image2D, read_pgm, resize_bilinear, write_pgm
from .checkpoint import load_checkpoint
from .modelio import unpack_predictor

PLANES = ("axial", "coronal", "sagittal")

REAL = "real"
SYNTHETIC = "synthetic"


@dataclass
class FileEntry:
    path: str
    provenance: str  # real | synthetic

    def to_json(self) -> dict:
        return {"path": self.path, "provenance": self.provenance}


@dataclass
class DatasetManifest:
    classes: dict[str, dict[str, list[FileEntry]]]  # class -> {train: [...], test: [...]}
    plane: str
    image_size: int
    seed: int
    extra: dict = field(default_factory=dict)

    def class_names(self) -> list[str]:
        return sorted(self.classes)

    def counts(self) -> dict[str, dict[str, int]]:
        return {c: {s: len(v[s]) for s in ("train", "test")} for c, v in self.classes.items()}

    def validate(self) -> None:
        for name, splits in self.classes.items():
            train_paths = {e.path for e in splits["train"]}
            test_paths = {e.path for e in splits["test"]}
            if train_paths & test_paths:
                raise BadFormat(f"class {name!r}: train/test overlap")
            for entry in splits["test"]:
                if entry.provenance != REAL:
                    raise BadFormat(f"class {name!r}: synthetic file in test split")

    def to_json(self) -> str:
        payload = {
            "plane": self.plane,
            "image_size": self.image_size,
            "seed": self.seed,
            "extra": self.extra,
            "classes": {
                c: {s: [e.to_json() for e in v[s]] for s in ("train", "test")}
                for c, v in self.classes.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        payload = json.loads(text)
        classes = {
            c: {s: [FileEntry(**e) for e in v[s]] for s in ("train", "test")}
            for c, v in payload["classes"].items()
        }
        manifest = cls(classes, payload["plane"], payload["image_size"], payload["seed"],
                       payload.get("extra", {}))
        manifest.validate()
        return manifest

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def split_90_10(files: list[str], rng: Rng) -> tuple[list[str], list[str]]:
    """Seeded 90:10 partition of a sorted file list."""
    ordered = sorted(files)
    perm = rng.permutation(len(ordered))
    n_train = int(0.9 * len(ordered))
    train = sorted(ordered[int(i)] for i in perm[:n_train])
    test = sorted(ordered[int(i)] for i in perm[n_train:])
    return train, test


def _plane_dirs(root: Path, plane: str) -> list[str]:
    return list(PLANES) if plane == "3plane" else [plane]


def _collect_class_files(root: Path, class_name: str, planes: list[str]) -> dict[str, list[str]]:
    per_plane: dict[str, list[str]] = {}
    for p in planes:
        plane_dir = root / class_name / p
        files = sorted(str(f) for f in plane_dir.glob("*.pgm")) if plane_dir.is_dir() else []
        per_plane[p] = files
    return per_plane


def _synthesize(ckpt_path: Path, count: int, out_dir: Path, image_size: int,
                seed: int, tag: str) -> list[str]:
    predictor, (t_steps, beta_start, beta_end) = unpack_predictor(load_checkpoint(ckpt_path))
    schedule = build_schedule(t_steps, beta_start, beta_end)
    size = predictor.config.image_size
    images = sample(predictor, schedule, (size, size), Rng(seed).derive(f"synth:{tag}"), count=count)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(images):
        pic = Image2D(size, size, img)
        if size != image_size:
            pic = resize_bilinear(pic, image_size, image_size)
        path = out_dir / f"synthetic_{tag}_{i:04d}.pgm"
        path.write_bytes(write_pgm(pic))
        paths.append(str(path))
    return paths


def build_dataset(input_dir: str | Path, output_dir: str | Path, plane: str, seed: int,
                  balance: bool = True, diffusion_ckpts: dict[str, Path] | None = None,
                  image_size: int = 128) -> DatasetManifest:
    """Assemble the split manifest; see module docstring for the layout."""
    root = Path(input_dir)
    out_root = Path(output_dir)
    diffusion_ckpts = diffusion_ckpts or {}
    class_names = sorted(d.name for d in root.iterdir() if d.is_dir())
    if len(class_names) != 2:
        raise EmptyInput(f"need exactly two class directories under {root}, found {class_names}")
    planes = _plane_dirs(root, plane)

    classes: dict[str, dict[str, list[FileEntry]]] = {}
    per_class_plane_train: dict[str, dict[str, list[str]]] = {}
    for name in class_names:
        per_plane = _collect_class_files(root, name, planes)
        if sum(len(v) for v in per_plane.values()) == 0:
            raise EmptyInput(f"class {name!r} has no .pgm files for plane {plane!r}")
        split_rng = Rng(seed).derive(f"split:{name}")
        train_entries: list[FileEntry] = []
        test_entries: list[FileEntry] = []
        plane_train: dict[str, list[str]] = {}
        for p in planes:
            train, test = split_90_10(per_plane[p], split_rng.derive(p))
            plane_train[p] = train
            train_entries += [FileEntry(f, REAL) for f in train]
            test_entries += [FileEntry(f, REAL) for f in test]
        classes[name] = {"train": train_entries, "test": test_entries}
        per_class_plane_train[name] = plane_train

    counts = {c: len(v["train"]) for c, v in classes.items()}
    majority = max(class_names, key=lambda c: counts[c])
    minority = min(class_names, key=lambda c: counts[c])
    shortfall = counts[majority] - counts[minority]
    if balance and shortfall > 0:
        # spread synthesis across planes proportionally to the minority's real counts
        plane_counts = {p: len(per_class_plane_train[minority][p]) for p in planes}
        total_real = max(sum(plane_counts.values()), 1)
        remaining = shortfall
        for j, p in enumerate(planes):
            want = remaining if j == len(planes) - 1 else round(shortfall * plane_counts[p] / total_real)
            want = min(want, remaining)
            if want == 0:
                continue
            if p not in diffusion_ckpts:
                raise MissingDiffusionModel(f"balancing needs a diffusion checkpoint for plane {p!r}")
            out_dir = out_root / "synthetic" / minority / p
            paths = _synthesize(Path(diffusion_ckpts[p]), want, out_dir, image_size, seed, f"{minority}_{p}")
            classes[minority]["train"] += [FileEntry(f, SYNTHETIC) for f in paths]
            remaining -= want

    manifest = DatasetManifest(classes, plane, image_size, seed)
    manifest.validate()
    out_root.mkdir(parents=True, exist_ok=True)
    manifest.save(out_root / "manifest.json")
    return manifest


def load_split(manifest: DatasetManifest, split: str) -> list[tuple[np.ndarray, int]]:
    """(image, label) pairs; labels follow sorted class-name order."""
    data = []
    size = manifest.image_size
    for label, name in enumerate(manifest.class_names()):
        for entry in manifest.classes[name][split]:
            img = read_pgm(Path(entry.path).read_bytes())
            if (img.width, img.height) != (size, size):
                img = resize_bilinear(img, size, size)
            data.append((img.pixels, label))
    return data
