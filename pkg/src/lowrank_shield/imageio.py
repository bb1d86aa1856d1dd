"""Binary PPM images, dataset manifests and the synthetic low-rank dataset.

Image tensors are ``W x H x 3`` with ``t[x, y, c]`` the pixel in column ``x``
and row ``y`` of the raster.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .attacks import LabeledDataset
from .errors import DataError, DomainError

_WHITESPACE = b" \t\n\r\v\f"


def _header_tokens(buf: bytes, path) -> tuple[list[int], int]:
    """Read the magic and three integers; return them and the payload offset."""
    if buf[:2] != b"P6":
        raise DataError("not a binary PPM (expected magic 'P6')", path=path, offset=0)
    pos = 2
    values = []
    while len(values) < 3:
        if pos >= len(buf):
            raise DataError("header ends early", path=path, offset=pos)
        ch = buf[pos:pos + 1]
        if ch in (b"",):
            raise DataError("header ends early", path=path, offset=pos)
        if ch == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise DataError("unterminated header comment", path=path, offset=pos)
            pos = end + 1
            continue
        if ch in _WHITESPACE:
            pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise DataError(f"unexpected byte {ch!r} in header", path=path, offset=pos)
        values.append(int(buf[start:pos]))
    if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
        raise DataError("header must end with a single whitespace byte", path=path, offset=pos)
    return values, pos + 1


def decode_ppm(buf: bytes, path=None) -> np.ndarray:
    (w, h, maxval), offset = _header_tokens(buf, path)
    if w < 1 or h < 1:
        raise DataError(f"invalid dimensions {w}x{h}", path=path, offset=2)
    if maxval != 255:
        raise DataError(f"maxval {maxval} is not supported (only 255)", path=path, offset=offset - 1)
    need = w * h * 3
    have = len(buf) - offset
    if have < need:
        raise DataError(f"payload truncated: expected {need} bytes, found {have}", path=path, offset=len(buf))
    raster = np.frombuffer(buf, dtype=np.uint8, count=need, offset=offset).reshape(h, w, 3)
    return raster.transpose(1, 0, 2).astype(np.float64) / 255.0


def encode_ppm(t) -> bytes:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or t.shape[2] != 3:
        raise DomainError(f"an image must be W x H x 3, got {t.shape}")
    raster = np.rint(255.0 * np.clip(t, 0.0, 1.0)).astype(np.uint8).transpose(1, 0, 2)
    w, h = t.shape[0], t.shape[1]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(raster).tobytes()


def load_ppm(path) -> np.ndarray:
    """Read a P6 PPM (maxval 255) as a ``W x H x 3`` tensor with values ``b / 255``."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image: {exc.strerror}", path=str(path)) from None
    return decode_ppm(buf, str(path))


def save_ppm(t, path) -> None:
    """Write ``round(255 * clamp(v, 0, 1))`` as a P6 PPM."""
    data = encode_ppm(t)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise DataError(f"cannot write image: {exc.strerror}", path=str(path)) from None


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: int
    split: str


@dataclass
class DatasetManifest:
    """Records of ``(relative path, label, split)`` plus dataset dimensions."""

    width: int
    height: int
    classes: int
    records: list[ManifestRecord]

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.path in seen:
                raise DataError(f"duplicate manifest path {r.path!r}")
            seen.add(r.path)
            if not 0 <= r.label < self.classes:
                raise DataError(f"label {r.label} of {r.path!r} outside [0, {self.classes})")

    def __len__(self) -> int:
        return len(self.records)

    def to_text(self) -> str:
        lines = [f"#w={self.width} h={self.height} classes={self.classes}"]
        lines += [f"{r.path}\t{r.label}\t{r.split}" for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        try:
            Path(path).write_text(self.to_text(), encoding="utf-8", newline="\n")
        except OSError as exc:
            raise DataError(f"cannot write manifest: {exc.strerror}", path=str(path)) from None

    @classmethod
    def parse(cls, text: str, path=None) -> "DatasetManifest":
        lines = text.split("\n")
        if not lines or not lines[0].startswith("#"):
            raise DataError("manifest must start with '#w=W h=H classes=C'", path=path, offset=0)
        fields = {}
        for token in lines[0][1:].split():
            key, sep, value = token.partition("=")
            if not sep:
                raise DataError(f"bad header token {token!r}", path=path, offset=0)
            fields[key] = value
        try:
            w, h, c = int(fields["w"]), int(fields["h"]), int(fields["classes"])
        except (KeyError, ValueError):
            raise DataError("header needs integer w, h and classes", path=path, offset=0) from None
        records = []
        offset = len(lines[0].encode("utf-8")) + 1
        for line in lines[1:]:
            if line.strip():
                parts = line.rstrip("\r").split("\t")
                if len(parts) != 3:
                    raise DataError("expected '<path>\\t<label>\\t<split>'", path=path, offset=offset)
                try:
                    label = int(parts[1])
                except ValueError:
                    raise DataError(f"bad label {parts[1]!r}", path=path, offset=offset) from None
                records.append(ManifestRecord(parts[0], label, parts[2]))
            offset += len(line.encode("utf-8")) + 1
        return cls(w, h, c, records)

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read manifest: {exc.strerror}", path=str(path)) from None
        except UnicodeDecodeError as exc:
            raise DataError("manifest is not UTF-8", path=str(path), offset=exc.start) from None
        return cls.parse(text, str(path))


def load_dataset(manifest_path) -> tuple[LabeledDataset, DatasetManifest]:
    """Load every image listed in a manifest, in manifest order."""
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.read(manifest_path)
    if not manifest.records:
        raise DataError("manifest lists no images", path=str(manifest_path))
    root = manifest_path.parent
    images = np.empty((len(manifest), manifest.width, manifest.height, 3))
    for i, rec in enumerate(manifest.records):
        img = load_ppm(root / rec.path)
        if img.shape != (manifest.width, manifest.height, 3):
            raise DataError(
                f"image is {img.shape[0]}x{img.shape[1]}, manifest declares "
                f"{manifest.width}x{manifest.height}",
                path=str(root / rec.path),
            )
        images[i] = img
    labels = [r.label for r in manifest.records]
    return LabeledDataset(images, labels, [r.split for r in manifest.records]), manifest


def save_dataset(data: LabeledDataset, root, classes: int, names: Sequence[str] | None = None,
                 manifest_name: str = "manifest.tsv") -> DatasetManifest:
    """Write one PPM per image under ``root`` plus a manifest; returns the manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    splits = data.splits or ["all"] * len(data)
    records = []
    for i in range(len(data)):
        name = names[i] if names is not None else f"img_{i:05d}.ppm"
        target = root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        save_ppm(data.images[i], target)
        records.append(ManifestRecord(name, int(data.labels[i]), splits[i]))
    w, h, _ = data.image_shape
    manifest = DatasetManifest(w, h, classes, records)
    manifest.write(root / manifest_name)
    return manifest


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded low-rank image classes.

    Each class template is a Tucker-(k1, k2, 3) tensor whose spatial factors
    are smooth (spanned by the first ``bandwidth`` cosine modes), shifted and
    scaled into [0.2, 0.8]. Images add ``N(0, sigma^2)`` noise and are clipped.
    """

    classes: int = 10
    width: int = 32
    height: int = 32
    per_class: int = 200
    ranks: tuple[int, int] = (4, 4)
    sigma: float = 0.02
    seed: int = 1
    bandwidth: int = 6
    test_fraction: float = 0.2
    min_distance: float = 0.1

    def __post_init__(self):
        if self.classes < 2:
            raise DomainError(f"at least two classes are required, got {self.classes}")
        if self.width < 1 or self.height < 1 or self.per_class < 1:
            raise DomainError("width, height and per_class must be >= 1")
        k1, k2 = self.ranks
        if not (1 <= k1 <= self.width and 1 <= k2 <= self.height):
            raise DomainError(f"ranks {self.ranks} must satisfy 1 <= k <= image side")
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        if self.bandwidth < 1:
            raise DomainError("bandwidth must be >= 1")
        if not 0 <= self.test_fraction < 1:
            raise DomainError("test_fraction must lie in [0, 1)")


def _smooth_basis(rng, n: int, k: int, bandwidth: int) -> np.ndarray:
    x = (np.arange(n) + 0.5) / n
    f = min(bandwidth, n)
    cosines = np.stack([np.cos(np.pi * j * x) for j in range(f)], axis=1)
    m = cosines @ rng.standard_normal((f, k))
    m[:, 0] = 1.0
    q, _ = np.linalg.qr(m)
    return q


def _template(rng, spec: SyntheticSpec) -> np.ndarray:
    k1, k2 = spec.ranks
    a = _smooth_basis(rng, spec.width, k1, spec.bandwidth)
    b = _smooth_basis(rng, spec.height, k2, spec.bandwidth)
    c, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    core = rng.standard_normal((k1, k2, 3))
    x = np.einsum("abc,ia,jb,kc->ijk", core, a, b, c)
    x -= x.mean()
    peak = np.abs(x).max()
    return 0.5 + 0.3 * x / peak if peak > 0 else np.full_like(x, 0.5)


def generate_synthetic(spec: SyntheticSpec) -> tuple[LabeledDataset, np.ndarray]:
    """Build the dataset; returns it together with the class templates.

    Records are shuffled with the seeded stream and the last
    ``test_fraction`` of them are tagged ``test``, the rest ``train``.
    """
    rng = np.random.default_rng(spec.seed)
    templates: list[np.ndarray] = []
    attempts = 0
    while len(templates) < spec.classes:
        cand = _template(rng, spec)
        ok = all(
            np.linalg.norm(cand - t) / max(np.linalg.norm(cand), np.linalg.norm(t)) >= spec.min_distance
            for t in templates
        )
        if ok:
            templates.append(cand)
            attempts = 0
            continue
        attempts += 1
        if attempts >= 100:
            raise DomainError("could not separate class templates after 100 regenerations")
    shape = (spec.width, spec.height, 3)
    images = np.empty((spec.classes * spec.per_class,) + shape)
    labels = np.repeat(np.arange(spec.classes), spec.per_class)
    for i, c in enumerate(labels):
        images[i] = np.clip(templates[c] + spec.sigma * rng.standard_normal(shape), 0.0, 1.0)
    order = rng.permutation(len(labels))
    images, labels = images[order], labels[order]
    n_train = len(labels) - int(round(spec.test_fraction * len(labels)))
    splits = ["train"] * n_train + ["test"] * (len(labels) - n_train)
    return LabeledDataset(images, labels, splits), np.stack(templates)
