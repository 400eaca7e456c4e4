"""Binary tensor files, dataset manifests, and class vocabularies.

This is the interchange layer between the feature extractor and the
segmentation engine. The tensor format is deliberately tiny and bit-exact:

    bytes 0..3   magic "MDT1" (ASCII)
    byte  4      dtype code, unsigned 8-bit (0 = IEEE-754 binary32)
    byte  5      ndim, unsigned 8-bit, 1..4
    then         ndim x unsigned 32-bit little-endian dims, each >= 1
    then         row-major little-endian float32 payload, innermost
                 dimension contiguous; length = 4 * prod(dims) bytes

A manifest is UTF-8 text with one JSON object per line (blank lines and
lines starting with '#' are skipped). A vocabulary is UTF-8 text with one
class name per line; the 0-based line number is the label id.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"MDT1"
DTYPE_FLOAT32 = 0
MAX_NDIM = 4
# labels ride in float32; integers above 2**24 are not exactly representable
MAX_LABEL_VALUE = 2**24


class TensorStoreError(Exception):
    """Base class for tensor/manifest/vocabulary format errors."""


class BadMagicError(TensorStoreError):
    """File does not start with the MDT1 magic bytes."""


class UnknownDtypeError(TensorStoreError):
    """Header carries a dtype code this reader does not understand."""


class InvalidHeaderError(TensorStoreError):
    """Header is self-inconsistent (bad ndim, zero dim, short header)."""


class TruncatedPayloadError(TensorStoreError):
    """Payload ends before the header-implied byte count."""


class PayloadSizeMismatchError(TensorStoreError):
    """File holds more payload bytes than the header implies."""


class NonFiniteValueError(TensorStoreError):
    """A value to be written (or required to be finite) is NaN or inf."""


class ManifestError(TensorStoreError):
    """Manifest file is malformed or inconsistent with referenced files."""


class VocabularyError(TensorStoreError):
    """Vocabulary file violates the one-unique-name-per-line contract."""


def write_tensor(path: str | Path, dims: Sequence[int], values) -> None:
    """Write `values` (flat or shaped like `dims`) as an MDT1 file."""
    dims = [int(d) for d in dims]
    if not 1 <= len(dims) <= MAX_NDIM:
        raise InvalidHeaderError(f"ndim must be in [1, {MAX_NDIM}], got {len(dims)}")
    if any(d < 1 for d in dims):
        raise InvalidHeaderError(f"all dims must be >= 1, got {dims}")
    arr = np.asarray(values, dtype=np.float32).reshape(-1)
    count = int(np.prod(dims))
    if arr.size != count:
        raise InvalidHeaderError(
            f"value count {arr.size} does not match prod(dims) = {count}"
        )
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise NonFiniteValueError(
            f"non-finite value {arr[idx]!r} at flat index {idx}"
        )
    header = MAGIC + struct.pack("<BB", DTYPE_FLOAT32, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    payload = arr.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_header(path: str | Path) -> tuple[list[int], int]:
    """Parse and validate an MDT1 header; return (dims, payload offset)."""
    with open(path, "rb") as fh:
        head = fh.read(6)
    if len(head) < 6 or head[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an MDT1 tensor file")
    dtype_code, ndim = head[4], head[5]
    if dtype_code != DTYPE_FLOAT32:
        raise UnknownDtypeError(f"{path}: unknown dtype code {dtype_code}")
    if not 1 <= ndim <= MAX_NDIM:
        raise InvalidHeaderError(f"{path}: ndim {ndim} outside [1, {MAX_NDIM}]")
    with open(path, "rb") as fh:
        raw = fh.read(6 + 4 * ndim)
    if len(raw) < 6 + 4 * ndim:
        raise InvalidHeaderError(f"{path}: header truncated before dims")
    dims = list(struct.unpack(f"<{ndim}I", raw[6:]))
    if any(d < 1 for d in dims):
        raise InvalidHeaderError(f"{path}: zero dim in {dims}")
    return dims, 6 + 4 * ndim


def read_tensor(path: str | Path) -> tuple[list[int], np.ndarray]:
    """Read an MDT1 file; return (dims, values) with values shaped `dims`."""
    dims, offset = read_header(path)
    expected = 4 * int(np.prod(dims))
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read()
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: expected {expected} payload bytes, found {len(payload)}"
        )
    if len(payload) > expected:
        raise PayloadSizeMismatchError(
            f"{path}: {len(payload) - expected} trailing bytes after payload"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return dims, values.copy()


def read_label_map(path: str | Path) -> np.ndarray:
    """Read a 2-D tensor of exact non-negative integer labels as int32."""
    dims, values = read_tensor(path)
    if len(dims) != 2:
        raise InvalidHeaderError(f"{path}: label map must be 2-D, got dims {dims}")
    if not np.isfinite(values).all():
        raise NonFiniteValueError(f"{path}: non-finite label value")
    rounded = np.rint(values)
    if (values != rounded).any() or (values < 0).any() or (values > MAX_LABEL_VALUE).any():
        raise InvalidHeaderError(
            f"{path}: labels must be exact integers in [0, {MAX_LABEL_VALUE}]"
        )
    return rounded.astype(np.int32)


def write_label_map(path: str | Path, labels: np.ndarray) -> None:
    """Write a 2-D integer label map as a float32 MDT1 tensor."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise InvalidHeaderError(f"label map must be 2-D, got shape {labels.shape}")
    if (labels < 0).any() or (labels > MAX_LABEL_VALUE).any():
        raise InvalidHeaderError(f"labels must lie in [0, {MAX_LABEL_VALUE}]")
    write_tensor(path, labels.shape, labels.astype(np.float32))


@dataclass(frozen=True)
class TensorRef:
    """A tensor file plus the spatial resolution the manifest declares."""

    path: str
    height: int
    width: int


@dataclass(frozen=True)
class PatchRef:
    """One extracted patch of a tiled image, with its image-space placement."""

    top: int
    left: int
    height: int
    width: int
    features: tuple[TensorRef, ...]
    attention: tuple[TensorRef, ...] = ()


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    height: int
    width: int
    features: tuple[TensorRef, ...] = ()
    attention: tuple[TensorRef, ...] = ()
    labels: str | None = None
    patches: tuple[PatchRef, ...] = ()


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _tensor_refs(obj, base: Path, where: str) -> tuple[TensorRef, ...]:
    refs = []
    for item in obj:
        try:
            ref = TensorRef(str(item["path"]), int(item["height"]), int(item["width"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: malformed tensor reference {item!r}") from exc
        refs.append(ref)
    return tuple(refs)


def _check_ref(ref: TensorRef, base: Path, where: str) -> None:
    path = base / ref.path
    if not path.exists():
        raise ManifestError(f"{where}: referenced file missing: {ref.path}")
    dims, _ = read_header(path)
    # feature/attention tensors are (C, h, w); label maps are (h, w)
    h, w = dims[-2], dims[-1]
    if (h, w) != (ref.height, ref.width):
        raise ManifestError(
            f"{where}: {ref.path} declares {ref.height}x{ref.width} "
            f"but stores {h}x{w}"
        )


def load_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    """Parse a JSON-lines manifest and validate it.

    Validation covers image_id uniqueness and, when `check_files` is true,
    existence of every referenced tensor file and agreement between the
    declared and stored resolutions. Relative paths resolve against the
    manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{where}: invalid JSON: {exc}") from exc
        try:
            image_id = str(obj["image_id"])
            height, width = int(obj["height"]), int(obj["width"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: missing image_id/height/width") from exc
        if image_id in seen:
            raise ManifestError(f"{where}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        patches = []
        for pobj in obj.get("patches", []):
            patches.append(
                PatchRef(
                    top=int(pobj["top"]),
                    left=int(pobj["left"]),
                    height=int(pobj["height"]),
                    width=int(pobj["width"]),
                    features=_tensor_refs(pobj.get("features", []), base, where),
                    attention=_tensor_refs(pobj.get("attention", []), base, where),
                )
            )
        entry = ManifestEntry(
            image_id=image_id,
            height=height,
            width=width,
            features=_tensor_refs(obj.get("features", []), base, where),
            attention=_tensor_refs(obj.get("attention", []), base, where),
            labels=obj.get("labels"),
            patches=tuple(patches),
        )
        if check_files:
            for ref in entry.features + entry.attention:
                _check_ref(ref, base, where)
            for patch in entry.patches:
                for ref in patch.features + patch.attention:
                    _check_ref(ref, base, where)
            if entry.labels is not None and not (base / entry.labels).exists():
                raise ManifestError(f"{where}: label file missing: {entry.labels}")
        entries.append(entry)
    return Manifest(entries)


def append_manifest_entry(path: str | Path, entry: dict) -> None:
    """Append one record to a JSON-lines manifest (creates the file)."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class names; a name's position is its label id."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise VocabularyError("vocabulary must hold at least one class name")
        if any(name == "" for name in self.names):
            raise VocabularyError("vocabulary contains an empty class name")
        if len(set(self.names)) != len(self.names):
            raise VocabularyError("vocabulary contains duplicate class names")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


def load_vocabulary(path: str | Path) -> ClassVocabulary:
    text = Path(path).read_text(encoding="utf-8")
    names = tuple(line.strip() for line in text.splitlines())
    return ClassVocabulary(names)


def save_vocabulary(path: str | Path, vocabulary: ClassVocabulary) -> None:
    Path(path).write_text("\n".join(vocabulary.names) + "\n", encoding="utf-8")
