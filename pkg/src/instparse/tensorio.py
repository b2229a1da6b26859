"""Binary tensor files and JSON manifests.

Tensor file layout (all integers little-endian)::

    bytes 0-3   magic b"NTHP"
    byte  4     version (1)
    byte  5     dtype: 0 = float32, 1 = uint8
    byte  6     rank
    then        rank x uint32 dims
    then        row-major payload

Every file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .masks import as_mask
from .metrics import GtHuman, MetricRecord, gt_humans_from_scene
from .structures import GroundTruthInstance, GroundTruthScene, ParsingResult, ScoredInstance
from .synthesis import LevelOutputs, NetworkOutputs

MAGIC = b"NTHP"
VERSION = 1
FLOAT32, UINT8 = 0, 1
_DTYPES = {FLOAT32: np.dtype("<f4"), UINT8: np.dtype("u1")}


class TensorFormatError(ValueError):
    code = "format"


class BadMagicError(TensorFormatError):
    code = "bad_magic"


class UnsupportedVersionError(TensorFormatError):
    code = "bad_version"


class TruncatedPayloadError(TensorFormatError):
    code = "truncated"


class DtypeMismatchError(TensorFormatError):
    code = "dtype_mismatch"


class ManifestError(ValueError):
    code = "manifest"


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_tensor(arr) -> bytes:
    """Bool and uint8 arrays are stored as bytes, everything else as float32."""
    arr = np.asarray(arr)
    if arr.dtype == bool or arr.dtype == np.uint8:
        code = UINT8
    else:
        code = FLOAT32
        if not np.isfinite(arr).all():
            raise ValueError("refusing to write non-finite values")
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    header = MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + payload.tobytes()


def decode_tensor(data: bytes, expect: int | None = None) -> np.ndarray:
    if len(data) < 7 or data[:4] != MAGIC:
        raise BadMagicError("bad magic: not a tensor file")
    version, code, rank = struct.unpack_from("<BBB", data, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported tensor file version {version}")
    if code not in _DTYPES:
        raise DtypeMismatchError(f"unknown dtype code {code}")
    if expect is not None and code != expect:
        raise DtypeMismatchError(f"expected dtype code {expect}, file has {code}")
    head = 7 + 4 * rank
    if len(data) < head:
        raise TruncatedPayloadError("truncated header")
    dims = struct.unpack_from(f"<{rank}I", data, 7)
    dtype = _DTYPES[code]
    size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(data) - head != size:
        raise TruncatedPayloadError(f"payload has {len(data) - head} bytes, dims {dims} need {size}")
    arr = np.frombuffer(data, dtype=dtype, offset=head).reshape(dims).copy()
    if code == FLOAT32 and not np.isfinite(arr).all():
        raise TensorFormatError("tensor file contains non-finite values")
    return arr


def write_tensor(path, arr):
    atomic_write_bytes(path, encode_tensor(arr))


def read_tensor(path, expect: int | None = None) -> np.ndarray:
    """Read a tensor: float32 arrays for dtype 0, uint8 arrays for dtype 1."""
    return decode_tensor(Path(path).read_bytes(), expect)


def read_mask(path) -> np.ndarray:
    arr = read_tensor(path, expect=UINT8)
    if arr.ndim != 2:
        raise TensorFormatError(f"mask file {path} has rank {arr.ndim}")
    return as_mask(arr)


def read_mask_stack(path) -> np.ndarray:
    arr = read_tensor(path, expect=UINT8)
    if arr.ndim != 3 or not np.isin(arr, (0, 1)).all():
        raise TensorFormatError(f"{path} is not a stack of binary masks")
    return arr.astype(bool)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: {e}") from e


# scenes


def write_scene(path, scene: GroundTruthScene):
    """``path`` is the manifest; masks go to ``masks/NNN.nthp`` beside it."""
    path = Path(path)
    entries = []
    for k, inst in enumerate(scene.instances):
        rel = f"masks/{k:03d}.nthp"
        write_tensor(path.parent / rel, inst.mask)
        entries.append({"kind": inst.kind, "category": inst.category, "parent": inst.parent, "mask_file": rel})
    atomic_write_text(path, _dump({"image_size": list(scene.image_size), "instances": entries}))


def read_scene(path) -> GroundTruthScene:
    path = Path(path)
    doc = _load(path)
    try:
        image_size = tuple(doc["image_size"])
        instances = []
        for e in doc["instances"]:
            mask_path = path.parent / e["mask_file"]
            if not mask_path.exists():
                raise ManifestError(f"missing mask file {mask_path}")
            instances.append(GroundTruthInstance(e["kind"], int(e["category"]), read_mask(mask_path), e.get("parent")))
    except (KeyError, TypeError) as e:
        raise ManifestError(f"{path}: malformed scene manifest ({e})") from e
    return GroundTruthScene(image_size, instances)


def gt_from_scene_file(path) -> list[GtHuman]:
    return gt_humans_from_scene(read_scene(path))


# network outputs


def write_outputs(directory, outputs: NetworkOutputs):
    d = Path(directory)
    write_tensor(d / "prototypes.nthp", outputs.prototypes)
    levels = []
    for lv in outputs.levels:
        write_tensor(d / f"{lv.level_id}_coefficients.nthp", lv.coefficients)
        write_tensor(d / f"{lv.level_id}_category.nthp", lv.category)
        levels.append(
            {
                "level_id": lv.level_id,
                "kind": lv.kind,
                "coefficients": f"{lv.level_id}_coefficients.nthp",
                "category": f"{lv.level_id}_category.nthp",
            }
        )
    doc = {
        "image_size": list(outputs.image_size),
        "mask_stride": outputs.mask_stride,
        "prototypes": "prototypes.nthp",
        "levels": levels,
    }
    atomic_write_text(d / "outputs.json", _dump(doc))


def read_outputs(directory) -> NetworkOutputs:
    d = Path(directory)
    doc = _load(d / "outputs.json")
    try:
        protos = read_tensor(d / doc["prototypes"], expect=FLOAT32).astype(np.float64)
        levels = [
            LevelOutputs(
                e["level_id"],
                e["kind"],
                read_tensor(d / e["coefficients"], expect=FLOAT32).astype(np.float64),
                read_tensor(d / e["category"], expect=FLOAT32).astype(np.float64),
            )
            for e in doc["levels"]
        ]
        return NetworkOutputs(tuple(doc["image_size"]), int(doc["mask_stride"]), protos, levels)
    except (KeyError, TypeError) as e:
        raise ManifestError(f"{d}: malformed outputs manifest ({e})") from e


# candidates and results: masks stacked into one rank-3 file per group


def _write_stack(path, masks, shape):
    stack = np.stack(masks) if masks else np.zeros((0, *shape), dtype=bool)
    write_tensor(path, stack)


def write_candidates(path, image_size, parts: list[ScoredInstance], humans: list[ScoredInstance]):
    path = Path(path)
    doc = {"image_size": list(image_size)}
    for name, items in (("parts", parts), ("humans", humans)):
        rel = f"{path.stem}_{name}.nthp"
        _write_stack(path.parent / rel, [c.mask for c in items], image_size)
        doc[name] = {"masks": rel, "items": [{"category": c.category, "score": c.score} for c in items]}
    atomic_write_text(path, _dump(doc))


def read_candidates(path) -> tuple[tuple[int, int], list[ScoredInstance], list[ScoredInstance]]:
    path = Path(path)
    doc = _load(path)
    out = []
    try:
        for name in ("parts", "humans"):
            masks = read_mask_stack(path.parent / doc[name]["masks"])
            items = doc[name]["items"]
            if len(items) != len(masks):
                raise ManifestError(f"{name}: {len(items)} entries for {len(masks)} masks")
            group = []
            for m, e in zip(masks, items):
                score = float(e["score"])
                if not 0.0 <= score <= 1.0:
                    raise ManifestError(f"{name}: score {score} outside [0, 1]")
                group.append(ScoredInstance(m, int(e["category"]), score))
            out.append(group)
        return tuple(doc["image_size"]), out[0], out[1]
    except (KeyError, TypeError) as e:
        raise ManifestError(f"{path}: malformed candidates manifest ({e})") from e


def write_results(path, image_size, results: list[ParsingResult]):
    path = Path(path)
    maps = [r.category_map for r in results]
    if maps and max(int(m.max()) for m in maps) > 255:
        raise ValueError("category ids above 254 do not fit the uint8 category map")
    _write_stack(path.parent / f"{path.stem}_human_masks.nthp", [r.human_mask for r in results], image_size)
    stack = np.stack(maps).astype(np.uint8) if maps else np.zeros((0, *image_size), dtype=np.uint8)
    write_tensor(path.parent / f"{path.stem}_category_maps.nthp", stack)
    doc = {
        "image_size": list(image_size),
        "human_masks": f"{path.stem}_human_masks.nthp",
        "category_maps": f"{path.stem}_category_maps.nthp",
        "results": [
            {"parsing_score": r.parsing_score, "human_score": r.human_score, "parts": list(r.part_indices)}
            for r in results
        ],
    }
    atomic_write_text(path, _dump(doc))


def read_results(path) -> list[ParsingResult]:
    path = Path(path)
    doc = _load(path)
    try:
        humans = read_mask_stack(path.parent / doc["human_masks"])
        maps = read_tensor(path.parent / doc["category_maps"], expect=UINT8).astype(np.int32)
        entries = doc["results"]
    except (KeyError, TypeError) as e:
        raise ManifestError(f"{path}: malformed results manifest ({e})") from e
    if not len(humans) == len(maps) == len(entries):
        raise ManifestError(f"{path}: result count mismatch")
    out = []
    for h, m, e in zip(humans, maps, entries):
        if ((m > 0) & ~h).any():
            raise ManifestError(f"{path}: category map leaks outside its human mask")
        out.append(ParsingResult(h, m, float(e["parsing_score"]), float(e.get("human_score", 0.0)), list(e.get("parts", []))))
    return out


def write_report(path, records: list[MetricRecord]):
    lines = "".join(json.dumps(r.as_dict(), sort_keys=True) + "\n" for r in records)
    atomic_write_text(path, lines)
