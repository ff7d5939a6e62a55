"""Bit-exact file containers: raw little-endian float32 data + JSON manifests.

Layout of a scan directory:

* ``scan.json``      manifest (version, geometry, file names, dtype)
* ``stack.f32``      J patterns, row-major, pattern-major, little-endian f32
* ``flat.f32``       one pattern, same encoding
* ``positions.csv``  text table ``index,x_m,y_m`` with header

Single fields are a raw ``.f32`` file (re/im interleaved when complex) plus a
``<name>.f32.json`` sidecar recording kind, shape and pixel size.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .fields import ComplexField, RealField
from .forward import DiffractionStack, ScanPlan

SCAN_FORMAT_VERSION = "1"
MANIFEST_NAME = "scan.json"


class ScanIOError(Exception):
    """Base class for container format errors."""


class ManifestVersionError(ScanIOError):
    pass


class SizeMismatchError(ScanIOError):
    pass


class MissingFileError(ScanIOError):
    pass


class FieldKindError(ScanIOError):
    pass


def _require_size(path: str, expected: int) -> None:
    if not os.path.isfile(path):
        raise MissingFileError(f"missing file: {path}")
    actual = os.path.getsize(path)
    if actual != expected:
        raise SizeMismatchError(f"{path}: expected {expected} bytes, got {actual}")


def write_scan(stack: DiffractionStack, dirpath: str, provenance: dict | None = None) -> str:
    """Write the scan container; returns the manifest path."""
    os.makedirs(dirpath, exist_ok=True)
    plan = stack.plan
    qh, qw = plan.pattern_shape

    arr = stack.stacked().astype("<f4")
    with open(os.path.join(dirpath, "stack.f32"), "wb") as f:
        f.write(arr.tobytes())
    with open(os.path.join(dirpath, "flat.f32"), "wb") as f:
        f.write(stack.flat.data.astype("<f4").tobytes())
    with open(os.path.join(dirpath, "positions.csv"), "w", encoding="utf-8") as f:
        f.write("index,x_m,y_m\n")
        for j, (x, y) in enumerate(plan.positions):
            f.write(f"{j},{float(x)!r},{float(y)!r}\n")

    manifest = {
        "version": SCAN_FORMAT_VERSION,
        "pattern_shape": [qh, qw],
        "num_positions": plan.num_positions,
        "object_pixel_m": plan.object_pixel_m,
        "object_shape": list(plan.object_shape),
        "scan_step_m": plan.step_m if plan.raster_shape is not None else None,
        "raster_shape": list(plan.raster_shape) if plan.raster_shape is not None else None,
        "files": {"stack": "stack.f32", "positions": "positions.csv", "flat": "flat.f32"},
        "dtype": "f32le",
        "provenance": provenance or {},
    }
    manifest_path = os.path.join(dirpath, MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest_path


def read_scan(dirpath: str) -> DiffractionStack:
    """Read a scan container back; sizes are checked before the stack is loaded."""
    manifest_path = os.path.join(dirpath, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise MissingFileError(f"missing manifest: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    version = manifest.get("version")
    if version != SCAN_FORMAT_VERSION:
        raise ManifestVersionError(f"unsupported scan format version: {version!r}")

    qh, qw = (int(v) for v in manifest["pattern_shape"])
    J = int(manifest["num_positions"])
    files = manifest["files"]
    stack_path = os.path.join(dirpath, files["stack"])
    flat_path = os.path.join(dirpath, files["flat"])
    pos_path = os.path.join(dirpath, files["positions"])
    _require_size(stack_path, J * qh * qw * 4)
    _require_size(flat_path, qh * qw * 4)
    if not os.path.isfile(pos_path):
        raise MissingFileError(f"missing file: {pos_path}")

    positions = np.zeros((J, 2), dtype=np.float64)
    with open(pos_path, encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "index,x_m,y_m":
            raise ScanIOError(f"bad positions header: {header!r}")
        for line in f:
            idx, x, y = line.strip().split(",")
            positions[int(idx)] = (float(x), float(y))

    object_pixel_m = float(manifest["object_pixel_m"])
    raster = manifest.get("raster_shape")
    plan = ScanPlan(
        positions=positions,
        pattern_shape=(qh, qw),
        object_shape=tuple(int(v) for v in manifest["object_shape"]),
        object_pixel_m=object_pixel_m,
        raster_shape=tuple(int(v) for v in raster) if raster else None,
    )
    qstep = 2.0 * np.pi / (qw * object_pixel_m)
    raw = np.fromfile(stack_path, dtype="<f4").reshape(J, qh, qw)
    patterns = [RealField(raw[j].astype(np.float64), qstep) for j in range(J)]
    flat = RealField(np.fromfile(flat_path, dtype="<f4").astype(np.float64).reshape(qh, qw), qstep)
    return DiffractionStack(plan=plan, patterns=patterns, flat=flat)


def write_field(field: ComplexField | RealField, path: str) -> None:
    """Raw f32le dump plus a JSON sidecar (kind, shape, pixel size)."""
    if isinstance(field, ComplexField):
        kind = "complex"
        h, w = field.shape
        buf = np.empty((h, w, 2), dtype="<f4")
        buf[..., 0] = field.data.real
        buf[..., 1] = field.data.imag
    else:
        kind = "real"
        buf = field.data.astype("<f4")
    with open(path, "wb") as f:
        f.write(buf.tobytes())
    sidecar = {"kind": kind, "shape": list(field.shape), "pixel_size_m": field.pixel_size}
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def read_field(path: str, kind: str | None = None) -> ComplexField | RealField:
    """Read a field written by write_field; ``kind`` asserts 'real' or 'complex'."""
    sidecar_path = path + ".json"
    if not os.path.isfile(sidecar_path):
        raise MissingFileError(f"missing sidecar: {sidecar_path}")
    with open(sidecar_path, encoding="utf-8") as f:
        meta = json.load(f)
    actual_kind = meta["kind"]
    if kind is not None and actual_kind != kind:
        raise FieldKindError(f"{path}: field kind is {actual_kind!r}, expected {kind!r}")
    h, w = (int(v) for v in meta["shape"])
    pixel = float(meta["pixel_size_m"])
    per_value = 2 if actual_kind == "complex" else 1
    _require_size(path, h * w * per_value * 4)
    raw = np.fromfile(path, dtype="<f4")
    if actual_kind == "complex":
        raw = raw.reshape(h, w, 2)
        return ComplexField(raw[..., 0].astype(np.float64) + 1j * raw[..., 1], pixel)
    return RealField(raw.reshape(h, w).astype(np.float64), pixel)


_VIEWS = ("modulus", "phase", "real", "imag")


def render_pgm(
    field: ComplexField | RealField,
    view: str,
    path: str,
    vrange: tuple[float, float] | None = None,
) -> None:
    """Render one view of a field as a binary 8-bit PGM (P5) image.

    ``view`` is one of modulus/phase/real/imag. The phase view maps [-pi, pi]
    onto 0..255 unless an explicit range is given; other views auto-range.
    """
    if view not in _VIEWS:
        raise ValueError(f"unknown view {view!r}, expected one of {_VIEWS}")
    d = field.data
    if view == "modulus":
        img = np.abs(d)
    elif view == "phase":
        img = np.angle(d.astype(np.complex128))
    elif view == "real":
        img = d.real
    else:
        img = d.imag if np.iscomplexobj(d) else np.zeros_like(d)

    if vrange is not None:
        lo, hi = float(vrange[0]), float(vrange[1])
    elif view == "phase":
        lo, hi = -math.pi, math.pi
    else:
        lo, hi = float(np.min(img)), float(np.max(img))
    if hi <= lo:
        pixels = np.full(img.shape, 128, dtype=np.uint8)
    else:
        scaled = (img - lo) / (hi - lo) * 255.0
        pixels = np.rint(np.clip(scaled, 0.0, 255.0)).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def write_convergence_csv(history: list[tuple[int, float]], path: str) -> None:
    """Cost-per-sweep table: ``sweep,cost,log10_cost`` at full float precision."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("sweep,cost,log10_cost\n")
        for sweep, c in history:
            c = float(c)
            log10c = math.log10(c) if c > 0 else float("-inf")
            f.write(f"{int(sweep)},{c!r},{log10c!r}\n")


def read_convergence_csv(path: str) -> list[tuple[int, float]]:
    """Inverse of write_convergence_csv (sweep and cost columns)."""
    out = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "sweep,cost,log10_cost":
            raise ScanIOError(f"bad convergence header: {header!r}")
        for line in f:
            sweep, c, _ = line.strip().split(",")
            out.append((int(sweep), float(c)))
    return out
