"""On-disk formats.

Descriptor files (``.cfvd``), little-endian::

    magic b"CFVD" | version u16 | N u32 | D u32 | flags u16
    N*D float32 (row-major) | [N*3 float32 positions if flags & 1]

Encoded-vector files (``.cfve``), little-endian::

    magic b"CFVE" | version u16 | kind u8 | flags u8 | K u32 | D u32 | length u32
    alpha f64 | gamma f64 | length float32

Encoded-vector flag bits: 1 power norm, 2 L2 norm, 4 first order,
8 second order, 16 fv-compat scale.

The model container is canonical JSON (sorted keys, fixed separators) with
one sha256 checksum per named section, so load then save reproduces the
input byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .classifier import LinearSvmModel
from .descriptors import DescriptorSet
from .encoders import ENCODER_KINDS, EncodedVector, EncodingConfig
from .errors import FormatError
from .gmm import GmmModel
from .linalg import PcaModel

DESCRIPTOR_MAGIC = b"CFVD"
ENCODED_MAGIC = b"CFVE"
FORMAT_VERSION = 1
CONTAINER_FORMAT = "cfv-model-container"
CONTAINER_VERSION = 1

_DESC_HEADER = struct.Struct("<4sHIIH")
_ENC_HEADER = struct.Struct("<4sHBBIIIdd")
_HAS_POSITIONS = 1


# -- descriptors -----------------------------------------------------------

def descriptors_to_bytes(ds: DescriptorSet) -> bytes:
    flags = _HAS_POSITIONS if ds.positions is not None else 0
    parts = [_DESC_HEADER.pack(DESCRIPTOR_MAGIC, FORMAT_VERSION, ds.count, ds.dim, flags),
             np.ascontiguousarray(ds.data, dtype="<f4").tobytes()]
    if ds.positions is not None:
        parts.append(np.ascontiguousarray(ds.positions, dtype="<f4").tobytes())
    return b"".join(parts)


def descriptors_from_bytes(buf: bytes, source_id: str = "") -> DescriptorSet:
    if len(buf) < _DESC_HEADER.size:
        raise FormatError("descriptor file shorter than its header")
    magic, version, n, d, flags = _DESC_HEADER.unpack_from(buf)
    if magic != DESCRIPTOR_MAGIC:
        raise FormatError(f"bad descriptor magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported descriptor format version {version}")
    payload = n * d * 4
    expected = _DESC_HEADER.size + payload + (n * 12 if flags & _HAS_POSITIONS else 0)
    if len(buf) != expected:
        raise FormatError(f"descriptor file has {len(buf)} bytes, header N={n}, D={d} "
                          f"implies {expected}")
    off = _DESC_HEADER.size
    data = np.frombuffer(buf, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    positions = None
    if flags & _HAS_POSITIONS:
        positions = np.frombuffer(buf, dtype="<f4", count=n * 3, offset=off + payload).reshape(n, 3)
        positions = positions.astype(np.float64)
    return DescriptorSet(data.astype(np.float64), positions, source_id)


def save_descriptors(ds: DescriptorSet, path) -> None:
    Path(path).write_bytes(descriptors_to_bytes(ds))


def load_descriptors(path) -> DescriptorSet:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read descriptor file {path}: {exc}") from exc
    return descriptors_from_bytes(buf, source_id=str(path))


# -- encoded vectors -------------------------------------------------------

def _enc_flags(c: EncodingConfig) -> int:
    return (c.apply_power_norm * 1 | c.apply_l2_norm * 2 | c.include_first_order * 4
            | c.include_second_order * 8 | c.fv_compat_scale * 16)


def encoded_to_bytes(ev: EncodedVector) -> bytes:
    c = ev.config
    header = _ENC_HEADER.pack(ENCODED_MAGIC, FORMAT_VERSION, ENCODER_KINDS.index(ev.kind),
                              _enc_flags(c), ev.K, ev.D, len(ev), c.alpha, c.gamma)
    return header + np.ascontiguousarray(ev.values, dtype="<f4").tobytes()


def encoded_from_bytes(buf: bytes) -> EncodedVector:
    if len(buf) < _ENC_HEADER.size:
        raise FormatError("encoded-vector file shorter than its header")
    magic, version, kind, flags, k, d, length, alpha, gamma = _ENC_HEADER.unpack_from(buf)
    if magic != ENCODED_MAGIC:
        raise FormatError(f"bad encoded-vector magic {magic!r}")
    if version != FORMAT_VERSION or kind >= len(ENCODER_KINDS):
        raise FormatError(f"unsupported encoded-vector header (version {version}, kind {kind})")
    if len(buf) != _ENC_HEADER.size + 4 * length:
        raise FormatError(f"encoded-vector payload truncated: header says {length} floats")
    values = np.frombuffer(buf, dtype="<f4", count=length, offset=_ENC_HEADER.size)
    config = EncodingConfig(alpha=alpha, gamma=gamma, apply_power_norm=bool(flags & 1),
                            apply_l2_norm=bool(flags & 2), include_first_order=bool(flags & 4),
                            include_second_order=bool(flags & 8),
                            fv_compat_scale=bool(flags & 16))
    return EncodedVector(values.astype(np.float64), ENCODER_KINDS[kind], k, d, config)


def save_encoded(ev: EncodedVector, path) -> None:
    Path(path).write_bytes(encoded_to_bytes(ev))


def load_encoded(path) -> EncodedVector:
    try:
        return encoded_from_bytes(Path(path).read_bytes())
    except OSError as exc:
        raise FormatError(f"cannot read encoded-vector file {path}: {exc}") from exc


def write_vectors_text(vectors, path) -> None:
    """One vector per line, whitespace separated, shortest round-trip repr."""
    with open(path, "w") as fh:
        for v in vectors:
            fh.write(" ".join(repr(float(x)) for x in np.asarray(v)) + "\n")


def read_vectors_text(path) -> list[np.ndarray]:
    with open(path) as fh:
        return [np.array([float(t) for t in line.split()]) for line in fh if line.strip()]


# -- manifests -------------------------------------------------------------

def read_manifest(path) -> list[dict[str, str]]:
    """CSV with a header row; ``path`` and ``label`` columns, optional ``split``.
    Relative paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    for i, row in enumerate(rows):
        if not row.get("path"):
            raise FormatError(f"{path}: row {i + 1} has no path")
        p = Path(row["path"])
        row["path"] = str(p if p.is_absolute() else path.parent / p)
    return rows


def write_manifest(rows: list[dict[str, str]], path, fields=("path", "label")) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            p = Path(row["path"])
            try:
                p = p.relative_to(path.parent)
            except ValueError:
                pass
            w.writerow({**row, "path": str(p)})


# -- model container -------------------------------------------------------

def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def pca_to_dict(m: PcaModel) -> dict:
    return {"mean": _arr(m.mean), "basis": _arr(m.basis),
            "eigenvalues": _arr(m.eigenvalues), "whiten": m.whiten}


def pca_from_dict(d: dict) -> PcaModel:
    return PcaModel(mean=np.array(d["mean"]), basis=np.array(d["basis"]),
                    eigenvalues=np.array(d["eigenvalues"]), whiten=bool(d["whiten"]))


def gmm_to_dict(m: GmmModel) -> dict:
    return {"kind": m.kind, "floor": m.floor, "priors": _arr(m.priors),
            "means": _arr(m.means), "covariances": _arr(m.covariances)}


def gmm_from_dict(d: dict) -> GmmModel:
    m = GmmModel.from_params(d["priors"], d["means"], d["covariances"], d["kind"], d["floor"])
    m.check_cache()
    return m


def svm_to_dict(m: LinearSvmModel) -> dict:
    return {"classes": list(m.classes), "weights": _arr(m.weights), "biases": _arr(m.biases)}


def svm_from_dict(d: dict) -> LinearSvmModel:
    return LinearSvmModel(classes=tuple(d["classes"]), weights=np.array(d["weights"]),
                          biases=np.array(d["biases"]))


def encoding_to_dict(c: EncodingConfig) -> dict:
    return asdict(c)


def encoding_from_dict(d: dict) -> EncodingConfig:
    return EncodingConfig(**d)


_SECTIONS = {
    "pca": (PcaModel, pca_to_dict, pca_from_dict),
    "gmm": (GmmModel, gmm_to_dict, gmm_from_dict),
    "svm": (LinearSvmModel, svm_to_dict, svm_from_dict),
    "encoding": (EncodingConfig, encoding_to_dict, encoding_from_dict),
}


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _checksum(payload) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def container_to_bytes(sections: dict, metadata: dict | None = None) -> bytes:
    """Serialise ``{"pca": PcaModel, "gmm": GmmModel, ...}``; absent or
    ``None`` sections are omitted."""
    out = {}
    for name, obj in sections.items():
        if obj is None:
            continue
        if name not in _SECTIONS:
            raise FormatError(f"unknown container section {name!r}")
        payload = _SECTIONS[name][1](obj)
        out[name] = {"checksum": _checksum(payload), "payload": payload}
    doc = {"format": CONTAINER_FORMAT, "version": CONTAINER_VERSION,
           "metadata": metadata or {}, "sections": out}
    return (_canonical(doc) + "\n").encode("utf-8")


def container_from_bytes(buf: bytes) -> tuple[dict, dict]:
    try:
        doc = json.loads(buf.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"model container is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CONTAINER_FORMAT:
        raise FormatError("not a model container")
    if doc.get("version") != CONTAINER_VERSION:
        raise FormatError(f"unsupported container version {doc.get('version')!r}")
    sections = {}
    for name, sec in doc.get("sections", {}).items():
        if name not in _SECTIONS:
            raise FormatError(f"unknown container section {name!r}")
        if _checksum(sec["payload"]) != sec.get("checksum"):
            raise FormatError(f"checksum mismatch in container section {name!r}")
        try:
            sections[name] = _SECTIONS[name][2](sec["payload"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed container section {name!r}: {exc}") from exc
    return sections, doc.get("metadata", {})


def save_container(path, sections: dict, metadata: dict | None = None) -> None:
    Path(path).write_bytes(container_to_bytes(sections, metadata))


def load_container(path) -> tuple[dict, dict]:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read model container {path}: {exc}") from exc
    return container_from_bytes(buf)
