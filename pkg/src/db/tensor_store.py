"""Named tensor container stored in the NBT1 file format.

Layout::

    b"NBT1" | uint64 little-endian header length | UTF-8 JSON header | payloads

The header is `{"version": 1, "entries": [{"name", "dtype", "shape",
"offset", "nbytes"}...], "metadata": {...}}`; offsets are relative to the
first payload byte and payloads are raw little-endian f32/f64 data. Lookup
is by name, so readers ignore entries they do not know about.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"NBT1"
VERSION = 1
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_CODES = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}


class TensorStore:
    """In-memory mapping of names to float arrays plus a metadata record."""

    def __init__(self, metadata: Optional[Dict[str, Any]] = None):
        self._tensors: Dict[str, np.ndarray] = {}
        self.metadata: Dict[str, Any] = dict(metadata or {})

    def add(self, name: str, array: np.ndarray) -> None:
        arr = np.asarray(array)
        if arr.dtype not in _CODES:
            raise FormatError(f"tensor {name!r} has unsupported dtype {arr.dtype}; expected float32/float64")
        self._tensors[name] = arr

    def update(self, tensors: Mapping[str, np.ndarray], prefix: str = "") -> None:
        for name, arr in tensors.items():
            self.add(prefix + name, arr)

    def get(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"tensor {name!r} not in store") from None

    def group(self, prefix: str) -> Dict[str, np.ndarray]:
        """All tensors whose name starts with `prefix`, prefix stripped."""
        return {k[len(prefix):]: v for k, v in self._tensors.items() if k.startswith(prefix)}

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        entries = []
        payloads = []
        offset = 0
        for name, arr in self._tensors.items():
            code = _CODES[arr.dtype]
            raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
            entries.append({"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
            payloads.append(raw)
            offset += len(raw)
        header = json.dumps(
            {"version": VERSION, "entries": entries, "metadata": self.metadata},
            sort_keys=True,
            ensure_ascii=False,
        ).encode("utf-8")
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<Q", len(header)))
            f.write(header)
            for raw in payloads:
                f.write(raw)
        tmp.replace(path)
        logger.debug("wrote %d tensors (%d payload bytes) to %s", len(entries), offset, path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TensorStore":
        with open(path, "rb") as f:
            blob = f.read()
        header, payload_start = _parse_header(blob)
        store = cls(metadata=header.get("metadata") or {})
        for entry in header.get("entries", []):
            try:
                name, code, shape = entry["name"], entry["dtype"], tuple(entry["shape"])
                offset = int(entry["offset"])
            except (KeyError, TypeError, ValueError):
                raise FormatError(f"malformed container entry {entry!r}", offset=12) from None
            if code not in _DTYPES:
                raise FormatError(f"tensor {name!r} has unknown dtype {code!r}", offset=12)
            dtype = _DTYPES[code]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            start = payload_start + offset
            if start + nbytes > len(blob):
                raise FormatError(f"payload of {name!r} truncated", offset=len(blob))
            arr = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
            store._tensors[name] = arr.reshape(shape).astype(dtype.newbyteorder("="), copy=True)
        return store


def _parse_header(blob: bytes) -> Tuple[Dict[str, Any], int]:
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(blob) < 12:
        raise FormatError("truncated header length", offset=len(blob))
    (length,) = struct.unpack("<Q", blob[4:12])
    if 12 + length > len(blob):
        raise FormatError(f"header of {length} bytes truncated", offset=len(blob))
    try:
        header = json.loads(blob[12:12 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"unreadable header ({e})", offset=12) from None
    if not isinstance(header, dict):
        raise FormatError("header is not a JSON object", offset=12)
    return header, 12 + length


def save_tensors(path: Union[str, Path], tensors: Mapping[str, np.ndarray], metadata: Optional[Dict[str, Any]] = None) -> None:
    store = TensorStore(metadata)
    store.update(tensors)
    store.save(path)


def load_tensors(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    store = TensorStore.load(path)
    return {name: store.get(name) for name in store}, store.metadata
