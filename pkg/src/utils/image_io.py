"""Binary PGM (P5) and PPM (P6) reading and writing, 8-bit only."""
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.autograd import Tensor
from src.utils.errors import ConfigurationError, FormatError

logger = logging.getLogger(__name__)

_CHANNELS = {b"P5": 1, b"P6": 3}
_WHITESPACE = b" \t\r\n\v\f"


def _header_tokens(blob: bytes, count: int, pos: int = 0) -> Tuple[List[Tuple[bytes, int]], int]:
    """Read `count` whitespace-separated header tokens, skipping comments.

    Returns (token, offset) pairs and the offset of the first payload byte,
    which follows exactly one whitespace byte after the last token.
    """
    tokens = []
    n = len(blob)
    while len(tokens) < count:
        while pos < n and (blob[pos] in _WHITESPACE or blob[pos] == ord("#")):
            if blob[pos] == ord("#"):
                while pos < n and blob[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise FormatError("truncated header", offset=pos)
        start = pos
        while pos < n and blob[pos] not in _WHITESPACE and blob[pos] != ord("#"):
            pos += 1
        tokens.append((blob[start:pos], start))
    if pos >= n or blob[pos] not in _WHITESPACE:
        raise FormatError("header must end with a single whitespace byte", offset=pos)
    return tokens, pos + 1


def _int_token(token: bytes, offset: int, what: str) -> int:
    if not token.isdigit():
        raise FormatError(f"invalid {what} {token!r}", offset=offset)
    return int(token)


def decode_image(blob: bytes, dtype=np.float32) -> np.ndarray:
    """Parse a P5/P6 file into a 1 x C x H x W array in [0, 1]."""
    magic = blob[:2]
    if magic not in _CHANNELS:
        raise FormatError(f"unsupported magic {magic!r}; expected P5 or P6", offset=0)
    channels = _CHANNELS[magic]
    tokens, start = _header_tokens(blob, 3, pos=2)
    (w_tok, w_off), (h_tok, h_off), (m_tok, m_off) = tokens
    width = _int_token(w_tok, w_off, "width")
    height = _int_token(h_tok, h_off, "height")
    maxval = _int_token(m_tok, m_off, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"empty image {width}x{height}", offset=w_off)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 8-bit (255) images are read", offset=m_off)
    size = width * height * channels
    if len(blob) - start < size:
        raise FormatError(f"payload truncated: {len(blob) - start} of {size} bytes", offset=len(blob))
    pixels = np.frombuffer(blob, dtype=np.uint8, count=size, offset=start)
    pixels = pixels.reshape(height, width, channels).transpose(2, 0, 1)
    return (pixels.astype(np.float64) / 255.0).astype(dtype)[None]


def read_image(path: Union[str, Path], dtype=np.float32) -> Tensor:
    with open(path, "rb") as f:
        blob = f.read()
    try:
        return Tensor(decode_image(blob, dtype=dtype))
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def quantize(image, clamp: bool = False) -> np.ndarray:
    """C x H x W uint8 values, round half to even."""
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    arr = arr.astype(np.float64)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ConfigurationError(f"write_image takes one image, got a batch of {arr.shape[0]}")
        arr = arr[0]
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ConfigurationError(f"cannot store an image of shape {arr.shape}; need 1 or 3 channels")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("image has non-finite values")
    if clamp:
        arr = np.clip(arr, 0.0, 1.0)
    elif arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigurationError(
            f"values outside [0, 1] (min {arr.min():.4f}, max {arr.max():.4f}); pass clamp=True"
        )
    return np.rint(arr * 255.0).astype(np.uint8)


def encode_image(image, clamp: bool = False) -> bytes:
    q = quantize(image, clamp=clamp)
    channels, height, width = q.shape
    magic = b"P5" if channels == 1 else b"P6"
    header = magic + f"\n{width} {height}\n255\n".encode("ascii")
    return header + q.transpose(1, 2, 0).tobytes()


def write_image(image, path: Union[str, Path], clamp: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_image(image, clamp=clamp))
    logger.debug("wrote %s", path)
    return path
