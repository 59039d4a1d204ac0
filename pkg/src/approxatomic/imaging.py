"""Block-wise decomposition of grayscale images.

Each ``b x b`` block is vectorised (row-major) and treated as a vector of the
model space R^{b^2}. A frame supplies analysis rows and synthesis atoms; the
operator K enters either by lifting the atoms (signal-space operators) or by
zeroing a functional (coefficient-space operators), so the synthesis yields
K(block) rather than the block itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .generators import mercedes_vectors

__all__ = [
    "PGMError",
    "ImageDemoConfig",
    "read_pgm",
    "write_pgm",
    "gradient_image",
    "dct_matrix",
    "block_frame",
    "block_operator",
    "demo_image",
    "FRAMES",
    "OPERATORS",
]

FRAMES = ("orthonormal-dct", "mercedes-overcomplete")
OPERATORS = ("identity", "blur3", "drop-first-coefficient")


class PGMError(ValueError):
    pass


def _pgm_tokens(data: bytes, count: int) -> tuple:
    """Read ``count`` header tokens, skipping ``#`` comments; return them and
    the offset of the single whitespace byte that ends the header."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise PGMError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if maxval != 255:
        raise PGMError(f"only maxval 255 is supported, got {maxval}")
    raw = data[pos + 1: pos + 1 + w * h]
    if len(raw) != w * h:
        raise PGMError("truncated PGM pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, img: np.ndarray):
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("write_pgm expects a 2-D uint8 array")
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def gradient_image(height: int = 256, width: int = 256) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    return np.round(255.0 * (xx + yy) / max(1, height + width - 2)).astype(np.uint8)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; row k is the k-th cosine atom."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    C = np.cos(math.pi * (2 * j + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    C[0] /= math.sqrt(2.0)
    return C


def block_frame(name: str, block: int) -> tuple:
    """Analysis rows ``A`` (m x b^2) and synthesis atoms ``S`` (b^2 x m) with
    ``S @ A = I``."""
    n = block * block
    if name == "orthonormal-dct":
        D = dct_matrix(block)
        A = np.kron(D, D)
        return A, A.T
    if name == "mercedes-overcomplete":
        if n % 2:
            raise ValueError("mercedes-overcomplete needs an even number of pixels per block")
        V = mercedes_vectors()
        A = np.kron(np.eye(n // 2), V)
        return A, np.kron(np.eye(n // 2), 2.0 / 3.0 * V.T)
    raise ValueError(f"unknown frame {name!r}")


def _blur_rows(block: int) -> np.ndarray:
    """[1, 2, 1]/4 along a row of length ``block``, edge pixels replicated."""
    B = np.zeros((block, block))
    for j in range(block):
        for off, w in ((-1, 0.25), (0, 0.5), (1, 0.25)):
            B[j, min(max(j + off, 0), block - 1)] += w
    return B


def block_operator(name: str, block: int) -> np.ndarray | None:
    """Signal-space matrix of K on a vectorised block, or None for the
    coefficient-space operator ``drop-first-coefficient``."""
    if name == "identity":
        return np.eye(block * block)
    if name == "blur3":
        return np.kron(np.eye(block), _blur_rows(block))
    if name == "drop-first-coefficient":
        return None
    raise ValueError(f"unknown operator {name!r}")


@dataclass(frozen=True)
class ImageDemoConfig:
    input: str
    output: str | None = None
    block: int = 8
    operator: str = "identity"
    frame: str = "orthonormal-dct"


def _to_blocks(img: np.ndarray, b: int) -> np.ndarray:
    h, w = img.shape
    return img.reshape(h // b, b, w // b, b).transpose(0, 2, 1, 3).reshape(-1, b * b).T


def _from_blocks(cols: np.ndarray, shape: tuple, b: int) -> np.ndarray:
    h, w = shape
    return cols.T.reshape(h // b, w // b, b, b).transpose(0, 2, 1, 3).reshape(h, w)


def _target(img: np.ndarray, op: str, b: int, frame: str) -> np.ndarray:
    """K(image) computed directly, without running the full frame."""
    if op == "identity":
        return img.copy()
    if op == "blur3":
        padded = np.pad(img.reshape(img.shape[0], -1, b), ((0, 0), (0, 0), (1, 1)), mode="edge")
        out = 0.25 * padded[..., :-2] + 0.5 * padded[..., 1:-1] + 0.25 * padded[..., 2:]
        return out.reshape(img.shape)
    cols = _to_blocks(img, b)
    if frame == "orthonormal-dct":
        # the first DCT atom is constant, so dropping it removes the block mean
        return _from_blocks(cols - cols.mean(axis=0), img.shape, b)
    A, S = block_frame(frame, b)
    return _from_blocks(cols - np.outer(S[:, 0], A[0] @ cols), img.shape, b)


def run_blocks(img: np.ndarray, cfg: ImageDemoConfig) -> tuple:
    """Reconstruct K(img) block by block.

    Returns the float output, the directly computed target, whether edge
    padding was needed, and the block count.
    """
    b = cfg.block
    if b < 1:
        raise ValueError("block must be positive")
    h, w = img.shape
    ph, pw = (-h) % b, (-w) % b
    work = np.pad(img.astype(float), ((0, ph), (0, pw)), mode="edge") if (ph or pw) else img.astype(float)
    A, S = block_frame(cfg.frame, b)
    K = block_operator(cfg.operator, b)
    if K is None:
        A = A.copy()
        A[0] = 0.0  # first functional vanishes, as in the drop-first example
    else:
        S = K @ S  # atoms lifted by K
    cols = _to_blocks(work, b)
    out = _from_blocks(S @ (A @ cols), work.shape, b)
    target = _target(work, cfg.operator, b, cfg.frame)
    return out[:h, :w], target[:h, :w], bool(ph or pw), cols.shape[1]


def demo_image(cfg: ImageDemoConfig) -> dict:
    """Run the block demo; writes the output PGM when ``cfg.output`` is set
    and returns the metrics dictionary."""
    img = read_pgm(cfg.input)
    out, target, padded, blocks = run_blocks(img, cfg)
    offset = 128 if cfg.operator == "drop-first-coefficient" else 0
    quant = np.clip(np.round(out + offset), 0, 255)
    mse = float(np.mean((quant - offset - target) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)
    if cfg.output:
        write_pgm(cfg.output, quant.astype(np.uint8))
    metrics = {
        "frame": cfg.frame,
        "operator": cfg.operator,
        "block": cfg.block,
        "blocks": blocks,
        "levels": 1,
        "max_abs_error": float(np.max(np.abs(out - target))),
        "psnr_db": None if math.isinf(psnr) else psnr,
        "psnr_infinite": math.isinf(psnr),
        "padded": padded,
        "display_offset": offset,
        "clipped_pixels": int(np.count_nonzero((out + offset < -0.5) | (out + offset > 255.5))),
    }
    if cfg.operator == "drop-first-coefficient" and cfg.frame == "orthonormal-dct" and not padded:
        cols = _to_blocks(out, cfg.block)
        metrics["max_abs_block_mean"] = float(np.max(np.abs(cols.mean(axis=0))))
    return metrics
