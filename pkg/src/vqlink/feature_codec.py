"""Deterministic patch-transform image codec (stand-in for a learned autoencoder).

Images are cut into 8x8 RGB patches (downsampling factor 8, so a 256x256
input yields a 32x32 feature grid) and each patch is projected onto the
top n_q principal components of a training corpus. Encoding is therefore
an orthogonal projection: training-free, lossless for in-span patches and
exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "PATCH",
    "PATCH_DIM",
    "PatchBasis",
    "fit_basis",
    "encode",
    "decode",
    "pad_image",
    "load_image",
    "save_image",
]

PATCH = 8
PATCH_DIM = PATCH * PATCH * 3  # 192 values per 8x8 RGB patch


@dataclass(frozen=True)
class PatchBasis:
    """Orthonormal analysis rows (n_q, 192) plus the training patch mean."""

    rows: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != PATCH_DIM or not 1 <= rows.shape[0] <= PATCH_DIM:
            raise ValueError(f"basis rows must have shape (n_q<={PATCH_DIM}, {PATCH_DIM}), got {rows.shape}")
        if mean.shape != (PATCH_DIM,):
            raise ValueError(f"mean must have shape ({PATCH_DIM},), got {mean.shape}")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(mean))):
            raise ValueError("basis must be finite")
        gram = rows @ rows.T
        if np.abs(gram - np.eye(rows.shape[0])).max() > 1e-6:
            raise ValueError("basis rows must be orthonormal within 1e-6")
        rows = rows.copy()
        mean = mean.copy()
        rows.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "mean", mean)

    @property
    def n_q(self) -> int:
        return self.rows.shape[0]


def _check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must have shape (H, W, 3), got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image must be finite")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return img


def pad_image(img: np.ndarray) -> np.ndarray:
    """Replicate-pad so both spatial dimensions are multiples of the patch size."""
    h_pad = (-img.shape[0]) % PATCH
    w_pad = (-img.shape[1]) % PATCH
    if h_pad == 0 and w_pad == 0:
        return img
    return np.pad(img, ((0, h_pad), (0, w_pad), (0, 0)), mode="edge")


def _to_patches(img: np.ndarray) -> np.ndarray:
    """(H, W, 3) with H, W multiples of 8 -> (h, w, 192), C-order patch layout."""
    h, w = img.shape[0] // PATCH, img.shape[1] // PATCH
    return (img.reshape(h, PATCH, w, PATCH, 3)
               .transpose(0, 2, 1, 3, 4)
               .reshape(h, w, PATCH_DIM))


def _from_patches(patches: np.ndarray) -> np.ndarray:
    h, w = patches.shape[:2]
    return (patches.reshape(h, w, PATCH, PATCH, 3)
                   .transpose(0, 2, 1, 3, 4)
                   .reshape(h * PATCH, w * PATCH, 3))


def fit_basis(images, n_q: int, seed: int = 0, max_patches: int = 500_000) -> PatchBasis:
    """Principal-component patch basis from a corpus of images.

    Patches are mean-centered and the top n_q eigenvectors of their
    covariance become the analysis rows (signs fixed so each row's largest
    component is positive). The seed only matters when the corpus exceeds
    max_patches and must be subsampled.
    """
    if not 1 <= n_q <= PATCH_DIM:
        raise ValueError(f"n_q must be in [1, {PATCH_DIM}], got {n_q}")
    blocks = [_to_patches(pad_image(_check_image(img))).reshape(-1, PATCH_DIM) for img in images]
    if not blocks:
        raise ValueError("empty training corpus")
    x = np.concatenate(blocks, axis=0)
    if x.shape[0] < n_q:
        raise ValueError(f"corpus supplies {x.shape[0]} patches, need at least {n_q}")
    if x.shape[0] > max_patches:
        rng = np.random.default_rng(seed)
        x = x[np.sort(rng.choice(x.shape[0], size=max_patches, replace=False))]
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    if cov.trace() <= 0.0:
        raise ValueError("degenerate corpus: patches have no variance")
    eigvals, eigvecs = np.linalg.eigh(cov)
    rows = eigvecs[:, np.argsort(eigvals)[::-1][:n_q]].T
    for row in rows:
        if row[np.abs(row).argmax()] < 0:
            row *= -1.0
    return PatchBasis(rows=rows, mean=mean)


def encode(img, basis: PatchBasis) -> np.ndarray:
    """Project an image onto the patch basis: (H, W, 3) -> (H/8, W/8, n_q)."""
    patches = _to_patches(pad_image(_check_image(img)))
    return (patches - basis.mean) @ basis.rows.T


def decode(z, basis: PatchBasis, out_hw: tuple[int, int] | None = None) -> np.ndarray:
    """Reconstruct an image from features; crops to out_hw if the source was padded."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3 or z.shape[2] != basis.n_q:
        raise ValueError(f"features must have shape (h, w, {basis.n_q}), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("features must be finite")
    img = _from_patches(z @ basis.rows + basis.mean)
    np.clip(img, 0.0, 1.0, out=img)
    if out_hw is not None:
        oh, ow = out_hw
        if not (0 < oh <= img.shape[0] and 0 < ow <= img.shape[1]):
            raise ValueError(f"cannot crop decoded {img.shape[:2]} image to {out_hw}")
        img = img[:oh, :ow]
    return img


def load_image(path) -> np.ndarray:
    """8-bit RGB file -> float image in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_image(path, img) -> None:
    img = _check_image(img)
    Image.fromarray((np.round(img * 255.0)).astype(np.uint8)).save(path)
