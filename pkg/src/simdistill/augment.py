"""Stochastic view augmentation for feature vectors and small images.

Two named policies order themselves by expected distortion: "mild" adds
only a little gaussian noise (plus horizontal flips on images), while
"aggressive" adds strong noise, coordinate masking, random rescaling and,
on images, random crops. The identity policy "none" passes samples
through bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError

POLICY_NAMES = ("none", "mild", "aggressive", "custom")


@dataclass(frozen=True)
class AugmentPolicy:
    """Per-transform parameters of one augmentation policy.

    ``rotation_range`` (radians) applies to feature vectors only;
    ``crop_range`` (area fraction) and ``flip_prob`` apply to images only.
    A zero / empty parameter disables its transform.
    """

    name: str = "none"
    noise_std: float = 0.0
    mask_prob: float = 0.0
    scale_range: tuple[float, float] | None = None
    rotation_range: float = 0.0
    crop_range: tuple[float, float] | None = None
    flip_prob: float = 0.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ContractError("AugmentPolicy: noise_std must be non-negative")
        for p, what in ((self.mask_prob, "mask_prob"), (self.flip_prob, "flip_prob")):
            if not 0.0 <= p <= 1.0:
                raise ContractError(f"AugmentPolicy: {what} must lie in [0, 1]")
        for rng_pair, what in ((self.scale_range, "scale_range"), (self.crop_range, "crop_range")):
            if rng_pair is not None:
                lo, hi = rng_pair
                if lo > hi or lo <= 0:
                    raise ContractError(f"AugmentPolicy: bad {what} {rng_pair}")
        if self.crop_range is not None and self.crop_range[1] > 1.0:
            raise ContractError("AugmentPolicy: crop fraction cannot exceed 1")

    @property
    def is_identity(self) -> bool:
        return (self.noise_std == 0 and self.mask_prob == 0 and self.scale_range is None
                and self.rotation_range == 0 and self.crop_range is None and self.flip_prob == 0)


IDENTITY = AugmentPolicy("none")
MILD = AugmentPolicy("mild", noise_std=0.05, flip_prob=0.5)
AGGRESSIVE = AugmentPolicy(
    "aggressive",
    noise_std=0.25,
    mask_prob=0.2,
    scale_range=(0.5, 1.5),
    crop_range=(0.6, 1.0),
)


def policy_by_name(name: str, custom: AugmentPolicy | None = None) -> AugmentPolicy:
    if name == "none":
        return IDENTITY
    if name == "mild":
        return MILD
    if name == "aggressive":
        return AGGRESSIVE
    if name == "custom":
        if custom is None:
            raise ContractError("policy 'custom' requested without parameters")
        return replace(custom, name="custom")
    raise ContractError(f"unknown augmentation policy {name!r}")


def _crop_resize(img: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape
    side = np.sqrt(fraction)
    ch = max(1, int(round(h * side)))
    cw = max(1, int(round(w * side)))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    patch = img[top:top + ch, left:left + cw]
    # nearest-neighbour resize back to the original grid
    rows = np.minimum((np.arange(h) * ch) // h, ch - 1)
    cols = np.minimum((np.arange(w) * cw) // w, cw - 1)
    return patch[np.ix_(rows, cols)]


def augment(sample: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Draw one stochastic view of a sample under the given policy.

    Deterministic given the generator state; two calls on independent (or
    sequential) streams give the two independent views of a query. The
    identity policy returns a bitwise copy without consuming randomness.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if not np.all(np.isfinite(sample)):
        raise ContractError("augment: sample must be finite")
    view = sample.copy()
    if policy.is_identity:
        return view

    is_image = view.ndim == 2
    if is_image and policy.crop_range is not None:
        lo, hi = policy.crop_range
        view = _crop_resize(view, float(rng.uniform(lo, hi)), rng)
    if is_image and policy.flip_prob > 0 and rng.random() < policy.flip_prob:
        view = view[:, ::-1].copy()
    if not is_image and policy.rotation_range > 0 and view.shape[0] >= 2:
        d = view.shape[0]
        i, j = rng.choice(d, size=2, replace=False)
        theta = rng.uniform(-policy.rotation_range, policy.rotation_range)
        c, s = np.cos(theta), np.sin(theta)
        vi, vj = view[i], view[j]
        view[i] = c * vi - s * vj
        view[j] = s * vi + c * vj
    if policy.scale_range is not None:
        lo, hi = policy.scale_range
        view *= rng.uniform(lo, hi)
    if policy.noise_std > 0:
        view += rng.normal(0.0, policy.noise_std, size=view.shape)
    if policy.mask_prob > 0:
        view[rng.random(view.shape) < policy.mask_prob] = 0.0
    return view


def mean_distortion(samples: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator,
                    draws: int = 1) -> float:
    """Average L2 distance between samples and their augmented views.

    Used to verify that the aggressive policy dominates the mild one on a
    fixed corpus before running the bias-removal distillation experiment.
    """
    total = 0.0
    n = 0
    for _ in range(draws):
        for x in samples:
            view = augment(x, policy, rng)
            total += float(np.linalg.norm((view - x).ravel()))
            n += 1
    return total / max(n, 1)
