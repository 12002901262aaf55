"""Gated label/image deformation with per-sample, per-epoch derived streams.

The core procedure, per sample and epoch: draw one uniform gate value and
skip when it exceeds the transform probability; otherwise pick one
(alpha, sigma) pair uniformly from the configured pool, generate one
displacement field, and warp the configured target(s). Companion
transforms (horizontal flip, random resize) run afterwards, in that order.

Reproducibility model: every (master_seed, sample_id, epoch) triple maps
statelessly onto an independent counter-based random stream, so a batch
can be processed by any number of workers in any order and still produce
bit-identical outputs. The flip and resize gates read separate lanes of
the same triple, so enabling them never shifts the deformation draws.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .fields import DeformationParams, DisplacementField, generate_displacement_field, round_half_away
from .warp import ImagePlane, LabelMask, WarpSpec, _bilinear_sample, warp_image, warp_label

__all__ = [
    "OmegaSet",
    "AugmentConfig",
    "SamplePair",
    "ApplyInfo",
    "DEFAULT_OMEGA_ENCODING",
    "sample_params",
    "derive_stream",
    "nsegment",
    "apply_augmentation",
    "apply_augmentation_with_info",
    "flip_horizontal",
    "resize_sample",
    "config_from_options",
]

MODE_LABEL_ONLY = "label_only"
MODE_IMAGE_ONLY = "image_only"
MODE_IDENTICAL = "identical"
_MODES = (MODE_LABEL_ONLY, MODE_IMAGE_ONLY, MODE_IDENTICAL)

# Default pool: the Cartesian product {1,15,30,50,100} x {3,5,10}.
DEFAULT_OMEGA_ENCODING = "1,15,30,50,100x3,5,10"

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Stream lanes: the deformation draws, then one lane per companion gate.
_LANE_MAIN = 0
_LANE_HFLIP = 1
_LANE_RESIZE = 2


@dataclass(frozen=True)
class OmegaSet:
    """Non-empty pool of (alpha, sigma) pairs sampled uniformly per call."""

    pairs: tuple[DeformationParams, ...]

    def __post_init__(self):
        if not self.pairs:
            raise InvalidParameterError("omega set must hold at least one (alpha, sigma) pair")

    @property
    def size(self) -> int:
        return len(self.pairs)

    @classmethod
    def product(cls, alphas: Sequence[float], sigmas: Sequence[float]) -> "OmegaSet":
        """Cartesian product, alphas outer, sigmas inner."""
        if not alphas or not sigmas:
            raise InvalidParameterError("omega product needs at least one alpha and one sigma")
        return cls(tuple(DeformationParams(a, s) for a in alphas for s in sigmas))

    @classmethod
    def parse(cls, encoded: str) -> "OmegaSet":
        """Parse the textual product encoding, e.g. "1,15,30,50,100x3,5,10"."""
        parts = encoded.split("x")
        if len(parts) != 2:
            raise InvalidParameterError(
                f"omega encoding must look like 'a1,a2x s1,s2', got {encoded!r}"
            )
        try:
            alphas = [float(tok) for tok in parts[0].split(",") if tok.strip()]
            sigmas = [float(tok) for tok in parts[1].split(",") if tok.strip()]
        except ValueError as exc:
            raise InvalidParameterError(f"bad omega encoding {encoded!r}: {exc}") from None
        return cls.product(alphas, sigmas)

    @classmethod
    def default(cls) -> "OmegaSet":
        return cls.parse(DEFAULT_OMEGA_ENCODING)

    def encode(self) -> str:
        alphas = []
        sigmas = []
        for p in self.pairs:
            if p.alpha not in alphas:
                alphas.append(p.alpha)
            if p.sigma not in sigmas:
                sigmas.append(p.sigma)
        if len(alphas) * len(sigmas) == len(self.pairs):
            return "%sx%s" % (
                ",".join("%g" % a for a in alphas),
                ",".join("%g" % s for s in sigmas),
            )
        # Non-product pool: encode each pair as its own single-element product.
        raise InvalidParameterError("only product-form omega sets have a textual encoding")


@dataclass(frozen=True)
class AugmentConfig:
    """Everything the augmentation of one corpus depends on."""

    p: float = 0.5
    omega: OmegaSet = dataclasses.field(default_factory=OmegaSet.default)
    mode: str = MODE_LABEL_ONLY
    warp_spec: WarpSpec = WarpSpec()
    master_seed: int = 0
    hflip_p: float = 0.0
    resize_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"p must lie in [0, 1], got {self.p}")
        if self.mode not in _MODES:
            raise InvalidParameterError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not 0.0 <= self.hflip_p <= 1.0:
            raise InvalidParameterError(f"hflip_p must lie in [0, 1], got {self.hflip_p}")
        if self.resize_range is not None:
            lo, hi = self.resize_range
            if not 0.0 < lo <= hi:
                raise InvalidParameterError(
                    f"resize range must satisfy 0 < lo <= hi, got {self.resize_range}"
                )


@dataclass
class SamplePair:
    """One image/mask pair plus the identity that selects its random stream."""

    image: ImagePlane
    mask: LabelMask
    sample_id: int = 0
    epoch: int = 0

    def __post_init__(self):
        if (self.image.height, self.image.width) != (self.mask.height, self.mask.width):
            raise InvalidInputError(
                f"image is {self.image.width}x{self.image.height} but mask is "
                f"{self.mask.width}x{self.mask.height}"
            )


@dataclass
class ApplyInfo:
    """What one augmentation call actually did, for provenance sidecars."""

    skipped: bool = True
    params: Optional[DeformationParams] = None
    field: Optional[DisplacementField] = None
    hflip: bool = False
    resize_scale: Optional[float] = None


def derive_stream(master_seed: int, sample_id: int, epoch: int, lane: int = _LANE_MAIN):
    """Stateless (master_seed, sample_id, epoch) -> independent random stream.

    Uses a counter-based generator keyed on the triple: the 128-bit key is
    the master seed next to sample_id/epoch packed as 32-bit words, and the
    lane selects a disjoint counter block for companion transforms. The
    mapping is injective for 0 <= sample_id, epoch < 2**32.
    """
    key = np.array(
        [master_seed & _MASK64, ((sample_id & _MASK32) << 32) | (epoch & _MASK32)],
        dtype=np.uint64,
    )
    counter = np.array([0, 0, 0, lane], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def sample_params(omega: OmegaSet, rng: np.random.Generator) -> DeformationParams:
    """Uniform choice over the pool; consumes exactly one uniform draw."""
    u = rng.random()
    return omega.pairs[min(int(u * omega.size), omega.size - 1)]


def _gated_field(config, rng, width, height):
    """Shared gate + pool + field procedure; None when the gate skips.

    Draw order per call: one gate uniform; if it passes, one pool uniform,
    then the field's noise grids.
    """
    if rng.random() > config.p:
        return None
    params = sample_params(config.omega, rng)
    return generate_displacement_field(width, height, params, rng)


def nsegment(mask: LabelMask, config: AugmentConfig, rng: np.random.Generator) -> LabelMask:
    """Label-only deformation of one mask; the input is never mutated."""
    field = _gated_field(config, rng, mask.width, mask.height)
    if field is None:
        return mask.copy()
    return warp_label(mask, field, config.warp_spec)


def flip_horizontal(sample: SamplePair) -> SamplePair:
    """Mirror image and mask together along x. An exact involution."""
    return SamplePair(
        image=ImagePlane(samples=sample.image.samples[:, ::-1].copy()),
        mask=LabelMask(values=sample.mask.values[:, ::-1].copy(), classes=sample.mask.classes),
        sample_id=sample.sample_id,
        epoch=sample.epoch,
    )


def _resize_axis_nearest(src_dim: int, dst_dim: int) -> np.ndarray:
    # Half-pixel-center convention: each output cell reads the source cell
    # covering its center.
    idx = np.floor((np.arange(dst_dim) + 0.5) * (src_dim / dst_dim)).astype(np.intp)
    return np.clip(idx, 0, src_dim - 1)


def resize_sample(sample: SamplePair, scale: float) -> SamplePair:
    """Rescale a pair; nearest for the mask, bilinear for the image.

    Target dimensions are ``scale`` times the source, rounded to the
    nearest integer and never below 1.
    """
    if not scale > 0:
        raise InvalidParameterError(f"scale must be > 0, got {scale}")
    h, w = sample.mask.values.shape
    new_w = max(1, int(round_half_away(w * scale)))
    new_h = max(1, int(round_half_away(h * scale)))
    iy = _resize_axis_nearest(h, new_h)
    ix = _resize_axis_nearest(w, new_w)
    mask_values = sample.mask.values[iy[:, np.newaxis], ix[np.newaxis, :]]

    sy = (np.arange(new_h, dtype=np.float64) + 0.5) * (h / new_h) - 0.5
    sx = (np.arange(new_w, dtype=np.float64) + 0.5) * (w / new_w) - 0.5
    sy = sy[:, np.newaxis]
    sx = sx[np.newaxis, :]
    out = np.empty((new_h, new_w, sample.image.channels), dtype=np.uint8)
    for c in range(sample.image.channels):
        sampled = _bilinear_sample(sample.image.samples[:, :, c].astype(np.float64), sy, sx)
        out[:, :, c] = np.floor(sampled + 0.5).astype(np.uint8)

    return SamplePair(
        image=ImagePlane(samples=out),
        mask=LabelMask(values=mask_values, classes=sample.mask.classes),
        sample_id=sample.sample_id,
        epoch=sample.epoch,
    )


def apply_augmentation_with_info(
    sample: SamplePair, config: AugmentConfig, rng: np.random.Generator
) -> tuple[SamplePair, ApplyInfo]:
    """Full per-sample pipeline, also reporting what was applied.

    The deformation consumes from ``rng``; the flip and resize gates use
    their own lanes derived from (master_seed, sample_id, epoch) so their
    presence never changes the deformation result.
    """
    info = ApplyInfo()
    image = sample.image
    mask = sample.mask

    field = _gated_field(config, rng, mask.width, mask.height)
    if field is not None:
        info.skipped = False
        info.params = field.params
        info.field = field
        if config.mode in (MODE_LABEL_ONLY, MODE_IDENTICAL):
            mask = warp_label(mask, field, config.warp_spec)
        if config.mode in (MODE_IMAGE_ONLY, MODE_IDENTICAL):
            image = warp_image(image, field, config.warp_spec)

    out = SamplePair(image=image, mask=mask, sample_id=sample.sample_id, epoch=sample.epoch)

    if config.hflip_p > 0:
        gate = derive_stream(config.master_seed, sample.sample_id, sample.epoch, _LANE_HFLIP)
        if gate.random() <= config.hflip_p:
            out = flip_horizontal(out)
            info.hflip = True
    if config.resize_range is not None:
        lo, hi = config.resize_range
        u = derive_stream(config.master_seed, sample.sample_id, sample.epoch, _LANE_RESIZE).random()
        scale = lo + u * (hi - lo)
        out = resize_sample(out, scale)
        info.resize_scale = scale
    return out, info


def apply_augmentation(
    sample: SamplePair, config: AugmentConfig, rng: np.random.Generator
) -> SamplePair:
    out, _ = apply_augmentation_with_info(sample, config, rng)
    return out


# Option vocabulary shared by the CLI, config files, and the training binding.
_MODE_NAMES = {"label": MODE_LABEL_ONLY, "image": MODE_IMAGE_ONLY, "identical": MODE_IDENTICAL}
_FILL_NAMES = {"ignore": "ignore_label", "nearest": "nearest_source"}
_OPTION_KEYS = ("p", "omega", "mode", "seed", "fill", "mapping", "image_interp", "hflip_p", "resize")


def _parse_resize(value) -> tuple[float, float]:
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 2:
            raise InvalidParameterError(f"resize must look like 'lo:hi', got {value!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            raise InvalidParameterError(f"resize must look like 'lo:hi', got {value!r}") from None
    else:
        try:
            lo, hi = value
        except (TypeError, ValueError):
            raise InvalidParameterError(f"resize must be a (lo, hi) pair, got {value!r}") from None
    return float(lo), float(hi)


def config_from_options(options: Mapping[str, object]) -> AugmentConfig:
    """Build an AugmentConfig from the flat CLI/config-file vocabulary.

    Recognized keys: p, omega, mode {label|image|identical}, seed,
    fill {ignore|nearest}, mapping {forward|backward}, image_interp,
    hflip_p, resize ("lo:hi" or a pair). Unknown keys are rejected eagerly,
    naming the offender.
    """
    for key in options:
        if key not in _OPTION_KEYS:
            raise InvalidParameterError(f"unknown augmentation option {key!r}")

    omega = options.get("omega", DEFAULT_OMEGA_ENCODING)
    if isinstance(omega, str):
        omega = OmegaSet.parse(omega)
    elif not isinstance(omega, OmegaSet):
        raise InvalidParameterError(f"omega must be an encoding string, got {omega!r}")

    mode = options.get("mode", "label")
    if mode not in _MODE_NAMES:
        raise InvalidParameterError(f"mode must be one of {sorted(_MODE_NAMES)}, got {mode!r}")
    fill = options.get("fill", "ignore")
    if fill not in _FILL_NAMES:
        raise InvalidParameterError(f"fill must be one of {sorted(_FILL_NAMES)}, got {fill!r}")

    resize = options.get("resize")
    return AugmentConfig(
        p=float(options.get("p", 0.5)),
        omega=omega,
        mode=_MODE_NAMES[str(mode)],
        warp_spec=WarpSpec(
            mapping=str(options.get("mapping", "forward")),
            image_interp=str(options.get("image_interp", "nearest")),
            fill=_FILL_NAMES[str(fill)],
        ),
        master_seed=int(options.get("seed", 0)),
        hflip_p=float(options.get("hflip_p", 0.0)),
        resize_range=None if resize in (None, "") else _parse_resize(resize),
    )
