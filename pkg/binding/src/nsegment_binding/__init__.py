"""In-process binding of the augmentation core for training pipelines.

Wraps the core behind one callable taking dense uint8 arrays plus the
(sample_id, epoch) identity, so data loaders can apply the transform right
after loading each pair. Outputs are bit-identical to the batch CLI run
with the same configuration: the handle derives the same per-sample
streams, so distributed loaders stay deterministic no matter how samples
are sharded across workers.

There is no hidden state: repeated calls with identical arguments return
identical results, and the handle may be shared freely across loader
workers. The numeric core is numpy/scipy array code, which releases the
interpreter lock inside its kernels, so worker threads overlap during the
heavy part.
"""

from typing import Mapping

import numpy as np

from nsegment import (
    IGNORE,
    ImagePlane,
    InvalidInputError,
    LabelMask,
    SamplePair,
    apply_augmentation,
    config_from_options,
    derive_stream,
)

__all__ = ["BoundTransform", "make_transform"]
__version__ = "0.1.0"


def _as_dense_uint8(array, name, ndim_allowed):
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise InvalidInputError(f"{name} must be uint8, got {array.dtype}")
    if array.ndim not in ndim_allowed:
        raise InvalidInputError(f"{name} must have {ndim_allowed} dims, got shape {array.shape}")
    if not array.flags["C_CONTIGUOUS"]:
        raise InvalidInputError(f"{name} must be contiguous row-major")
    return array


def _detached(out_array, in_array):
    # Never hand back a view of the caller's input (the skip path would).
    if np.shares_memory(out_array, in_array):
        return out_array.copy()
    return out_array


class BoundTransform:
    """Immutable handle over a validated augmentation configuration.

    Call with ``(image, mask, sample_id, epoch)`` arrays; returns the
    transformed ``(image, mask)`` without touching the inputs.
    """

    __slots__ = ("_config",)

    def __init__(self, config):
        self._config = config

    @property
    def config(self):
        return self._config

    def __call__(self, image, mask, sample_id: int, epoch: int):
        image = _as_dense_uint8(image, "image", (2, 3))
        mask = _as_dense_uint8(mask, "mask", (2,))
        if image.shape[:2] != mask.shape:
            raise InvalidInputError(
                f"image {image.shape[:2]} and mask {mask.shape} dimensions differ"
            )
        labeled = mask[mask != IGNORE]
        classes = int(labeled.max()) + 1 if labeled.size else 1
        sample = SamplePair(
            image=ImagePlane(samples=image),
            mask=LabelMask(values=mask, classes=classes),
            sample_id=sample_id,
            epoch=epoch,
        )
        rng = derive_stream(self._config.master_seed, sample_id, epoch)
        out = apply_augmentation(sample, self._config, rng)
        out_image = out.image.samples
        if image.ndim == 2:
            out_image = out_image[:, :, 0]
        return _detached(out_image, image), _detached(out.mask.values, mask)


def make_transform(options: Mapping[str, object] = ()) -> BoundTransform:
    """Validate a flat config mapping (CLI flag vocabulary) into a handle.

    Keys: p, omega, mode {label|image|identical}, seed, fill, mapping,
    image_interp, hflip_p, resize. Empty mapping applies the defaults
    (p=0.5, the 15-pair pool, label mode). Bad keys or values raise
    immediately, naming the offender.
    """
    return BoundTransform(config_from_options(dict(options) if options else {}))
