"""Command line front end: batch augmentation, previews, tiling, statistics.

Every flag has a config-file equivalent (TOML, same key names with
underscores); explicit flags override the file. The master seed can also
come from the NSEG_SEED environment variable. Batch outputs are
byte-identical for any worker count because each (sample, epoch) task
derives its own random stream.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .augment import (
    DEFAULT_OMEGA_ENCODING,
    OmegaSet,
    SamplePair,
    apply_augmentation_with_info,
    config_from_options,
    derive_stream,
)
from .analysis import area_report
from .dataset import (
    PaletteTable,
    TilingSpec,
    load_mask,
    load_pair,
    read_manifest,
    save_image,
    save_mask,
    tile_origins,
    tile_pair,
    write_manifest,
)
from .errors import AugmentationError, InvalidParameterError
from .warp import ImagePlane

_DEFAULTS = {
    "mode": "label",
    "p": 0.5,
    "omega": DEFAULT_OMEGA_ENCODING,
    "seed": 0,
    "epochs": 1,
    "workers": 1,
    "fill": "ignore",
    "mapping": "forward",
    "hflip_p": 0.0,
    "resize": None,
    "tile": 512,
    "stride": 256,
    "edge": "snap",
    "grid": "1,100x3,10",
    "bins": "10,100,1000,10000",
    "tiny": 10,
    "split": "train",
}

_AUGMENT_OPTION_KEYS = ("p", "omega", "mode", "seed", "fill", "mapping", "hflip_p", "resize")


def _load_config_file(path):
    """Read a TOML config; an [omega] table with alphas/sigmas is folded
    into the textual product encoding."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    omega = doc.get("omega")
    if isinstance(omega, dict):
        try:
            alphas = ",".join("%g" % a for a in omega["alphas"])
            sigmas = ",".join("%g" % s for s in omega["sigmas"])
        except KeyError as exc:
            raise InvalidParameterError(f"[omega] table needs alphas and sigmas, missing {exc}")
        doc["omega"] = f"{alphas}x{sigmas}"
    return doc


def _resolve(flag_value, file_cfg, key):
    """Flag (or env) beats config file beats built-in default."""
    if flag_value is not None:
        return flag_value
    if key in file_cfg:
        return file_cfg[key]
    return _DEFAULTS.get(key)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _collect_pairs(images_dir, masks_dir, manifest_path, mode):
    """Input pairs as (image_path or None, mask_path), in manifest order or
    sorted by mask filename."""
    if manifest_path:
        manifest = read_manifest(manifest_path)
        return [(entry.image_path, entry.mask_path) for entry in manifest.entries]
    if not masks_dir:
        _fail("either --manifest or --masks is required")
    mask_paths = sorted(Path(masks_dir).glob("*.png"))
    if not mask_paths:
        _fail(f"no .png masks found in {masks_dir}")
    if images_dir:
        by_stem = {p.stem: p for p in sorted(Path(images_dir).iterdir()) if p.is_file()}
        pairs = []
        for mask_path in mask_paths:
            image_path = by_stem.get(mask_path.stem)
            if image_path is None:
                _fail(f"no image found for mask {mask_path.name} in {images_dir}")
            pairs.append((str(image_path), str(mask_path)))
        return pairs
    if mode != "label":
        _fail(f"--images is required for mode={mode}")
    return [(None, str(p)) for p in mask_paths]


def _augment_task(args):
    """One (sample, epoch) unit of work; runs in worker processes."""
    (image_path, mask_path, stem, sample_id, epoch, options, palette_path, out_dir, write_images) = args
    config = config_from_options(options)
    palette = PaletteTable.from_json(palette_path) if palette_path else None
    if image_path is None:
        # Label-only corpora may omit images; the deformation never reads
        # image samples in label mode, only the dimensions.
        mask = load_mask(mask_path, palette=palette)
        image = ImagePlane(samples=np.zeros((mask.height, mask.width, 1), dtype=np.uint8))
        sample = SamplePair(image=image, mask=mask, sample_id=sample_id, epoch=epoch)
    else:
        sample = load_pair(image_path, mask_path, palette=palette, sample_id=sample_id, epoch=epoch)

    rng = derive_stream(config.master_seed, sample_id, epoch)
    out, info = apply_augmentation_with_info(sample, config, rng)

    epoch_dir = Path(out_dir) / f"epoch_{epoch:03d}"
    (epoch_dir / "masks").mkdir(parents=True, exist_ok=True)
    save_mask(out.mask, epoch_dir / "masks" / f"{stem}.png")
    if write_images:
        (epoch_dir / "images").mkdir(parents=True, exist_ok=True)
        save_image(out.image, epoch_dir / "images" / f"{stem}.png")

    entry = {"epoch": epoch, "sample_id": sample_id, "stem": stem}
    if info.skipped:
        entry["skipped"] = True
    else:
        entry["alpha"] = info.params.alpha
        entry["sigma"] = info.params.sigma
    if info.hflip:
        entry["hflip"] = True
    if info.resize_scale is not None:
        entry["resize_scale"] = info.resize_scale
    return entry


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Label-only elastic deformation augmentation for segmentation data."""


@main.command()
@click.option("--images", type=click.Path(exists=True, file_okay=False), help="Image directory.")
@click.option("--masks", type=click.Path(exists=True, file_okay=False), help="Mask directory.")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), help="Tab-separated pair manifest.")
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="TOML config file; flags override it.")
@click.option("--replay", "replay_path", type=click.Path(exists=True, dir_okay=False), help="Re-run an augmentation from its provenance sidecar.")
@click.option("--mode", type=click.Choice(["label", "image", "identical"]), default=None, help="Deformation target.")
@click.option("--p", type=float, default=None, help="Transform probability.")
@click.option("--omega", default=None, help='Parameter pool, e.g. "1,15,30,50,100x3,5,10".')
@click.option("--seed", type=int, default=None, envvar="NSEG_SEED", help="Master seed (env NSEG_SEED).")
@click.option("--epochs", type=int, default=None, help="Number of epoch variants to write.")
@click.option("--workers", type=int, default=None, help="Worker processes; output bytes never depend on this.")
@click.option("--fill", type=click.Choice(["ignore", "nearest"]), default=None, help="Hole policy for forward scatter.")
@click.option("--mapping", type=click.Choice(["forward", "backward"]), default=None, help="Warp direction.")
@click.option("--hflip-p", type=float, default=None, help="Horizontal flip probability.")
@click.option("--resize", default=None, help='Random resize range "lo:hi", e.g. "0.5:2.0".')
@click.option("--palette", "palette_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Palette JSON for color-coded masks.")
def augment(images, masks, manifest, out, config_path, replay_path, **flags):
    """Write augmented masks (and images, in image/identical modes), one
    directory per epoch, plus a provenance sidecar that can replay the run."""
    try:
        if replay_path:
            with open(replay_path, "r", encoding="utf-8") as fh:
                sidecar = json.load(fh)
            options = {k: sidecar[k] for k in _AUGMENT_OPTION_KEYS}
            epochs = int(sidecar["epochs"])
            palette_path = sidecar.get("palette")
            pairs = [(entry["image"], entry["mask"]) for entry in sidecar["inputs"]]
            workers = _resolve(flags.get("workers"), {}, "workers")
        else:
            file_cfg = _load_config_file(config_path) if config_path else {}
            options = {k: _resolve(flags.get(k), file_cfg, k) for k in _AUGMENT_OPTION_KEYS}
            epochs = int(_resolve(flags.get("epochs"), file_cfg, "epochs"))
            workers = int(_resolve(flags.get("workers"), file_cfg, "workers"))
            palette_path = _resolve(flags.get("palette_path"), file_cfg, "palette")
            pairs = _collect_pairs(images, masks, manifest, options["mode"])

        config_from_options(options)  # validate eagerly, before any worker starts
        write_images = options["mode"] in ("image", "identical")
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)

        tasks = []
        for epoch in range(epochs):
            for sample_id, (image_path, mask_path) in enumerate(pairs):
                stem = f"{sample_id:06d}_{Path(mask_path).stem}"
                tasks.append(
                    (image_path, mask_path, stem, sample_id, epoch, options, palette_path, str(out_dir), write_images)
                )

        entries = []
        failures = []
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for task, result in zip(tasks, pool.map(_augment_task_safe, tasks)):
                    if isinstance(result, str):
                        failures.append((task[1], result))
                    else:
                        entries.append(result)
        else:
            for task in tasks:
                try:
                    entries.append(_augment_task(task))
                except AugmentationError as exc:
                    failures.append((task[1], str(exc)))

        if failures:
            for path, message in failures:
                click.echo(f"failed: {path}: {message}", err=True)
            sys.exit(1)

        entries.sort(key=lambda e: (e["epoch"], e["sample_id"]))
        sidecar = dict(options)
        sidecar["epochs"] = epochs
        sidecar["palette"] = palette_path
        sidecar["inputs"] = [{"image": ip, "mask": mp} for ip, mp in pairs]
        sidecar["entries"] = entries
        with open(out_dir / "provenance.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
        click.echo(f"wrote {len(entries)} outputs across {epochs} epoch(s) to {out_dir}")
    except AugmentationError as exc:
        _fail(str(exc))


def _augment_task_safe(args):
    try:
        return _augment_task(args)
    except AugmentationError as exc:
        return str(exc)


@main.command()
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="preview.png", help="Output figure path.")
@click.option("--grid", default=None, help='Pairs to preview, e.g. "1,100x3,10".')
@click.option("--seed", type=int, default=None, envvar="NSEG_SEED")
@click.option("--mapping", type=click.Choice(["forward", "backward"]), default=None)
@click.option("--fill", type=click.Choice(["ignore", "nearest"]), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--palette", "palette_path", type=click.Path(exists=True, dir_okay=False), default=None)
def preview(image_path, mask_path, out, grid, seed, mapping, fill, config_path, palette_path):
    """Render a panel grid: the original pair plus one deformed-label
    overlay per (alpha, sigma) pair, deterministic at a fixed seed."""
    from .render import render_preview

    try:
        file_cfg = _load_config_file(config_path) if config_path else {}
        grid = _resolve(grid, file_cfg, "grid")
        seed = int(_resolve(seed, file_cfg, "seed"))
        mapping = _resolve(mapping, file_cfg, "mapping")
        fill = _resolve(fill, file_cfg, "fill")
        palette_path = _resolve(palette_path, file_cfg, "palette")

        palette = PaletteTable.from_json(palette_path) if palette_path else None
        pair = load_pair(image_path, mask_path, palette=palette)
        omega = OmegaSet.parse(grid)
        spec = config_from_options({"mapping": mapping, "fill": fill}).warp_spec
        fig = render_preview(pair, omega, seed=seed, warp_spec=spec)
        fig.savefig(out, dpi=110)
        click.echo(f"wrote {1 + omega.size} panels to {out}")
    except AugmentationError as exc:
        _fail(str(exc))


@main.command()
@click.option("--masks", type=click.Path(exists=True, file_okay=False), help="Mask directory.")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), help="Pair manifest; its mask column is used.")
@click.option("--report", "report_dir", type=click.Path(file_okay=False), default="report", help="Output directory for JSON/CSV/figure.")
@click.option("--bins", default=None, help='Histogram cut points, e.g. "10,100,1000,10000".')
@click.option("--tiny", type=int, default=None, help="Tiny-component area threshold (pixels).")
@click.option("--split", default=None, help="Label stamped into the report.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--palette", "palette_path", type=click.Path(exists=True, dir_okay=False), default=None)
def stats(masks, manifest, report_dir, bins, tiny, split, config_path, palette_path):
    """Compute per-class connected-component area statistics over a mask
    corpus; writes report.json, report.csv, and report.png."""
    from .render import render_area_figure

    try:
        file_cfg = _load_config_file(config_path) if config_path else {}
        bins = _resolve(bins, file_cfg, "bins")
        tiny = int(_resolve(tiny, file_cfg, "tiny"))
        split = _resolve(split, file_cfg, "split")
        palette_path = _resolve(palette_path, file_cfg, "palette")

        if manifest:
            mask_paths = [entry.mask_path for entry in read_manifest(manifest).entries]
        elif masks:
            mask_paths = [str(p) for p in sorted(Path(masks).glob("*.png"))]
        else:
            _fail("either --manifest or --masks is required")
        if not mask_paths:
            _fail("no masks to analyze")

        palette = PaletteTable.from_json(palette_path) if palette_path else None
        bin_bounds = tuple(int(tok) for tok in str(bins).split(",") if tok.strip())
        report = area_report(
            (load_mask(p, palette=palette) for p in mask_paths),
            bins=bin_bounds,
            tiny_threshold=tiny,
            class_names=palette.class_names if palette else (),
        )

        out_dir = Path(report_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report.write_json(out_dir / "report.json", label=split)
        report.write_csv(out_dir / "report.csv", label=split)
        fig = render_area_figure(report, label=split)
        fig.savefig(out_dir / "report.png", dpi=110)
        click.echo(
            f"split={split} masks={len(mask_paths)} components={report.total_components} "
            f"tiny_fraction={report.tiny_fraction:.4f}"
        )
    except AugmentationError as exc:
        _fail(str(exc))


@main.command()
@click.option("--images", type=click.Path(exists=True, file_okay=False))
@click.option("--masks", type=click.Path(exists=True, file_okay=False))
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--tile", "tile_size", type=int, default=None, help="Patch size (pixels).")
@click.option("--stride", type=int, default=None, help="Window stride (pixels).")
@click.option("--edge", type=click.Choice(["snap", "drop"]), default=None, help="Far-edge policy.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--palette", "palette_path", type=click.Path(exists=True, dir_okay=False), default=None)
def tile(images, masks, manifest, out, tile_size, stride, edge, config_path, palette_path):
    """Cut large image/mask pairs into fixed-size patches and write a
    manifest of the results."""
    try:
        file_cfg = _load_config_file(config_path) if config_path else {}
        tile_size = int(_resolve(tile_size, file_cfg, "tile"))
        stride = int(_resolve(stride, file_cfg, "stride"))
        edge = _resolve(edge, file_cfg, "edge")
        palette_path = _resolve(palette_path, file_cfg, "palette")

        spec = TilingSpec(tile=tile_size, stride=stride, edge_policy=edge)
        palette = PaletteTable.from_json(palette_path) if palette_path else None
        pairs = _collect_pairs(images, masks, manifest, mode="identical")

        out_dir = Path(out)
        (out_dir / "images").mkdir(parents=True, exist_ok=True)
        (out_dir / "masks").mkdir(parents=True, exist_ok=True)
        manifest_rows = []
        for image_path, mask_path in pairs:
            pair = load_pair(image_path, mask_path, palette=palette)
            xs = tile_origins(pair.mask.width, spec)
            ys = tile_origins(pair.mask.height, spec)
            patches = tile_pair(pair, spec)
            stem = Path(mask_path).stem
            origins = [(x0, y0) for y0 in ys for x0 in xs]
            for (x0, y0), patch in zip(origins, patches):
                name = f"{stem}_x{x0}_y{y0}.png"
                save_image(patch.image, out_dir / "images" / name)
                save_mask(patch.mask, out_dir / "masks" / name)
                manifest_rows.append((f"images/{name}", f"masks/{name}"))
        write_manifest(manifest_rows, out_dir / "manifest.tsv")
        click.echo(f"wrote {len(manifest_rows)} patches to {out_dir}")
    except AugmentationError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
