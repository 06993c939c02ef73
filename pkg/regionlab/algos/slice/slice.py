import os
import sys

import hydra
import pandas as pd
from omegaconf import DictConfig

from regionlab.models.network import NetworkModel
from regionlab.models.runs import echo_config, load_datasets, parse_point, prepare_run_dir
from regionlab.models.slices import SlicePlane, rasterize, render, unique_region_count


def model_name(path) -> str:
    # runs/<name>/model.json is named after its run directory
    stem = os.path.splitext(os.path.basename(path))[0]
    if stem == "model":
        return os.path.basename(os.path.dirname(os.path.abspath(path)))
    return stem


def build_plane(cfg, models, test_set) -> SlicePlane:
    plane_cfg = cfg.plane
    resolution = tuple(plane_cfg.resolution)
    dim = models[0].input_dim
    if plane_cfg.kind == "toy2d":
        if dim != 2:
            raise ValueError(f"the toy2d plane needs 2D inputs, the model has {dim}")
        return SlicePlane.axes(2, tuple(plane_cfg.extent), resolution)
    if plane_cfg.kind == "random":
        return SlicePlane.random(dim, plane_cfg.seed, extent=tuple(plane_cfg.extent), resolution=resolution)
    if plane_cfg.kind == "points":
        if len(plane_cfg.points) != 3:
            raise ValueError("a slice through data points needs exactly three point ids")
        p0, p1, p2 = (parse_point(point, test_set, models[0])[0] for point in plane_cfg.points)
        return SlicePlane.from_points(p0, p1, p2, resolution, plane_cfg.margin)
    raise ValueError(f"unknown plane kind {plane_cfg.kind}")


def cmd_slice(cfg) -> int:
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    models = [NetworkModel.load(path) for path in cfg.model_paths]
    _, test_set = load_datasets(cfg)
    plane = build_plane(cfg, models, test_set)

    rows = []
    for path, model in zip(cfg.model_paths, models):
        name = model_name(path)
        raster = rasterize(model, plane)
        for fmt in cfg.formats:
            for style in ("region", "class"):
                with open(os.path.join(output_dir, f"{style}_{name}.{fmt}"), "wb") as f:
                    f.write(render(raster, style, fmt))
        rows.append({"model": name, "unique_regions": unique_region_count(raster)})
        print(f"{name}: {rows[-1]['unique_regions']} linear regions on the slice")
    pd.DataFrame(rows).to_csv(os.path.join(output_dir, "slice_regions.csv"), index=False)
    return 0


@hydra.main(config_path="./configs/", config_name="slice_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    sys.exit(cmd_slice(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
