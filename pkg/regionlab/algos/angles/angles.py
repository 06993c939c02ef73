import os
import sys

import hydra
import numpy as np
import pandas as pd
from omegaconf import DictConfig

from regionlab.models.analytics import angle_matrix, layer_angle_summary
from regionlab.models.network import NetworkModel
from regionlab.models.plotters import Plotter
from regionlab.models.regions import extract_region
from regionlab.models.runs import echo_config, load_datasets, parse_point, prepare_run_dir


def cmd_angles(cfg) -> int:
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    model = NetworkModel.load(cfg.model_path)
    _, test_set = load_datasets(cfg)
    x, _ = parse_point(cfg.point, test_set, model)

    matrix = angle_matrix(extract_region(model, x))
    np.save(os.path.join(output_dir, "angle_matrix.npy"), matrix.degrees)
    summary = pd.DataFrame(layer_angle_summary(matrix))
    summary.to_csv(os.path.join(output_dir, "angles.csv"), index=False)
    Plotter(output_dir).plot_angle_matrix(matrix.degrees, "angle_matrix.svg", title="hyperplane angles")

    print(f"constraints: {matrix.size}, dead nodes: {len(matrix.dead_indices)}")
    for row in summary.itertuples():
        print(f"layers {row.layer_a}-{row.layer_b}: mean {row.mean:.2f}, median {row.median:.2f}")
    return 0


@hydra.main(config_path="./configs/", config_name="angles_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    sys.exit(cmd_angles(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
