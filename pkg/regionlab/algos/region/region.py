import json
import os
import sys

import hydra
from omegaconf import DictConfig

from regionlab.models.errors import InfeasibleRegionError
from regionlab.models.network import NetworkModel
from regionlab.models.polytope import insphere, remove_redundant
from regionlab.models.regions import contains, extract_region
from regionlab.models.runs import echo_config, load_datasets, parse_point, prepare_run_dir


def cmd_region(cfg) -> int:
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    model = NetworkModel.load(cfg.model_path)
    _, test_set = load_datasets(cfg)
    x, index = parse_point(cfg.point, test_set, model)

    system = extract_region(model, x)
    if not contains(system, x, tol=1e-7):
        raise InfeasibleRegionError("the generating point does not satisfy its own region")
    system.save(os.path.join(output_dir, "region.json"))
    ball = insphere(system)
    summary = {
        "dataset_index": index,
        "point": x.tolist(),
        "n_constraints": system.count,
        "n_inequalities": system.inequality_count,
        "inradius": ball.inradius,
        "center": ball.center.tolist(),
    }
    if cfg.reduce:
        reduced, verdicts = remove_redundant(system)
        reduced.save(os.path.join(output_dir, "region_reduced.json"))
        summary["n_retained"] = reduced.count
        summary["redundancy_minima"] = [verdict.minimum for verdict in verdicts]
    with open(os.path.join(output_dir, "region_summary.json"), "w") as f:
        json.dump(summary, f, indent=2)

    print(f"constraints: {system.count} (+{2 * system.dim} box), inradius: {ball.inradius:.6g}")
    if cfg.reduce:
        print(f"retained after redundancy removal: {summary['n_retained']}")
    return 0


@hydra.main(config_path="./configs/", config_name="region_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    sys.exit(cmd_region(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
