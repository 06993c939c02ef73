import os
import sys

import hydra
import numpy as np
from bbrl.utils.chrono import Chrono
from omegaconf import DictConfig
from tqdm.contrib.concurrent import thread_map

from regionlab.models.analytics import pgd_attack
from regionlab.models.loggers import HistoryLogger, Logger
from regionlab.models.network import NetworkModel
from regionlab.models.runs import echo_config, load_datasets, prepare_run_dir, resolve_threads, sample_points


def cmd_attack(cfg) -> int:
    chrono = Chrono()
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    model = NetworkModel.load(cfg.model_path)
    _, test_set = load_datasets(cfg)
    params = cfg.algorithm
    pgd = params.pgd
    step = pgd.step if pgd.step is not None else pgd.eps / 10.0
    indices = sample_points(len(test_set), params.points, params.seed)

    def attack_one(item):
        point_id, index = item
        x = test_set.inputs[index]
        return pgd_attack(
            model, x, test_set.labels[index], pgd.eps, step, pgd.iters, pgd.restarts, seed=params.seed + point_id
        )

    results = thread_map(
        attack_one, list(enumerate(indices)), max_workers=resolve_threads(params.threads), desc="attack"
    )
    history = HistoryLogger(os.path.join(output_dir, "attack.csv"))
    for point_id, (index, result) in enumerate(zip(indices, results)):
        history.add(
            point_id=point_id,
            dataset_index=int(index),
            label=int(test_set.labels[index]),
            predicted=result.predicted,
            success=result.success,
            loss=result.loss,
            linf=float(np.abs(result.x_adv - test_set.inputs[index]).max()),
        )
    history.save()
    np.save(os.path.join(output_dir, "adversarial.npy"), np.array([result.x_adv for result in results]))

    success_rate = float(np.mean([result.success for result in results])) if results else 0.0
    Logger(cfg).add_log("attack/success_rate", success_rate, 0)
    print(f"attacked points: {len(results)}, success_rate: {success_rate:.4f}")
    chrono.stop()
    return 0


@hydra.main(config_path="./configs/", config_name="attack_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    sys.exit(cmd_attack(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
