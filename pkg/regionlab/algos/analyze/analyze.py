import json
import os
import sys

import hydra
import numpy as np
import pandas as pd
from bbrl.utils.chrono import Chrono
from omegaconf import DictConfig
from tqdm.contrib.concurrent import thread_map

from regionlab.models.analytics import choose_decision_target, interpolation_search, pgd_attack
from regionlab.models.errors import RegionLabError
from regionlab.models.loggers import HistoryLogger, Logger
from regionlab.models.network import NetworkModel, forward
from regionlab.models.plotters import Plotter
from regionlab.models.polytope import insphere, remove_redundant
from regionlab.models.probes import probe_region
from regionlab.models.regions import extract_region
from regionlab.models.runs import echo_config, load_datasets, prepare_run_dir, resolve_threads, sample_points
from regionlab.models.surround import surround_probe

REGION_TYPES = ("manifold", "decision", "adversarial")
METRICS = ("inradius", "class_region_count", "distortion", "surround_mean", "rho_mean")
COLUMNS = (
    "point_id",
    "dataset_index",
    "region_type",
    "label",
    "predicted",
    "inradius",
    "class_region_count",
    "distortion",
    "surround_counts",
    "surround_mean",
    "rho_mean",
    "rho_median",
    "rho_min",
    "rho_values",
    "n_constraints",
    "n_retained",
    "boundary_found",
    "alpha_star",
    "error",
)


def _blank_row(point_id, dataset_index, region_type, label, predicted):
    row = {column: np.nan for column in COLUMNS}
    row.update(
        point_id=point_id,
        dataset_index=dataset_index,
        region_type=region_type,
        label=label,
        predicted=predicted,
        surround_counts="",
        rho_values="",
        boundary_found=region_type == "manifold",
        error=None,
    )
    return row


def _region_geometry(row, system, params):
    row["n_constraints"] = system.count
    row["n_retained"] = system.count
    if params.reduce:
        system, _ = remove_redundant(system)
        row["n_retained"] = system.count
    row["inradius"] = insphere(system).inradius


def _manifold(row, model, x, params):
    system = extract_region(model, x)
    _region_geometry(row, system, params)
    _, summary = probe_region(
        model, x, system=system, tol=params.probe_tol, max_iters=params.probe_iters, step_rule=params.step_rule
    )
    row["class_region_count"] = summary.class_region_count
    row["distortion"] = summary.distortion
    if params.directions > 0:
        probes = surround_probe(model, x, params.directions, params.epsilon_ray, seed=params.seed)
        counts = [probe.unique_region_count for probe in probes]
        rho = np.array([value for probe in probes for value in probe.relevance], dtype=np.float64)
        rho = rho[np.isfinite(rho)]
        row["surround_counts"] = ";".join(str(count) for count in counts)
        row["surround_mean"] = float(np.mean(counts))
        row["rho_values"] = ";".join(f"{value:.6g}" for value in rho)
        if rho.size:
            row["rho_mean"], row["rho_median"], row["rho_min"] = rho.mean(), np.median(rho), rho.min()


def _boundary(row, model, x, x_target, params):
    result = interpolation_search(model, x, x_target, params.resolution)
    row["alpha_star"] = result.alpha_star
    row["boundary_found"] = result.crossed
    if result.crossed:
        _region_geometry(row, result.boundary_system, params)


def _decision(row, model, train_set, x, predicted, params):
    target = choose_decision_target(model, train_set, x, predicted)
    if target is None:
        row["boundary_found"] = False
        return
    _boundary(row, model, x, target[1], params)


def _adversarial(row, model, x, label, point_id, params):
    pgd = params.pgd
    step = pgd.step if pgd.step is not None else pgd.eps / 10.0
    attack = pgd_attack(model, x, label, pgd.eps, step, pgd.iters, pgd.restarts, seed=params.seed + point_id)
    if not attack.success:
        row["boundary_found"] = False
        return
    _boundary(row, model, x, attack.x_adv, params)


def analyze_point(model: NetworkModel, train_set, x, label, point_id, dataset_index, params):
    """One row per region type; a failing analysis only fills that row's error"""
    predicted = int(np.argmax(forward(model, x).logits))
    rows = []
    for region_type in params.region_types:
        row = _blank_row(point_id, dataset_index, region_type, int(label), predicted)
        try:
            if region_type == "manifold":
                _manifold(row, model, x, params)
            elif region_type == "decision":
                _decision(row, model, train_set, x, predicted, params)
            elif region_type == "adversarial":
                _adversarial(row, model, x, label, point_id, params)
            else:
                raise ValueError(f"unknown region type {region_type}, expected one of {REGION_TYPES}")
        except (RegionLabError, ArithmeticError, ValueError) as error:
            row["error"] = f"{type(error).__name__}: {error}"
        rows.append(row)
    return rows


def aggregate(records: pd.DataFrame) -> pd.DataFrame:
    """Count, mean, median and quartiles of every metric per region type"""
    rows = []
    for region_type, group in records.groupby("region_type", sort=False):
        failures = int(group["error"].notna().sum())
        for metric in METRICS:
            values = pd.to_numeric(group[metric], errors="coerce").dropna()
            rows.append(
                {
                    "region_type": region_type,
                    "metric": metric,
                    "count": int(values.size),
                    "mean": values.mean(),
                    "median": values.median(),
                    "q1": values.quantile(0.25),
                    "q3": values.quantile(0.75),
                    "failures": failures,
                }
            )
    return pd.DataFrame(rows, columns=["region_type", "metric", "count", "mean", "median", "q1", "q3", "failures"])


def run_analysis(cfg, model, train_set, test_set, logger):
    params = cfg.algorithm
    indices = sample_points(len(test_set), params.points, params.seed)

    def analyze_one(item):
        point_id, index = item
        return analyze_point(
            model, train_set, test_set.inputs[index], test_set.labels[index], point_id, int(index), params
        )

    per_point = thread_map(
        analyze_one,
        list(enumerate(indices)),
        max_workers=resolve_threads(params.threads),
        desc="analyze",
    )
    history = HistoryLogger()
    for rows in per_point:
        for row in rows:
            history.add(**row)
    records = history.frame().reindex(columns=list(COLUMNS))
    summary = aggregate(records)
    for region_type, group in summary.groupby("region_type", sort=False):
        logger.log_metrics(f"analyze/{region_type}", dict(zip(group["metric"], group["mean"].fillna(0.0))), 0)
    return indices, records, summary


def _joined_values(column):
    return [value for cell in column.fillna("") for value in str(cell).split(";") if value]


def write_report(output_dir, seed, indices, records, summary, bins=30):
    with open(os.path.join(output_dir, "points.json"), "w") as f:
        json.dump(
            {
                "seed": int(seed),
                "dataset_indices": [int(i) for i in indices],
                "records": json.loads(records.to_json(orient="records")),
            },
            f,
            indent=2,
        )
    records.to_csv(os.path.join(output_dir, "records.csv"), index=False)
    summary.to_csv(os.path.join(output_dir, "aggregate.csv"), index=False)

    plotter = Plotter(output_dir)
    inradii = {
        region_type: records.loc[records["region_type"] == region_type, "inradius"].to_numpy(dtype=np.float64)
        for region_type in records["region_type"].unique()
    }
    plotter.plot_histograms(inradii, "inradius_hist.svg", bins=bins, title="inradius")
    manifold = records[records["region_type"] == "manifold"]
    counts = [int(c) for c in _joined_values(manifold["surround_counts"])]
    plotter.plot_boxplot({"surrounding regions": counts}, "surround_boxplot.svg")
    rho = np.array([float(c) for c in _joined_values(manifold["rho_values"])], dtype=np.float64)
    plotter.plot_histograms({"manifold": rho}, "rho_hist.svg", bins=bins, value_range=(-1.0, 1.0), xlabel="rho")


def cmd_analyze(cfg) -> int:
    chrono = Chrono()
    output_dir = prepare_run_dir(cfg.output_dir)
    echo_config(cfg, output_dir)
    model = NetworkModel.load(cfg.model_path)
    train_set, test_set = load_datasets(cfg)
    indices, records, summary = run_analysis(cfg, model, train_set, test_set, Logger(cfg))
    write_report(output_dir, cfg.algorithm.seed, indices, records, summary, cfg.algorithm.bins)
    failures = int(records["error"].notna().sum())
    print(f"analyzed points: {len(indices)}, failed analyses: {failures}")
    chrono.stop()
    return 2 if failures else 0


@hydra.main(config_path="./configs/", config_name="analyze_spiral.yaml", version_base="1.2")
def main(cfg: DictConfig):
    sys.exit(cmd_analyze(cfg))


if __name__ == "__main__":
    sys.path.append(os.getcwd())
    main()
