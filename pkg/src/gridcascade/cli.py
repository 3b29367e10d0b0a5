"""Pipeline orchestration: ingest -> characterize -> hypotheses -> severity ->
network -> scenarios -> simulate -> report.

Each stage writes its artifacts plus a manifest (input hashes, parameters,
outputs). A rerun with unchanged inputs is a no-op. Exit codes: 0 success,
1 configuration problem, 2 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import defaults, metrics, miim, scenarios as scen, severity, stats, topology
from .outages import (
    filter_study_window,
    load_category_mapping,
    load_clean_records,
    load_geo_grouping,
    parse_outage_csv,
    write_clean_records,
)

STAGE_ORDER = (
    "ingest",
    "characterize",
    "hypotheses",
    "severity",
    "network",
    "scenarios",
    "simulate",
    "report",
)

#: artifacts a stage needs from earlier stages
STAGE_REQUIRES = {
    "characterize": ("records.csv",),
    "hypotheses": ("records.csv",),
    "severity": ("records.csv",),
    "scenarios": ("network.json",),
    "simulate": ("network.json", "scenario_failures.json"),
    "report": ("cascade_traces.json", "network.json"),
}


class ConfigError(ValueError):
    """Invalid pipeline configuration; message lists key paths."""


class StageError(RuntimeError):
    pass


class DependencyError(StageError):
    pass


@dataclass
class PipelineConfig:
    out_dir: Path
    seed: int = 0
    alpha: float = 0.05
    major_outage_threshold: int = 50_000
    train_fraction: float = 0.8
    l2_lambda: float = 1.0
    classification_threshold: float = 0.5
    pooled_t: bool = False
    outage_csv: Path | None = None
    category_mapping: Path = field(default_factory=lambda: defaults.default_path(defaults.CATEGORY_MAPPING))
    geo_grouping: Path = field(default_factory=lambda: defaults.default_path(defaults.GEO_GROUPING))
    case_file: Path = field(default_factory=lambda: defaults.default_path(defaults.CASE_FILE))
    substation_mapping: Path = field(default_factory=lambda: defaults.default_path(defaults.SUBSTATION_MAPPING))
    coordinates: Path | None = None
    overlay_config: Path = field(default_factory=lambda: defaults.default_path(defaults.OVERLAY_CONFIG))
    rules: Path | None = None
    scenario_file: Path = field(default_factory=lambda: defaults.default_path(defaults.SCENARIOS))
    stages: dict = field(default_factory=dict)

    def stage_enabled(self, stage: str) -> bool:
        return self.stages.get(stage, True)


_PATH_KEYS = {
    "outage_csv": "paths.outage_csv",
    "category_mapping": "paths.category_mapping",
    "geo_grouping": "paths.geo_grouping",
    "case_file": "paths.case_file",
    "substation_mapping": "paths.substation_mapping",
    "coordinates": "paths.coordinates",
    "overlay_config": "paths.overlay_config",
    "rules": "paths.rules",
    "scenario_file": "paths.scenarios",
}

_DATA_STAGES = ("ingest", "characterize", "hypotheses", "severity")


def validate_config(path: str | Path) -> PipelineConfig:
    """Parse and cross-check the pipeline config before any stage runs."""
    problems: list[str] = []
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None

    cfg = PipelineConfig(out_dir=Path(payload.get("out_dir", "out")))
    cfg.seed = _expect_int(payload, "seed", cfg.seed, problems)
    cfg.alpha = _expect_float(payload, "alpha", cfg.alpha, problems)
    cfg.major_outage_threshold = _expect_int(
        payload, "major_outage_threshold", cfg.major_outage_threshold, problems
    )
    cfg.train_fraction = _expect_float(payload, "train_fraction", cfg.train_fraction, problems)
    cfg.l2_lambda = _expect_float(payload, "l2_lambda", cfg.l2_lambda, problems)
    cfg.classification_threshold = _expect_float(
        payload, "classification_threshold", cfg.classification_threshold, problems
    )
    cfg.pooled_t = bool(payload.get("pooled_t", False))

    if not 0.0 < cfg.alpha < 1.0:
        problems.append(f"alpha: must be in (0, 1), got {cfg.alpha}")
    if not 0.0 < cfg.train_fraction < 1.0:
        problems.append(f"train_fraction: must be in (0, 1), got {cfg.train_fraction}")
    if cfg.l2_lambda <= 0:
        problems.append(f"l2_lambda: must be positive, got {cfg.l2_lambda}")
    if cfg.major_outage_threshold < 0:
        problems.append(f"major_outage_threshold: must be non-negative")

    paths = payload.get("paths", {})
    if not isinstance(paths, dict):
        problems.append("paths: must be an object")
        paths = {}
    for attr, key in _PATH_KEYS.items():
        name = key.split(".", 1)[1]
        if name in paths and paths[name] is not None:
            setattr(cfg, attr, Path(paths[name]))

    stages = payload.get("stages", {})
    if not isinstance(stages, dict):
        problems.append("stages: must be an object of stage -> bool")
        stages = {}
    for stage, enabled in stages.items():
        if stage not in STAGE_ORDER:
            problems.append(f"stages.{stage}: unknown stage")
    cfg.stages = {s: bool(v) for s, v in stages.items() if s in STAGE_ORDER}

    needs_outages = any(cfg.stage_enabled(s) for s in _DATA_STAGES)
    if needs_outages and cfg.outage_csv is None:
        problems.append("paths.outage_csv: required while a data stage is enabled")
    for attr, key in _PATH_KEYS.items():
        value = getattr(cfg, attr)
        if value is not None and not Path(value).exists():
            if attr == "outage_csv" and not needs_outages:
                continue
            problems.append(f"{key}: file does not exist: {value}")

    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg


def _expect_int(payload, key, default, problems):
    value = payload.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{key}: expected an integer, got {value!r}")
        return default
    return value


def _expect_float(payload, key, default, problems):
    value = payload.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{key}: expected a number, got {value!r}")
        return default
    return float(value)


# --- manifests ------------------------------------------------------------------


def _hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_path(out_dir: Path, stage: str) -> Path:
    return out_dir / f"manifest_{stage}.json"


def _stage_up_to_date(out_dir: Path, stage: str, inputs: dict, params: dict, outputs) -> bool:
    manifest = _manifest_path(out_dir, stage)
    if not manifest.exists():
        return False
    try:
        recorded = json.loads(manifest.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if recorded.get("inputs") != inputs or recorded.get("params") != params:
        return False
    return all((out_dir / name).exists() for name in recorded.get("outputs", outputs))


def _write_manifest(out_dir: Path, stage: str, inputs: dict, params: dict, outputs) -> None:
    from . import __version__

    payload = {
        "stage": stage,
        "inputs": inputs,
        "params": params,
        "outputs": sorted(outputs),
        "version": __version__,
    }
    _manifest_path(out_dir, stage).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _input_hashes(paths: dict[str, Path]) -> dict[str, str]:
    return {name: _hash_file(path) for name, path in sorted(paths.items())}


def _require_artifacts(cfg: PipelineConfig, stage: str) -> None:
    missing = [
        name for name in STAGE_REQUIRES.get(stage, ()) if not (cfg.out_dir / name).exists()
    ]
    if missing:
        raise DependencyError(
            f"stage {stage!r} needs artifacts from earlier stages: {', '.join(missing)}; "
            f"run those stages first"
        )


# --- stages --------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig) -> None:
    inputs = _input_hashes({"outage_csv": cfg.outage_csv, "category_mapping": cfg.category_mapping})
    outputs = ["records.csv", "rejects.csv", "ingest_summary.json"]
    if _stage_up_to_date(cfg.out_dir, "ingest", inputs, {}, outputs):
        print("ingest: up to date")
        return
    mapping = load_category_mapping(cfg.category_mapping)
    result = parse_outage_csv(cfg.outage_csv, mapping)
    records = filter_study_window(result.records)
    write_clean_records(records, cfg.out_dir / "records.csv")
    with open(cfg.out_dir / "rejects.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["line_number", "event_id", "reason"])
        for reject in result.rejects:
            writer.writerow([reject.line_number, reject.event_id, reject.reason])
    summary = {
        "parsed": len(result.records),
        "in_window": len(records),
        "rejected": len(result.rejects),
        "flagged_duration_mismatch": result.flagged_count,
        "category_counts": dict(sorted(Counter(r.category.value for r in records).items())),
        "unmapped_raw_types": dict(sorted(mapping.unmapped.items())),
    }
    (cfg.out_dir / "ingest_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(cfg.out_dir, "ingest", inputs, {}, outputs)
    print(f"ingest: {len(records)} records in window, {len(result.rejects)} rejected")


def stage_characterize(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "characterize")
    inputs = _input_hashes({"records": cfg.out_dir / "records.csv"})
    outputs = ["annual_counts.csv", "top_states.csv", "characterize_summary.json"]
    if _stage_up_to_date(cfg.out_dir, "characterize", inputs, {}, outputs):
        print("characterize: up to date")
        return
    records = load_clean_records(cfg.out_dir / "records.csv")
    climate_series = stats.annual_counts(records, lambda r: r.category.is_climate)
    with open(cfg.out_dir / "annual_counts.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "climate_outages"])
        writer.writerows(climate_series)
    climate_records = [r for r in records if r.category.is_climate]
    ranked = stats.top_states(climate_records, k=10) if climate_records else []
    with open(cfg.out_dir / "top_states.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "climate_outages"])
        writer.writerows(ranked)
    summary = {
        "total_records": len(records),
        "climate_share": stats.climate_share(records) if records else None,
        "peak_year": max(climate_series, key=lambda p: p[1])[0] if climate_records else None,
        "top_states": [list(pair) for pair in ranked],
    }
    (cfg.out_dir / "characterize_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(cfg.out_dir, "characterize", inputs, {}, outputs)
    if records:
        print(f"characterize: {len(records)} records; climate share {summary['climate_share']:.3f}")
    else:
        print("characterize: no records")


def stage_hypotheses(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "hypotheses")
    inputs = _input_hashes({
        "records": cfg.out_dir / "records.csv",
        "geo_grouping": cfg.geo_grouping,
    })
    params = {
        "alpha": cfg.alpha,
        "major_outage_threshold": cfg.major_outage_threshold,
        "pooled_t": cfg.pooled_t,
    }
    outputs = ["hypotheses.json", "hypotheses.txt"]
    if _stage_up_to_date(cfg.out_dir, "hypotheses", inputs, params, outputs):
        print("hypotheses: up to date")
        return
    records = load_clean_records(cfg.out_dir / "records.csv")
    grouping = load_geo_grouping(cfg.geo_grouping)
    config = stats.HypothesisConfig(
        alpha=cfg.alpha,
        major_outage_threshold=cfg.major_outage_threshold,
        pooled_t=cfg.pooled_t,
    )
    rows = stats.run_hypotheses(records, grouping, config)
    (cfg.out_dir / "hypotheses.json").write_text(stats.hypotheses_to_json(rows), encoding="utf-8")
    (cfg.out_dir / "hypotheses.txt").write_text(
        stats.format_hypothesis_table(rows), encoding="utf-8"
    )
    _write_manifest(cfg.out_dir, "hypotheses", inputs, params, outputs)
    supported = sum(1 for r in rows if r.supported)
    print(f"hypotheses: {supported}/{len(rows)} supported at alpha={cfg.alpha}")


def stage_severity(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "severity")
    inputs = _input_hashes({
        "records": cfg.out_dir / "records.csv",
        "geo_grouping": cfg.geo_grouping,
    })
    params = {
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
        "l2_lambda": cfg.l2_lambda,
        "classification_threshold": cfg.classification_threshold,
    }
    outputs = [
        "labeling.json", "severity_model.json", "severity_eval.json",
        "severity_eval.txt", "roc_points.csv", "coefficients.csv",
    ]
    if _stage_up_to_date(cfg.out_dir, "severity", inputs, params, outputs):
        print("severity: up to date")
        return
    records = severity.severity_eligible(load_clean_records(cfg.out_dir / "records.csv"))
    grouping = load_geo_grouping(cfg.geo_grouping)
    labeled, labeling = severity.label_severity(records)
    (cfg.out_dir / "labeling.json").write_text(
        json.dumps(labeling.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    train, test = severity.stratified_split(labeled, cfg.train_fraction, cfg.seed)
    model, _ = severity.train_severity_model(
        train, grouping, l2_lambda=cfg.l2_lambda, label_threshold=labeling.threshold
    )
    (cfg.out_dir / "severity_model.json").write_text(
        severity.model_to_json(model), encoding="utf-8"
    )
    scores = severity.score_records(model, [t.record for t in test], grouping)
    labels = [1 if t.severe else 0 for t in test]
    report = severity.evaluate_scores(scores, labels, cfg.classification_threshold)
    (cfg.out_dir / "severity_eval.json").write_text(
        severity.eval_report_to_json(report), encoding="utf-8"
    )
    (cfg.out_dir / "severity_eval.txt").write_text(
        severity.format_classification_report(report), encoding="utf-8"
    )
    (cfg.out_dir / "roc_points.csv").write_text(
        severity.roc_to_csv(report.roc_points), encoding="utf-8"
    )
    ranked, _, _ = severity.coefficient_ranking(model)
    with open(cfg.out_dir / "coefficients.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "coefficient"])
        for name, coefficient in ranked:
            writer.writerow([name, repr(coefficient)])
    _write_manifest(cfg.out_dir, "severity", inputs, params, outputs)
    print(
        f"severity: accuracy {report.accuracy:.3f}, "
        f"severe recall {report.per_class['Severe']['recall']:.3f}, AUC {report.auc:.3f}"
    )


def stage_network(cfg: PipelineConfig) -> None:
    input_paths = {
        "case_file": cfg.case_file,
        "substation_mapping": cfg.substation_mapping,
        "overlay_config": cfg.overlay_config,
    }
    if cfg.coordinates is not None:
        input_paths["coordinates"] = cfg.coordinates
    if cfg.rules is not None:
        input_paths["rules"] = cfg.rules
    inputs = _input_hashes(input_paths)
    params = {"seed": cfg.seed}
    outputs = ["network.json", "rules.miim"]
    if _stage_up_to_date(cfg.out_dir, "network", inputs, params, outputs):
        print("network: up to date")
        return
    case = topology.parse_case(cfg.case_file)
    mapping = topology.load_substation_mapping(cfg.substation_mapping)
    overlay = topology.OverlayConfig.from_json(cfg.overlay_config.read_text(encoding="utf-8"))
    coordinates = topology.load_coordinates(cfg.coordinates) if cfg.coordinates else None
    network = topology.build_joint_network(
        case, mapping, overlay, seed=cfg.seed, coordinates=coordinates
    )
    if cfg.rules is not None:
        network.rules_text = cfg.rules.read_text(encoding="utf-8")
    miim.link_rules(miim.parse_rules(network.rules_text), network.entity_ids)
    (cfg.out_dir / "network.json").write_text(topology.network_to_json(network), encoding="utf-8")
    (cfg.out_dir / "rules.miim").write_text(network.rules_text, encoding="utf-8")
    _write_manifest(cfg.out_dir, "network", inputs, params, outputs)
    print(
        f"network: {network.bus_count} buses, {len(network.substations)} substations, "
        f"{len(network.entities)} entities"
    )


def stage_scenarios(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "scenarios")
    inputs = _input_hashes({
        "network": cfg.out_dir / "network.json",
        "scenarios": cfg.scenario_file,
    })
    outputs = ["scenario_failures.json"]
    if _stage_up_to_date(cfg.out_dir, "scenarios", inputs, {}, outputs):
        print("scenarios: up to date")
        return
    network = topology.network_from_json((cfg.out_dir / "network.json").read_text(encoding="utf-8"))
    scenario_rows = scen.load_scenarios(cfg.scenario_file)
    failures = [scen.build_scenario_failures(network, s) for s in scenario_rows]
    (cfg.out_dir / "scenario_failures.json").write_text(
        scen.failures_to_json(failures, network, scenario_rows), encoding="utf-8"
    )
    _write_manifest(cfg.out_dir, "scenarios", inputs, {}, outputs)
    for fs in failures:
        print(f"scenarios: {fs.scenario_name}: {len(fs.entity_ids)} initial entities "
              f"across {len(fs.substation_ids)} substations")


def stage_simulate(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "simulate")
    inputs = _input_hashes({
        "network": cfg.out_dir / "network.json",
        "failures": cfg.out_dir / "scenario_failures.json",
    })
    outputs = ["cascade_traces.json"]
    if _stage_up_to_date(cfg.out_dir, "simulate", inputs, {}, outputs):
        print("simulate: up to date")
        return
    network = topology.network_from_json((cfg.out_dir / "network.json").read_text(encoding="utf-8"))
    failures = scen.failures_from_json(
        (cfg.out_dir / "scenario_failures.json").read_text(encoding="utf-8")
    )
    rules = miim.parse_rules(network.rules_text)
    traces = {}
    for fs in sorted(failures, key=lambda f: f.scenario_name):
        trace = miim.cascade(network.entity_ids, rules, fs.clamp)
        traces[fs.scenario_name] = {
            "clamp": sorted(fs.clamp),
            "depth": trace.depth,
            "rounds": [dict(sorted(r.items())) for r in trace.rounds],
        }
        print(f"simulate: {fs.scenario_name}: depth {trace.depth}")
    (cfg.out_dir / "cascade_traces.json").write_text(
        json.dumps(traces, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_manifest(cfg.out_dir, "simulate", inputs, {}, outputs)


def stage_report(cfg: PipelineConfig) -> None:
    _require_artifacts(cfg, "report")
    inputs = _input_hashes({
        "traces": cfg.out_dir / "cascade_traces.json",
        "network": cfg.out_dir / "network.json",
    })
    outputs = [
        "resilience_report.json", "resilience_report.csv", "resilience_report.txt",
        "initial_failures_by_kind.svg", "operability_by_scenario.svg",
        "direct_vs_cascade.svg", "failed_by_kind.svg",
    ]
    if _stage_up_to_date(cfg.out_dir, "report", inputs, {}, outputs):
        print("report: up to date")
        return
    network = topology.network_from_json((cfg.out_dir / "network.json").read_text(encoding="utf-8"))
    traces = json.loads((cfg.out_dir / "cascade_traces.json").read_text(encoding="utf-8"))
    reports = []
    for name, payload in sorted(traces.items()):
        trace = miim.CascadeTrace(
            rounds=payload["rounds"],
            changed=_rebuild_changed(payload["rounds"]),
            clamp=frozenset(payload["clamp"]),
        )
        reports.append(metrics.build_report(name, trace, network.entities))
    metrics.emit_report(reports, cfg.out_dir)
    _write_manifest(cfg.out_dir, "report", inputs, {}, outputs)
    for r in sorted(reports, key=lambda r: r.scenario):
        print(f"report: {r.scenario}: O={r.operability:.4f} G={r.resilience_gap:.4f} "
              f"affected={r.total_affected}")


def _rebuild_changed(rounds) -> list[list[str]]:
    changed = [[]]
    for before, after in zip(rounds, rounds[1:]):
        changed.append(sorted(e for e in after if after[e] != before[e]))
    return changed


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "characterize": stage_characterize,
    "hypotheses": stage_hypotheses,
    "severity": stage_severity,
    "network": stage_network,
    "scenarios": stage_scenarios,
    "simulate": stage_simulate,
    "report": stage_report,
}


def run(cfg: PipelineConfig, stages) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for stage in STAGE_ORDER:
        if stage not in stages:
            continue
        if not cfg.stage_enabled(stage):
            print(f"{stage}: disabled in config")
            continue
        try:
            _STAGE_FUNCS[stage](cfg)
        except DependencyError as err:
            print(f"{stage}: {err}", file=sys.stderr)
            return 2
        except Exception as err:  # halt downstream stages, keep upstream artifacts
            print(f"{stage}: failed: {err}", file=sys.stderr)
            return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gridcascade",
        description="Climate outage characterization and cascade resilience pipeline",
    )
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    parser.add_argument("--out", help="override the configured output directory")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGE_ORDER:
        sub.add_parser(stage, help=f"run only the {stage} stage")
    run_parser = sub.add_parser("run", help="run a set of stages in dependency order")
    run_parser.add_argument(
        "--stages", default="all", help="comma-separated stage list, or 'all'"
    )

    args = parser.parse_args(argv)
    try:
        cfg = validate_config(args.config)
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return 1
    if args.out:
        cfg.out_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed

    if args.command == "run":
        if args.stages == "all":
            wanted = list(STAGE_ORDER)
        else:
            wanted = [s.strip() for s in args.stages.split(",") if s.strip()]
            unknown = [s for s in wanted if s not in STAGE_ORDER]
            if unknown:
                print(f"unknown stages: {', '.join(unknown)}", file=sys.stderr)
                return 1
    else:
        wanted = [args.command]
    return run(cfg, wanted)


if __name__ == "__main__":
    sys.exit(main())
