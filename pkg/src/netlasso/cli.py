"""Command-line front end: solver runs, paths, thresholds, experiments.

Each subcommand is driven by one JSON config document.  Flags override
individual config entries, the merged document is validated against a
strict per-task schema (unknown keys are errors), and the run writes
its artifacts into the configured output directory.  All numeric
output goes through ``repr``-precision floats and sorted JSON keys, so
re-running the same config and seed reproduces every artifact byte for
byte.  Plotting is left to external tools.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .datasets import (gen_half_moons, gen_piecewise_signal,
                       gen_two_line_regression, load_csv, load_signal_csv,
                       save_csv, save_signal_csv)
from .graph import (DifferenceOperator, complete_graph, knn_gaussian_graph,
                    load_edge_list, path_graph, sigma_min_DDt)
from .losses import RidgeRegression, SquaredDistance
from .path import (Partition, adjusted_rand_index, extract_partition,
                   gamma_path, k_path, midpoint_init, partition_relation,
                   save_centroids_csv, save_path_json)
from .solver import (DIVERGED, RhoSchedule, SolverConfig, nl_certificate,
                     objective_convex, objective_trimmed, solve_nl, solve_ntl,
                     stationarity_check)
from .thresholds import (_jsonify, bound_C_clustering, bound_C_quadratic,
                         clustering_threshold, exact_penalty_threshold,
                         recovery_interval, recovery_interval_cc)


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (exit code 2)."""


class NumericalError(Exception):
    """Solver divergence or non-finite output (exit code 3)."""


TASKS = ("gen-data", "solve-nl", "solve-ntl", "k-path", "gamma-path",
         "thresholds", "recovery-check", "metrics", "piecewise")

GRAPH_KINDS = ("complete", "knn", "path", "edge-list")
LOSS_KINDS = ("squared-distance", "ridge")
INIT_KINDS = ("minimizers", "from-file", "nl-midpoint")
GENERATOR_KINDS = ("two-line", "half-moons", "piecewise")


# ---------------------------------------------------------------------------
# typed config getters


def _require(where, raw, allowed, required=()):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(unknown)}")
    missing = sorted(set(required) - set(raw))
    if missing:
        raise ConfigError(f"{where}: missing key(s): {', '.join(missing)}")


def _num(where, value, minimum=None, above=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{where} must be finite")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where} must be >= {minimum}")
    if above is not None and v <= above:
        raise ConfigError(f"{where} must be > {above}")
    return v


def _int(where, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}")
    return value


def _str(where, value, choices=None):
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string")
    if choices is not None and value not in choices:
        raise ConfigError(
            f"{where} must be one of: {', '.join(choices)} (got {value!r})")
    return value


def _bool(where, value):
    if not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false")
    return value


def _gamma_value(where, value, allow_auto):
    if value == "auto":
        if not allow_auto:
            raise ConfigError(f"{where} does not accept \"auto\" here")
        return "auto"
    return _num(where, value, minimum=0.0)


# ---------------------------------------------------------------------------
# section parsers (raw -> normalized dict with defaults filled)


def _parse_output(raw):
    _require("output", raw, {"dir"}, ("dir",))
    return {"dir": _str("output.dir", raw["dir"])}


def _parse_data(raw):
    _require("data", raw, {"file", "has_labels", "has_responses"}, ("file",))
    return {"file": _str("data.file", raw["file"]),
            "has_labels": _bool("data.has_labels",
                                raw.get("has_labels", False)),
            "has_responses": _bool("data.has_responses",
                                   raw.get("has_responses", False))}


def _parse_graph(raw):
    _require("graph", raw, {"kind", "k", "alpha", "file"}, ("kind",))
    kind = _str("graph.kind", raw["kind"], GRAPH_KINDS)
    out = {"kind": kind}
    if kind == "edge-list":
        _require("graph", raw, {"kind", "file"}, ("file",))
        out["file"] = _str("graph.file", raw["file"])
        return out
    if "file" in raw:
        raise ConfigError("graph.file only applies to kind \"edge-list\"")
    if kind == "knn":
        _require("graph", raw, {"kind", "k", "alpha"}, ("k",))
        out["k"] = _int("graph.k", raw["k"], minimum=1)
        out["alpha"] = _num("graph.alpha", raw.get("alpha", 0.5), above=0.0)
        return out
    if "k" in raw:
        raise ConfigError("graph.k only applies to kind \"knn\"")
    # complete / path: alpha null means uniform unit weights
    alpha = raw.get("alpha")
    out["alpha"] = None if alpha is None \
        else _num("graph.alpha", alpha, above=0.0)
    return out


def _parse_loss(raw):
    _require("loss", raw, {"kind", "epsilon"}, ("kind",))
    kind = _str("loss.kind", raw["kind"], LOSS_KINDS)
    if kind == "squared-distance":
        if "epsilon" in raw:
            raise ConfigError("loss.epsilon only applies to kind \"ridge\"")
        return {"kind": kind}
    return {"kind": kind,
            "epsilon": _num("loss.epsilon", raw.get("epsilon", 1e-2),
                            above=0.0)}


def _parse_schedule(raw):
    if raw is None:
        return None
    _require("solver.rho_schedule", raw, {"multiplier", "cap", "period"})
    cap = raw.get("cap", "auto")
    if cap != "auto":
        cap = _num("solver.rho_schedule.cap", cap, above=0.0)
    return {"multiplier": _num("solver.rho_schedule.multiplier",
                               raw.get("multiplier", 10.0), above=1.0),
            "cap": cap,
            "period": _int("solver.rho_schedule.period",
                           raw.get("period", 100), minimum=1)}


def _parse_solver(raw, default_rho=None, default_schedule=None):
    _require("solver", raw, {"rho", "x_update", "smoothness", "max_iters",
                             "eps_abs", "eps_rel", "rho_schedule"})
    rho = raw.get("rho", default_rho)
    if rho is not None:
        rho = _num("solver.rho", rho, above=0.0)
    smoothness = raw.get("smoothness")
    if smoothness is not None:
        smoothness = _num("solver.smoothness", smoothness, above=0.0)
    schedule = _parse_schedule(raw.get("rho_schedule", default_schedule))
    return {"rho": rho,
            "x_update": _str("solver.x_update", raw.get("x_update", "auto"),
                             ("auto", "exact", "linearized")),
            "smoothness": smoothness,
            "max_iters": _int("solver.max_iters", raw.get("max_iters", 1000),
                              minimum=1),
            "eps_abs": _num("solver.eps_abs", raw.get("eps_abs", 1e-5),
                            above=0.0),
            "eps_rel": _num("solver.eps_rel", raw.get("eps_rel", 1e-5),
                            above=0.0),
            "rho_schedule": schedule}


def _parse_init(raw):
    _require("init", raw, {"kind", "file", "grid"}, ("kind",))
    kind = _str("init.kind", raw["kind"], INIT_KINDS)
    if kind == "from-file":
        _require("init", raw, {"kind", "file"}, ("file",))
        return {"kind": kind, "file": _str("init.file", raw["file"])}
    if "file" in raw:
        raise ConfigError("init.file only applies to kind \"from-file\"")
    if kind == "nl-midpoint":
        _require("init", raw, {"kind", "grid"})
        return {"kind": kind,
                "grid": _parse_gamma_grid(raw.get("grid", {}),
                                          "init.grid")}
    if "grid" in raw:
        raise ConfigError("init.grid only applies to kind \"nl-midpoint\"")
    return {"kind": kind}


def _parse_gamma_grid(raw, where="gamma_sequence"):
    _require(where, raw, {"values", "start", "factor", "count"})
    if "values" in raw:
        _require(where, raw, {"values"})
        values = raw["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{where}.values must be a non-empty list")
        return {"values": [_num(f"{where}.values[{i}]", v, above=0.0)
                           for i, v in enumerate(values)]}
    return {"start": _num(f"{where}.start", raw.get("start", 1e-3),
                          above=0.0),
            "factor": _num(f"{where}.factor", raw.get("factor", 1.2),
                           above=1.0),
            "count": _int(f"{where}.count", raw.get("count", 100),
                          minimum=1)}


def _parse_k_sequence(raw):
    _require("k_sequence", raw, {"values", "start", "stop", "step"})
    if "values" in raw:
        _require("k_sequence", raw, {"values"})
        values = raw["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError("k_sequence.values must be a non-empty list")
        return {"values": [_int(f"k_sequence.values[{i}]", v, minimum=0)
                           for i, v in enumerate(values)]}
    out = {"start": _int("k_sequence.start", raw.get("start", 0), minimum=0),
           "stop": _int("k_sequence.stop", raw.get("stop", 0), minimum=0),
           "step": _int("k_sequence.step", raw.get("step", -1))}
    if "start" not in raw:
        raise ConfigError("k_sequence needs either values or start")
    if out["step"] >= 0:
        raise ConfigError("k_sequence.step must be negative")
    return out


def _parse_generator(raw):
    _require("generator", raw,
             {"kind", "n", "slopes", "intercepts", "x_range", "noise_sd",
              "levels"}, ("kind",))
    kind = _str("generator.kind", raw["kind"], GENERATOR_KINDS)
    noise = _num("generator.noise_sd", raw.get("noise_sd", 0.0), minimum=0.0)
    if kind == "two-line":
        _require("generator", raw, {"kind", "n", "slopes", "intercepts",
                                    "x_range", "noise_sd"}, ("n",))
        out = {"kind": kind, "n": _int("generator.n", raw["n"], minimum=2),
               "noise_sd": noise}
        for key, default in (("slopes", [1.0, -1.0]),
                             ("intercepts", [0.0, 0.0]),
                             ("x_range", [-1.0, 1.0])):
            pair = raw.get(key, default)
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"generator.{key} must be a 2-element list")
            out[key] = [_num(f"generator.{key}[{i}]", v)
                        for i, v in enumerate(pair)]
        return out
    if kind == "half-moons":
        _require("generator", raw, {"kind", "n", "noise_sd"}, ("n",))
        return {"kind": kind, "n": _int("generator.n", raw["n"], minimum=2),
                "noise_sd": noise}
    _require("generator", raw, {"kind", "levels", "noise_sd"}, ("levels",))
    return {"kind": kind, "levels": _parse_levels(raw["levels"]),
            "noise_sd": noise}


def _parse_levels(raw):
    if not isinstance(raw, list) or not raw:
        raise ConfigError("levels must be a non-empty list of"
                          " [length, value] pairs")
    out = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"levels[{i}] must be a [length, value] pair")
        out.append([_int(f"levels[{i}] length", pair[0], minimum=1),
                    _num(f"levels[{i}] value", pair[1])])
    return out


def _parse_signal(raw):
    _require("signal", raw, {"file", "levels", "noise_sd", "seed"})
    if "file" in raw:
        _require("signal", raw, {"file"})
        return {"file": _str("signal.file", raw["file"])}
    if "levels" not in raw:
        raise ConfigError("signal needs either file or levels")
    return {"levels": _parse_levels(raw["levels"]),
            "noise_sd": _num("signal.noise_sd", raw.get("noise_sd", 0.2),
                             minimum=0.0),
            "seed": _int("signal.seed", raw.get("seed", 0))}


# ---------------------------------------------------------------------------
# per-task schemas


def normalize_config(raw):
    """Validate a raw config document and fill in defaults.

    Normalization is idempotent, which is what makes the parse ->
    serialize -> parse round trip the identity.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "task" not in raw:
        raise ConfigError("config: missing key(s): task")
    task = _str("task", raw["task"], TASKS)
    out = {"task": task}

    def common(keys, required=()):
        _require("config", raw, set(keys) | {"task"},
                 set(required) | {"task"})

    if task == "gen-data":
        common({"generator", "seed", "output"}, {"generator", "output"})
        out["generator"] = _parse_generator(raw["generator"])
        out["seed"] = _int("seed", raw.get("seed", 0))
        out["output"] = _parse_output(raw["output"])
        return out

    if task in ("solve-nl", "solve-ntl"):
        keys = {"data", "graph", "loss", "gamma", "solver", "merge_tol",
                "seed", "output"}
        req = {"data", "gamma", "output"}
        if task == "solve-ntl":
            keys |= {"cardinality", "init"}
            req |= {"cardinality"}
        common(keys, req)
        out["data"] = _parse_data(raw["data"])
        out["graph"] = _parse_graph(raw.get("graph", {"kind": "complete"}))
        out["loss"] = _parse_loss(raw.get("loss",
                                          {"kind": "squared-distance"}))
        out["gamma"] = _gamma_value("gamma", raw["gamma"],
                                    allow_auto=task == "solve-ntl")
        default_rho = 1.0 if task == "solve-nl" else 1e4
        out["solver"] = _parse_solver(raw.get("solver", {}), default_rho)
        if task == "solve-ntl":
            out["cardinality"] = _int("cardinality", raw["cardinality"],
                                      minimum=0)
            out["init"] = _parse_init(raw.get("init", {"kind": "minimizers"}))
        out["merge_tol"] = _num("merge_tol", raw.get("merge_tol", 1e-6),
                                above=0.0)
        out["seed"] = _int("seed", raw.get("seed", 0))
        out["output"] = _parse_output(raw["output"])
        return out

    if task == "k-path":
        common({"data", "graph", "loss", "gamma", "k_sequence", "init",
                "solver", "merge_tol", "seed", "output"},
               {"data", "gamma", "k_sequence", "output"})
        out["data"] = _parse_data(raw["data"])
        out["graph"] = _parse_graph(raw.get("graph", {"kind": "complete"}))
        out["loss"] = _parse_loss(raw.get("loss",
                                          {"kind": "squared-distance"}))
        out["gamma"] = _gamma_value("gamma", raw["gamma"], allow_auto=True)
        out["k_sequence"] = _parse_k_sequence(raw["k_sequence"])
        out["init"] = _parse_init(raw.get("init", {"kind": "minimizers"}))
        out["solver"] = _parse_solver(raw.get("solver", {}), 1e4)
        out["merge_tol"] = _num("merge_tol", raw.get("merge_tol", 1e-6),
                                above=0.0)
        out["seed"] = _int("seed", raw.get("seed", 0))
        out["output"] = _parse_output(raw["output"])
        return out

    if task == "gamma-path":
        common({"data", "graph", "loss", "gamma_sequence", "warm_start",
                "stop_on_full_merge", "solver", "merge_tol", "seed",
                "output"},
               {"data", "gamma_sequence", "output"})
        out["data"] = _parse_data(raw["data"])
        out["graph"] = _parse_graph(raw.get("graph", {"kind": "complete"}))
        out["loss"] = _parse_loss(raw.get("loss",
                                          {"kind": "squared-distance"}))
        out["gamma_sequence"] = _parse_gamma_grid(raw["gamma_sequence"])
        out["warm_start"] = _bool("warm_start", raw.get("warm_start", True))
        out["stop_on_full_merge"] = _bool("stop_on_full_merge",
                                          raw.get("stop_on_full_merge",
                                                  False))
        out["solver"] = _parse_solver(raw.get("solver", {}), 1.0)
        out["merge_tol"] = _num("merge_tol", raw.get("merge_tol", 1e-6),
                                above=0.0)
        out["seed"] = _int("seed", raw.get("seed", 0))
        out["output"] = _parse_output(raw["output"])
        return out

    if task == "thresholds":
        common({"data", "graph", "loss", "output"}, {"data", "output"})
        out["data"] = _parse_data(raw["data"])
        out["graph"] = _parse_graph(raw.get("graph", {"kind": "complete"}))
        out["loss"] = _parse_loss(raw.get("loss",
                                          {"kind": "squared-distance"}))
        out["output"] = _parse_output(raw["output"])
        return out

    if task == "recovery-check":
        common({"data", "graph", "loss", "gamma", "solver", "merge_tol",
                "output"}, {"data", "output"})
        out["data"] = _parse_data(raw["data"])
        out["graph"] = _parse_graph(raw.get("graph", {"kind": "complete"}))
        out["loss"] = _parse_loss(raw.get("loss",
                                          {"kind": "squared-distance"}))
        out["gamma"] = _gamma_value("gamma", raw.get("gamma", "auto"),
                                    allow_auto=True)
        out["solver"] = _parse_solver(raw.get("solver", {}), 1.0)
        out["merge_tol"] = _num("merge_tol", raw.get("merge_tol", 1e-6),
                                above=0.0)
        out["output"] = _parse_output(raw["output"])
        return out

    if task == "metrics":
        common({"predicted", "reference", "output"},
               {"predicted", "reference", "output"})
        out["predicted"] = _str("predicted", raw["predicted"])
        out["reference"] = _str("reference", raw["reference"])
        out["output"] = _parse_output(raw["output"])
        return out

    # piecewise
    common({"signal", "cardinality", "gamma", "alpha", "nl_grid", "solver",
            "merge_tol", "output"}, {"signal", "output"})
    out["signal"] = _parse_signal(raw["signal"])
    out["cardinality"] = _int("cardinality", raw.get("cardinality", 5),
                              minimum=0)
    out["gamma"] = _gamma_value("gamma", raw.get("gamma", "auto"),
                                allow_auto=True)
    out["alpha"] = _num("alpha", raw.get("alpha", 0.5), above=0.0)
    out["nl_grid"] = _parse_gamma_grid(raw.get("nl_grid", {}), "nl_grid")
    out["solver"] = _parse_solver(raw.get("solver", {}), 1.0,
                                  default_schedule={"multiplier": 10.0,
                                                    "cap": "auto",
                                                    "period": 100})
    out["merge_tol"] = _num("merge_tol", raw.get("merge_tol", 1e-6),
                            above=0.0)
    out["output"] = _parse_output(raw["output"])
    return out


def serialize_config(config):
    """Render a normalized config back to its canonical JSON text."""
    return json.dumps(config, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# builders: config sections -> package objects


def _load_data(spec):
    try:
        return load_csv(spec["file"], has_labels=spec["has_labels"],
                        has_responses=spec["has_responses"])
    except OSError as exc:
        raise ConfigError(f"cannot read data file: {exc}")
    except ValueError as exc:
        raise ConfigError(f"bad data file {spec['file']}: {exc}")


def _graph_points(data):
    # Gaussian edge weights see the full observed vector per node: the
    # regression response is stacked next to the inputs when present.
    if data.responses is not None:
        return np.column_stack([data.points, data.responses])
    return data.points


def _build_graph(spec, data):
    n = data.num_points
    kind = spec["kind"]
    if kind == "edge-list":
        try:
            graph = load_edge_list(spec["file"])
        except OSError as exc:
            raise ConfigError(f"cannot read graph file: {exc}")
        except ValueError as exc:
            raise ConfigError(f"bad graph file {spec['file']}: {exc}")
        if graph.num_nodes != n:
            raise ConfigError(
                f"graph file has {graph.num_nodes} nodes, data has {n}")
        return graph
    points = _graph_points(data)
    if kind == "knn":
        k = spec["k"]
        if k >= n:
            raise ConfigError(f"graph.k must be < number of nodes ({n})")
        return knn_gaussian_graph(points, k, spec["alpha"])
    alpha = spec["alpha"]
    builder = complete_graph if kind == "complete" else path_graph
    if alpha is None:
        return builder(n)
    return builder(n, points=points, alpha=alpha)


def _build_loss(spec, data):
    if spec["kind"] == "squared-distance":
        return SquaredDistance(data.points)
    if data.responses is None:
        raise ConfigError("ridge loss needs data.has_responses")
    if data.points.shape[1] != 1:
        raise ConfigError("ridge loss expects one input column")
    return RidgeRegression(data.points[:, 0], data.responses,
                           spec["epsilon"])


def _resolve_gamma(gamma, losses):
    """Turn "auto" into the exact-penalty preset for the given losses."""
    if gamma != "auto":
        return float(gamma)
    if isinstance(losses, SquaredDistance):
        bound = bound_C_clustering(losses)
    elif losses.quadratic_terms() is not None:
        bound = bound_C_quadratic(losses)
    else:
        raise ConfigError("gamma \"auto\" needs a quadratic loss")
    return exact_penalty_threshold(losses, bound).gamma_star * 1.001


def _gamma_values(spec):
    if "values" in spec:
        values = list(spec["values"])
    else:
        values = [spec["start"] * spec["factor"] ** t
                  for t in range(spec["count"])]
    arr = np.asarray(values, dtype=np.float64)
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ConfigError("gamma sequence must be strictly increasing")
    return values


def _k_values(spec, num_edges):
    if "values" in spec:
        values = list(spec["values"])
    else:
        start = spec["start"] if spec["start"] > 0 else num_edges
        values = list(range(start, spec["stop"] - 1, spec["step"]))
        if not values or values[-1] != spec["stop"]:
            values.append(spec["stop"])
    for v in values:
        if v > num_edges:
            raise ConfigError(
                f"cardinality {v} exceeds the edge count {num_edges}")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError("k sequence must be strictly decreasing")
    return values


def _build_solver_config(spec, gamma, cardinality, graph):
    schedule = spec["rho_schedule"]
    if schedule is not None:
        cap = schedule["cap"]
        if cap == "auto":
            sigma = sigma_min_DDt(graph)
            if sigma <= 0:
                raise ConfigError("rho cap \"auto\" needs a connected graph"
                                  " with surjective differences")
            cap = 2.0 / (0.99 * sigma)
        schedule = RhoSchedule(multiplier=schedule["multiplier"], cap=cap,
                               period=schedule["period"])
    try:
        return SolverConfig(gamma=gamma, cardinality=cardinality,
                            rho=spec["rho"], x_update=spec["x_update"],
                            smoothness=spec["smoothness"],
                            max_iters=spec["max_iters"],
                            eps_abs=spec["eps_abs"],
                            eps_rel=spec["eps_rel"], rho_schedule=schedule)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _solver_kwargs(spec):
    """The subset of solver settings solve_nl takes as keywords."""
    return {"rho": spec["rho"], "x_update": spec["x_update"],
            "smoothness": spec["smoothness"],
            "max_iters": spec["max_iters"], "eps_abs": spec["eps_abs"],
            "eps_rel": spec["eps_rel"]}


def _minimizer_init(losses):
    rows = []
    for i in range(losses.num_nodes):
        xi = losses.minimizer(i)
        if xi is None:
            raise ConfigError(
                "init \"minimizers\" needs losses with per-node minimizers")
        rows.append(xi)
    return np.asarray(rows, dtype=np.float64)


def _read_centroids_csv(path, num_nodes, dim):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read init file: {exc}")
    if len(rows) != num_nodes + 1:
        raise ConfigError(f"init file {path} has {len(rows) - 1} rows,"
                          f" expected {num_nodes}")
    try:
        x0 = np.asarray([[float(c) for c in row[1:]] for row in rows[1:]])
    except ValueError:
        raise ConfigError(f"init file {path} has a non-numeric cell")
    if x0.shape != (num_nodes, dim):
        raise ConfigError(f"init file {path} has shape {x0.shape},"
                          f" expected ({num_nodes}, {dim})")
    return x0


def _initial_x(spec, losses, graph, solver_spec):
    kind = spec["kind"]
    if kind == "minimizers":
        return _minimizer_init(losses)
    if kind == "from-file":
        return _read_centroids_csv(spec["file"], losses.num_nodes,
                                   losses.dim)
    gammas = _gamma_values(spec["grid"])
    path = gamma_path(losses, graph, gammas, warm_start=True,
                      stop_on_full_merge=True,
                      max_iters=solver_spec["max_iters"],
                      eps_abs=solver_spec["eps_abs"],
                      eps_rel=solver_spec["eps_rel"])
    try:
        return midpoint_init(path)
    except ValueError as exc:
        raise NumericalError(f"nl-midpoint init failed: {exc}")


# ---------------------------------------------------------------------------
# artifact writers


def _to_plain(value):
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return _jsonify(value)


def _write_json(path, payload):
    text = json.dumps(_to_plain(payload), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def _write_config(out_dir, config):
    (out_dir / "config.json").write_text(serialize_config(config))


def _write_centroids(path, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    header = "node," + ",".join(f"dim{c}" for c in range(x.shape[1]))
    lines = [header]
    for i, row in enumerate(x):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_trace(path, state):
    lines = ["iter,objective,augmented_lagrangian,primal_residual,"
             "x_change,rho"]
    histories = zip(state.objectives, state.aug_lagrangians,
                    state.primal_residuals, state.x_changes, state.rhos)
    for t, row in enumerate(histories, start=1):
        lines.append(",".join([str(t)] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def _partition_payload(x, graph, merge_tol):
    part = extract_partition(x, graph, merge_tol=merge_tol)
    return part, {"labels": [int(v) for v in part.labels],
                  "num_clusters": part.num_clusters,
                  "merge_tol": merge_tol}


def _out_dir(config):
    out = Path(config["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{what} contains non-finite values")


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(config):
    out = _out_dir(config)
    _write_config(out, config)
    gen = config["generator"]
    seed = config["seed"]
    if gen["kind"] == "two-line":
        data = gen_two_line_regression(gen["n"], slopes=tuple(gen["slopes"]),
                                       intercepts=tuple(gen["intercepts"]),
                                       x_range=tuple(gen["x_range"]),
                                       noise_sd=gen["noise_sd"], seed=seed)
        save_csv(data, out / "data.csv")
    elif gen["kind"] == "half-moons":
        data = gen_half_moons(gen["n"], noise_sd=gen["noise_sd"], seed=seed)
        save_csv(data, out / "data.csv")
    else:
        levels = [(int(l), float(v)) for l, v in gen["levels"]]
        signal = gen_piecewise_signal(sum(l for l, _ in levels), levels,
                                      noise_sd=gen["noise_sd"], seed=seed)
        save_signal_csv(signal, out / "signal.csv")
    return 0


def _solve_common(config):
    data = _load_data(config["data"])
    losses = _build_loss(config["loss"], data)
    graph = _build_graph(config["graph"], data)
    return data, losses, graph


def cmd_solve_nl(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    spec = config["solver"]
    state, reason = solve_nl(losses, graph, config["gamma"],
                             **_solver_kwargs(spec))
    if reason == DIVERGED:
        raise NumericalError("solver diverged; lower rho or gamma")
    _check_finite(state.x, "solution")
    _write_centroids(out / "centroids.csv", state.x)
    _write_trace(out / "trace.csv", state)
    part, payload = _partition_payload(state.x, graph, config["merge_tol"])
    _write_json(out / "partition.json", payload)
    report = nl_certificate(state.x, losses, graph, config["gamma"],
                            merge_tol=config["merge_tol"])
    _write_json(out / "optimality.json", {
        "kind": "subgradient-certificate",
        "passed": report.passed,
        "max_rel_residual": report.max_rel_residual,
        "max_subgrad_norm": report.max_subgrad_norm,
        "merged_edges": report.merged_edges,
        "residual_tol": report.residual_tol,
        "norm_slack": report.norm_slack,
        "objective": objective_convex(losses,
                                      DifferenceOperator(graph, losses.dim),
                                      state.x, config["gamma"],
                                      graph.weights),
        "stop_reason": reason,
        "iterations": state.iterations,
        "num_clusters": part.num_clusters,
    })
    return 0


def cmd_solve_ntl(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    if config["cardinality"] > graph.num_edges:
        raise ConfigError(f"cardinality {config['cardinality']} exceeds the"
                          f" edge count {graph.num_edges}")
    gamma = _resolve_gamma(config["gamma"], losses)
    spec = config["solver"]
    solver_config = _build_solver_config(spec, gamma, config["cardinality"],
                                         graph)
    x0 = _initial_x(config["init"], losses, graph, spec)
    state, reason = solve_ntl(losses, graph, solver_config, x0=x0)
    if reason == DIVERGED:
        raise NumericalError("solver diverged; lower rho or gamma")
    _check_finite(state.x, "solution")
    _write_centroids(out / "centroids.csv", state.x)
    _write_trace(out / "trace.csv", state)
    part, payload = _partition_payload(state.x, graph, config["merge_tol"])
    _write_json(out / "partition.json", payload)
    report = stationarity_check(state.x, losses, graph, gamma,
                                config["cardinality"], seed=config["seed"])
    _write_json(out / "optimality.json", {
        "kind": "directional-stationarity",
        "passed": report.passed,
        "min_value": report.min_value,
        "worst_kind": report.worst_kind,
        "num_directions": report.num_directions,
        "tolerance": report.tolerance,
        "gamma": gamma,
        "objective": objective_trimmed(losses,
                                       DifferenceOperator(graph, losses.dim),
                                       state.x, gamma,
                                       config["cardinality"]),
        "stop_reason": reason,
        "iterations": state.iterations,
        "num_clusters": part.num_clusters,
    })
    return 0


def _path_artifacts(out, path):
    if any(step.stop_reason == DIVERGED for step in path.steps):
        raise NumericalError("a path step diverged; lower rho or gamma")
    with open(out / "path.json", "w") as fh:
        save_path_json(path, fh)
    with open(out / "path_centroids.csv", "w") as fh:
        save_centroids_csv(path, fh)


def cmd_k_path(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    gamma = _resolve_gamma(config["gamma"], losses)
    ks = _k_values(config["k_sequence"], graph.num_edges)
    spec = config["solver"]
    x0 = _initial_x(config["init"], losses, graph, spec)
    options = dict(_solver_kwargs(spec))
    if spec["rho_schedule"] is not None:
        options["rho_schedule"] = _build_solver_config(
            spec, gamma, ks[0], graph).rho_schedule
    path = k_path(losses, graph, gamma, ks, x0=x0,
                  merge_tol=config["merge_tol"], **options)
    _path_artifacts(out, path)
    return 0


def cmd_gamma_path(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    gammas = _gamma_values(config["gamma_sequence"])
    spec = config["solver"]
    path = gamma_path(losses, graph, gammas,
                      warm_start=config["warm_start"],
                      stop_on_full_merge=config["stop_on_full_merge"],
                      merge_tol=config["merge_tol"], **_solver_kwargs(spec))
    _path_artifacts(out, path)
    return 0


def cmd_thresholds(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    payload = {"3nC": None, "recovery": None, "cc_specialized": None}
    if isinstance(losses, SquaredDistance):
        bound = bound_C_clustering(losses)
        payload["3nC"] = clustering_threshold(losses.points)
        method = "clustering"
    elif losses.quadratic_terms() is not None:
        bound = bound_C_quadratic(losses)
        method = "quadratic"
    else:
        raise ConfigError("thresholds need a quadratic loss")
    threshold = exact_penalty_threshold(losses, bound, method=method)
    payload["exact_penalty"] = threshold.to_json_dict()
    if data.labels is not None:
        report = recovery_interval(losses, graph, data.labels)
        payload["recovery"] = report.to_json_dict()
        if isinstance(losses, SquaredDistance):
            lo, hi = recovery_interval_cc(losses, graph, data.labels)
            payload["cc_specialized"] = {"gamma_min": lo, "gamma_max": hi}
    _write_json(out / "thresholds.json", payload)
    return 0


def _midpoint_gamma(lo, hi):
    """A strength inside (lo, hi), coping with open-ended intervals.

    A failed premise makes lo infinite; the check still probes at a
    finite strength so the report shows what the solver actually does.
    """
    if math.isinf(lo):
        return 0.5 * hi if math.isfinite(hi) else 1.0
    if math.isfinite(hi):
        return 0.5 * (lo + hi)
    if lo > 0:
        return 2.0 * lo
    return 1.0


def cmd_recovery_check(config):
    out = _out_dir(config)
    _write_config(out, config)
    data, losses, graph = _solve_common(config)
    if data.labels is None:
        raise ConfigError("recovery-check needs data.has_labels with a"
                          " label column")
    report = recovery_interval(losses, graph, data.labels)
    gamma = config["gamma"]
    if gamma == "auto":
        gamma = _midpoint_gamma(report.gamma_min, report.gamma_max)
    spec = config["solver"]
    state, reason = solve_nl(losses, graph, gamma, **_solver_kwargs(spec))
    if reason == DIVERGED:
        raise NumericalError("solver diverged; lower rho or gamma")
    _check_finite(state.x, "solution")
    part, _ = _partition_payload(state.x, graph, config["merge_tol"])
    try:
        truth = Partition(np.asarray(data.labels))
    except ValueError as exc:
        raise ConfigError(f"bad label column: {exc}")
    _write_json(out / "recovery.json", {
        "gamma_min": report.gamma_min,
        "gamma_max": report.gamma_max,
        "coarsening_bound": report.coarsening_bound,
        "premise_ok": report.premise_ok,
        "interval_nonempty": report.gamma_min < report.gamma_max,
        "gamma_used": gamma,
        "relation": partition_relation(part, truth),
        "ari": adjusted_rand_index(part, truth),
        "num_clusters_found": part.num_clusters,
        "num_clusters_true": truth.num_clusters,
        "stop_reason": reason,
        "iterations": state.iterations,
    })
    return 0


def _load_labels(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read labels from {path}: {exc}")
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}")
        labels = doc.get("labels") if isinstance(doc, dict) else doc
        if not isinstance(labels, list):
            raise ConfigError(f"{path} holds no labels list")
    else:
        labels = []
        for ln, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            cell = line.split(",")[-1].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ConfigError(f"{path} line {ln}: non-numeric label")
            labels.append(value)
    arr = np.asarray(labels)
    if arr.size == 0:
        raise ConfigError(f"{path} holds no labels")
    if not np.all(arr == np.round(arr)):
        raise ConfigError(f"{path} labels must be integral")
    try:
        return Partition(arr.astype(np.int64))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def cmd_metrics(config):
    out = _out_dir(config)
    _write_config(out, config)
    predicted = _load_labels(config["predicted"])
    reference = _load_labels(config["reference"])
    if predicted.num_nodes != reference.num_nodes:
        raise ConfigError(
            f"label files disagree on size: {predicted.num_nodes}"
            f" vs {reference.num_nodes}")
    _write_json(out / "metrics.json", {
        "ari": adjusted_rand_index(predicted, reference),
        "relation": partition_relation(predicted, reference),
        "num_clusters_predicted": predicted.num_clusters,
        "num_clusters_reference": reference.num_clusters,
    })
    return 0


def _jump_set(x, merge_tol):
    """Positions i with a jump between samples i-1 and i."""
    x = np.asarray(x, dtype=np.float64).ravel()
    gaps = np.abs(np.diff(x))
    scale = 1.0 + float(np.abs(x).max()) if x.size else 1.0
    return [int(i) + 1 for i in np.flatnonzero(gaps > merge_tol * scale)]


def _signal_instance(spec):
    if "file" in spec:
        try:
            return load_signal_csv(spec["file"])
        except OSError as exc:
            raise ConfigError(f"cannot read signal file: {exc}")
        except ValueError as exc:
            raise ConfigError(f"bad signal file {spec['file']}: {exc}")
    levels = [(int(l), float(v)) for l, v in spec["levels"]]
    n = sum(l for l, _ in levels)
    return gen_piecewise_signal(n, levels, noise_sd=spec["noise_sd"],
                                seed=spec["seed"])


def cmd_piecewise(config):
    out = _out_dir(config)
    _write_config(out, config)
    signal = _signal_instance(config["signal"])
    n = signal.original.size
    noisy = signal.noisy.reshape(-1, 1)
    losses = SquaredDistance(noisy)
    K = config["cardinality"]
    if K > n - 1:
        raise ConfigError(f"cardinality {K} exceeds the edge count {n - 1}")
    merge_tol = config["merge_tol"]

    # trimmed run: plain path graph, strength from the exact-penalty
    # preset unless pinned, rho schedule per config (capped at the
    # surjectivity threshold when "auto")
    plain = path_graph(n)
    gamma = _resolve_gamma(config["gamma"], losses)
    solver_config = _build_solver_config(config["solver"], gamma, K, plain)
    state, reason = solve_ntl(losses, plain, solver_config,
                             x0=noisy.copy())
    if reason == DIVERGED:
        raise NumericalError("trimmed solver diverged")
    _check_finite(state.x, "trimmed solution")
    ntl_est = state.x[:, 0]
    ntl_result = {
        "gamma": gamma,
        "error": float(np.linalg.norm(ntl_est - signal.original)),
        "jumps": _jump_set(ntl_est, merge_tol),
        "iterations": state.iterations,
        "stop_reason": reason,
    }

    # convex baseline: Gaussian-weighted path graph, one cold-started
    # run per strength on the grid
    weighted = path_graph(n, points=noisy, alpha=config["alpha"])
    grid = _gamma_values(config["nl_grid"])
    nl_runs = []
    for g in grid:
        nl_state, nl_reason = solve_nl(
            losses, weighted, g, x0=noisy.copy(),
            max_iters=config["solver"]["max_iters"],
            eps_abs=config["solver"]["eps_abs"],
            eps_rel=config["solver"]["eps_rel"])
        if nl_reason == DIVERGED:
            raise NumericalError(f"convex baseline diverged at"
                                 f" gamma={g!r}")
        est = nl_state.x[:, 0]
        nl_runs.append({
            "gamma": float(g),
            "error": float(np.linalg.norm(est - signal.original)),
            "jumps": _jump_set(est, merge_tol),
            "estimate": est,
        })

    def public(run):
        return {"gamma": run["gamma"], "error": run["error"],
                "jumps": run["jumps"], "num_jumps": len(run["jumps"])}

    best_quality = min(nl_runs, key=lambda r: r["error"])
    sparse_enough = [r for r in nl_runs if len(r["jumps"]) <= K]
    best_cardinality = sparse_enough[0] if sparse_enough else None

    payload = {
        "n": n,
        "noise_sd": signal.noise_sd,
        "cardinality": K,
        "true_jumps": [int(j) for j in signal.jumps],
        "ntl": dict(ntl_result, num_jumps=len(ntl_result["jumps"])),
        "nl_best_quality": public(best_quality),
        "nl_best_cardinality":
            public(best_cardinality) if best_cardinality else None,
        "nl_grid": [{"gamma": r["gamma"], "error": r["error"],
                     "num_jumps": len(r["jumps"])} for r in nl_runs],
        "ntl_beats_best_nl": ntl_result["error"] <= best_quality["error"],
        "ntl_jumps_exact": ntl_result["jumps"]
            == [int(j) for j in signal.jumps],
    }
    _write_json(out / "piecewise.json", payload)

    bc = best_cardinality["estimate"] if best_cardinality \
        else np.full(n, math.nan)
    lines = ["index,original,noisy,ntl,nl_best_quality,nl_best_cardinality"]
    columns = zip(signal.original, signal.noisy, ntl_est,
                  best_quality["estimate"], bc)
    for i, row in enumerate(columns):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    (out / "signals.csv").write_text("\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "solve-nl": cmd_solve_nl,
    "solve-ntl": cmd_solve_ntl,
    "k-path": cmd_k_path,
    "gamma-path": cmd_gamma_path,
    "thresholds": cmd_thresholds,
    "recovery-check": cmd_recovery_check,
    "metrics": cmd_metrics,
    "piecewise": cmd_piecewise,
}


# ---------------------------------------------------------------------------
# argument parsing and flag overrides


def _gamma_flag(text):
    if text == "auto":
        return "auto"
    return float(text)


def _int_list_flag(text):
    return {"values": [int(t) for t in text.split(",")]}


def _grid_flag(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected start,factor,count")
    return {"start": float(parts[0]), "factor": float(parts[1]),
            "count": int(parts[2])}


# flag destination -> path of the config entry it overrides
_DATA_FLAGS = {
    "data_file": ("data", "file"),
    "has_labels": ("data", "has_labels"),
    "has_responses": ("data", "has_responses"),
}
_GRAPH_FLAGS = {
    "graph_kind": ("graph", "kind"),
    "knn_k": ("graph", "k"),
    "alpha": ("graph", "alpha"),
    "graph_file": ("graph", "file"),
}
_LOSS_FLAGS = {
    "loss_kind": ("loss", "kind"),
    "epsilon": ("loss", "epsilon"),
}
_SOLVER_FLAGS = {
    "rho": ("solver", "rho"),
    "x_update": ("solver", "x_update"),
    "smoothness": ("solver", "smoothness"),
    "max_iters": ("solver", "max_iters"),
    "eps_abs": ("solver", "eps_abs"),
    "eps_rel": ("solver", "eps_rel"),
}
_COMMON_FLAGS = {"out_dir": ("output", "dir"), "seed": ("seed",),
                 "merge_tol": ("merge_tol",)}


def _add_data_flags(sub):
    sub.add_argument("--data-file", dest="data_file")
    sub.add_argument("--has-labels", dest="has_labels",
                     action="store_const", const=True)
    sub.add_argument("--has-responses", dest="has_responses",
                     action="store_const", const=True)
    sub.add_argument("--graph", dest="graph_kind", choices=GRAPH_KINDS)
    sub.add_argument("--knn-k", dest="knn_k", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--graph-file", dest="graph_file")
    sub.add_argument("--loss", dest="loss_kind", choices=LOSS_KINDS)
    sub.add_argument("--epsilon", type=float)


def _add_solver_flags(sub):
    sub.add_argument("--rho", type=float)
    sub.add_argument("--x-update", dest="x_update",
                     choices=("auto", "exact", "linearized"))
    sub.add_argument("--smoothness", type=float)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.add_argument("--eps-abs", dest="eps_abs", type=float)
    sub.add_argument("--eps-rel", dest="eps_rel", type=float)
    sub.add_argument("--merge-tol", dest="merge_tol", type=float)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="netlasso",
        description="Graph-regularized fitting with simultaneous"
                    " clustering: solvers, paths, and threshold reports.")
    subs = parser.add_subparsers(dest="task", required=True)

    def sub(name, **kwargs):
        s = subs.add_parser(name, **kwargs)
        s.add_argument("--config", help="JSON config document")
        s.add_argument("--out-dir", dest="out_dir")
        s.add_argument("--seed", type=int)
        return s

    s = sub("gen-data", help="write a synthetic dataset")
    s.add_argument("--generator", dest="generator_kind",
                   choices=GENERATOR_KINDS)
    s.add_argument("--n", type=int)
    s.add_argument("--noise-sd", dest="noise_sd", type=float)

    s = sub("solve-nl", help="solve the convex weighted problem")
    _add_data_flags(s)
    _add_solver_flags(s)
    s.add_argument("--gamma", type=float)

    s = sub("solve-ntl", help="solve the trimmed problem")
    _add_data_flags(s)
    _add_solver_flags(s)
    s.add_argument("--gamma", type=_gamma_flag)
    s.add_argument("--cardinality", "-K", dest="cardinality", type=int)
    s.add_argument("--init", dest="init_kind", choices=INIT_KINDS)
    s.add_argument("--init-file", dest="init_file")

    s = sub("k-path", help="sweep the exemption budget downward")
    _add_data_flags(s)
    _add_solver_flags(s)
    s.add_argument("--gamma", type=_gamma_flag)
    s.add_argument("--k-values", dest="k_sequence", type=_int_list_flag)
    s.add_argument("--init", dest="init_kind", choices=INIT_KINDS)
    s.add_argument("--init-file", dest="init_file")

    s = sub("gamma-path", help="sweep the penalty strength upward")
    _add_data_flags(s)
    _add_solver_flags(s)
    s.add_argument("--gamma-grid", dest="gamma_sequence", type=_grid_flag)
    s.add_argument("--no-warm-start", dest="warm_start",
                   action="store_const", const=False)
    s.add_argument("--stop-on-full-merge", dest="stop_on_full_merge",
                   action="store_const", const=True)

    s = sub("thresholds", help="report penalty and recovery thresholds")
    _add_data_flags(s)

    s = sub("recovery-check", help="solve at an in-interval strength and"
                                   " compare against labels")
    _add_data_flags(s)
    _add_solver_flags(s)
    s.add_argument("--gamma", type=_gamma_flag)

    s = sub("metrics", help="compare two partition files")
    s.add_argument("--predicted")
    s.add_argument("--reference")

    s = sub("piecewise", help="piecewise-constant signal experiment")
    _add_solver_flags(s)
    s.add_argument("--signal-file", dest="signal_file")
    s.add_argument("--cardinality", "-K", dest="cardinality", type=int)
    s.add_argument("--gamma", type=_gamma_flag)
    s.add_argument("--alpha", type=float)
    s.add_argument("--nl-grid", dest="nl_grid", type=_grid_flag)
    return parser


_TASK_FLAGS = {
    "gen-data": {"generator_kind": ("generator", "kind"),
                 "n": ("generator", "n"),
                 "noise_sd": ("generator", "noise_sd"),
                 "out_dir": ("output", "dir"), "seed": ("seed",)},
    "solve-nl": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
                 **_SOLVER_FLAGS, **_COMMON_FLAGS, "gamma": ("gamma",)},
    "solve-ntl": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
                  **_SOLVER_FLAGS, **_COMMON_FLAGS, "gamma": ("gamma",),
                  "cardinality": ("cardinality",),
                  "init_kind": ("init", "kind"),
                  "init_file": ("init", "file")},
    "k-path": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
               **_SOLVER_FLAGS, **_COMMON_FLAGS, "gamma": ("gamma",),
               "k_sequence": ("k_sequence",),
               "init_kind": ("init", "kind"),
               "init_file": ("init", "file")},
    "gamma-path": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
                   **_SOLVER_FLAGS, **_COMMON_FLAGS,
                   "gamma_sequence": ("gamma_sequence",),
                   "warm_start": ("warm_start",),
                   "stop_on_full_merge": ("stop_on_full_merge",)},
    "thresholds": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
                   "out_dir": ("output", "dir")},
    "recovery-check": {**_DATA_FLAGS, **_GRAPH_FLAGS, **_LOSS_FLAGS,
                       **_SOLVER_FLAGS, "out_dir": ("output", "dir"),
                       "merge_tol": ("merge_tol",), "gamma": ("gamma",)},
    "metrics": {"predicted": ("predicted",), "reference": ("reference",),
                "out_dir": ("output", "dir")},
    "piecewise": {**_SOLVER_FLAGS, "out_dir": ("output", "dir"),
                  "merge_tol": ("merge_tol",),
                  "signal_file": ("signal", "file"),
                  "cardinality": ("cardinality",), "gamma": ("gamma",),
                  "alpha": ("alpha",), "nl_grid": ("nl_grid",)},
}


def _apply_overrides(raw, args, mapping):
    for dest, keys in mapping.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = raw
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"config entry {key} must be an object to accept"
                    f" the --{dest.replace('_', '-')} flag")
            node = child
        node[keys[-1]] = value


def load_config(args):
    """Read the config file (if any), overlay flags, and validate."""
    raw = {}
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {args.config}: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "task" in raw and raw["task"] != args.task:
            raise ConfigError(f"config file is for task {raw['task']!r},"
                              f" not {args.task!r}")
    raw["task"] = args.task
    _apply_overrides(raw, args, _TASK_FLAGS[args.task])
    return normalize_config(raw)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        return COMMANDS[config["task"]](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
