"""Text interchange: config files, click tables, estimate records, sweep tables.

All numeric output is written at 12 significant digits.  Tabular files
are comma-separated with a single header row preceded by a commented
manifest block; readers skip every line starting with '#', so any file
written here round-trips through the corresponding reader.
"""

import datetime

from .simulate import ClickRecord, ExperimentConfig

FMT = "%.12g"


class ConfigError(ValueError):
    """Malformed config or data file."""


def fmt(x) -> str:
    return FMT % x


def manifest_lines(command: str, version: str, **fields) -> list:
    """Commented provenance block embedded at the top of every output file."""
    lines = [
        "# sqclick manifest",
        f"# command = {command}",
        f"# version = {version}",
    ]
    for key, value in fields.items():
        lines.append(f"# {key} = {value}")
    lines.append(
        "# created = "
        + datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    )
    return lines


def read_key_values(path) -> dict:
    """Parse a 'key = value' file; '#' starts a comment, blank lines ignored."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def _parse_float(mapping, key, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    try:
        return float(mapping[key])
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': {mapping[key]!r} is not a number") from exc


def _parse_float_list(text, where):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{where}: {text!r} is not a list of numbers") from exc


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed key-value pairs.

    Required keys: rep_rate_hz, duration_s, transmittances, eta_apd.
    Optional: dark_rate_hz, t_uncertainty, eta_rel_uncertainty (default 0).
    """
    if "transmittances" not in mapping:
        raise ConfigError("missing required config key 'transmittances'")
    try:
        return ExperimentConfig(
            rep_rate=_parse_float(mapping, "rep_rate_hz"),
            duration=_parse_float(mapping, "duration_s"),
            transmittances=tuple(
                _parse_float_list(mapping["transmittances"], "transmittances")
            ),
            eta_apd=_parse_float(mapping, "eta_apd"),
            dark_rate=_parse_float(mapping, "dark_rate_hz", 0.0),
            t_uncertainty=_parse_float(mapping, "t_uncertainty", 0.0),
            eta_rel_uncertainty=_parse_float(mapping, "eta_rel_uncertainty", 0.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(read_key_values(path))


def parse_states(text: str) -> list:
    """Parse 'trace,det; trace,det; ...' into (trace, det) pairs."""
    states = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        values = _parse_float_list(chunk, "states")
        if len(values) != 2:
            raise ConfigError(f"state {chunk!r} must be a 'trace,det' pair")
        states.append((values[0], values[1]))
    if not states:
        raise ConfigError("states list is empty")
    return states


def write_click_records(fh, records, manifest: list):
    for line in manifest:
        fh.write(line + "\n")
    fh.write("t_nominal,trials,clicks,dark_subtracted\n")
    for r in records:
        fh.write(
            f"{fmt(r.t_nominal)},{r.trials},{r.clicks},{int(r.dark_subtracted)}\n"
        )


def read_click_records(path) -> list:
    """Read a click table; comment lines and the header row are skipped."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("t_nominal"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ConfigError(f"{path}:{lineno}: expected 4 comma-separated fields")
            try:
                records.append(
                    ClickRecord(
                        t_nominal=float(parts[0]),
                        trials=int(parts[1]),
                        clicks=int(parts[2]),
                        dark_subtracted=bool(int(parts[3])),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not records:
        raise ConfigError(f"{path}: no click records found")
    return records


def estimate_lines(est) -> list:
    """Serialize an Estimate as 'key = value' lines."""
    return [
        f"trace = {fmt(est.trace)}",
        f"det = {fmt(est.det)}",
        f"det_reliable = {'true' if est.det_reliable else 'false'}",
        f"vmin = {fmt(est.vmin)}",
        f"vmax = {fmt(est.vmax)}",
        f"purity = {fmt(est.purity)}",
        f"g_max_bound = {fmt(est.g_max_bound)}",
        f"h_max_bound = {fmt(est.h_max_bound)}",
        f"log_likelihood_at_max = {fmt(est.log_likelihood_at_max)}",
    ]


SWEEP_HEADER = (
    "trace_true,det_true,eta,n_runs,sigma_trace,sigma_det,"
    "mean_trace_est,mean_det_est,fraction_det_reliable"
)


def sweep_row(res) -> str:
    return ",".join(
        [
            fmt(res.trace_true),
            fmt(res.det_true),
            fmt(res.eta),
            str(res.n_runs),
            fmt(res.sigma_trace),
            fmt(res.sigma_det),
            fmt(res.mean_trace_est),
            fmt(res.mean_det_est),
            fmt(res.fraction_det_reliable),
        ]
    )


def write_sweep(fh, results, manifest: list):
    for line in manifest:
        fh.write(line + "\n")
    fh.write(SWEEP_HEADER + "\n")
    for res in results:
        fh.write(sweep_row(res) + "\n")


RUNS_HEADER = (
    "trace_true,det_true,eta,run_index,trace_est,det_est,det_reliable,"
    "eta_assumed,log_likelihood_at_max"
)


def write_run_details(fh, results, manifest: list):
    """Per-run artifacts of each ensemble, for post-hoc recomputation."""
    for line in manifest:
        fh.write(line + "\n")
    fh.write(RUNS_HEADER + "\n")
    for res in results:
        for run in res.runs:
            fh.write(
                ",".join(
                    [
                        fmt(res.trace_true),
                        fmt(res.det_true),
                        fmt(res.eta),
                        str(run.index),
                        fmt(run.trace_est),
                        fmt(run.det_est),
                        str(int(run.det_reliable)),
                        fmt(run.eta_assumed),
                        fmt(run.log_likelihood_at_max),
                    ]
                )
                + "\n"
            )


def read_mode_samples(path) -> list:
    """Read (eff_t, p[, sigma_p]) rows for the mode-count diagnostic."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("eff_t"):
                continue
            parts = [tok for tok in line.replace(",", " ").split() if tok]
            if len(parts) not in (2, 3):
                raise ConfigError(
                    f"{path}:{lineno}: expected 'eff_t p [sigma_p]', got {raw!r}"
                )
            try:
                samples.append(tuple(float(tok) for tok in parts))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    if not samples:
        raise ConfigError(f"{path}: no samples found")
    return samples
