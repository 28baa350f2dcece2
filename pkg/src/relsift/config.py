"""Run configuration: flat key-value sections in plain text.

The format is `[section]` headers with `key = value` lines. Parsing is
strict: unknown sections or keys are errors, and a parsed config serializes
back to a canonical byte-identical form (all keys present, fixed order, one
space around `=`).
"""

from pathlib import Path

from .graph import GraphError, RelationSpec, SyntheticSpec
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def _parse_bool(text, key):
    if text in ("true", "false"):
        return text == "true"
    raise ConfigError(f"{key}: expected true or false, got {text!r}")


def _parse_float_list(text, key):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}")


def _parse_int_list(text, key):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}")


def _parse_str_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


# (key, default, parser) per section; serialization follows this order
_DATA_KEYS = [
    ("source", "synthetic", None),
    ("nodes", 1000, int),
    ("classes", 2, int),
    ("feature_dim", 8, int),
    ("class_balance", [0.6, 0.4], _parse_float_list),
    ("edges", [2500, 6000], _parse_int_list),
    ("homophily", [0.9, 0.1], _parse_float_list),
    ("relation_names", [], _parse_str_list),
    ("camouflage_rate", 0.2, float),
    ("class_separation", 6.0, float),
    ("feature_noise", 0.5, float),
    ("train_ratio", 0.4, float),
    ("val_ratio", 0.1, float),
    ("features", "", None),
    ("labels", "", None),
    ("relations", [], _parse_str_list),
    ("train_split", "", None),
    ("val_split", "", None),
    ("test_split", "", None),
]

_TRAIN_KEYS = [
    ("epochs", 100, int),
    ("batch_size", 256, int),
    ("learning_rate", 0.01, float),
    ("lambda_sim", 2.0, float),
    ("lambda_reg", 0.001, float),
    ("undersample_ratio", 1.0, float),
    ("alpha", 10, int),
    ("tau", 1.0, float),
    ("deep_switching_number", 3, int),
    ("backtracking", True, _parse_bool),
    ("policy", "ac", None),
    ("action_space", "discrete", None),
    ("variant", "threshold", None),
    ("layers", 1, int),
    ("embedding_dim", 64, int),
    ("mode", "transductive", None),
    ("recursion", True, _parse_bool),
    ("threshold_init", 0.5, float),
    ("rl_learning_rate", 0.05, float),
    ("rl_gamma", 0.95, float),
    ("seed", 0, int),
]

_OUTPUT_KEYS = [
    ("dir", "out", None),
    ("trace", "trace.jsonl", None),
    ("verbosity", 1, int),
]

_SECTIONS = {"data": _DATA_KEYS, "train": _TRAIN_KEYS, "output": _OUTPUT_KEYS}


class RunConfig:
    """Typed view over the three config sections."""

    def __init__(self, values=None):
        self.values = {section: {key: default for key, default, _ in keys}
                       for section, keys in _SECTIONS.items()}
        if values:
            for section, kv in values.items():
                for key, value in kv.items():
                    self.set(section, key, value, parse=False)

    def get(self, section, key):
        try:
            return self.values[section][key]
        except KeyError:
            raise ConfigError(f"unknown config key {section}.{key}")

    def set(self, section, key, value, parse=True):
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        spec = {k: parser for k, _, parser in _SECTIONS[section]}
        if key not in spec:
            raise ConfigError(f"unknown config key {section}.{key}")
        if parse and isinstance(value, str):
            parser = spec[key]
            if parser is not None:
                value = parser(value, f"{section}.{key}") if parser in (
                    _parse_bool, _parse_float_list, _parse_int_list) else parser(value)
        self.values[section][key] = value

    def serialize(self) -> str:
        lines = []
        for section, keys in _SECTIONS.items():
            lines.append(f"[{section}]")
            for key, _, _ in keys:
                lines.append(f"{key} = {_fmt(self.values[section][key])}")
            lines.append("")
        return "\n".join(lines)

    # -- domain objects -----------------------------------------------------

    def synthetic_spec(self) -> SyntheticSpec:
        d = self.values["data"]
        if d["source"] != "synthetic":
            raise ConfigError("data.source is not synthetic")
        edges, homophily = d["edges"], d["homophily"]
        if len(edges) != len(homophily):
            raise ConfigError("data.edges and data.homophily lengths differ")
        names = d["relation_names"] or [f"r{i}" for i in range(len(edges))]
        if len(names) != len(edges):
            raise ConfigError("data.relation_names length does not match edges")
        relations = [RelationSpec(edge_count=e, label_homophily=h, name=nm)
                     for e, h, nm in zip(edges, homophily, names)]
        return SyntheticSpec(
            num_nodes=d["nodes"], num_classes=d["classes"],
            feature_dim=d["feature_dim"], class_balance=tuple(d["class_balance"]),
            relations=relations, camouflage_rate=d["camouflage_rate"],
            class_separation=d["class_separation"],
            feature_noise=d["feature_noise"], train_ratio=d["train_ratio"],
            val_ratio=d["val_ratio"], seed=self.values["train"]["seed"],
        )

    def train_config(self) -> TrainConfig:
        t = self.values["train"]
        cfg = TrainConfig(**{k: t[k] for k, _, _ in _TRAIN_KEYS})
        try:
            cfg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc))
        return cfg

    def load_graph(self):
        from . import graph as graph_mod
        d = self.values["data"]
        if d["source"] == "synthetic":
            try:
                return graph_mod.generate_synthetic(self.synthetic_spec())
            except GraphError as exc:
                raise ConfigError(str(exc))
        if d["source"] != "files":
            raise ConfigError(f"data.source must be synthetic or files, got {d['source']!r}")
        if not d["features"] or not d["labels"] or not d["relations"]:
            raise ConfigError("data.source = files needs features, labels and relations")
        split_paths = None
        if d["train_split"]:
            split_paths = (d["train_split"], d["val_split"], d["test_split"])
        return graph_mod.load_graph(
            d["features"], d["labels"], d["relations"], split_paths=split_paths,
            split_ratios=(d["train_ratio"], d["val_ratio"],
                          self.values["train"]["seed"]),
        )


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        cfg.set(section, key.strip(), value.strip())
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
