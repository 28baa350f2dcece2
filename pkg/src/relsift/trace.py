"""Line-delimited trace records: one JSON object per epoch plus one final
report line. The schema is versioned and fixed so external tools can plot
thresholds, losses, and scores without knowing the trainer.
"""

import hashlib
import json
from pathlib import Path

SCHEMA_VERSION = 1

EPOCH_FIELDS = {"schema", "epoch", "trees", "loss_gnn", "loss_sim",
                "loss_total", "val_auc", "aborted", "wall_ms"}
TREE_FIELDS = {"layer", "relation", "threshold", "depth", "state", "reward",
               "terminated", "backtracked", "converged"}
FINAL_FIELDS = {"schema", "final", "thresholds", "relation_names", "report",
                "positive_class"}

# wall-clock timing is not reproducible and is excluded from hashing
VOLATILE_FIELDS = ("wall_ms",)


class TraceError(ValueError):
    pass


def dump_line(record) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False)


def final_record(report, thresholds, relation_names, positive_class):
    return {
        "schema": SCHEMA_VERSION,
        "final": True,
        "thresholds": [[float(p) for p in row] for row in thresholds],
        "relation_names": list(relation_names),
        "report": report.to_dict(),
        "positive_class": int(positive_class),
    }


def validate_record(record):
    if not isinstance(record, dict) or "schema" not in record:
        raise TraceError("record is not an object with a schema field")
    if record["schema"] != SCHEMA_VERSION:
        raise TraceError(f"unsupported trace schema {record['schema']!r}")
    if record.get("final"):
        if set(record) != FINAL_FIELDS:
            raise TraceError(f"final record fields {sorted(record)} do not match schema")
        return record
    if set(record) != EPOCH_FIELDS:
        raise TraceError(f"epoch record fields {sorted(record)} do not match schema")
    for tree in record["trees"]:
        if set(tree) != TREE_FIELDS:
            raise TraceError(f"tree fields {sorted(tree)} do not match schema")
    return record


def write_trace(path, records) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for record in records:
            fh.write(dump_line(record) + "\n")
    return path


def read_trace(path):
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}")
        records.append(validate_record(record))
    return records


def canonical_trace_hash(path) -> str:
    """sha256 over the trace with volatile timing fields stripped, so equal
    (config, seed) runs hash equal."""
    digest = hashlib.sha256()
    for record in read_trace(path):
        record = {k: v for k, v in record.items() if k not in VOLATILE_FIELDS}
        digest.update(dump_line(record).encode())
        digest.update(b"\n")
    return digest.hexdigest()
