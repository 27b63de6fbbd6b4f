#!/usr/bin/env python3
"""Validates TOML documents against the JSON schemas in crates/edgeplan/schemas/.

Usage: check_schemas.py [FILE ...]; defaults to the bundled data directory.
"""

import json
import sys
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import jsonschema

ROOT = Path(__file__).resolve().parent.parent / "crates" / "edgeplan"
BY_TAG = {
    "edgeplan.model/1": "model_graph",
    "edgeplan.env/1": "env",
    "edgeplan.qoe/1": "qoe",
    "edgeplan.trace/1": "trace",
    "edgeplan.plan/1": "plan",
}


def main(argv):
    files = [Path(a) for a in argv] or sorted((ROOT / "data").glob("*.toml"))
    bad = 0
    for path in files:
        doc = tomllib.loads(path.read_text())
        name = BY_TAG.get(doc.get("schema"))
        if name is None:
            print(f"skip {path}: no schema for {doc.get('schema')!r}")
            continue
        schema = json.loads((ROOT / "schemas" / f"{name}.schema.json").read_text())
        try:
            jsonschema.validate(doc, schema)
            print(f"ok   {path.name}")
        except jsonschema.ValidationError as e:
            bad += 1
            print(f"FAIL {path.name}: {e.message} at {list(e.absolute_path)}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
