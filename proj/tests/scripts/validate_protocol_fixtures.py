#!/usr/bin/env python3
# Copyright 2026 The segbench Authors
# SPDX-License-Identifier: Apache-2.0
"""Validates the golden protocol fixtures against the shipped JSON schema."""

import json
import sys
from pathlib import Path

import jsonschema


def main(schema_path: Path, fixture_dir: Path) -> int:
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    index = json.loads((fixture_dir / "index.json").read_text())
    failures = 0
    for entry in index["fixtures"]:
        doc = json.loads((fixture_dir / entry["file"]).read_text())
        sub = {"$ref": f"#/$defs/{entry['def']}", "$defs": schema["$defs"]}
        errors = list(jsonschema.Draft202012Validator(sub).iter_errors(doc))
        ok = (not errors) == entry["valid"]
        status = "ok" if ok else "MISMATCH"
        detail = "" if not errors else f" ({errors[0].message})"
        print(f"{status:8} {entry['file']} as {entry['def']} expected valid={entry['valid']}{detail}")
        failures += not ok
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]), Path(sys.argv[2])))
