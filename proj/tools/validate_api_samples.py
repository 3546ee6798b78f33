#!/usr/bin/env python3
"""Validate dumped API payloads against schema/api.schema.json.

Each sample file is named <def>.<n>.json where <def> names an entry of $defs.
"""
import json
import pathlib
import sys

import jsonschema


def main() -> int:
    schema_path, sample_dir = map(pathlib.Path, sys.argv[1:3])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    files = sorted(sample_dir.glob("*.json"))
    if not files:
        print("no samples found", file=sys.stderr)
        return 1
    failures = 0
    for f in files:
        kind = f.name.split(".")[0]
        if kind == "session":
            kind = "session_or_computing"
        if kind not in schema["$defs"]:
            print(f"{f.name}: unknown payload kind", file=sys.stderr)
            failures += 1
            continue
        sub = {"$schema": schema["$schema"], "$defs": schema["$defs"], "$ref": f"#/$defs/{kind}"}
        errors = list(jsonschema.Draft202012Validator(sub).iter_errors(json.loads(f.read_text())))
        for e in errors:
            print(f"{f.name}: {e.message} at {list(e.absolute_path)}", file=sys.stderr)
        failures += bool(errors)
    print(f"{len(files) - failures}/{len(files)} samples valid")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
