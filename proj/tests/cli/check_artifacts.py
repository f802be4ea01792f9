#!/usr/bin/env python3
# iccr: cascaded-regression landmark tracking with online model updates
# File: tests/cli/check_artifacts.py
#
# Copyright 2026 The iccr authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Assertions over CLI artifacts, one subcommand per check."""

import argparse
import json
import sys

import jsonschema

TIMING_KEYS = {"timing", "fit_seconds", "update_seconds", "update_timing_ms"}


def load_any(path):
    with open(path) as f:
        if path.endswith(".jsonl"):
            return [json.loads(line) for line in f if line.strip()]
        return json.load(f)


def strip_timing(x):
    if isinstance(x, dict):
        return {k: strip_timing(v) for k, v in x.items() if k not in TIMING_KEYS}
    if isinstance(x, list):
        return [strip_timing(v) for v in x]
    return x


def fail(msg):
    print("FAIL: " + msg)
    sys.exit(1)


def cmd_schema(a):
    with open(a.schema) as f:
        schema = json.load(f)
    docs = load_any(a.file)
    for doc in docs if isinstance(docs, list) else [docs]:
        jsonschema.validate(doc, schema)
    print(f"{a.file}: valid")


def cmd_same(a):
    x, y = strip_timing(load_any(a.a)), strip_timing(load_any(a.b))
    for key in a.ignore or []:
        for doc in (x, y):
            for d in doc if isinstance(doc, list) else [doc]:
                d.pop(key, None)
    if x != y:
        fail(f"{a.a} and {a.b} differ outside timing fields")
    print(f"{a.a} == {a.b} (timing excluded)")


def cmd_zero_stats(a):
    j = load_any(a.file)
    if j["pair_count"] <= 0:
        fail("no pairs")
    worst = max([abs(v) for v in j["mean"]] + [abs(v) for row in j["covariance"] for v in row])
    if worst != 0.0:
        fail(f"static sequence gives nonzero statistics ({worst})")
    print(f"{a.file}: mu and Sigma are exactly zero over {j['pair_count']} pairs")


def cmd_get(a):
    j = load_any(a.file)
    for part in a.path.split("."):
        j = j[part]
    print(json.dumps(j) if isinstance(j, (dict, list)) else j)


def cmd_stdout_json(a):
    text = sys.stdin.read()
    try:
        json.loads(text)
    except ValueError as e:
        fail(f"stdout is not a single JSON document: {e}")
    print("stdout is JSON")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("schema")
    p.add_argument("schema")
    p.add_argument("file")
    p.set_defaults(fn=cmd_schema)
    p = sub.add_parser("same")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--ignore", action="append")
    p.set_defaults(fn=cmd_same)
    p = sub.add_parser("zero-stats")
    p.add_argument("file")
    p.set_defaults(fn=cmd_zero_stats)
    p = sub.add_parser("get")
    p.add_argument("file")
    p.add_argument("path")
    p.set_defaults(fn=cmd_get)
    p = sub.add_parser("stdout-json")
    p.set_defaults(fn=cmd_stdout_json)
    a = ap.parse_args()
    a.fn(a)


if __name__ == "__main__":
    main()
