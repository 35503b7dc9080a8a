"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rcl.cli import _json_text, write_atomic  # noqa: E402

REPO = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def parse_config(cls, description: str):
    """Build an argparse parser from a config dataclass and return an instance."""
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, (list, tuple)):
            kind = type(default[0]) if default else float
            p.add_argument(f"--{f.name.replace('_', '-')}", type=lambda s, k=kind: [k(v) for v in s.split(",")],
                           default=list(default))
        else:
            p.add_argument(f"--{f.name.replace('_', '-')}", type=type(default), default=default)
    return cls(**vars(p.parse_args()))


def dump(path: str, payload: dict):
    write_atomic(path, _json_text(payload) + "\n")
    print(f"wrote {os.path.relpath(path, REPO)}")


def load(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
