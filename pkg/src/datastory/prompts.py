"""Versioned prompt templates with ``{{placeholder}}`` substitution.

Templates ship as package data under ``datastory/prompts/`` and can be
overridden by pointing ``PromptLibrary`` at another directory with the
same file names.
"""
from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import InputError

TEMPLATE_NAMES = (
    "classify",
    "clauses",
    "extract",
    "rewrite",
    "keywords",
    "fields",
)

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


class PromptLibrary:
    def __init__(self, directory: Optional[str | Path] = None):
        self._templates: dict[str, str] = {}
        if directory is not None:
            base = Path(directory)
            for name in TEMPLATE_NAMES:
                path = base / f"{name}.txt"
                if not path.exists():
                    raise InputError(f"prompt template missing: {path}")
                self._templates[name] = path.read_text(encoding="utf-8")
        else:
            pkg = resources.files("datastory") / "prompts"
            for name in TEMPLATE_NAMES:
                self._templates[name] = (pkg / f"{name}.txt").read_text(encoding="utf-8")

    def render(self, name: str, **values: str) -> str:
        if name not in self._templates:
            raise InputError(f"unknown prompt template {name!r}")
        template = self._templates[name]

        def sub(match: re.Match) -> str:
            key = match.group(1)
            if key not in values:
                raise InputError(f"template {name!r} needs placeholder {key!r}")
            return values[key]

        return _PLACEHOLDER.sub(sub, template)
