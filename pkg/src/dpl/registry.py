"""Identity catalog: DSL corpus loading and programmatic access.

Identities live as <id>.dpl (DSL text) next to <id>.meta.json (reference
label, tags, tolerance, recommended strategy, default parameter battery).
DPL_IDENTITY_DIR overrides the bundled corpus directory.
"""

from __future__ import annotations

import difflib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .dsl import parse_identity
from .termlang import IdentitySpec


class RegistryError(KeyError):
    pass


@dataclass(frozen=True)
class RegistryEntry:
    id: str
    paper_ref: str
    spec: IdentitySpec
    tags: tuple
    tolerance: str
    strategy: str
    battery: tuple          # of dict[param name -> value string]
    direct_tolerance: str | None = None
    derived_from: dict | None = None
    notes: str = ""


# The partial-fraction derivation pairs accepted by check_derivation.
DERIVATION_PAIRS = (
    ("thm-2.1", "thm-1.1"),
    ("prop-4.3", "thm-4.1"),
    ("prop-4.5", "thm-4.4"),
)


def identity_dir() -> Path:
    env = os.environ.get("DPL_IDENTITY_DIR")
    if env:
        return Path(env)
    return Path(__file__).parent / "identities"


_cache_lock = threading.Lock()
_cache: dict = {}


def _load_all() -> dict:
    base = identity_dir()
    key = str(base)
    with _cache_lock:
        if key in _cache:
            return _cache[key]
        entries = {}
        for meta_path in sorted(base.glob("*.meta.json")):
            meta = json.loads(meta_path.read_text())
            ident = meta["id"]
            dpl_path = base / f"{ident}.dpl"
            spec = parse_identity(dpl_path.read_text())
            if spec.id != ident:
                raise RegistryError(f"{dpl_path.name} declares id {spec.id!r}")
            entries[ident] = RegistryEntry(
                id=ident,
                paper_ref=meta.get("paper_ref", ""),
                spec=spec,
                tags=tuple(meta.get("tags", ())),
                tolerance=meta.get("tolerance", "1e-8"),
                strategy=meta.get("strategy", "auto"),
                battery=tuple(meta.get("battery", ({},))),
                direct_tolerance=meta.get("direct_tolerance"),
                derived_from=meta.get("derived_from"),
                notes=meta.get("notes", ""),
            )
        _cache[key] = entries
        return entries


def registry_get(ident: str) -> RegistryEntry:
    entries = _load_all()
    if ident not in entries:
        near = difflib.get_close_matches(ident, entries, n=3, cutoff=0.4)
        hint = f"; near matches: {', '.join(near)}" if near else ""
        raise RegistryError(f"unknown identity {ident!r}{hint}")
    return entries[ident]


def registry_list(tag: str | None = None):
    """(id, paper_ref, parameter summary) triples in lexicographic id order."""
    out = []
    for ident in sorted(_load_all()):
        entry = _load_all()[ident]
        if tag is not None and tag not in entry.tags:
            continue
        summary = ", ".join(f"{p.name}:{p.kind}" for p in entry.spec.params) or "none"
        out.append((ident, entry.paper_ref, summary))
    return out


def registry_ids():
    return sorted(_load_all())
