"""Registry catalog checks: corpus integrity, access, metadata."""

import pytest

from dpl.dsl import parse_identity, render_identity
from dpl.registry import (
    DERIVATION_PAIRS,
    RegistryError,
    registry_get,
    registry_ids,
    registry_list,
)

NORMATIVE_IDS = [
    "aux-phi", "aux-stuffle", "cor-1.2", "cor-1.3", "cor-1.5-L", "cor-1.5-sfnu",
    "cor-4.2", "euler-sum", "example-n1", "example-n3", "gkz-even", "gkz-odd",
    "nakamura-1", "nakamura-2", "ohno-zudilin", "prop-3.1", "prop-4.3", "prop-4.5",
    "rem-3.4-akf2", "rem-3.4-higher", "thm-1.1", "thm-1.4", "thm-2.1", "thm-4.1",
    "thm-4.4",
]


def test_registry_contains_every_normative_id():
    assert registry_ids() == NORMATIVE_IDS
    assert len(registry_list()) == len(NORMATIVE_IDS)


def test_registry_get_known_entries():
    assert registry_get("euler-sum").spec.param("l").minimum == 3
    entry = registry_get("thm-4.4")
    names = {p.name: p for p in entry.spec.params}
    assert names["k"].minimum == 1 and names["N"].odd and "x" in names


def test_registry_get_unknown_id_suggests():
    with pytest.raises(RegistryError) as err:
        registry_get("thm-9.9")
    assert "near matches" in str(err.value)


def test_registry_list_filters():
    char_ids = [row[0] for row in registry_list("character")]
    assert char_ids == ["cor-1.3", "cor-1.5-L"]
    cong_ids = [row[0] for row in registry_list("congruence")]
    assert set(cong_ids) >= {"thm-4.1", "cor-4.2", "prop-4.3", "prop-4.5", "thm-4.4"}
    assert [r[0] for r in registry_list()] == sorted(r[0] for r in registry_list())


def test_every_entry_parses_and_roundtrips():
    for ident in registry_ids():
        spec = registry_get(ident).spec
        assert parse_identity(render_identity(spec)) == spec


def test_derivation_notes_recorded():
    for ident, parent in [("cor-1.2", "thm-1.1"), ("cor-4.2", "thm-4.1"),
                          ("thm-1.1", "thm-2.1"), ("thm-4.1", "prop-4.3")]:
        note = registry_get(ident).derived_from
        assert note and note["parent"] == parent and note["specialization"]


def test_derivation_pairs_registered():
    assert ("thm-2.1", "thm-1.1") in DERIVATION_PAIRS
    assert ("prop-4.3", "thm-4.1") in DERIVATION_PAIRS


def test_batteries_bind_cleanly():
    from dpl.evaluator import IdentityParams

    for ident in registry_ids():
        entry = registry_get(ident)
        assert entry.battery, ident
        for point in entry.battery[:3]:
            IdentityParams.bind(entry.spec, point)


def test_identity_dir_override(tmp_path, monkeypatch):
    (tmp_path / "toy.dpl").write_text(
        'identity "toy" params (k: int >= 1) {\n'
        "  lhs: 1 * [ single(n>=1) 1 / (n^(k+2)) ];\n"
        "  rhs: 1 * [ single(n>=1) 1 / (n^(k+2)) ];\n}\n")
    (tmp_path / "toy.meta.json").write_text(
        '{"id": "toy", "paper_ref": "toy", "tags": [], "tolerance": "1e-20",'
        ' "strategy": "auto", "battery": [{"k": "1"}]}\n')
    monkeypatch.setenv("DPL_IDENTITY_DIR", str(tmp_path))
    assert registry_ids() == ["toy"]
    assert registry_get("toy").tolerance == "1e-20"


def test_expanded_groups_canonicalize_idempotently():
    from dpl.evaluator import IdentityParams
    from dpl.termlang import canonicalize, expand_group

    for ident in registry_ids():
        entry = registry_get(ident)
        point = entry.battery[0]
        p = IdentityParams.bind(entry.spec, point)
        for group in entry.spec.lhs + entry.spec.rhs:
            terms = expand_group(group, p.env)
            once = canonicalize(terms)
            assert canonicalize(once) == once
