import json

import pytest

from hiertune.errors import SpaceError
from hiertune.space import (
    HyperParameterSpec,
    SearchSpace,
    canonical_key,
    sample_uniform_assignment,
    validate_assignment,
)


def svc_like_space() -> SearchSpace:
    return SearchSpace(
        params=(
            HyperParameterSpec.real("C", 1e-2, 1e13, scale="log10"),
            HyperParameterSpec.real("gamma", 0.0, 1.0),
            HyperParameterSpec.nominal("kernel", ["poly", "linear", "rbf", "sigmoid"]),
        ),
        objective=("C", "gamma", "kernel"),
    )


class TestSpecValidation:
    def test_real_bounds_must_be_ordered(self):
        with pytest.raises(SpaceError):
            HyperParameterSpec.real("a", 1.0, 1.0)

    def test_log_scale_needs_positive_lo(self):
        with pytest.raises(SpaceError):
            HyperParameterSpec.real("a", 0.0, 1.0, scale="log10")
        HyperParameterSpec.real("a", 1e-9, 1.0, scale="log10")

    def test_nominal_rejects_empty_and_duplicates(self):
        with pytest.raises(SpaceError):
            HyperParameterSpec.nominal("k", [])
        with pytest.raises(SpaceError):
            HyperParameterSpec.nominal("k", ["rbf", "rbf"])

    def test_unknown_kind_and_scale(self):
        with pytest.raises(SpaceError):
            HyperParameterSpec(name="a", kind="integer")
        with pytest.raises(SpaceError):
            HyperParameterSpec.real("a", 0.0, 1.0, scale="ln")


class TestSearchSpace:
    def test_objective_and_fixed_must_partition(self):
        p = HyperParameterSpec.real("a", 0.0, 1.0)
        q = HyperParameterSpec.real("b", 0.0, 1.0)
        with pytest.raises(SpaceError):
            SearchSpace(params=(p, q), objective=("a",))
        with pytest.raises(SpaceError):
            SearchSpace(params=(p, q), objective=("a", "b"), fixed={"b": 0.5})
        SearchSpace(params=(p, q), objective=("a",), fixed={"b": 0.5})

    def test_fixed_value_must_lie_in_domain(self):
        p = HyperParameterSpec.real("a", 0.0, 1.0)
        q = HyperParameterSpec.nominal("k", ["x", "y"])
        with pytest.raises(SpaceError):
            SearchSpace(params=(p, q), objective=("a",), fixed={"k": "z"})

    def test_round_trip_document_is_identical(self):
        space = SearchSpace(
            params=(
                HyperParameterSpec.real("C", 1e-2, 1e13, scale="log10"),
                HyperParameterSpec.nominal("kernel", ["poly", "rbf"]),
                HyperParameterSpec.real("gamma", 0.0, 1.0),
            ),
            objective=("C", "kernel"),
            fixed={"gamma": 0.25},
        )
        doc = space.to_document()
        again = SearchSpace.from_document(json.loads(json.dumps(doc))).to_document()
        assert again == doc

    def test_declaration_order_is_preserved(self):
        space = svc_like_space()
        assert space.objective_in_declaration_order == ("C", "gamma", "kernel")


class TestValidateAssignment:
    def test_in_range_value_is_ok(self):
        space = SearchSpace(
            params=(HyperParameterSpec.real("C", 0.01, 1e13, scale="log10"),), objective=("C",)
        )
        assert validate_assignment(space, {"C": 1.0}) == []

    def test_label_absent_from_domain(self):
        space = SearchSpace(
            params=(HyperParameterSpec.nominal("kernel", ["poly", "linear", "rbf", "sigmoid"]),),
            objective=("kernel",),
        )
        violations = validate_assignment(space, {"kernel": "cubic"})
        assert [(v.name, v.reason) for v in violations] == [("kernel", "not-in-domain")]

    def test_incomplete_cover_reports_missing(self):
        space = svc_like_space()
        violations = validate_assignment(space, {"C": 1.0})
        assert {(v.name, v.reason) for v in violations} == {
            ("gamma", "missing"),
            ("kernel", "missing"),
        }

    def test_unexpected_name_is_reported(self):
        space = svc_like_space()
        violations = validate_assignment(space, {"C": 1.0, "gamma": 0.5, "kernel": "rbf", "zeta": 1})
        assert [(v.name, v.reason) for v in violations] == [("zeta", "unexpected")]


class TestCanonicalKey:
    def test_order_independence(self):
        assert canonical_key({"b": 1.0, "a": 2.0}) == canonical_key({"a": 2.0, "b": 1.0})

    def test_fixed_precision_merges_nearby_reals(self):
        assert canonical_key({"a": 2.0}) == canonical_key({"a": 2.0000000000001})

    def test_distinct_values_distinct_keys(self):
        assert canonical_key({"a": 2.0}) != canonical_key({"a": 2.1})

    def test_string_and_real_values_do_not_collide(self):
        assert canonical_key({"a": "2"}) != canonical_key({"a": 2.0})

    def test_pure_function(self):
        a = {"C": 3.14159, "kernel": "rbf", "gamma": 0.125}
        keys = {canonical_key(a) for _ in range(10_000)}
        assert len(keys) == 1


def test_uniform_sampling_respects_domains_and_fixed():
    import random

    space = SearchSpace(
        params=(
            HyperParameterSpec.real("C", 1e-2, 1e13, scale="log10"),
            HyperParameterSpec.nominal("kernel", ["poly", "rbf"]),
            HyperParameterSpec.real("gamma", 0.0, 1.0),
        ),
        objective=("C", "kernel"),
        fixed={"gamma": 0.25},
    )
    rng = random.Random(0)
    for _ in range(200):
        a = sample_uniform_assignment(space, rng)
        assert validate_assignment(space, a) == []
        assert a["gamma"] == 0.25
