from __future__ import annotations

import random

import pytest

from models.errors import EncodingError
from models.ground import eval_setexpr
from models.logic import (
    FCmp,
    FEq,
    FHasTable,
    FIn,
    FIsEmpty,
    SBind,
    SEmpty,
    SExists,
    SIte,
    SLit,
    SUnion,
    SVar,
    TConst,
    TField,
    TVar,
    conj,
    exists,
    forall,
    fresh_name,
    implies,
    neg,
)
from models.values import Record
from services.encoding import Encoder, check_gks, ground_facts, nnf, prenex, prenex_signature, split_conjuncts
from services.prover import Prover

SCHEMA = {"a": ("f",), "b": ("g",)}
SORTS = {"f": "int", "g": "int"}
ORACLE_CASES = 120

x, y, z = TVar("x"), TVar("y"), TVar("z")


def test_prenex_signature_and_gks():
    formula = forall((x, y), exists((z,), conj(FEq(x, z), FEq(y, z))))
    assert prenex_signature(formula) == "∀∀∃"
    assert check_gks(formula)
    w = TVar("w")
    assert not check_gks(forall((x, y, w), exists((z,), FEq(x, z))))
    assert check_gks(forall((x, y, w), FEq(x, w)))


def test_prenex_pulls_quantifiers_left_to_right():
    formula = conj(forall((x,), FHasTable(x, "a")), neg(forall((y,), FHasTable(y, "b"))))
    assert prenex_signature(prenex(formula)) == "∀∃"


def test_nested_quantifier_is_not_prenex():
    with pytest.raises(EncodingError) as err:
        prenex_signature(conj(FHasTable(x, "a"), forall((y,), FHasTable(y, "b"))))
    assert err.value.code == "NON-PRENEX"


def test_nnf_pushes_negation_through_implication():
    formula = nnf(neg(implies(FHasTable(x, "a"), FHasTable(x, "b"))))
    assert formula == conj(FHasTable(x, "a"), neg(FHasTable(x, "b")))
    assert split_conjuncts(formula) == [FHasTable(x, "a"), neg(FHasTable(x, "b"))]


def test_iteration_sequence_must_be_distinct_records():
    encoder = Encoder(schema=SCHEMA, field_sorts=SORTS)
    with pytest.raises(EncodingError) as err:
        encoder.encode_set(SVar("D"), (x, x))
    assert err.value.code == "MALFORMED-FREE-VARIABLES"
    with pytest.raises(EncodingError):
        encoder.encode_set(SVar("D"), (TVar("S", "state"),))


def test_encoded_queries_are_prenex(bank):
    prover = Prover.for_program(bank)
    invariant = bank.invariant()
    text, assertions = prover.script([invariant, neg(invariant)], label="self-contradiction")
    assert text.rstrip().endswith("(check-sat)")
    for item in assertions:
        prenex_signature(item)


def test_exists_is_a_functional_total_boolean_relation():
    state, y = TVar("S", "state"), TVar("y")
    closed = FIn(x, SExists(state, FIn(z, SVar("S")), SVar("S")))
    nested = forall((y,), FIn(y, SExists(state, FIn(y, SVar("S")), SVar("S"))))
    for formula in (closed, nested):
        encoder = Encoder(schema=SCHEMA, field_sorts=SORTS)
        encoded = encoder.encode(formula)
        background = encoder.finish()
        (relation,) = [symbol for symbol in encoder.functions.values() if symbol.name.startswith("f_")]
        assert relation.result == "bool"
        assert relation.args[-1] == "state"
        assert all(symbol.result != "state" for symbol in encoder.functions.values())
        for item in background + [encoded]:
            for part in split_conjuncts(nnf(item)):
                assert check_gks(prenex(part)), part


def test_ground_facts_name_every_record():
    records = [Record.make("a", id=1, values={"f": 2}), Record.make("b", id=2, values={"g": 0})]
    facts, constants = ground_facts({"D": records[:1]}, extra=records[1:])
    assert set(constants) == set(records)
    assert len(facts) == 3


# --- oracle: encoded membership against the ground evaluator -----------------


def _universe(rng: random.Random):
    records = []
    for record_id in range(1, rng.randint(1, 4) + 1):
        table = rng.choice(("a", "b"))
        field = SCHEMA[table][0]
        records.append(Record.make(table, id=record_id, txn=rng.randint(0, 1), values={field: rng.randrange(4)}))
    return records


def _filter(rng: random.Random, source):
    var = TVar(fresh_name("x"))
    table = rng.choice(("a", "b"))
    field = SCHEMA[table][0]
    op = rng.choice(("<", "<=", ">", ">=", "!="))
    cond = FCmp(op, TField(var, field), TConst(rng.randrange(4)))
    return SLit(var, conj(FIn(var, source), FHasTable(var, table), cond))


def _random_set(rng: random.Random, depth: int):
    leaf = rng.choice((SVar("D"), SVar("D2"), SVar("D"), SEmpty()))
    if depth == 0:
        return leaf
    kind = rng.choice(("leaf", "filter", "union", "ite", "join", "guarded"))
    if kind == "filter":
        return _filter(rng, _random_set(rng, depth - 1))
    if kind == "union":
        return SUnion(_random_set(rng, depth - 1), _random_set(rng, depth - 1))
    if kind == "ite":
        return SIte(FIsEmpty(_random_set(rng, depth - 1)), _random_set(rng, depth - 1), _random_set(rng, depth - 1))
    if kind == "join":
        outer, inner = TVar(fresh_name("y")), TVar(fresh_name("x"))
        body = SLit(inner, conj(FIn(inner, SVar("D2")), FEq(TField(inner, "txn"), TField(outer, "txn"))))
        return SBind(_random_set(rng, depth - 1), outer, body)
    if kind == "guarded":
        outer, single = TVar(fresh_name("y")), TVar(fresh_name("x"))
        keep = SLit(single, FEq(single, outer))
        return SBind(_random_set(rng, depth - 1), outer, SIte(FHasTable(outer, "a"), keep, SEmpty()))
    return leaf


@pytest.mark.solver
def test_membership_encoding_matches_ground_evaluation(solver_config):
    rng = random.Random(5)
    prover = Prover(solver_config, schema=SCHEMA, field_sorts=SORTS)
    for case in range(ORACLE_CASES):
        universe = _universe(rng)
        states = {
            "D": [record for record in universe if rng.random() < 0.6],
            "D2": [record for record in universe if rng.random() < 0.6],
        }
        source = _random_set(rng, rng.randint(1, 3))
        expected = eval_setexpr(source, {name: frozenset(items) for name, items in states.items()}, universe=universe)
        facts, constants = ground_facts(states, extra=universe)
        claims = [FIn(constants[record], source) if record in expected else neg(FIn(constants[record], source)) for record in universe]
        label = f"oracle-{case}"
        assert prover.satisfiable(facts + claims, label=label) == "sat", (source, states)
        assert prover.valid(facts, conj(*claims), label=label), (source, states, expected)
