import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfpump.fp import run_fp
from sfpump.instance import (InstanceFormatError, Kind, MipInstance, check, dumps, generate,
                             load, loads, round_half_away, round_partial, save)


def test_seed_determines_instance():
    assert generate(42, 5, 6) == generate(42, 5, 6)
    assert generate(42, 5, 6) != generate(43, 5, 6)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 7), m=st.integers(1, 9),
       kind=st.sampled_from(["IP", "MIP"]))
def test_generator_invariants(seed, n, m, kind):
    inst = generate(seed, n, m, kind)
    assert inst.A.shape == (m, n)
    assert np.all(np.abs(inst.A) <= 10) and np.all(np.abs(inst.c) <= 10)
    assert np.any(inst.b < 0)
    w = inst.witness
    assert np.all((w >= 1) & (w <= 10))
    eps = inst.b - inst.A @ w
    assert np.all((eps >= 1) & (eps <= 10))
    assert check(inst, w).feasible
    if kind == "IP":
        assert inst.int_mask.all()
    else:
        assert inst.int_mask.any()


def test_arrays_are_read_only():
    inst = generate(1, 3, 3)
    with pytest.raises(ValueError):
        inst.A[0, 0] = 1


@pytest.mark.parametrize("x,want", [(0.5, 1.0), (-0.5, -1.0), (1.5, 2.0), (2.5, 3.0),
                                    (-2.5, -3.0), (0.49, 0.0), (3.0, 3.0)])
def test_round_half_away(x, want):
    assert round_half_away(np.array([x]))[0] == want


def test_round_partial_only_touches_mask():
    x = np.array([1.4, 2.6, -0.5])
    np.testing.assert_array_equal(round_partial(x, np.array([True, False, True])), [1.0, 2.6, -1.0])


def test_check_reports_both_violations():
    inst = generate(7, 5, 6, "MIP")
    x = inst.witness.astype(float) + 0.3
    rep = check(inst, x)
    assert rep.integrality_violation == pytest.approx(0.3)
    assert not rep.feasible


def test_text_round_trip(tmp_path):
    for kind in Kind:
        inst = generate(99, 4, 5, kind)
        assert loads(dumps(inst)) == inst
        save(inst, tmp_path / "a.mip")
        assert load(tmp_path / "a.mip") == inst
        assert dumps(load(tmp_path / "a.mip")) == dumps(inst)


@pytest.mark.parametrize("mutate,needle", [
    (lambda t: t.replace("version: 1", "version: 9"), "version"),
    (lambda t: t + "bogus: 1\n", "bogus"),
    (lambda t: "\n".join(l for l in t.splitlines() if not l.startswith("c:")), "c"),
    (lambda t: t.replace("n: 2", "n: 3"), "A"),
    (lambda t: t.replace("b: ", "b: x"), "b"),
])
def test_malformed_files_are_rejected(mutate, needle):
    text = dumps(generate(5, 2, 3))
    with pytest.raises(InstanceFormatError, match=needle):
        loads(mutate(text))


HAND_WRITTEN = """\
version: 1
kind: IP
n: 2
m: 2
A: 1 1 | -1 0
b: 3 -1
c: 1 0
int_mask: 1 1
lb: -20
ub: 20
seed: 0
witness: none
"""


def test_hand_written_file_matches_programmatic_twin():
    parsed = loads(HAND_WRITTEN)
    twin = MipInstance(A=np.array([[1, 1], [-1, 0]]), b=np.array([3, -1]), c=np.array([1, 0]),
                       int_mask=np.array([True, True]), lower_bound=-20, upper_bound=20,
                       seed=0, kind=Kind.IP, witness=None)
    assert parsed == twin
    a, b = run_fp(parsed, rng_seed=4), run_fp(twin, rng_seed=4)
    assert [r.to_json() for r in a.trace] == [r.to_json() for r in b.trace]


def test_row_permutation_keeps_feasibility():
    inst = generate(17, 5, 6)
    perm = np.random.default_rng(0).permutation(inst.m)
    twin = MipInstance(A=inst.A[perm], b=inst.b[perm], c=inst.c, int_mask=inst.int_mask,
                       lower_bound=inst.lower_bound, upper_bound=inst.upper_bound,
                       seed=inst.seed, kind=inst.kind, witness=inst.witness)
    res = run_fp(inst, rng_seed=1)
    if res.success:
        assert check(twin, res.solution).feasible
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.integers(-20, 21, inst.n).astype(float)
        assert check(inst, x).feasible == check(twin, x).feasible
