"""Oracle machines: sequential semantics the implementations are held to."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from durables.specmodels import (
    ACK,
    SpecError,
    ec_apply,
    ec_init,
    ecw_apply,
    llsc_apply,
    llsc_init,
    wcas_apply,
    wcas_init,
)

values = st.integers(min_value=0, max_value=7)


# -- W-CAS -------------------------------------------------------------------


def test_wcas_read_write_cas():
    s = wcas_init(0)
    s, r = wcas_apply(s, ("read",))
    assert r == 0
    s, r = wcas_apply(s, ("write", 5))
    assert r == ACK
    s, r = wcas_apply(s, ("cas", 5, 9))
    assert r is True
    s, r = wcas_apply(s, ("cas", 5, 1))
    assert r is False
    _, r = wcas_apply(s, ("read",))
    assert r == 9


def test_wcas_rejects_unknown():
    with pytest.raises(SpecError):
        wcas_apply(wcas_init(0), ("sc", 1))


@given(st.lists(st.one_of(
    st.tuples(st.just("write"), values),
    st.tuples(st.just("cas"), values, values),
    st.tuples(st.just("read"),),
), max_size=30))
def test_wcas_state_is_last_installed_value(ops):
    s = wcas_init(0)
    expected = 0
    for op in ops:
        s, r = wcas_apply(s, op)
        if op[0] == "write":
            expected = op[1]
        elif op[0] == "cas" and r is True:
            expected = op[2]
        else:
            assert r == expected if op[0] == "read" else r is False
        assert s == expected


# -- LL/SC -------------------------------------------------------------------


def test_llsc_basic_protocol():
    s = llsc_init(3)
    s, r = llsc_apply(s, 0, ("ll",))
    assert r == 3
    s, r = llsc_apply(s, 0, ("vl",))
    assert r is True
    s, r = llsc_apply(s, 0, ("sc", 8))
    assert r is True
    _, r = llsc_apply(s, 0, ("ll",))
    assert r == 8


def test_llsc_sc_without_link_fails():
    s = llsc_init(0)
    s, r = llsc_apply(s, 1, ("sc", 4))
    assert r is False
    _, r = llsc_apply(s, 1, ("vl",))
    assert r is False


def test_llsc_intervening_mutation_breaks_link():
    s = llsc_init(0)
    s, _ = llsc_apply(s, 0, ("ll",))
    s, _ = llsc_apply(s, 1, ("write", 9))
    s, r = llsc_apply(s, 0, ("sc", 5))
    assert r is False
    # A failed SC also consumes the link.
    _, r = llsc_apply(s, 0, ("vl",))
    assert r is False


def test_llsc_links_are_per_process():
    s = llsc_init(0)
    s, _ = llsc_apply(s, 0, ("ll",))
    s, _ = llsc_apply(s, 1, ("ll",))
    s, r = llsc_apply(s, 0, ("sc", 1))
    assert r is True
    s, r = llsc_apply(s, 1, ("sc", 2))
    assert r is False


@given(st.lists(st.tuples(st.integers(0, 2), st.one_of(
    st.tuples(st.just("ll"),),
    st.tuples(st.just("vl"),),
    st.tuples(st.just("sc"), values),
    st.tuples(st.just("write"), values),
)), max_size=30))
def test_llsc_sc_succeeds_iff_no_mutation_since_ll(script):
    s = llsc_init(0)
    last_ll_ver = {}
    for pid, op in script:
        ver_before = s[0]
        s, r = llsc_apply(s, pid, op)
        if op[0] == "ll":
            last_ll_ver[pid] = ver_before
        elif op[0] == "sc":
            expect = last_ll_ver.pop(pid, None) == ver_before
            assert r is expect
        elif op[0] == "vl":
            assert r is (last_ll_ver.get(pid) == ver_before)


# -- external-context LL/SC --------------------------------------------------


def test_ec_contexts_are_explicit():
    s = ec_init(4)
    s, (ctx, val) = ec_apply(s, ("ecll",))
    assert val == 4
    s, r = ec_apply(s, ("ecsc", ctx, 6))
    assert r is True
    s, r = ec_apply(s, ("ecsc", ctx, 7))   # stale context
    assert r is False
    s, r = ec_apply(s, ("ecvl", ctx))
    assert r is False
    _, (ctx2, val2) = ec_apply(s, ("ecll",))
    assert val2 == 6 and ctx2 > ctx


def test_ec_write_requires_writable():
    with pytest.raises(SpecError):
        ec_apply(ec_init(0), ("write", 1))
    s, r = ecw_apply(ec_init(0), ("write", 1))
    assert r == ACK and s == (1, 1)


def test_ec_context_can_be_shared_across_callers():
    # Contexts are object state, not per-process: anyone holding the current
    # context may SC successfully.
    s = ec_init(0)
    s, (ctx, _) = ec_apply(s, ("ecll",))
    s, r = ec_apply(s, ("ecsc", ctx, 9))
    assert r is True


@given(st.lists(st.one_of(
    st.tuples(st.just("ecll"),),
    st.tuples(st.just("write"), values),
    st.integers(0, 40).map(lambda s: ("ecvl", s)),
    st.tuples(st.just("ecsc"), st.integers(0, 40), values),
), max_size=30))
def test_ecw_seq_monotone_and_mints_fresh(ops):
    s = ec_init(0)
    seqs = [s[0]]
    for op in ops:
        s2, r = ecw_apply(s, op)
        assert s2[0] >= s[0]
        if op[0] == "ecsc":
            assert (r is True) == (op[1] == s[0])
            if r:
                assert s2[0] > s[0]
        if op[0] == "write":
            assert r == ACK and s2[0] > s[0]
        s = s2
        seqs.append(s[0])
    assert seqs == sorted(seqs)
