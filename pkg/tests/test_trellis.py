import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from becturbo.trellis import Edge, RscSpec, build_trellis, reachable_within, rsc_encode

# (1,5/7)_8 traced by hand: state = (w1 w2), w1 = newest cell (MSB).
# a = u ^ w1 ^ w2 (feedback 111), c = a ^ w2 (feedforward 101), next = (a, w1)
HAND_EDGES_57 = [
    Edge(0, 0, 0, 0), Edge(0, 2, 1, 1),
    Edge(1, 2, 0, 0), Edge(1, 0, 1, 1),
    Edge(2, 3, 0, 1), Edge(2, 1, 1, 0),
    Edge(3, 1, 0, 1), Edge(3, 3, 1, 0),
]


@st.composite
def specs(draw):
    nu = draw(st.integers(1, 5))
    fb = draw(st.integers(0, (1 << nu) - 1)) | 1 | (1 << nu) * draw(st.integers(0, 1))
    ff = draw(st.integers(1, (1 << (nu + 1)) - 1))
    return RscSpec(fb, ff, nu)


def test_parse_octal():
    s = RscSpec.parse("1,5/7")
    assert (s.feedforward_poly, s.feedback_poly, s.memory) == (5, 7, 2)
    assert (s.num_states, s.constraint_length, s.rate) == (4, 3, 0.5)
    assert str(s) == "(1,5/7)_8"
    t = RscSpec.parse("(1,15/13)_8")
    assert (t.feedforward_poly, t.feedback_poly, t.memory) == (0o15, 0o13, 3)


@pytest.mark.parametrize("bad", ["1,5", "2,5/7", "1,5/9", "x"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        RscSpec.parse(bad)


def test_invalid_polynomials():
    with pytest.raises(ValueError, match="tap 0"):
        RscSpec(6, 5, 2)
    with pytest.raises(ValueError, match="above memory"):
        RscSpec(7, 0o15, 2)
    with pytest.raises(ValueError):
        RscSpec(7, 5, 2, k=2, n=3)


def test_edges_match_hand_trace():
    t = build_trellis(RscSpec.parse("1,5/7"))
    assert t.num_states == 4
    assert t.edges == HAND_EDGES_57


def test_zero_input_stays_zero():
    t = build_trellis(RscSpec.parse("1,5/7"))
    assert t.next_state[0, 0] == 0 and t.parity[0, 0] == 0
    assert not rsc_encode(t, np.zeros(50, int)).any()


def test_impulse_response():
    # hand-traced: states 0 -> 2 -> 3 -> 1 -> 2 -> 3 -> 1 -> 2 -> 3
    t = build_trellis(RscSpec.parse("1,5/7"))
    out = rsc_encode(t, [1, 0, 0, 0, 0, 0, 0, 0])
    assert out.tolist() == [1, 1, 1, 0, 1, 1, 0, 1]


def test_encode_start_state():
    t = build_trellis(RscSpec.parse("1,5/7"))
    # from state 3 with input 0: parity 1, next 1; then input 0 from 1: parity 0
    assert rsc_encode(t, [0, 0], start_state=3).tolist() == [1, 0]
    with pytest.raises(ValueError):
        rsc_encode(t, [0], start_state=4)


def test_tables_read_only():
    t = build_trellis(RscSpec.parse("1,5/7"))
    with pytest.raises(ValueError):
        t.next_state[0, 0] = 1


@settings(max_examples=60, deadline=None)
@given(specs())
def test_trellis_invariants(spec):
    t = build_trellis(spec)
    S = spec.num_states
    assert t.next_state.shape == (S, 2)
    assert np.all(np.bincount(t.next_state.ravel(), minlength=S) == 2)
    assert all(t.next_state[s, 0] != t.next_state[s, 1] for s in range(S))
    assert reachable_within(t, spec.memory) == set(range(S))


@settings(max_examples=60, deadline=None)
@given(specs(), st.data())
def test_linearity(spec, data):
    t = build_trellis(spec)
    n = data.draw(st.integers(1, 40))
    u = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    v = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    assert np.array_equal(rsc_encode(t, u ^ v), rsc_encode(t, u) ^ rsc_encode(t, v))
