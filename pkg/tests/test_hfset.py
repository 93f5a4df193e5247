"""Hash-consed hereditarily finite sets."""

from hypothesis import given, settings, strategies as st

from choiceless import hfset as hf


def values(max_atoms=3):
    leaves = st.one_of(st.just(hf.EMPTY), st.integers(0, max_atoms - 1).map(hf.atom))
    return st.recursive(leaves, lambda kids: st.lists(kids, max_size=4).map(hf.make_set),
                        max_leaves=12)


def test_interning_gives_identity():
    a = hf.make_set([hf.atom(0), hf.atom(1)])
    b = hf.make_set([hf.atom(1), hf.atom(0), hf.atom(1)])
    assert a is b
    assert hf.make_set([]) is hf.EMPTY


def test_atoms_differ_from_sets():
    assert hf.atom(0) is not hf.EMPTY
    assert hf.atom(0).is_atom and not hf.atom(0).is_set
    assert hf.DAGGER.is_dagger


def test_von_neumann_ordinals():
    for n in range(6):
        v = hf.von_neumann(n)
        assert len(v) == n
        assert hf.ordinal_value(v) == n
        # n = {0, ..., n-1}
        assert v.members() == frozenset(hf.von_neumann(i) for i in range(n))
    assert hf.ordinal_value(hf.singleton(hf.singleton(hf.EMPTY))) is None


def test_kuratowski_pair_round_trip():
    x, y = hf.atom(0), hf.von_neumann(2)
    p = hf.kuratowski_pair(x, y)
    assert hf.pair_components(p) == (x, y)
    assert hf.pair_components(hf.kuratowski_pair(x, x)) == (x, x)
    assert hf.render(hf.kuratowski_pair(hf.atom(0), hf.atom(1))) == "{{a0}, {a0, a1}}"


def test_tuples_round_trip():
    items = [hf.atom(2), hf.EMPTY, hf.atom(2)]
    assert hf.tuple_items(hf.make_tuple(items)) == items
    assert hf.tuple_items(hf.make_tuple([])) == []


def test_closure_size_counts_the_value_itself():
    # {a0, {a0}}: the set, a0 and {a0}
    v = hf.make_set([hf.atom(0), hf.singleton(hf.atom(0))])
    assert hf.tc_size(v) == 3
    assert hf.tc_size(hf.atom(5)) == 1
    assert hf.tc_size(hf.EMPTY) == 1
    assert hf.tc_size(hf.von_neumann(4)) == 5
    assert len(hf.transitive_closure(v)) == 2


@given(values())
def test_render_parse_round_trip(v):
    assert hf.parse_value(hf.render(v)) is v


@given(values())
def test_closure_matches_recursive_oracle(v):
    def closure(x, acc):
        for c in x.children:
            if c not in acc:
                acc.add(c)
                closure(c, acc)
        return acc
    assert hf.tc_size(v) == len(closure(v, set())) + 1


@settings(max_examples=60)
@given(values(), st.permutations([0, 1, 2]))
def test_permutation_is_an_action(v, perm):
    phi = dict(enumerate(perm))
    inv = {b: a for a, b in phi.items()}
    w = hf.apply_permutation(v, phi)
    assert hf.apply_permutation(w, inv) is v
    assert hf.atoms_of(w) == {phi[a] for a in hf.atoms_of(v)}


@given(values())
def test_pure_values_are_fixed_by_every_permutation(v):
    if not hf.atoms_of(v):
        assert hf.apply_permutation(v, {0: 1, 1: 2, 2: 0}) is v


@given(st.lists(st.integers(0, 7), max_size=6))
def test_pure_order_is_total_on_ordinals(xs):
    ords = [hf.von_neumann(x) for x in xs]
    ranked = sorted(ords, key=hf.pure_sort_key)
    assert [hf.ordinal_value(o) for o in ranked] == [hf.ordinal_value(o) for o in
                                                      sorted(ords, key=hf.pure_sort_key)]
    for a in ords:
        for b in ords:
            assert (hf.compare_pure(a, b) == 0) == (a is b)
