import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mapsolver.core import Family
from mapsolver.errors import DomainError, ParseError
from mapsolver.instances import (
    InstanceId,
    benchmark_ids,
    generate,
    instances_equal,
    load_instance,
    read_instance,
    save_instance,
    write_instance,
)
from mapsolver.rng import SubtractiveRng, rng_new

from oracles import DotNetRandom

# first raw draws of seed 0 as produced by the reference runtime
DOTNET_SEED0 = [1559595546, 1755192844, 1649316166]


def test_rng_matches_reference_runtime():
    r = rng_new(0)
    assert [r.sample() for _ in range(3)] == DOTNET_SEED0


def test_rng_next_int_full_range_matches_trace():
    assert rng_new(0).next_int(0, 2**31 - 1) == DotNetRandom(0).next_range(0, 2**31 - 1)


@pytest.mark.parametrize("seed", [0, 1, 44, 45, 123456, 2**31 - 1, -5, -(2**31)])
def test_rng_matches_oracle_stream(seed):
    ours, ref = SubtractiveRng(seed), DotNetRandom(seed)
    assert [ours.next_int(1, 101) for _ in range(500)] == [ref.next_range(1, 101) for _ in range(500)]


def test_rng_frozen_values_seed_44():
    r = rng_new(44)
    assert [r.next_int(1, 101) for _ in range(10)] == [72, 73, 53, 95, 8, 2, 63, 52, 43, 50]


def test_rng_determinism_and_divergence():
    a, b = rng_new(5), rng_new(5)
    assert [a.sample() for _ in range(1000)] == [b.sample() for _ in range(1000)]
    x, y = rng_new(44), rng_new(45)
    assert [x.sample() for _ in range(10)] != [y.sample() for _ in range(10)]


def test_bulk_draws_equal_scalar_draws():
    a, b = rng_new(7), rng_new(7)
    bulk = a.ints(1, 101, 1000)
    assert bulk.tolist() == [b.next_int(1, 101) for _ in range(1000)]
    assert a.sample() == b.sample()


def test_next_int_edges():
    r = rng_new(3)
    assert r.next_int(5, 5) == 5
    with pytest.raises(DomainError):
        r.next_int(6, 5)
    with pytest.raises(DomainError):
        SubtractiveRng(2**31)


def test_next_int_bounds_and_uniformity():
    draws = rng_new(11).ints(1, 101, 100_000)
    assert draws.min() == 1 and draws.max() == 100
    counts = np.bincount(draws, minlength=101)[1:]
    _, p = stats.chisquare(counts)
    assert p > 0.001


def test_state_round_trip():
    r = rng_new(9)
    r.sample()
    state = r.getstate()
    first = [r.sample() for _ in range(5)]
    r.setstate(state)
    assert [r.sample() for _ in range(5)] == first


def test_permutation_is_permutation():
    p = rng_new(1).permutation(20)
    assert sorted(p) == list(range(20))


def test_instance_id_seed_and_parse():
    iid = InstanceId(Family.RANDOM, 3, 40, 1)
    assert iid.seed == 44
    assert str(iid) == "3r40-1"
    assert InstanceId.parse("3r40-1") == iid
    assert InstanceId.parse("5cq18-10") == InstanceId(Family.CLIQUE, 5, 18, 10)
    with pytest.raises(DomainError):
        InstanceId.parse("3x40-1")


def test_benchmark_bed_size():
    assert len(benchmark_ids()) == 3 * 12 * 10


def test_generate_random_uses_seeded_draw_order():
    inst = generate(InstanceId(Family.RANDOM, 3, 4, 2))
    ref = DotNetRandom(3 + 4 + 2)
    expected = [ref.next_range(1, 101) for _ in range(64)]
    assert inst.weights.weights.reshape(-1).tolist() == expected


def test_generate_clique_shape_and_order():
    inst = generate(InstanceId(Family.CLIQUE, 3, 5, 1))
    ref = DotNetRandom(9)
    e = inst.weights.edges
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert e[i, j].reshape(-1).tolist() == [ref.next_range(1, 101) for _ in range(25)]
    assert ((e[0, 1] >= 1) & (e[0, 1] <= 100)).all()


def test_generate_geometric_and_product():
    g = generate(InstanceId(Family.GEOMETRIC, 3, 4, 1))
    ref = DotNetRandom(8)
    assert g.weights.points.reshape(-1).tolist() == [ref.next_range(1, 101) for _ in range(24)]
    p = generate(InstanceId(Family.PRODUCT, 4, 3, 2))
    ref = DotNetRandom(9)
    assert p.weights.arrays.reshape(-1).tolist() == [ref.next_range(1, 101) for _ in range(12)]


@pytest.mark.parametrize("family", list(Family))
def test_generation_is_deterministic(family):
    iid = InstanceId(family, 3, 6, 4)
    assert write_instance(generate(iid)) == write_instance(generate(iid))
    other = InstanceId(family, 3, 6, 5)
    assert write_instance(generate(iid)) != write_instance(generate(other))


@pytest.mark.parametrize("family", list(Family))
def test_round_trip(family, tmp_path):
    inst = generate(InstanceId(family, 3, 4, 1))
    back = read_instance(write_instance(inst))
    assert instances_equal(inst, back)
    assert back.index == 1
    path = tmp_path / "x.map"
    save_instance(inst, path)
    assert instances_equal(inst, load_instance(path))


def test_header_parse():
    inst = generate(InstanceId(Family.SQUARE_ROOT, 3, 40, 1))
    data = write_instance(inst)
    assert data.startswith(b"MAP sr 3 40 44\n")
    back = read_instance(data)
    assert (back.family, back.s, back.n, back.seed) == (Family.SQUARE_ROOT, 3, 40, 44)


def test_truncated_payload():
    data = write_instance(generate(InstanceId(Family.CLIQUE, 3, 4, 1)))
    with pytest.raises(ParseError) as e:
        read_instance(data[: len(data) // 2])
    assert e.value.offset >= 0


def test_malformed_inputs_report_offsets():
    good = write_instance(generate(InstanceId(Family.PRODUCT, 3, 2, 1)))
    with pytest.raises(ParseError):
        read_instance(b"MAP zz 3 2 6\nproduct\n1 2\n")
    with pytest.raises(ParseError):
        read_instance(b"garbage")
    with pytest.raises(ParseError):
        read_instance(good.replace(b"product", b"tensor"))
    with pytest.raises(ParseError):
        read_instance(good + b"7\n")
    lines = good.split(b"\n")
    lines[2] = b"x " + lines[2].split(b" ", 1)[1]
    bad = b"\n".join(lines)
    with pytest.raises(ParseError) as e:
        read_instance(bad)
    assert e.value.offset == bad.index(b"x ")
    with pytest.raises(ParseError):
        read_instance(good.replace(b"\n", b"\n-", 1)[:0] + b"MAP pr 3 2 6\nproduct\n-1 2\n1 2\n1 2\n")


@settings(max_examples=40)
@given(st.binary(max_size=200))
def test_reader_never_crashes(data):
    try:
        read_instance(b"MAP cq 3 2 6\nedges sum\n" + data)
    except ParseError:
        pass
