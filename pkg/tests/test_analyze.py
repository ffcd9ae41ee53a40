# tests/test_analyze.py
from fractions import Fraction

import pytest

from analyze.sizes import (
    ARCHITECTURE_PRESETS,
    FULL_MODEL,
    REFERENCE_ROWS,
    ArchitectureSpec,
    deviation,
    estimate,
    group_sizes,
    in_billions,
    render_table,
    segment_rows,
    size_report,
    to_frame,
    unit_sizes,
)
from blueprints.compose import compose_bnn_with_ledger

# (places, transitions, arcs, total) in billions, preset order
PUBLISHED = [
    (0.101, 0.154, 0.875, 1.130),
    (0.270, 0.414, 2.344, 3.028),
    (0.210, 0.320, 1.813, 2.343),
    (0.202, 0.309, 1.750, 2.261),
    (0.541, 0.827, 4.687, 6.055),
    (0.419, 0.640, 3.627, 4.686),
    (0.268, 0.410, 2.320, 2.998),
    (0.608, 0.930, 5.267, 6.805),
    (0.484, 0.739, 4.189, 5.412),
]


def test_unit_sizes_from_full_model():
    units = unit_sizes()
    assert units.places == Fraction(8243, 4)
    assert units.total == Fraction(92211, 4)


def test_kws6_unit_count():
    arch = ArchitectureSpec("KWS6", 377, (128, 6))
    assert arch.unit_count == 49024
    assert arch.label == "KWS6 134x377"
    assert in_billions(estimate(arch))["total"] == 1.130


@pytest.mark.parametrize("arch,published", list(zip(ARCHITECTURE_PRESETS, PUBLISHED)))
def test_presets_match_published_estimates(arch, published):
    row = in_billions(estimate(arch), digits=4)
    got = (row["places"], row["transitions"], row["arcs"], row["total"])
    assert got == pytest.approx(published, abs=1e-3)


def test_estimate_is_monotone():
    base = estimate(ArchitectureSpec("x", 100, (10, 2))).total
    assert estimate(ArchitectureSpec("x", 101, (10, 2))).total > base
    assert estimate(ArchitectureSpec("x", 100, (11, 2))).total > base
    assert estimate(ArchitectureSpec("x", 100, (10, 3))).total > base
    assert estimate(ArchitectureSpec("x", 100, (10, 5, 2))).total > base


def test_architecture_validation():
    with pytest.raises(ValueError):
        ArchitectureSpec("x", 0, (1,))
    with pytest.raises(ValueError):
        ArchitectureSpec("x", 3, ())


def test_size_report_of_a_net(pipeline_net):
    row, = size_report(pipeline_net, "pipeline")
    assert (row.places, row.transitions, row.arcs) == (4, 2, 5)


def test_segment_rows_match_the_forced_rows(xor_spec):
    rows = {row.name: row for row in segment_rows(xor_spec)}
    for name in ("Sign function", "TanH function"):
        assert rows[name] == REFERENCE_ROWS[name]
    assert list(rows)[-1] == FULL_MODEL
    assert list(rows)[8] == "Hidden Neuron"


def test_full_model_within_fifteen_percent(xor_spec):
    full = segment_rows(xor_spec)[-1]
    assert abs(deviation(full)["total"]) <= 0.15


def test_group_sizes_split_the_instrument(xor_spec):
    net, ledger = compose_bnn_with_ledger(xor_spec, instrument=True, budget=False)
    rows = {row.name: row for row in group_sizes(ledger)}
    assert rows["with instrument"].total == sum(net.size())
    assert rows["core model"].total < rows["with instrument"].total
    assert rows["core model"].total == rows["with instrument"].total - rows["instrument"].total


def test_tables_render():
    rows = [estimate(arch) for arch in ARCHITECTURE_PRESETS]
    frame = to_frame(rows, billions=True)
    assert list(frame.columns) == ["name", "places", "transitions", "arcs", "total"]
    assert frame["total"].iloc[0] == 1.130
    assert "KWS6 134x377" in render_table(rows, billions=True)
    assert "Sign function" in render_table([REFERENCE_ROWS["Sign function"]])
