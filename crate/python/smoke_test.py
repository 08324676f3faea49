"""Quick check of the Python bindings. Run after building the wheel."""
import math

import latwave as lw

scl = lw.LatticeSpec.scl()
assert len(scl.branches()) == 1
w = lw.omega(scl, math.pi, math.pi)
assert abs(w[0] - math.sqrt(8)) < 1e-12, w

lo, hi = lw.band_edges(scl)
assert lo == 0.0 and abs(hi - math.sqrt(8)) < 1e-12

cat = lw.resonance_catalog(lw.LatticeSpec.rtl(1.0))
assert [e["kind"] for e in cat] == ["interior-lpw", "band-edge"], cat
assert abs(cat[0]["omega"] - math.sqrt(8)) < 1e-12

rays = lw.beaming_directions(scl, 2.0, "physical")
assert sorted(round(math.degrees(r)) % 360 for r in rays) == [45, 135, 225, 315], rays

for p in lw.lpw_report(lw.LatticeSpec.etl(), steps=500):
    assert p["residual"] < 1e-12

cg = lw.group_velocity(scl, 0.5, 0.25)
assert cg is not None and cg[0] > cg[1] > 0

poly = lw.equifrequency_contour(scl, 1.0)
assert poly and all(
    abs(math.sqrt(4 * math.sin(x / 2) ** 2 + 4 * math.sin(y / 2) ** 2) - 1.0) < 1e-9
    for line in poly for x, y in line
)

sim = lw.simulate(scl, 2.0, 40.0, probes=[(0, 0, None), (3, 3, "u")], snapshots=[40.0], workers=2)
assert len(sim.probes()) == 2 and sim.snapshot_times() == [40.0]
again = lw.simulate(scl, 2.0, 40.0, probes=[(0, 0, None), (3, 3, "u")], snapshots=[40.0], workers=1)
assert sim.snapshot(0) == again.snapshot(0)

try:
    lw.simulate(scl, -1.0, 5.0)
except lw.LatticeError as e:
    print("expected error:", e)
else:
    raise AssertionError("negative frequency accepted")

print("latwave", lw.__version__, "smoke test OK")
