"""Physical resolution limits of single-point time-of-flight imaging.

The lateral (transverse) resolution depends on both the timing resolution
and the distance, growing like the square root of distance; the depth
resolution depends on timing alone.

Run:  python demos/03_resolution_limits.py
"""

from tdi import metrics

TIMINGS = (2.3e-12, 25e-12, 250e-12, 670e-12, 1000e-12)
DISTANCES = (2.0, 4.0, 10.0, 20.0)

header = "distance " + "".join(f"{dt * 1e12:>9.1f}ps" for dt in TIMINGS)
print("lateral resolution (m):")
print(header)
for d in DISTANCES:
    row = "".join(f"{metrics.lateral_resolution(d, dt):>11.3f}" for dt in TIMINGS)
    print(f"{d:>6.1f} m {row}")

print("\ndepth resolution (m), independent of distance:")
print("         " + "".join(f"{metrics.depth_resolution(dt):>11.4f}" for dt in TIMINGS))

print("\nsquare-root growth with distance (2.3 ps column):")
base = metrics.lateral_resolution(4.0, 2.3e-12)
for d in (4.0, 16.0, 64.0):
    value = metrics.lateral_resolution(d, 2.3e-12)
    print(f"  d = {d:5.0f} m: {value:.4f} m ({value / base:.2f}x the 4 m figure)")
