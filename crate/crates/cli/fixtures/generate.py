"""Regenerates the bundled fixture day under 2013-05-01/.

Local time is UTC+1. Three places (09:00-12:00, 12:30-15:00, 15:20-18:00)
joined by walks of roughly 100 m per minute, one call, two text messages and
40 camera frames.
"""
import math
import os
from datetime import datetime, timedelta, timezone

from PIL import Image, ImageDraw

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "2013-05-01")
TZ = timezone(timedelta(hours=1))
DAY = datetime(2013, 5, 1, tzinfo=TZ)
M_PER_DEG = 6371000 * math.pi / 180

A = (32.6500, -16.9167)
B = (A[0] + 3000 / M_PER_DEG, A[1])
C = (B[0], B[1] + 2000 / (M_PER_DEG * math.cos(math.radians(B[0]))))


def at(h, m, s=0):
    return DAY + timedelta(hours=h, minutes=m, seconds=s)


def iso(t):
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def jitter(i):
    # a few metres around the place centre
    return ((i % 5) - 2) * 0.00002, ((i % 3) - 1) * 0.00002


def stay(centre, start, end):
    rows, t, i = [], start, 0
    while t <= end:
        dy, dx = jitter(i)
        rows.append((t, centre[0] + dy, centre[1] + dx))
        t += timedelta(minutes=1)
        i += 1
    return rows


def walk(src, dst, start, steps):
    rows = []
    for k in range(1, steps + 1):
        f = k / (steps + 1)
        rows.append((start + timedelta(minutes=k - 1), src[0] + f * (dst[0] - src[0]), src[1] + f * (dst[1] - src[1])))
    return rows


def main():
    os.makedirs(os.path.join(HERE, "images"), exist_ok=True)
    fixes = (
        stay(A, at(9, 0), at(12, 0))
        + walk(A, B, at(12, 1), 29)
        + stay(B, at(12, 30), at(15, 0))
        + walk(B, C, at(15, 1), 19)
        + stay(C, at(15, 20), at(18, 0))
    )
    with open(os.path.join(HERE, "gps.csv"), "w") as f:
        f.write("timestamp,lat,lon\n")
        for t, lat, lon in fixes:
            f.write(f"{iso(t)},{lat:.7f},{lon:.7f}\n")

    with open(os.path.join(HERE, "context.csv"), "w") as f:
        f.write("timestamp,channel,direction,duration_s\n")
        f.write(f"{iso(at(10, 5))},sms,in,0\n")
        f.write(f"{iso(at(14, 0))},call,in,120\n")
        f.write(f"{iso(at(16, 30))},sms,out,0\n")

    bursts = [(at(9, 30), 15, (40, 140, 60)), (at(13, 0), 15, (60, 90, 160)), (at(16, 0), 10, (170, 120, 40))]
    n = 0
    with open(os.path.join(HERE, "images.csv"), "w") as f:
        f.write("timestamp,path\n")
        for start, count, colour in bursts:
            for k in range(count):
                n += 1
                name = f"images/{n:04d}.jpg"
                img = Image.new("RGB", (64, 48), colour)
                ImageDraw.Draw(img).rectangle([4 * k % 56, 8, 4 * k % 56 + 8, 40], fill=(240, 240, 240))
                img.save(os.path.join(HERE, name), quality=70)
                f.write(f"{iso(start + timedelta(seconds=30 * k))},{name}\n")

    with open(os.path.join(HERE, "coverage.csv"), "w") as f:
        f.write("channel,start,end\n")
        f.write(f"visual,{iso(at(9, 0))},{iso(at(18, 0))}\n")
        f.write(f"location,{iso(at(9, 0))},{iso(at(18, 0))}\n")
        f.write(f"call,{iso(at(8, 0))},{iso(at(20, 0))}\n")
        f.write(f"sms,{iso(at(8, 0))},{iso(at(20, 0))}\n")

    with open(os.path.join(HERE, "manifest.json"), "w") as f:
        f.write(
            '{\n  "date": "2013-05-01",\n  "tz_offset_minutes": 60,\n  "gps": "gps.csv",\n'
            '  "context": "context.csv",\n  "images": "images.csv",\n  "coverage": "coverage.csv"\n}\n'
        )


if __name__ == "__main__":
    main()
