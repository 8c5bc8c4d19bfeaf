#!/usr/bin/env python3
"""Regenerate the shipped example configurations in configs/."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from raidrel.cli import write_config
from raidrel.presets import fig1a, fig1b, fig5, raid_group_detailed, table3_raid5

OUT = pathlib.Path(__file__).resolve().parents[1] / "configs"


def main():
    OUT.mkdir(exist_ok=True)
    cases = {
        "fig1a.json": fig1a(),
        "fig1b.json": fig1b(),
        "fig5a.json": fig5(multipath=False),
        "fig5b.json": fig5(multipath=True),
        "raid5x6_detailed.json": raid_group_detailed(n=6, level="RAID5"),
        "raid6x8_detailed.json": raid_group_detailed(n=8, level="RAID6"),
        "table3_m1.json": table3_raid5(n=8, threshold=12),
    }
    for name, case in cases.items():
        write_config(case, OUT / name)
        print("wrote", OUT / name)


if __name__ == "__main__":
    main()
