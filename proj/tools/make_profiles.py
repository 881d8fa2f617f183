# Copyright 2026 The prefdrive Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the bundled driver profiles (profiles/*.json).

Each answer follows a small rule set per driving style, so the two files
differ only in the numbers below.
"""

import itertools
import json
import pathlib
import sys

MANEUVERS = ["LK", "LLC", "RLC"]
SIZES = ["small", "big"]
SPEEDS = ["slower", "faster"]
LANES = ["LL", "EL", "RL"]
POSITIONS = ["front", "rear"]

STYLES = {
    "conservative": {
        "ego_front": 7.5,
        "target_front": 17.5,
        # keyed by the ego's speed relation to the follower
        "target_rear": {"faster": 2.5, "slower": 12.5},
        "big_extra": 5.0,
        "cut_in_extra": 5.0,
    },
    "aggressive": {
        "ego_front": 2.5,
        "target_front": 7.5,
        "target_rear": {"faster": 2.5, "slower": 2.5},
        "big_extra": 5.0,
        "cut_in_extra": 0.0,
    },
}


def margin(style, t_m, e_m, b, f, l, r):
    if e_m == "LK":
        if l != "EL":
            return "dont_care"
        m = style["ego_front"]
    else:
        toward = "LL" if e_m == "LLC" else "RL"
        if l == "EL":
            m = style["ego_front"]
        elif l == toward:
            m = style["target_front"] if r == "front" else style["target_rear"][f]
        else:
            return "dont_care"
    if b == "big":
        m += style["big_extra"]
    if t_m != "LK":
        m += style["cut_in_extra"]
    return m


def profile(name):
    style = STYLES[name]
    answers = []
    for t_m, e_m, b, f, l, r in itertools.product(MANEUVERS, MANEUVERS, SIZES, SPEEDS, LANES,
                                                  POSITIONS):
        if l == "EL" and r == "rear":
            continue
        key = {"t_m": t_m, "e_m": e_m, "b": b, "f": f, "l": l, "r": r}
        answers.append({"key": key, "margin_m": margin(style, t_m, e_m, b, f, l, r)})
    return {"profile": name, "answers": answers}


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "profiles")
    out.mkdir(parents=True, exist_ok=True)
    for name in STYLES:
        (out / f"{name}.json").write_text(json.dumps(profile(name), indent=2) + "\n")


if __name__ == "__main__":
    main()
