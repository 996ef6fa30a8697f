#!/usr/bin/env python3
# Copyright 2026 The prontutor Authors
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
"""Regenerates data/curriculum.json from the CMU pronouncing dictionary.

Fixture data only: a 300-word grade-school vocabulary split into three unit
groups of 100 words each. Pronunciations are the first CMU dictionary entry
with stress markers stripped. Requires `pip install cmudict`.
"""

import json
import sys

import cmudict

GROUP_A = """
menacing attic soggy family friend school teacher dream garden kitchen
window morning evening pumpkin sister brother mother father blossom basket
bottle button candle castle circle doctor dollar forest island jacket
ladder letter market monkey number orange pencil picture planet pocket
rabbit river rocket shadow silver spider summer sunny table ticket
tiger tomato travel turtle valley village wagon winter yellow zebra
apple baby bread chair cloud dinner float happy heavy honest
kitten lemon magic muddy noisy paper puppy quiet really simple
story sugar thunder tunnel under visit water wonder yesterday zipper
balloon blanket cabin carrot cookie desert engine giant guitar hammer
""".split()

GROUP_B = """
survival courage journey danger escape shelter harvest frighten gather hunger
lantern meadow mountain ocean orchard pirate puzzle raft rescue sailor
scatter shiver shovel signal slender sparkle splash stable storm stumble
swallow target thirsty timber treasure trouble tremble valuable voyage wander
whistle wilderness wrinkle anchor arrow badger barrel beacon blizzard boulder
canyon capture cavern climate compass crater crystal current damage decide
depend destroy diamond discover distance eagle echo effort empty explore
fasten feather flutter fragile glacier gallop glisten gravel hollow horizon
insect kettle lizard marble melody mirror narrow nibble paddle pebble
perfect pillow pony prairie protect rattle ripple rumble saddle scramble
""".split()

GROUP_C = """
ancient anxious appetite argument astonish balance bargain boundary breathe calendar
celebrate challenge champion character chemical citizen colony comfortable community compare
complete conclude confident continent costume creature culture curious delicate describe
determine develop different difficult disaster dizzy elephant enormous envelope equal
evidence excellent exercise experiment famous festival fortune freedom generous gentle
government grateful history imagine important invention knowledge language liberty library
machine mammal measure medicine message migrate minute mystery natural neighbor
nervous ordinary organize patient peculiar pioneer popular possible practice precious
prepare president problem property question recognize remember science separate shoulder
special stomach strength student surprise telephone temperature thousand tomorrow uniform
""".split()


def dedupe(words, seen):
    out = []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


RESPELL = {
    "AA": "ah", "AE": "a", "AH": "uh", "AO": "aw", "AW": "ow", "AY": "eye",
    "B": "b", "CH": "ch", "D": "d", "DH": "th", "EH": "e", "ER": "ur",
    "EY": "ay", "F": "f", "G": "g", "HH": "h", "IH": "i", "IY": "ee",
    "JH": "j", "K": "k", "L": "l", "M": "m", "N": "n", "NG": "ng", "OW": "oh",
    "OY": "oy", "P": "p", "R": "r", "S": "s", "SH": "sh", "T": "t", "TH": "th",
    "UH": "oo", "UW": "oo", "V": "v", "W": "w", "Y": "y", "Z": "z", "ZH": "zh",
}
VOWELS = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY",
          "OW", "OY", "UH", "UW"}


def spelled_out(raw):
    # One syllable per vowel nucleus; a single intervocalic consonant starts
    # the next syllable, clusters split after their first consonant. The
    # stressed syllable is upper-cased.
    phones = [p.rstrip("012") for p in raw]
    stress = [p[-1] if p[-1].isdigit() else "" for p in raw]
    nuclei = [i for i, p in enumerate(phones) if p in VOWELS]
    if not nuclei:
        return "".join(RESPELL[p] for p in phones)
    cuts = []
    for a, b in zip(nuclei, nuclei[1:]):
        gap = b - a - 1
        cuts.append(a + 1 if gap <= 1 else a + 2)
    bounds = [0] + cuts + [len(phones)]
    parts = []
    for k in range(len(bounds) - 1):
        seg = range(bounds[k], bounds[k + 1])
        text = "".join(RESPELL[phones[i]] for i in seg)
        if stress[nuclei[k]] == "1" and len(nuclei) > 1:
            text = text.upper()
        parts.append(text)
    return "-".join(parts)


def main(path):
    d = cmudict.dict()
    seen = set()
    groups = [("A", dedupe(GROUP_A, seen)), ("B", dedupe(GROUP_B, seen)),
              ("C", dedupe(GROUP_C, seen))]
    records = []
    for name, words in groups:
        kept = [w for w in words if w in d][:100]
        if len(kept) < 100:
            sys.exit(f"group {name}: only {len(kept)} dictionary words")
        for w in kept:
            raw = d[w][0]
            records.append({
                "word": w,
                "spelled_out": spelled_out(raw),
                "phonemes": [p.rstrip("012") for p in raw],
                "unit_group": name,
            })
    with open(path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/curriculum.json")
