# Copyright 2026 The marl-focal Authors.
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

"""Recompute single-model and full-pool plurality accuracies from a records file.

Usage: replay_check.py RECORDS.jsonl

Prints {"queries": n, "accuracy": {"single:0": pct, ..., "plurality_full": pct}}.
Answers are the argmax of each probability vector (lowest index on ties). The
plurality vote counts answers, breaks count ties by summed probability mass,
then by lowest index.
"""

import json
import sys


def argmax(values):
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def plurality(outputs):
    k = len(outputs[0])
    votes = [0] * k
    mass = [0.0] * k
    for q in outputs:
        votes[argmax(q)] += 1
        for c in range(k):
            mass[c] += q[c]
    best = 0
    for c in range(1, k):
        if (votes[c], mass[c]) > (votes[best], mass[best]):
            best = c
    return best


def main(argv):
    if len(argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    records = []
    with open(argv[1], encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    if not records:
        print("no records", file=sys.stderr)
        return 3
    n = len(records[0]["outputs"])
    single = [0] * n
    vote = 0
    for r in records:
        gold = r["gold"]
        for i, q in enumerate(r["outputs"]):
            single[i] += argmax(q) == gold
        vote += plurality(r["outputs"]) == gold
    total = len(records)
    acc = {"single:%d" % i: 100.0 * c / total for i, c in enumerate(single)}
    acc["plurality_full"] = 100.0 * vote / total
    json.dump({"queries": total, "accuracy": acc}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
